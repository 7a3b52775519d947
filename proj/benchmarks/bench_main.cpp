#include <benchmark/benchmark.h>

#include "shardsim/analytics.hpp"
#include "shardsim/crypto.hpp"
#include "shardsim/layer2.hpp"
#include "shardsim/ledger.hpp"
#include "shardsim/merkle.hpp"
#include "shardsim/rng.hpp"
#include "shardsim/scenario.hpp"
#include "shardsim/simnet.hpp"

using namespace shardsim;

namespace {

crypto::KeyPair bench_key(uint8_t fill) {
    crypto::Seed32 s{};
    s.fill(fill);
    return crypto::keygen(crypto::SigScheme::ed25519, s);
}

std::vector<Digest> random_digests(size_t n, uint64_t seed) {
    Rng rng(seed);
    std::vector<Digest> out(n);
    for (auto& d : out)
        for (size_t i = 0; i < 32; i += 8) {
            uint64_t v = rng.next();
            for (int b = 0; b < 8; ++b) d.bytes[i + b] = uint8_t(v >> (8 * b));
        }
    return out;
}

}  // namespace

static void BM_Hash256(benchmark::State& state) {
    Bytes data(size_t(state.range(0)), 0xA5);
    for (auto _ : state) benchmark::DoNotOptimize(crypto::hash256(as_span(data)));
    state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Hash256)->Arg(32)->Arg(256)->Arg(4096);

static void BM_Sign(benchmark::State& state) {
    crypto::KeyPair key = bench_key(1);
    Bytes msg(64, 0x5A);
    for (auto _ : state) benchmark::DoNotOptimize(crypto::sign(key, as_span(msg)));
}
BENCHMARK(BM_Sign);

static void BM_VerifySig(benchmark::State& state) {
    crypto::KeyPair key = bench_key(1);
    Bytes msg(64, 0x5A);
    crypto::Signature sig = crypto::sign(key, as_span(msg));
    for (auto _ : state)
        benchmark::DoNotOptimize(crypto::verify_sig(as_span(key.public_key), as_span(msg), sig));
}
BENCHMARK(BM_VerifySig);

static void BM_MerkleBuild(benchmark::State& state) {
    auto leaves = random_digests(size_t(state.range(0)), 7);
    for (auto _ : state) {
        auto tree = crypto::MerkleTree::build(leaves);
        benchmark::DoNotOptimize(tree.root());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MerkleBuild)->Range(16, 4096);

static void BM_MerkleProveVerify(benchmark::State& state) {
    auto leaves = random_digests(1024, 8);
    auto tree = crypto::MerkleTree::build(leaves);
    size_t i = 0;
    for (auto _ : state) {
        auto proof = tree.prove(i % leaves.size());
        benchmark::DoNotOptimize(
            crypto::merkle_verify(tree.root(), leaves[i % leaves.size()], proof));
        ++i;
    }
}
BENCHMARK(BM_MerkleProveVerify);

static void BM_ValidateTx(benchmark::State& state) {
    crypto::KeyPair alice = bench_key(1);
    ledger::UtxoSet utxo;
    Digest ref_id;
    ref_id.bytes.fill(9);
    ledger::Output out;
    out.validator = ledger::pay_to_address(alice.address);
    out.value = 100;
    utxo.insert({ref_id, 0}, out);
    ledger::Transaction tx;
    tx.sender = alice.address;
    tx.inputs.push_back({{ref_id, 0}, {}, {}});
    ledger::Output to = out;
    to.value = 99;
    tx.outputs.push_back(to);
    tx.fee = 1;
    Digest id = ledger::tx_id(tx);
    tx.inputs[0].signature = crypto::sign(alice, id.span());
    for (auto _ : state) benchmark::DoNotOptimize(ledger::validate_tx(utxo, tx, 0).ok());
}
BENCHMARK(BM_ValidateTx);

static void BM_StateRoot(benchmark::State& state) {
    crypto::KeyPair alice = bench_key(1);
    ledger::UtxoSet utxo;
    auto ids = random_digests(size_t(state.range(0)), 11);
    for (const auto& id : ids) {
        ledger::Output out;
        out.validator = ledger::pay_to_address(alice.address);
        out.value = 5;
        utxo.insert({id, 0}, out);
    }
    for (auto _ : state) benchmark::DoNotOptimize(layer2::state_root(utxo));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_StateRoot)->Range(64, 4096);

static void BM_ShardFailureExact(benchmark::State& state) {
    analytics::ShardModel model{uint64_t(state.range(0)), uint64_t(state.range(0)) / 4,
                                uint64_t(state.range(0)) / 8};
    for (auto _ : state)
        benchmark::DoNotOptimize(analytics::shard_failure_probability(model));
}
BENCHMARK(BM_ShardFailureExact)->Arg(64)->Arg(512)->Arg(4096);

static void BM_ScenarioSlotThroughput(benchmark::State& state) {
    sim::ScenarioConfig cfg;
    cfg.seed = 99;
    cfg.nodes = 16;
    cfg.shard_count = uint32_t(state.range(0));
    cfg.difficulty = 2;
    cfg.epoch_length = 8;
    cfg.epochs = 2;
    cfg.min_shard_size = 2;
    cfg.users_per_shard = 8;
    cfg.workload.intra_shard_payment = 4.0;
    cfg.latency = {1, 1};
    uint64_t committed = 0;
    for (auto _ : state) {
        sim::SimResult r = sim::run_scenario(cfg, nullptr, true);
        committed += r.total_committed_tx;
        benchmark::DoNotOptimize(r);
    }
    state.SetItemsProcessed(int64_t(committed));
    state.counters["slots"] = double(cfg.epochs * cfg.epoch_length);
}
BENCHMARK(BM_ScenarioSlotThroughput)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
