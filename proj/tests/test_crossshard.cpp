#include <doctest.h>

#include "shardsim/crossshard.hpp"
#include "shardsim/rng.hpp"

using namespace shardsim;
using namespace shardsim::crossshard;
using shardsim::ledger::Output;
using shardsim::ledger::OutputRef;
using shardsim::ledger::Transaction;
using shardsim::ledger::UtxoSet;

namespace {

crypto::KeyPair key_of(uint16_t n) {
    crypto::Seed32 s{};
    s[0] = uint8_t(n);
    s[1] = uint8_t(n >> 8);
    s[2] = 0xC5;
    return crypto::keygen(crypto::SigScheme::ed25519, s);
}

Digest digest_fill(uint8_t fill) {
    Digest d;
    d.bytes.fill(fill);
    return d;
}

Output payment(const crypto::KeyPair& owner, uint64_t value) {
    Output o;
    o.validator = ledger::pay_to_address(owner.address);
    o.value = value;
    return o;
}

struct Env {
    crypto::KeyPair alice = key_of(1);
    crypto::KeyPair bob = key_of(2);
    std::vector<crypto::KeyPair> members;      // one committee reused per shard
    std::vector<Digest> member_addrs;
    sharding::RoutingTable table;
    uint32_t shard_count = 8;

    Env() {
        for (uint16_t i = 0; i < 5; ++i) {  // threshold floor(10/3)+1 = 4
            members.push_back(key_of(uint16_t(100 + i)));
            member_addrs.push_back(members.back().address);
        }
    }

    std::vector<const crypto::KeyPair*> signer_ptrs() const {
        std::vector<const crypto::KeyPair*> out;
        for (const auto& m : members) out.push_back(&m);
        return out;
    }
    PubkeyFn pubkey_fn() const {
        return [this](const Digest& addr) -> ByteSpan {
            for (const auto& m : members)
                if (m.address == addr) return as_span(m.public_key);
            return {};
        };
    }
    QuorumCheck quorum() const {
        return [this](const ShardProof& proof) {
            return proof_quorum_valid(proof, member_addrs, pubkey_fn());
        };
    }

    OutputRef fund(uint32_t shard, uint8_t tag, const crypto::KeyPair& owner, uint64_t value,
                   UtxoSet* utxo) {
        OutputRef ref{digest_fill(tag), 0};
        if (utxo) utxo->insert(ref, payment(owner, value));
        table.add(ref, {shard, ledger::script_hash(ledger::pay_to_address(owner.address)),
                        false});
        return ref;
    }

    Transaction pay_tx(const crypto::KeyPair& from, const crypto::KeyPair& to,
                       std::vector<OutputRef> refs, uint64_t total, uint64_t fee) {
        Transaction tx;
        tx.sender = from.address;
        for (auto& r : refs) tx.inputs.push_back({r, {}, {}});
        tx.outputs.push_back(payment(to, total - fee));
        tx.fee = fee;
        Digest id = ledger::tx_id(tx);
        for (auto& in : tx.inputs) in.signature = crypto::sign(from, id.span());
        return tx;
    }
};

}  // namespace

TEST_CASE("initiate classifies input and output shards") {
    Env env;
    UtxoSet s1, s3;
    OutputRef r1 = env.fund(1, 0x10, env.alice, 50, &s1);
    OutputRef r3 = env.fund(3, 0x30, env.alice, 50, &s3);

    SUBCASE("two inputs on shards 1 and 3") {
        Transaction tx = env.pay_tx(env.alice, env.bob, {r1, r3}, 100, 1);
        CrossShardSession s = initiate(tx, env.shard_count, env.table, 5, 16);
        CHECK(s.input_shards == std::vector<uint32_t>{1, 3});
        CHECK(s.output_shard == sharding::home_shard(env.alice.address, env.shard_count));
        CHECK(s.state == SessionState::initialized);
        CHECK(s.deadline_slot == 21);
        CHECK(s.session_id == ledger::tx_id(tx));
    }
    SUBCASE("single-shard transactions are rejected") {
        uint32_t home = sharding::home_shard(env.alice.address, env.shard_count);
        OutputRef local = env.fund(home, 0x40, env.alice, 50, nullptr);
        Transaction tx = env.pay_tx(env.alice, env.bob, {local}, 50, 1);
        CHECK_THROWS_AS(initiate(tx, env.shard_count, env.table, 5, 16), Error);
    }
    SUBCASE("a contract output shard differs from the input shard") {
        // tx spends a payment ref on shard 2 and steps a contract whose
        // validator hash routes to another shard
        OutputRef r2 = env.fund(2, 0x20, env.alice, 50, nullptr);
        Output contract;
        contract.validator = ledger::pay_to_address(env.bob.address);
        contract.value = 5;
        contract.datum = Bytes{1};
        Digest vh = ledger::script_hash(contract.validator);
        uint32_t contract_shard = sharding::trailing_index(vh, env.shard_count);
        OutputRef cref{digest_fill(0x21), 0};
        env.table.add(cref, {contract_shard, vh, true});

        Transaction tx;
        tx.sender = env.alice.address;
        tx.inputs.push_back({r2, {}, {}});
        tx.inputs.push_back({cref, {}, {}});
        Output next = contract;
        next.datum = Bytes{2};
        tx.outputs.push_back(next);
        tx.outputs.push_back(payment(env.alice, 50));
        Digest id = ledger::tx_id(tx);
        for (auto& in : tx.inputs) in.signature = crypto::sign(env.bob, id.span());

        CrossShardSession s = initiate(tx, env.shard_count, env.table, 0, 16);
        CHECK(s.output_shard == contract_shard);
        // the expected input shards per the routing rule
        std::vector<uint32_t> expect = {2, contract_shard};
        std::sort(expect.begin(), expect.end());
        CHECK(s.input_shards == expect);
    }
}

TEST_CASE("shard_lock: acceptance with quorum, rejection reasons") {
    Env env;
    UtxoSet utxo;
    OutputRef r1 = env.fund(1, 0x10, env.alice, 50, &utxo);
    OutputRef r3 = env.fund(3, 0x30, env.alice, 50, nullptr);
    Transaction tx = env.pay_tx(env.alice, env.bob, {r1, r3}, 100, 1);
    CrossShardSession session = initiate(tx, env.shard_count, env.table, 5, 16);
    LockOverlay overlay;
    auto signers = env.signer_ptrs();

    SUBCASE("valid inputs lock and produce a quorum PoA") {
        LockOutcome out = shard_lock(session, 1, 0, 6, utxo, overlay, signers);
        CHECK(out.proof.is_acceptance());
        CHECK(out.proof.locked_value == 50);
        CHECK(out.locked_refs == std::vector<OutputRef>{r1});
        CHECK(overlay.is_locked(r1));
        CHECK(env.quorum()(out.proof));
        // certificate unforgeability: dropping below threshold invalidates
        ShardProof pruned = out.proof;
        pruned.signatures.resize(3);
        CHECK_FALSE(env.quorum()(pruned));
    }
    SUBCASE("unknown ref yields PoR(UnknownInput) and locks nothing") {
        UtxoSet empty;
        LockOutcome out = shard_lock(session, 1, 0, 6, empty, overlay, signers);
        CHECK_FALSE(out.proof.is_acceptance());
        CHECK(out.proof.reason == RejectReason::unknown_input);
        CHECK(out.proof.locked_value == 0);
        CHECK(overlay.size() == 0);
        CHECK(env.quorum()(out.proof));  // rejections carry a quorum too
    }
    SUBCASE("bad spending signature yields PoR") {
        Transaction bad = tx;
        bad.inputs[0].signature.bytes[0] ^= 0x01;
        CrossShardSession s2 = session;
        s2.tx = bad;
        LockOutcome out = shard_lock(s2, 1, 0, 6, utxo, overlay, signers);
        CHECK_FALSE(out.proof.is_acceptance());
        CHECK(out.proof.reason == RejectReason::bad_signature);
    }
    SUBCASE("outside the validity window yields PoR") {
        Transaction windowed = tx;
        windowed.valid_from = 100;
        windowed.valid_to = 200;
        Digest id = ledger::tx_id(windowed);
        for (auto& in : windowed.inputs) in.signature = crypto::sign(env.alice, id.span());
        CrossShardSession s2 = session;
        s2.tx = windowed;
        s2.session_id = id;
        LockOutcome out = shard_lock(s2, 1, 0, 6, utxo, overlay, signers);
        CHECK(out.proof.reason == RejectReason::outside_validity);
    }
    SUBCASE("re-locking by the same session is idempotent") {
        shard_lock(session, 1, 0, 6, utxo, overlay, signers);
        LockOutcome again = shard_lock(session, 1, 0, 7, utxo, overlay, signers);
        CHECK(again.proof.is_acceptance());
        CHECK(overlay.size() == 1);
    }
}

TEST_CASE("two sessions racing one ref: exactly one PoA under every interleaving") {
    Env env;
    for (int order = 0; order < 2; ++order) {
        UtxoSet utxo;
        sharding::RoutingTable table;
        Env fresh;
        OutputRef contested{digest_fill(0x50), 0};
        utxo.insert(contested, payment(fresh.alice, 50));
        fresh.table.add(contested,
                        {2, ledger::script_hash(ledger::pay_to_address(fresh.alice.address)),
                         false});
        OutputRef other = fresh.fund(4, 0x51, fresh.alice, 10, nullptr);

        Transaction tx_a = fresh.pay_tx(fresh.alice, fresh.bob, {contested, other}, 60, 1);
        Transaction tx_b = fresh.pay_tx(fresh.alice, fresh.alice, {contested, other}, 60, 2);
        CrossShardSession sa = initiate(tx_a, 8, fresh.table, 0, 16);
        CrossShardSession sb = initiate(tx_b, 8, fresh.table, 0, 16);

        LockOverlay overlay;
        auto signers = fresh.signer_ptrs();
        LockOutcome first = shard_lock(order == 0 ? sa : sb, 2, 0, 1, utxo, overlay, signers);
        LockOutcome second = shard_lock(order == 0 ? sb : sa, 2, 0, 1, utxo, overlay, signers);
        CHECK(first.proof.is_acceptance());
        CHECK_FALSE(second.proof.is_acceptance());
        CHECK(second.proof.reason == RejectReason::already_locked);
        CHECK(overlay.refs_of(order == 0 ? sa.session_id : sb.session_id) ==
              std::vector<OutputRef>{contested});
    }
}

TEST_CASE("client_commit collects one valid PoA per input shard") {
    Env env;
    UtxoSet s1, s3;
    OutputRef r1 = env.fund(1, 0x10, env.alice, 50, &s1);
    OutputRef r3 = env.fund(3, 0x30, env.alice, 50, &s3);
    Transaction tx = env.pay_tx(env.alice, env.bob, {r1, r3}, 100, 1);
    CrossShardSession session = initiate(tx, env.shard_count, env.table, 5, 16);
    LockOverlay o1, o3;
    auto signers = env.signer_ptrs();

    LockOutcome a = shard_lock(session, 1, 0, 6, s1, o1, signers);
    LockOutcome b = shard_lock(session, 3, 0, 6, s3, o3, signers);
    REQUIRE(a.proof.is_acceptance());
    REQUIRE(b.proof.is_acceptance());

    SUBCASE("happy path: certificate verifies at the output shard") {
        std::vector<ShardProof> proofs = {a.proof, b.proof};
        CommitCertificate cert = client_commit(session, proofs, env.quorum());
        CHECK(cert.acceptances.size() == 2);
        std::string why;
        CHECK(verify_commit_certificate(cert, session, env.quorum(), &why));
    }
    SUBCASE("missing PoA") {
        std::vector<ShardProof> proofs = {a.proof};
        CHECK_THROWS_AS(client_commit(session, proofs, env.quorum()), Error);
    }
    SUBCASE("forged quorum signature") {
        ShardProof forged = b.proof;
        forged.signatures[0].sig.bytes[0] ^= 0xFF;
        forged.signatures[1].sig.bytes[0] ^= 0xFF;  // push below threshold
        std::vector<ShardProof> proofs = {a.proof, forged};
        CHECK_THROWS_AS(client_commit(session, proofs, env.quorum()), Error);
    }
    SUBCASE("any PoR forces the abort path") {
        ShardProof reject;
        reject.session_id = session.session_id;
        reject.shard = 3;
        reject.verdict = Verdict::reject;
        reject.reason = RejectReason::unknown_input;
        std::vector<ShardProof> proofs = {a.proof, reject};
        CHECK_THROWS_AS(client_commit(session, proofs, env.quorum()), Error);
    }
    SUBCASE("certificate value attestation must cover outputs plus fee") {
        // tamper with the locked value after signing: quorum check fails
        CommitCertificate cert =
            client_commit(session, std::vector<ShardProof>{a.proof, b.proof}, env.quorum());
        cert.acceptances[0].locked_value += 10;
        std::string why;
        CHECK_FALSE(verify_commit_certificate(cert, session, env.quorum(), &why));
    }
}

TEST_CASE("lock overlay timeout semantics") {
    LockOverlay overlay;
    Digest session = digest_fill(0x66);
    OutputRef ref{digest_fill(0x67), 0};
    REQUIRE(overlay.lock(ref, session, 20));  // locked at slot 10, deadline 20

    SUBCASE("sweep at the deadline leaves the lock in place") {
        CHECK(overlay.sweep(20).empty());
        CHECK(overlay.is_locked(ref));
    }
    SUBCASE("sweep one slot later rolls back") {
        auto rolled = overlay.sweep(21);
        REQUIRE(rolled.size() == 1);
        CHECK(rolled[0].first == session);
        CHECK(rolled[0].second == std::vector<OutputRef>{ref});
        CHECK_FALSE(overlay.is_locked(ref));
        // idempotent: nothing left to sweep
        CHECK(overlay.sweep(22).empty());
    }
    SUBCASE("unlock restores spendability") {
        overlay.unlock(ref);
        CHECK_FALSE(overlay.is_locked(ref));
        Digest other = digest_fill(0x68);
        CHECK(overlay.lock(ref, other, 30));
    }
    SUBCASE("a group of refs under one session sweeps together") {
        OutputRef ref2{digest_fill(0x69), 0};
        overlay.lock(ref2, session, 20);
        auto rolled = overlay.sweep(25);
        REQUIRE(rolled.size() == 1);
        CHECK(rolled[0].second.size() == 2);
    }
}

TEST_CASE("proof payload binds every field") {
    Env env;
    Digest sid = digest_fill(0x42);
    Bytes base = proof_payload(sid, 3, 7, Verdict::accept, 99);
    CHECK(base != proof_payload(sid, 2, 7, Verdict::accept, 99));
    CHECK(base != proof_payload(sid, 3, 8, Verdict::accept, 99));
    CHECK(base != proof_payload(sid, 3, 7, Verdict::reject, 99));
    CHECK(base != proof_payload(sid, 3, 7, Verdict::accept, 98));
}
