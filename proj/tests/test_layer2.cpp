#include <doctest.h>

#include "shardsim/layer2.hpp"
#include "shardsim/rng.hpp"
#include "shardsim/serial.hpp"

using namespace shardsim;
using namespace shardsim::layer2;
using shardsim::ledger::Output;
using shardsim::ledger::OutputRef;
using shardsim::ledger::Transaction;
using shardsim::ledger::UtxoSet;

namespace {

crypto::KeyPair key_of(uint16_t n) {
    crypto::Seed32 s{};
    s[0] = uint8_t(n);
    s[1] = uint8_t(n >> 8);
    s[2] = 0x12;
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

struct PegEnv {
    crypto::KeyPair user = key_of(1);
    ParentPeg peg{key_of(50), /*validation_period=*/16};
    ChildChain child{1, key_of(60)};
    UtxoSet parent;

    PegEnv() { peg.register_child_operator(1, child.operator_key().public_key); }

    OutputRef fund(uint8_t tag, uint64_t value) {
        OutputRef ref{digest_fill(tag), 0};
        parent.insert(ref, payment(user, value));
        return ref;
    }
};

}  // namespace

TEST_CASE("peg_lock: full-value lock has no change, partial lock returns change") {
    PegEnv env;
    OutputRef full = env.fund(0x01, 10);
    PegLockResult r1 = env.peg.peg_lock(env.parent, env.user, full, 10, 1, 0);
    CHECK(r1.lockbox.amount == 10);
    CHECK(r1.tx.outputs.size() == 1);  // no change output
    CHECK(env.peg.onchain_pool(env.parent) == 10);

    OutputRef part = env.fund(0x02, 10);
    PegLockResult r2 = env.peg.peg_lock(env.parent, env.user, part, 7, 1, 0);
    CHECK(r2.tx.outputs.size() == 2);
    CHECK(r2.tx.outputs[1].value == 3);  // change back to the owner
    CHECK(env.peg.onchain_pool(env.parent) == 17);
    CHECK(ledger::balance_of(env.parent, env.user.address) == 3);

    SUBCASE("insufficient value") {
        OutputRef small = env.fund(0x03, 5);
        CHECK_THROWS_AS(env.peg.peg_lock(env.parent, env.user, small, 6, 1, 0), Error);
    }
    SUBCASE("unknown funding output") {
        CHECK_THROWS_AS(env.peg.peg_lock(env.parent, env.user, {digest_fill(0x99), 0}, 1, 1, 0),
                        Error);
    }
}

TEST_CASE("peg_mint: exact amount, single use, authority binding") {
    PegEnv env;
    OutputRef funding = env.fund(0x01, 10);
    PegLockResult lock = env.peg.peg_lock(env.parent, env.user, funding, 10, 1, 0);

    OutputRef child_ref = env.child.peg_mint(lock.auth, as_span(env.peg.authority_public_key()));
    env.peg.note_minted(lock.auth.nonce);
    CHECK(env.child.circulating() == 10);
    CHECK(env.child.state().find(child_ref)->value == 10);
    CHECK(env.peg.parent_locked() == env.child.circulating());

    SUBCASE("double use of one authorization is rejected") {
        CHECK_THROWS_AS(
            env.child.peg_mint(lock.auth, as_span(env.peg.authority_public_key())), Error);
    }
    SUBCASE("a forged authority signature is rejected") {
        MintAuthorization forged = lock.auth;
        forged.nonce = 999;
        forged.authority_sig = crypto::sign(key_of(61), as_span(mint_auth_payload(forged)));
        CHECK_THROWS_AS(env.child.peg_mint(forged, as_span(env.peg.authority_public_key())),
                        Error);
    }
}

TEST_CASE("peg_burn and peg_unlock: validation period and replay protection") {
    PegEnv env;
    OutputRef funding = env.fund(0x01, 10);
    PegLockResult lock = env.peg.peg_lock(env.parent, env.user, funding, 10, 1, 0);
    OutputRef child_ref = env.child.peg_mint(lock.auth, as_span(env.peg.authority_public_key()));
    env.peg.note_minted(lock.auth.nonce);

    std::vector<OutputRef> refs = {child_ref};
    BurnProof proof = env.child.peg_burn(env.user, refs, /*slot=*/5);
    env.peg.note_burned(proof.amount);
    CHECK(proof.amount == 10);
    CHECK(env.child.circulating() == 0);

    SUBCASE("unlock one slot early fails") {
        CHECK_THROWS_WITH_AS(env.peg.peg_unlock(env.parent, proof, 5 + 16 - 1),
                             doctest::Contains("PeriodNotElapsed"), Error);
    }
    SUBCASE("unlock after the period releases to the burner") {
        Transaction tx = env.peg.peg_unlock(env.parent, proof, 5 + 16);
        CHECK(tx.outputs[0].value == 10);
        CHECK(ledger::balance_of(env.parent, env.user.address) == 10);
        CHECK(env.peg.onchain_pool(env.parent) == 0);
        CHECK(env.peg.parent_locked() == 0);
        // replay
        CHECK_THROWS_AS(env.peg.peg_unlock(env.parent, proof, 100), Error);
    }
    SUBCASE("a tampered burn proof fails the operator signature") {
        BurnProof bad = proof;
        bad.amount += 1;
        CHECK_THROWS_AS(env.peg.peg_unlock(env.parent, bad, 100), Error);
    }
}

TEST_CASE("randomized peg sequence conserves parentLocked == childCirculating") {
    // the conservation ledger oracle from the module contract, with the
    // parent supply total checked as well
    PegEnv env;
    Rng rng(31);
    for (uint8_t i = 0; i < 8; ++i) env.fund(uint8_t(0x10 + i), 1000);
    uint64_t initial_supply = env.parent.total_value();

    struct LiveMint {
        OutputRef ref;
        uint64_t value;
    };
    std::vector<LiveMint> child_refs;
    std::vector<BurnProof> pending_burns;
    uint64_t slot = 0;

    auto assert_identities = [&]() {
        CHECK(env.peg.onchain_pool(env.parent) == env.peg.pool_total());
        CHECK(env.peg.parent_locked() == env.child.circulating());
        CHECK(env.parent.total_value() == initial_supply);  // pegs never burn parent value
    };

    int ops = 0;
    for (int step = 0; step < 400; ++step) {
        ++slot;
        uint64_t pick = rng.below(4);
        if (pick == 0) {  // lock + mint (the paired step)
            auto entries = env.parent.sorted_entries();
            const std::pair<OutputRef, Output>* funding = nullptr;
            for (const auto& e : entries) {
                if (e.second.datum.empty() &&
                    e.second.validator.kind == ledger::Script::Kind::signed_by &&
                    e.second.validator.address == env.user.address && e.second.value >= 4) {
                    funding = &e;
                    break;
                }
            }
            if (!funding) continue;
            uint64_t amount = 2 + rng.below(funding->second.value - 2);
            PegLockResult lock =
                env.peg.peg_lock(env.parent, env.user, funding->first, amount, 1, slot);
            OutputRef minted =
                env.child.peg_mint(lock.auth, as_span(env.peg.authority_public_key()));
            env.peg.note_minted(lock.auth.nonce);
            child_refs.push_back({minted, amount});
        } else if (pick == 1 && !child_refs.empty()) {  // child transfer
            size_t i = size_t(rng.below(child_refs.size()));
            Transaction tx;
            tx.sender = env.user.address;
            tx.inputs.push_back({child_refs[i].ref, {}, {}});
            tx.outputs.push_back(payment(env.user, child_refs[i].value));
            Digest id = ledger::tx_id(tx);
            tx.inputs[0].signature = crypto::sign(env.user, id.span());
            REQUIRE(env.child.apply_tx(tx, slot));
            child_refs[i].ref = {id, 0};
        } else if (pick == 2 && !child_refs.empty()) {  // burn
            size_t i = size_t(rng.below(child_refs.size()));
            std::vector<OutputRef> refs = {child_refs[i].ref};
            BurnProof proof = env.child.peg_burn(env.user, refs, slot);
            env.peg.note_burned(proof.amount);
            pending_burns.push_back(proof);
            child_refs.erase(child_refs.begin() + ptrdiff_t(i));
        } else if (pick == 3 && !pending_burns.empty()) {  // unlock when eligible
            const BurnProof& proof = pending_burns.front();
            if (slot < proof.burn_slot + env.peg.validation_period()) continue;
            env.peg.peg_unlock(env.parent, proof, slot);
            pending_burns.erase(pending_burns.begin());
        } else {
            continue;
        }
        ++ops;
        assert_identities();
    }
    CHECK(ops > 100);
}

TEST_CASE("state_root is a sorted-entry commitment") {
    crypto::KeyPair a = key_of(1);
    UtxoSet s;
    CHECK(state_root(s) == crypto::merkle_root({}));

    s.insert({digest_fill(2), 0}, payment(a, 5));
    s.insert({digest_fill(1), 0}, payment(a, 7));
    // manual oracle: leaves in ref order
    std::vector<Digest> leaves;
    for (const auto& [ref, out] : s.sorted_entries()) {
        Writer w;
        ledger::serialize_ref(w, ref);
        ledger::serialize_output(w, out);
        leaves.push_back(crypto::hash256(as_span(w.bytes())));
    }
    CHECK(state_root(s) == crypto::merkle_root(leaves));

    // insertion order does not matter
    UtxoSet permuted;
    permuted.insert({digest_fill(1), 0}, payment(a, 7));
    permuted.insert({digest_fill(2), 0}, payment(a, 5));
    CHECK(state_root(permuted) == state_root(s));
}

namespace {

struct RollupEnv {
    crypto::KeyPair user = key_of(1);
    UtxoSet state;  // child state advanced honestly, for claimed roots
    std::vector<OutputRef> fundings;
    size_t next_funding = 0;
    RollupContract contract;
    std::vector<UtxoSet> pre_states;  // snapshot before each batch

    // all funding refs exist from genesis, so every batch's pre-state is
    // exactly the chain state at its prev root
    RollupEnv() : contract(Digest{}) {
        for (uint8_t i = 0; i < 32; ++i) {
            OutputRef ref{digest_fill(uint8_t(0x80 + i)), 0};
            state.insert(ref, payment(user, 10));
            fundings.push_back(ref);
        }
        contract = RollupContract(state_root(state));
    }

    Batch make_batch(uint64_t slot, int txs) {
        Batch batch;
        batch.slot = slot;
        for (int i = 0; i < txs; ++i) {
            REQUIRE(next_funding < fundings.size());
            OutputRef ref = fundings[next_funding++];
            Transaction tx;
            tx.sender = user.address;
            tx.inputs.push_back({ref, {}, {}});
            tx.outputs.push_back(payment(user, 9));
            tx.fee = 1;
            Digest id = ledger::tx_id(tx);
            tx.inputs[0].signature = crypto::sign(user, id.span());
            batch.txs.push_back(tx);
        }
        return batch;
    }

    const BatchCommitment& commit_honest(int txs, uint64_t slot) {
        Batch batch = make_batch(slot, txs);
        pre_states.push_back(state);
        for (const auto& tx : batch.txs) ledger::apply_tx_in_place(state, tx);
        return contract.commit(std::move(batch), contract.head_root(), state_root(state));
    }
};

}  // namespace

TEST_CASE("rollup_commit: optimistic acceptance and stale-prev rejection") {
    RollupEnv env;
    const BatchCommitment& c0 = env.commit_honest(2, 1);
    CHECK(c0.status == BatchCommitment::Status::pending);
    CHECK(c0.batch_index == 0);
    Digest head_after_c0 = env.contract.head_root();
    CHECK(head_after_c0 == env.contract.commitments()[0].post_state_root);

    SUBCASE("stale prev root is rejected") {
        Batch b = env.make_batch(2, 1);
        CHECK_THROWS_AS(
            env.contract.commit(b, env.contract.commitments()[0].prev_state_root,
                                digest_fill(0x77)),
            Error);
    }
    SUBCASE("a fraudulent post root is accepted as pending") {
        Batch batch = env.make_batch(2, 1);
        env.pre_states.push_back(env.state);
        for (const auto& tx : batch.txs) ledger::apply_tx_in_place(env.state, tx);
        const BatchCommitment& c1 =
            env.contract.commit(std::move(batch), env.contract.head_root(), digest_fill(0x66));
        CHECK(c1.status == BatchCommitment::Status::pending);  // optimism
        CHECK(env.contract.head_root() == digest_fill(0x66));
    }
}

TEST_CASE("rollup_replay: identity on empty batches, skip rule, determinism") {
    RollupEnv env;
    UtxoSet pre;
    pre.insert({digest_fill(0x01), 0}, payment(env.user, 10));

    SUBCASE("empty batch leaves the root unchanged") {
        Batch empty;
        empty.slot = 3;
        CHECK(rollup_replay(empty, pre) == state_root(pre));
    }
    SUBCASE("single-tx batch matches the hand-computed root") {
        Transaction tx;
        tx.sender = env.user.address;
        tx.inputs.push_back({{digest_fill(0x01), 0}, {}, {}});
        tx.outputs.push_back(payment(env.user, 9));
        tx.fee = 1;
        Digest id = ledger::tx_id(tx);
        tx.inputs[0].signature = crypto::sign(env.user, id.span());
        Batch batch;
        batch.slot = 3;
        batch.txs.push_back(tx);

        UtxoSet expect = pre;
        expect.erase({digest_fill(0x01), 0});
        expect.insert({id, 0}, payment(env.user, 9));
        CHECK(rollup_replay(batch, pre) == state_root(expect));
        CHECK(rollup_replay(batch, pre) == rollup_replay(batch, pre));
    }
    SUBCASE("invalid txs are skipped deterministically") {
        Transaction bogus;
        bogus.sender = env.user.address;
        bogus.inputs.push_back({{digest_fill(0x0F), 0}, {}, {}});  // unknown ref
        bogus.outputs.push_back(payment(env.user, 1));
        Batch batch;
        batch.slot = 3;
        batch.txs.push_back(bogus);
        CHECK(rollup_replay(batch, pre) == state_root(pre));
    }
}

TEST_CASE("fraud proofs: detection, suffix rollback, rejection of bad proofs") {
    RollupEnv env;
    // five batches; batch 2 claims a corrupted post root
    for (int i = 0; i < 2; ++i) env.commit_honest(2, uint64_t(i));

    Batch batch2 = env.make_batch(2, 2);
    env.pre_states.push_back(env.state);
    UtxoSet honest_after = env.state;
    for (const auto& tx : batch2.txs) ledger::apply_tx_in_place(honest_after, tx);
    Digest corrupt_root = state_root(honest_after);
    corrupt_root.bytes[0] ^= 0xFF;
    env.contract.commit(batch2, env.contract.head_root(), corrupt_root);
    env.state = honest_after;

    // batches 3 and 4 build on the corrupt head as the operator claims it
    for (int i = 3; i < 5; ++i) {
        Batch b = env.make_batch(uint64_t(i), 1);
        env.pre_states.push_back(env.state);
        for (const auto& tx : b.txs) ledger::apply_tx_in_place(env.state, tx);
        env.contract.commit(std::move(b), env.contract.head_root(), state_root(env.state));
    }
    REQUIRE(env.contract.commitments().size() == 5);

    SUBCASE("honest batches yield no proof; replay-all targets exactly index 2") {
        for (size_t i = 0; i < 5; ++i) {
            CAPTURE(i);
            if (i == 2) {
                auto proof = fraud_prove(env.contract, i, make_witness(env.pre_states[i]));
                CHECK(proof.has_value());
            } else if (i == 3) {
                // batch 3 chains from the *claimed* (corrupt) root, so the
                // honest witness cannot even bind to it
                CHECK_THROWS_AS(
                    (void)fraud_prove(env.contract, i, make_witness(env.pre_states[i])), Error);
            } else {
                auto proof = fraud_prove(env.contract, i, make_witness(env.pre_states[i]));
                CHECK_FALSE(proof.has_value());
            }
        }
    }
    SUBCASE("fraud_verify rolls back exactly batches 2..4") {
        auto proof = fraud_prove(env.contract, 2, make_witness(env.pre_states[2]));
        REQUIRE(proof);
        std::string why;
        CHECK(fraud_verify(env.contract, *proof, &why));
        const auto& cs = env.contract.commitments();
        CHECK(cs[0].status == BatchCommitment::Status::pending);
        CHECK(cs[1].status == BatchCommitment::Status::pending);
        CHECK(cs[2].status == BatchCommitment::Status::rolled_back);
        CHECK(cs[3].status == BatchCommitment::Status::rolled_back);
        CHECK(cs[4].status == BatchCommitment::Status::rolled_back);
        CHECK(env.contract.head_root() == cs[1].post_state_root);

        // the suffix rule: rolled-back region is a contiguous suffix
        bool seen_rolled = false;
        for (const auto& c : cs) {
            if (c.status == BatchCommitment::Status::rolled_back) seen_rolled = true;
            else CHECK_FALSE(seen_rolled);
        }
        // a replayed proof is now rejected: the batch is already rolled back
        CHECK_FALSE(fraud_verify(env.contract, *proof, &why));
    }
    SUBCASE("a proof against an honest batch is rejected with no state change") {
        FraudProof fake;
        fake.batch_index = 1;
        fake.pre_state = make_witness(env.pre_states[1]);
        const Batch& b1 = env.contract.batches()[1];
        fake.tx_index = 0;
        fake.tx = b1.txs[0];
        std::vector<Digest> ids;
        for (const auto& tx : b1.txs) ids.push_back(ledger::tx_id(tx));
        fake.inclusion = crypto::MerkleTree::build(ids).prove(0);
        std::string why;
        CHECK_FALSE(fraud_verify(env.contract, fake, &why));
        CHECK(env.contract.commitments()[1].status == BatchCommitment::Status::pending);
        CHECK(why.find("re-execution confirms") != std::string::npos);
    }
    SUBCASE("a tampered inclusion path is rejected") {
        auto proof = fraud_prove(env.contract, 2, make_witness(env.pre_states[2]));
        REQUIRE(proof);
        proof->inclusion.path[0].sibling.bytes[3] ^= 0x08;
        std::string why;
        CHECK_FALSE(fraud_verify(env.contract, *proof, &why));
        CHECK(env.contract.commitments()[2].status == BatchCommitment::Status::pending);
    }
    SUBCASE("a witness that does not bind to the prev root is rejected") {
        auto proof = fraud_prove(env.contract, 2, make_witness(env.pre_states[2]));
        REQUIRE(proof);
        proof->pre_state.entries.pop_back();
        std::string why;
        CHECK_FALSE(fraud_verify(env.contract, *proof, &why));
        CHECK(why.find("witness") != std::string::npos);
    }
}

TEST_CASE("finalize_older_than marks the settled prefix") {
    RollupEnv env;
    for (int i = 0; i < 4; ++i) env.commit_honest(1, uint64_t(i));
    env.contract.finalize_older_than(2);
    const auto& cs = env.contract.commitments();
    CHECK(cs[0].status == BatchCommitment::Status::finalized);
    CHECK(cs[1].status == BatchCommitment::Status::finalized);
    CHECK(cs[2].status == BatchCommitment::Status::pending);
    CHECK(cs[3].status == BatchCommitment::Status::pending);
}
