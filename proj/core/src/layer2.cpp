#include "shardsim/layer2.hpp"

#include <algorithm>

#include "shardsim/error.hpp"
#include "shardsim/serial.hpp"

namespace shardsim::layer2 {

Bytes mint_auth_payload(const MintAuthorization& auth) {
    Writer w;
    w.u64(auth.nonce);
    w.u32(auth.child_chain_id);
    w.u64(auth.amount);
    w.digest(auth.owner);
    return w.take();
}

Bytes burn_proof_payload(const BurnProof& proof) {
    Writer w;
    w.u32(proof.child_chain_id);
    w.u64(proof.amount);
    w.digest(proof.burner);
    w.u64(proof.burn_slot);
    w.u64(proof.nonce);
    return w.take();
}

// ---------------------------------------------------------------------------
// ParentPeg
// ---------------------------------------------------------------------------

ParentPeg::ParentPeg(crypto::KeyPair authority, uint32_t validation_period)
    : authority_(std::move(authority)),
      lockbox_validator_(ledger::pay_to_address(authority_.address)),
      validation_period_(validation_period) {}

void ParentPeg::register_child_operator(uint32_t child_chain_id, Bytes operator_pubkey) {
    child_operators_[child_chain_id] = std::move(operator_pubkey);
}

PegLockResult ParentPeg::peg_lock(ledger::UtxoSet& parent, const crypto::KeyPair& owner,
                                  const ledger::OutputRef& funding, uint64_t amount,
                                  uint32_t child_chain_id, uint64_t slot) {
    const ledger::Output* src = parent.find(funding);
    if (!src) throw Error("peg_lock: funding output unknown");
    if (src->value < amount) throw Error("peg_lock: insufficient value");
    if (amount == 0) throw Error("peg_lock: amount must be positive");

    // Lockbox outputs are plain value under the authority validator; the
    // child binding (chain id, owner, nonce) lives in the module record so
    // exact-amount releases need no continuing state.
    uint64_t nonce = next_nonce_++;
    ledger::Transaction tx;
    tx.sender = owner.address;
    tx.inputs.push_back({funding, {}, {}});
    ledger::Output box;
    box.validator = lockbox_validator_;
    box.value = amount;
    tx.outputs.push_back(std::move(box));
    if (src->value > amount) {
        ledger::Output change;
        change.validator = ledger::pay_to_address(owner.address);
        change.value = src->value - amount;
        tx.outputs.push_back(std::move(change));
    }
    Digest id = ledger::tx_id(tx);
    tx.inputs[0].signature = crypto::sign(owner, id.span());

    ledger::ValidationReport report = ledger::validate_tx(parent, tx, slot);
    if (!report.ok()) throw Error("peg_lock: " + report.to_string());
    ledger::apply_tx_in_place(parent, tx);

    PegLockResult result;
    result.lockbox.parent_ref = {id, 0};
    result.lockbox.amount = amount;
    result.lockbox.child_chain_id = child_chain_id;
    result.lockbox.status = Lockbox::Status::locked;
    result.lockbox.owner = owner.address;
    result.lockbox.auth_nonce = nonce;
    lockboxes_.push_back(result.lockbox);

    result.auth.nonce = nonce;
    result.auth.child_chain_id = child_chain_id;
    result.auth.amount = amount;
    result.auth.owner = owner.address;
    result.auth.authority_sig = crypto::sign(authority_, as_span(mint_auth_payload(result.auth)));
    result.tx = std::move(tx);

    pool_total_ += amount;
    auth_outstanding_ += amount;
    return result;
}

void ParentPeg::note_minted(uint64_t nonce) {
    if (minted_nonces_.count(nonce)) throw Error("peg: authorization already consumed");
    const Lockbox* box = nullptr;
    for (const auto& b : lockboxes_)
        if (b.auth_nonce == nonce) box = &b;
    if (!box) throw Error("peg: unknown authorization nonce");
    minted_nonces_.insert(nonce);
    auth_outstanding_ -= box->amount;
}

void ParentPeg::note_burned(uint64_t amount) {
    if (amount > pool_total_ - auth_outstanding_ - pending_withdrawal_)
        throw Error("peg: burn exceeds circulating backing");
    pending_withdrawal_ += amount;
}

ledger::Transaction ParentPeg::peg_unlock(ledger::UtxoSet& parent, const BurnProof& proof,
                                          uint64_t slot) {
    auto op = child_operators_.find(proof.child_chain_id);
    if (op == child_operators_.end()) throw Error("peg_unlock: unknown child chain");
    if (!crypto::verify_sig(as_span(op->second), as_span(burn_proof_payload(proof)),
                            proof.operator_sig))
        throw Error("peg_unlock: bad operator signature");
    if (used_burn_nonces_.count(proof.nonce)) throw Error("peg_unlock: burn proof replay");
    if (slot < proof.burn_slot + validation_period_)
        throw Error("peg_unlock: PeriodNotElapsed (eligible at slot " +
                    std::to_string(proof.burn_slot + validation_period_) + ")");
    if (proof.amount > pending_withdrawal_)
        throw Error("peg_unlock: amount exceeds pending withdrawals");

    // Spend lockboxes oldest-first until the amount is covered; change is
    // re-locked under a fresh lockbox.
    ledger::Transaction tx;
    tx.sender = authority_.address;
    uint64_t gathered = 0;
    std::vector<size_t> consumed;
    for (size_t i = 0; i < lockboxes_.size() && gathered < proof.amount; ++i) {
        if (lockboxes_[i].status != Lockbox::Status::locked) continue;
        if (!minted_nonces_.count(lockboxes_[i].auth_nonce)) continue;  // still awaiting mint
        tx.inputs.push_back({lockboxes_[i].parent_ref, {}, {}});
        gathered += lockboxes_[i].amount;
        consumed.push_back(i);
    }
    if (gathered < proof.amount) throw Error("peg_unlock: lockbox pool underfunded");

    ledger::Output release;
    release.validator = ledger::pay_to_address(proof.burner);
    release.value = proof.amount;
    tx.outputs.push_back(std::move(release));
    uint64_t change = gathered - proof.amount;
    uint64_t change_nonce = 0;
    if (change > 0) {
        change_nonce = next_nonce_++;
        ledger::Output rebox;
        rebox.validator = lockbox_validator_;
        rebox.value = change;
        tx.outputs.push_back(std::move(rebox));
    }
    Digest id = ledger::tx_id(tx);
    for (auto& in : tx.inputs) in.signature = crypto::sign(authority_, id.span());

    ledger::ValidationReport report = ledger::validate_tx(parent, tx, slot);
    if (!report.ok()) throw Error("peg_unlock: " + report.to_string());
    ledger::apply_tx_in_place(parent, tx);

    for (size_t i : consumed) {
        lockboxes_[i].status = Lockbox::Status::released;
        lockboxes_[i].unlock_eligible_slot = proof.burn_slot + validation_period_;
    }
    if (change > 0) {
        Lockbox rebox;
        rebox.parent_ref = {id, 1};
        rebox.amount = change;
        rebox.child_chain_id = proof.child_chain_id;
        rebox.status = Lockbox::Status::locked;
        rebox.auth_nonce = change_nonce;
        lockboxes_.push_back(rebox);
        minted_nonces_.insert(change_nonce);  // change is already child-backed value
    }
    used_burn_nonces_.insert(proof.nonce);
    pool_total_ -= proof.amount;
    pending_withdrawal_ -= proof.amount;
    return tx;
}

uint64_t ParentPeg::onchain_pool(const ledger::UtxoSet& parent) const {
    return ledger::balance_of(parent, authority_.address);
}

// ---------------------------------------------------------------------------
// ChildChain
// ---------------------------------------------------------------------------

ChildChain::ChildChain(uint32_t id, crypto::KeyPair operator_key)
    : id_(id), operator_key_(std::move(operator_key)) {}

ledger::OutputRef ChildChain::peg_mint(const MintAuthorization& auth,
                                       ByteSpan authority_pubkey) {
    if (auth.child_chain_id != id_) throw Error("peg_mint: authorization for another chain");
    if (used_mint_nonces_.count(auth.nonce)) throw Error("peg_mint: authorization reuse");
    if (!crypto::verify_sig(authority_pubkey, as_span(mint_auth_payload(auth)),
                            auth.authority_sig))
        throw Error("peg_mint: bad authority signature");

    Writer w;
    w.raw(str_span("child-mint"));
    w.u32(id_);
    w.u64(auth.nonce);
    w.u64(++mint_counter_);
    ledger::OutputRef ref{crypto::hash256(as_span(w.bytes())), 0};
    ledger::Output out;
    out.validator = ledger::pay_to_address(auth.owner);
    out.value = auth.amount;
    state_.insert(ref, std::move(out));
    used_mint_nonces_.insert(auth.nonce);
    circulating_ += auth.amount;
    return ref;
}

bool ChildChain::apply_tx(const ledger::Transaction& tx, uint64_t slot) {
    ledger::ValidationReport report = ledger::validate_tx(state_, tx, slot);
    if (!report.ok()) return false;
    ledger::apply_tx_in_place(state_, tx);
    circulating_ -= tx.fee;  // fees are burned on the child as well
    applied_.push_back(tx);
    return true;
}

BurnProof ChildChain::peg_burn(const crypto::KeyPair& owner,
                               std::span<const ledger::OutputRef> refs, uint64_t slot) {
    ledger::Transaction tx;
    tx.sender = owner.address;
    uint64_t total = 0;
    for (const auto& ref : refs) {
        const ledger::Output* out = state_.find(ref);
        if (!out) throw Error("peg_burn: unknown child output");
        total += out->value;
        tx.inputs.push_back({ref, {}, {}});
    }
    if (total == 0) throw Error("peg_burn: nothing to burn");
    tx.fee = total;  // burn everything: no outputs
    Digest id = ledger::tx_id(tx);
    for (auto& in : tx.inputs) in.signature = crypto::sign(owner, id.span());
    ledger::ValidationReport report = ledger::validate_tx(state_, tx, slot);
    if (!report.ok()) throw Error("peg_burn: " + report.to_string());
    ledger::apply_tx_in_place(state_, tx);
    circulating_ -= total;
    applied_.push_back(tx);

    BurnProof proof;
    proof.child_chain_id = id_;
    proof.amount = total;
    proof.burner = owner.address;
    proof.burn_slot = slot;
    proof.nonce = next_burn_nonce_++;
    proof.operator_sig = crypto::sign(operator_key_, as_span(burn_proof_payload(proof)));
    return proof;
}

// ---------------------------------------------------------------------------
// Rollup
// ---------------------------------------------------------------------------

Digest state_root(const ledger::UtxoSet& state) {
    std::vector<Digest> leaves;
    auto entries = state.sorted_entries();
    leaves.reserve(entries.size());
    for (const auto& [ref, out] : entries) {
        Writer w;
        ledger::serialize_ref(w, ref);
        ledger::serialize_output(w, out);
        leaves.push_back(crypto::hash256(as_span(w.bytes())));
    }
    return crypto::merkle_root(leaves);
}

Digest batch_tx_root(const Batch& batch) {
    std::vector<Digest> leaves;
    leaves.reserve(batch.txs.size() + batch.deposits.size());
    for (const auto& tx : batch.txs) leaves.push_back(ledger::tx_id(tx));
    for (const auto& [ref, out] : batch.deposits) {
        Writer w;
        ledger::serialize_ref(w, ref);
        ledger::serialize_output(w, out);
        leaves.push_back(crypto::hash256(as_span(w.bytes())));
    }
    return crypto::merkle_root(leaves);
}

const char* batch_status_name(BatchCommitment::Status s) {
    switch (s) {
        case BatchCommitment::Status::pending: return "Pending";
        case BatchCommitment::Status::finalized: return "Finalized";
        case BatchCommitment::Status::rolled_back: return "RolledBack";
    }
    return "?";
}

Digest rollup_replay(const Batch& batch, const ledger::UtxoSet& pre_state) {
    ledger::UtxoSet state = pre_state;
    for (const auto& [ref, out] : batch.deposits)
        if (!state.contains(ref)) state.insert(ref, out);
    for (const auto& tx : batch.txs) {
        if (!ledger::validate_tx(state, tx, batch.slot).ok()) continue;  // skip rule
        ledger::apply_tx_in_place(state, tx);
    }
    return state_root(state);
}

StateWitness make_witness(const ledger::UtxoSet& state) {
    StateWitness w;
    w.entries = state.sorted_entries();
    return w;
}

Digest witness_root(const StateWitness& witness) {
    std::vector<Digest> leaves;
    leaves.reserve(witness.entries.size());
    for (const auto& [ref, out] : witness.entries) {
        Writer w;
        ledger::serialize_ref(w, ref);
        ledger::serialize_output(w, out);
        leaves.push_back(crypto::hash256(as_span(w.bytes())));
    }
    return crypto::merkle_root(leaves);
}

ledger::UtxoSet witness_state(const StateWitness& witness) {
    ledger::UtxoSet state;
    for (const auto& [ref, out] : witness.entries) state.insert(ref, out);
    return state;
}

RollupContract::RollupContract(Digest genesis_root) : genesis_root_(genesis_root) {}

const Digest& RollupContract::head_root() const {
    for (size_t i = commitments_.size(); i > 0; --i)
        if (commitments_[i - 1].status != BatchCommitment::Status::rolled_back)
            return commitments_[i - 1].post_state_root;
    return genesis_root_;
}

const BatchCommitment& RollupContract::commit(Batch batch, const Digest& prev_root,
                                              const Digest& claimed_post_root) {
    if (prev_root != head_root())
        throw Error("rollup_commit: previous state root does not match the chain head");
    BatchCommitment c;
    c.batch_index = commitments_.size();
    c.prev_state_root = prev_root;
    c.post_state_root = claimed_post_root;
    c.tx_data_root = batch_tx_root(batch);
    c.status = BatchCommitment::Status::pending;
    commitments_.push_back(c);
    batches_.push_back(std::move(batch));
    return commitments_.back();
}

void RollupContract::finalize_older_than(uint64_t age) {
    if (commitments_.size() <= age) return;
    for (size_t i = 0; i + age < commitments_.size(); ++i)
        if (commitments_[i].status == BatchCommitment::Status::pending)
            commitments_[i].status = BatchCommitment::Status::finalized;
}

std::optional<FraudProof> fraud_prove(const RollupContract& contract, size_t batch_index,
                                      const StateWitness& pre_state) {
    if (batch_index >= contract.commitments_.size())
        throw Error("fraud_prove: batch index out of range");
    const BatchCommitment& c = contract.commitments_[batch_index];
    if (witness_root(pre_state) != c.prev_state_root)
        throw Error("fraud_prove: witness does not bind to the previous state root");
    const Batch& batch = contract.batches_[batch_index];
    ledger::UtxoSet pre = witness_state(pre_state);
    if (rollup_replay(batch, pre) == c.post_state_root) return std::nullopt;

    FraudProof proof;
    proof.batch_index = batch_index;
    proof.pre_state = pre_state;
    if (batch.txs.empty()) {
        proof.tx_index = UINT64_MAX;
        return proof;
    }
    // Point at the first invalid transaction if the skip rule fired,
    // otherwise at the first transaction.
    size_t target = 0;
    {
        ledger::UtxoSet state = pre;
        for (const auto& [ref, out] : batch.deposits)
            if (!state.contains(ref)) state.insert(ref, out);
        for (size_t i = 0; i < batch.txs.size(); ++i) {
            if (!ledger::validate_tx(state, batch.txs[i], batch.slot).ok()) {
                target = i;
                break;
            }
            ledger::apply_tx_in_place(state, batch.txs[i]);
        }
    }
    proof.tx_index = target;
    proof.tx = batch.txs[target];
    std::vector<Digest> leaves;
    leaves.reserve(batch.txs.size() + batch.deposits.size());
    for (const auto& tx : batch.txs) leaves.push_back(ledger::tx_id(tx));
    for (const auto& [ref, out] : batch.deposits) {
        Writer w;
        ledger::serialize_ref(w, ref);
        ledger::serialize_output(w, out);
        leaves.push_back(crypto::hash256(as_span(w.bytes())));
    }
    proof.inclusion = crypto::MerkleTree::build(leaves).prove(target);
    return proof;
}

bool fraud_verify(RollupContract& contract, const FraudProof& proof, std::string* why) {
    auto fail = [&](const std::string& reason) {
        if (why) *why = "InvalidProof: " + reason;
        return false;
    };
    if (proof.batch_index >= contract.commitments_.size())
        return fail("batch index out of range");
    BatchCommitment& c = contract.commitments_[proof.batch_index];
    if (c.status == BatchCommitment::Status::rolled_back)
        return fail("batch already rolled back");
    if (witness_root(proof.pre_state) != c.prev_state_root)
        return fail("witness does not bind to the previous state root");
    const Batch& batch = contract.batches_[proof.batch_index];
    if (proof.tx_index != UINT64_MAX) {
        if (proof.tx_index >= batch.txs.size()) return fail("tx index out of range");
        if (!crypto::merkle_verify(c.tx_data_root, ledger::tx_id(proof.tx), proof.inclusion))
            return fail("tx inclusion proof fails against tx data root");
        if (proof.inclusion.leaf_index != proof.tx_index)
            return fail("inclusion proof index mismatch");
    } else if (!batch.txs.empty()) {
        return fail("empty-batch proof against a non-empty batch");
    }

    ledger::UtxoSet pre = witness_state(proof.pre_state);
    if (rollup_replay(batch, pre) == c.post_state_root)
        return fail("re-execution confirms the claimed post state root");

    for (size_t i = proof.batch_index; i < contract.commitments_.size(); ++i)
        contract.commitments_[i].status = BatchCommitment::Status::rolled_back;
    return true;
}

}  // namespace shardsim::layer2
