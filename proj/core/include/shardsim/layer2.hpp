#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "shardsim/crypto.hpp"
#include "shardsim/digest.hpp"
#include "shardsim/ledger.hpp"
#include "shardsim/merkle.hpp"

namespace shardsim::layer2 {

// ---------------------------------------------------------------------------
// Two-way peg
// ---------------------------------------------------------------------------
//
// Parent-side value sits in lockbox outputs under the peg authority's
// validator; the child chain mints the equivalent value against a single-use
// authorization. Withdrawals burn child outputs and release parent value
// after the validation period. Accounting identity maintained throughout:
//
//   pool_total == auth_outstanding + child_circulating + pending_withdrawal
//
// so parent_locked() (pool minus unminted authorizations minus withdrawals
// in flight) equals the child's circulating supply at every step boundary.

struct Lockbox {
    ledger::OutputRef parent_ref{};
    uint64_t amount = 0;
    uint32_t child_chain_id = 0;
    enum class Status : uint8_t { locked, released };
    Status status = Status::locked;
    uint64_t unlock_eligible_slot = 0;  // set when a burn claims this value
    Digest owner{};
    uint64_t auth_nonce = 0;
};

struct MintAuthorization {
    uint64_t nonce = 0;
    uint32_t child_chain_id = 0;
    uint64_t amount = 0;
    Digest owner{};
    crypto::Signature authority_sig;  // parent peg authority over the fields above
};

Bytes mint_auth_payload(const MintAuthorization& auth);

struct BurnProof {
    uint32_t child_chain_id = 0;
    uint64_t amount = 0;
    Digest burner{};
    uint64_t burn_slot = 0;
    uint64_t nonce = 0;
    crypto::Signature operator_sig;  // child operator over the fields above
};

Bytes burn_proof_payload(const BurnProof& proof);

struct PegLockResult {
    Lockbox lockbox;
    MintAuthorization auth;
    ledger::Transaction tx;  // the applied parent transaction
};

// Parent-chain side of the peg, owned by one shard.
class ParentPeg {
  public:
    ParentPeg(crypto::KeyPair authority, uint32_t validation_period);

    const Digest& authority_address() const { return authority_.address; }
    const Bytes& authority_public_key() const { return authority_.public_key; }
    const ledger::Script& lockbox_validator() const { return lockbox_validator_; }

    void register_child_operator(uint32_t child_chain_id, Bytes operator_pubkey);

    // Spends `funding` (owned by `owner`) into a lockbox of `amount` plus
    // change; applies the transaction to `parent`. Throws on insufficient
    // value.
    PegLockResult peg_lock(ledger::UtxoSet& parent, const crypto::KeyPair& owner,
                           const ledger::OutputRef& funding, uint64_t amount,
                           uint32_t child_chain_id, uint64_t slot);

    // Releases `proof.amount` to the burner once the validation period has
    // elapsed; spends lockbox outputs oldest-first, re-locking any change.
    // Throws before the period (PeriodNotElapsed) and on replayed proofs.
    ledger::Transaction peg_unlock(ledger::UtxoSet& parent, const BurnProof& proof,
                                   uint64_t slot);

    // Called by the child side when an authorization is consumed.
    void note_minted(uint64_t nonce);

    // Registers a burn announced by the child: the amount moves from backing
    // circulation to awaiting withdrawal.
    void note_burned(uint64_t amount);

    uint64_t pool_total() const { return pool_total_; }
    uint64_t auth_outstanding() const { return auth_outstanding_; }
    uint64_t pending_withdrawal() const { return pending_withdrawal_; }

    // Parent value currently backing child circulation.
    uint64_t parent_locked() const {
        return pool_total_ - auth_outstanding_ - pending_withdrawal_;
    }

    // Ground truth from the ledger itself: total value under the lockbox
    // validator.
    uint64_t onchain_pool(const ledger::UtxoSet& parent) const;

    const std::vector<Lockbox>& lockboxes() const { return lockboxes_; }
    uint32_t validation_period() const { return validation_period_; }

  private:
    crypto::KeyPair authority_;
    ledger::Script lockbox_validator_;
    uint32_t validation_period_;
    uint64_t next_nonce_ = 1;
    std::vector<Lockbox> lockboxes_;
    std::set<uint64_t> minted_nonces_;
    std::set<uint64_t> used_burn_nonces_;
    std::map<uint32_t, Bytes> child_operators_;
    uint64_t pool_total_ = 0;
    uint64_t auth_outstanding_ = 0;
    uint64_t pending_withdrawal_ = 0;
};

// Child chain: a single-operator ledger. The operator applies transactions
// directly; the fraud-proof game, not consensus, is the security mechanism.
class ChildChain {
  public:
    ChildChain(uint32_t id, crypto::KeyPair operator_key);

    uint32_t id() const { return id_; }
    const crypto::KeyPair& operator_key() const { return operator_key_; }
    const ledger::UtxoSet& state() const { return state_; }
    uint64_t circulating() const { return circulating_; }

    // Mints exactly the authorized amount to the authorizing owner. Throws
    // on a reused nonce or a bad authority signature.
    ledger::OutputRef peg_mint(const MintAuthorization& auth, ByteSpan authority_pubkey);

    // Ordinary child transaction; returns false (untouched state) if invalid.
    bool apply_tx(const ledger::Transaction& tx, uint64_t slot);

    // Destroys outputs totaling their combined value and issues a signed
    // burn proof for the parent.
    BurnProof peg_burn(const crypto::KeyPair& owner, std::span<const ledger::OutputRef> refs,
                       uint64_t slot);

    const std::vector<ledger::Transaction>& applied_txs() const { return applied_; }

  private:
    uint32_t id_;
    crypto::KeyPair operator_key_;
    ledger::UtxoSet state_;
    uint64_t circulating_ = 0;
    uint64_t next_burn_nonce_ = 1;
    uint64_t mint_counter_ = 0;
    std::set<uint64_t> used_mint_nonces_;
    std::vector<ledger::Transaction> applied_;
};

// ---------------------------------------------------------------------------
// Optimistic rollup
// ---------------------------------------------------------------------------

// State root: Merkle root over the serialized UTXO entries sorted by ref
// bytes. Recomputable by anyone holding the state.
Digest state_root(const ledger::UtxoSet& state);

struct Batch {
    uint64_t slot = 0;  // replay slot; part of the batch identity
    std::vector<ledger::Transaction> txs;
    // Peg deposits entering the child between cuts. They are part of the
    // batch data so replay is self-contained.
    std::vector<std::pair<ledger::OutputRef, ledger::Output>> deposits;
};

// Commits to tx ids followed by deposit entries.
Digest batch_tx_root(const Batch& batch);

struct BatchCommitment {
    uint64_t batch_index = 0;
    Digest prev_state_root{};
    Digest post_state_root{};
    Digest tx_data_root{};
    enum class Status : uint8_t { pending, finalized, rolled_back };
    Status status = Status::pending;
};

const char* batch_status_name(BatchCommitment::Status s);

// Replays the batch in order under ledger rules; invalid transactions are
// skipped deterministically and contribute nothing, so a commitment claiming
// their effects is fraudulent.
Digest rollup_replay(const Batch& batch, const ledger::UtxoSet& pre_state);

struct StateWitness {
    std::vector<std::pair<ledger::OutputRef, ledger::Output>> entries;  // sorted by ref
};

StateWitness make_witness(const ledger::UtxoSet& state);
Digest witness_root(const StateWitness& witness);
ledger::UtxoSet witness_state(const StateWitness& witness);

struct FraudProof {
    uint64_t batch_index = 0;
    // First invalid transaction when the batch has one, otherwise 0; UINT64_MAX
    // when the batch is empty and the fraud is in the root alone.
    uint64_t tx_index = 0;
    ledger::Transaction tx;
    crypto::MerkleProof inclusion;  // against the commitment's tx_data_root
    StateWitness pre_state;         // binds to prev_state_root
};

// Parent-side commitment chain with desk-scale data availability (full batch
// bytes retained for challengers and the verifier).
class RollupContract {
  public:
    explicit RollupContract(Digest genesis_root);

    const Digest& head_root() const;
    const std::vector<BatchCommitment>& commitments() const { return commitments_; }
    const std::vector<Batch>& batches() const { return batches_; }
    const Digest& genesis_root() const { return genesis_root_; }

    // Appends a Pending commitment. No execution check happens here; batches
    // are confirmed optimistically. Throws when prev_root mismatches the
    // chain head.
    const BatchCommitment& commit(Batch batch, const Digest& prev_root,
                                  const Digest& claimed_post_root);

    // Marks every commitment at least `age` batches behind the head as
    // finalized.
    void finalize_older_than(uint64_t age);

    friend std::optional<FraudProof> fraud_prove(const RollupContract& contract,
                                                 size_t batch_index,
                                                 const StateWitness& pre_state);
    friend bool fraud_verify(RollupContract& contract, const FraudProof& proof,
                             std::string* why);

  private:
    Digest genesis_root_;
    std::vector<BatchCommitment> commitments_;
    std::vector<Batch> batches_;
};

// Emits a proof iff replaying the batch over the witness state contradicts
// the claimed post root. The witness must bind to the commitment's prev
// root.
std::optional<FraudProof> fraud_prove(const RollupContract& contract, size_t batch_index,
                                      const StateWitness& pre_state);

// Re-executes on the verifier side; on a confirmed mismatch rolls back the
// target batch and every later commitment. Invalid proofs are rejected with
// no state change.
bool fraud_verify(RollupContract& contract, const FraudProof& proof,
                  std::string* why = nullptr);

}  // namespace shardsim::layer2
