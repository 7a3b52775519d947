#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <unordered_map>
#include <vector>

#include "shardsim/chain.hpp"
#include "shardsim/crypto.hpp"
#include "shardsim/digest.hpp"
#include "shardsim/ledger.hpp"
#include "shardsim/sharding.hpp"

namespace shardsim::crossshard {

// Client-coordinated atomic commit: initialize, lock, unlock. Input shards
// lock the UTXOs a transaction spends and answer with quorum-signed proofs
// of acceptance or rejection; the client forwards all PoAs to the output
// shard, which commits and relays the certificate back to the input shards
// for the final deletion. Any PoR, or client silence past the deadline,
// rolls every lock back.

enum class SessionState : uint8_t { initialized, locked, committed, rolled_back };

const char* session_state_name(SessionState s);

enum class Verdict : uint8_t { reject = 0, accept = 1 };

enum class RejectReason : uint8_t {
    none = 0,
    unknown_input,
    already_locked,
    bad_signature,
    script_rejected,
    outside_validity,
};

const char* reject_reason_name(RejectReason r);

// Proof-of-acceptance (verdict = accept) or proof-of-rejection. Quorum
// signatures cover (session id, shard, epoch, verdict, locked value); the
// locked value lets the output shard enforce conservation across shards.
// The reject reason is diagnostic only, never consensus-critical.
struct ShardProof {
    Digest session_id{};
    uint32_t shard = 0;
    uint64_t epoch = 0;
    Verdict verdict = Verdict::reject;
    uint64_t locked_value = 0;
    RejectReason reason = RejectReason::none;
    std::vector<chain::Vote> signatures;

    bool is_acceptance() const { return verdict == Verdict::accept; }
};

Bytes proof_payload(const Digest& session_id, uint32_t shard, uint64_t epoch, Verdict verdict,
                    uint64_t locked_value);

using PubkeyFn = std::function<ByteSpan(const Digest&)>;

// Valid iff at least floor(2n/3)+1 distinct shard members signed the payload.
bool proof_quorum_valid(const ShardProof& proof, std::span<const Digest> shard_members,
                        const PubkeyFn& pubkey_of);

struct CommitCertificate {
    Digest session_id{};
    std::vector<ShardProof> acceptances;  // one per input shard
};

struct AbortCertificate {
    Digest session_id{};
    ShardProof rejection;
};

struct CrossShardSession {
    ledger::Transaction tx;
    Digest session_id{};  // = tx_id
    std::vector<uint32_t> input_shards;  // sorted, unique
    uint32_t output_shard = 0;
    SessionState state = SessionState::initialized;
    std::map<uint32_t, std::vector<ledger::OutputRef>> refs_by_shard;
    uint64_t deadline_slot = 0;
};

// Throws when the transaction is confined to a single shard (normal path).
CrossShardSession initiate(const ledger::Transaction& tx, uint32_t shard_count,
                           const sharding::RoutingTable& table, uint64_t now,
                           uint64_t lock_deadline_slots);

// Locked refs stay in the UTXO set but are hidden from ordinary spending;
// timeout restoration is O(1) per ref.
class LockOverlay {
  public:
    struct Entry {
        Digest session{};
        uint64_t deadline = 0;
    };

    bool is_locked(const ledger::OutputRef& ref) const { return locks_.count(ref) != 0; }
    const Entry* find(const ledger::OutputRef& ref) const;

    // False (and no change) when another session holds the ref.
    bool lock(const ledger::OutputRef& ref, const Digest& session, uint64_t deadline);
    void unlock(const ledger::OutputRef& ref);

    // Rolls back every lock with deadline strictly before `now`; returns the
    // affected sessions and their refs.
    std::vector<std::pair<Digest, std::vector<ledger::OutputRef>>> sweep(uint64_t now);

    std::vector<ledger::OutputRef> refs_of(const Digest& session) const;
    size_t size() const { return locks_.size(); }

  private:
    std::unordered_map<ledger::OutputRef, Entry, ledger::OutputRefHash> locks_;
};

struct LockOutcome {
    ShardProof proof;
    std::vector<ledger::OutputRef> locked_refs;  // empty on rejection
};

// Validates this shard's slice of the session against its UTXO set and lock
// overlay; on acceptance locks the refs as a group. `signers` are the
// members willing to sign the verdict; the proof carries whatever quorum
// they form.
LockOutcome shard_lock(const CrossShardSession& session, uint32_t shard, uint64_t epoch,
                       uint64_t now, const ledger::UtxoSet& utxo, LockOverlay& overlay,
                       std::span<const crypto::KeyPair* const> signers);

// Client side: all input shards answered with acceptance proofs. Throws on a
// missing shard, a rejection, or a proof failing its quorum check.
using QuorumCheck = std::function<bool(const ShardProof&)>;
CommitCertificate client_commit(const CrossShardSession& session,
                                std::span<const ShardProof> proofs,
                                const QuorumCheck& quorum_ok);

// Output-shard side: certificate carries a quorum-valid PoA from every input
// shard and the attested locked values cover outputs plus fee.
bool verify_commit_certificate(const CommitCertificate& cert, const CrossShardSession& session,
                               const QuorumCheck& quorum_ok, std::string* why = nullptr);

}  // namespace shardsim::crossshard
