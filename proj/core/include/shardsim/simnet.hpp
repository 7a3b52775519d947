#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "shardsim/crossshard.hpp"
#include "shardsim/digest.hpp"
#include "shardsim/layer2.hpp"
#include "shardsim/ledger.hpp"
#include "shardsim/scenario.hpp"
#include "shardsim/sharding.hpp"
#include "shardsim/transcript.hpp"

namespace shardsim::sim {

// ---------------------------------------------------------------------------
// Event queue
// ---------------------------------------------------------------------------

// Protocol message payloads carried by simulation events.
struct PTxSubmit { ledger::Transaction tx; };              // client -> DSS
struct PTxRouted { ledger::Transaction tx; };              // DSS -> home shard
struct PLockRequest { crossshard::CrossShardSession session; };  // client -> input shard
struct PProof { crossshard::ShardProof proof; };           // input shard -> client
struct PCommitCert {                                       // client -> output shard
    crossshard::CrossShardSession session;
    crossshard::CommitCertificate cert;
};
struct PCertForward {                                      // output shard -> input shard
    crossshard::CrossShardSession session;
    crossshard::CommitCertificate cert;
};
struct PAbortCert {                                        // client -> locked shards
    crossshard::CrossShardSession session;
    crossshard::AbortCertificate cert;
};
struct PPegLock { uint32_t user = 0; ledger::OutputRef funding; uint64_t amount = 0; };
struct PMintAuth { layer2::MintAuthorization auth; };
struct PChildPay { uint32_t user = 0; };
struct PBurnRequest { uint32_t user = 0; };
struct PBurnProof { layer2::BurnProof proof; };
struct PBatchCommit {                                      // child operator -> parent shard
    layer2::Batch batch;
    Digest prev_root;
    Digest post_root;
    uint64_t child_index = 0;
};
struct PBatchObserved {                                    // child operator -> watcher
    layer2::Batch batch;
    Digest prev_root;
    Digest post_root;
    uint32_t retries = 0;
};
struct PFraudProof { layer2::FraudProof proof; };          // watcher -> parent shard
struct PRollbackNotice { uint64_t from_child_index = 0; };  // parent -> child operator
struct PEpochSummary { sharding::EpochSummary summary; };  // driver broadcast
struct PRaw { Bytes data; };                               // scheduler tests

using Payload = std::variant<PTxSubmit, PTxRouted, PLockRequest, PProof, PCommitCert,
                             PCertForward, PAbortCert, PPegLock, PMintAuth, PChildPay,
                             PBurnRequest, PBurnProof, PBatchCommit, PBatchObserved,
                             PFraudProof, PRollbackNotice, PEpochSummary, PRaw>;

inline constexpr uint32_t kBroadcast = UINT32_MAX;

struct SimEvent {
    uint64_t deliver_slot = 0;
    uint64_t seq = 0;  // tie-breaker: global enqueue counter
    uint32_t from = 0;
    uint32_t to = 0;
    Payload payload;
};

// Deterministic event queue: strict (deliver_slot, seq) order, seq assigned
// at enqueue time from a global counter. Same-slot enqueues land after the
// current cursor; enqueuing into the past throws.
class Scheduler {
  public:
    void set_broadcast_targets(std::vector<uint32_t> targets) {
        broadcast_targets_ = std::move(targets);
    }

    uint64_t enqueue(uint64_t deliver_slot, uint32_t from, uint32_t to, Payload payload);

    // One event per broadcast target, each with its own latency draw.
    std::vector<uint64_t> enqueue_broadcast(uint32_t from, const Payload& payload,
                                            const std::function<uint64_t()>& latency_draw,
                                            uint64_t now);

    // Delivers the next event scheduled for the current slot. False when the
    // current slot is drained.
    bool step(SimEvent& out);

    void advance_slot() { ++current_slot_; }
    void advance_to(uint64_t slot);

    uint64_t current_slot() const { return current_slot_; }
    uint64_t processed() const { return processed_; }
    size_t pending() const { return pending_; }

  private:
    uint64_t current_slot_ = 0;
    uint64_t next_seq_ = 0;
    uint64_t processed_ = 0;
    size_t pending_ = 0;
    std::map<uint64_t, std::deque<SimEvent>> by_slot_;
    std::vector<uint32_t> broadcast_targets_;
};

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

struct EpochMetrics {
    uint64_t epoch = 0;
    std::vector<uint64_t> committed_tx_per_shard;
    uint64_t committed_tx_total = 0;
    uint64_t blocks_committed = 0;
    uint64_t fees_burned = 0;
    uint64_t sessions_initiated = 0;
    uint64_t sessions_committed = 0;
    uint64_t sessions_rolled_back = 0;
    uint64_t late_certificates = 0;
    uint64_t locks_outstanding_end = 0;
    uint64_t workload_emitted = 0;
    uint64_t workload_committed = 0;
    uint64_t invalid_blocks_proposed = 0;
    uint64_t equivocations = 0;
    uint64_t coordinator_mismatches = 0;
    uint64_t formation_salt = 0;
    uint64_t batches_committed = 0;
    uint64_t batches_rolled_back = 0;
    uint64_t fraud_proofs_accepted = 0;
    uint64_t fraud_proofs_rejected = 0;
    uint64_t pegs_locked = 0;
    uint64_t pegs_minted = 0;
    uint64_t pegs_burned = 0;
    uint64_t pegs_unlocked = 0;
    uint64_t max_byz_shard_permille = 0;
};

struct SimResult {
    ScenarioConfig config;
    std::vector<EpochMetrics> epochs;

    uint64_t total_committed_tx = 0;
    uint64_t total_sessions_initiated = 0;
    uint64_t total_sessions_committed = 0;
    uint64_t total_sessions_rolled_back = 0;
    uint64_t total_workload_emitted = 0;
    uint64_t total_workload_committed = 0;
    uint64_t final_locks_outstanding = 0;

    // Bitwise-stable function of (config, seed): canonical serialization of
    // every integral metric, hashed.
    Digest digest() const;

    std::string to_json() const;
    std::string epochs_csv() const;

    // Mean committed transactions per epoch, the scaling-report input.
    uint64_t committed_per_epoch() const {
        return epochs.empty() ? 0 : total_committed_tx / epochs.size();
    }
};

// Executes the scenario end to end: identity establishment, shard formation,
// per-slot transaction processing (DSS routing, intra-shard blocks,
// cross-shard sessions, layer-2 operations), epoch finalization. With
// `parallel` set, per-shard consensus sub-rounds run on worker threads;
// results merge in shard order, so the digest is unchanged.
SimResult run_scenario(const ScenarioConfig& config, Transcript* transcript = nullptr,
                       bool parallel = false);

}  // namespace shardsim::sim
