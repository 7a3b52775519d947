#pragma once

#include <cstdint>
#include <string>

#include "shardsim/crypto.hpp"

namespace shardsim::sim {

struct WorkloadConfig {
    double intra_shard_payment = 0;     // expected txs per shard per slot
    double cross_shard_payment = 0;     // expected sessions per slot (global)
    double contract_step = 0;           // expected contract steps per slot
    double peg_op = 0;                  // expected peg state-machine advances per slot
    uint32_t rollup_batch_every = 0;    // child batch cadence in slots (0 = off)
    double vanishing_client_fraction = 0;  // fraction of clients that vanish mid-session
};

struct LatencyConfig {
    uint32_t min_slots = 1;
    uint32_t max_slots = 1;
};

struct ByzantineConfig {
    double fraction = 0;                  // of validator nodes
    std::string behavior = "sign_invalid";  // sign_invalid|equivocate|silent|bad_coordinator
    int32_t target_shard = -1;            // >= 0: grind identities into this shard
    bool fraudulent_batcher = false;      // child operator corrupts claimed state roots
};

struct ScenarioConfig {
    uint64_t seed = 1;
    uint32_t nodes = 8;
    uint32_t shard_count = 1;      // power of two
    uint32_t difficulty = 4;       // PoW identity leading zero bits
    uint32_t epoch_length = 8;     // slots
    uint32_t epochs = 2;
    uint32_t min_shard_size = 4;
    uint32_t block_capacity = 64;  // txs per block
    uint32_t users_per_shard = 8;
    uint64_t genesis_value = 1000;
    uint32_t genesis_outputs_per_user = 2;
    uint32_t genesis_foreign_outputs_per_user = 0;  // session fuel on non-home shards
    ByzantineConfig byzantine;
    WorkloadConfig workload;
    LatencyConfig latency;
    uint32_t lock_deadline = 0;  // slots from initiation; 0 = 2 * epoch_length
    uint32_t validation_period = 16;
    std::string sig_scheme = "ed25519";
    uint32_t layer2_parent_shard = 0;  // hosts the peg and the rollup contract

    uint64_t effective_lock_deadline() const {
        return lock_deadline ? lock_deadline : 2ULL * epoch_length;
    }
    crypto::SigScheme scheme() const { return crypto::sig_scheme_from_name(sig_scheme); }

    // Strict parse: unknown keys anywhere are rejected; // comments allowed.
    static ScenarioConfig from_json_text(const std::string& text);
    static ScenarioConfig from_file(const std::string& path);

    void validate() const;  // throws Error with a field-level message
    std::string to_json_text() const;
};

}  // namespace shardsim::sim
