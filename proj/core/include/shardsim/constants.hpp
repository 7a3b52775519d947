#pragma once

#include <cstdint>

namespace shardsim {

// Hash function for the whole repository: SHA-256. Every digest, Merkle
// node, proof-of-work and VRF value is derived from it; changing it
// invalidates all frozen test vectors.
inline constexpr const char* kHashName = "SHA-256";

// Ledger bounds.
inline constexpr size_t kDatumMaxBytes = 1024;
inline constexpr size_t kScriptMaxDepth = 32;
inline constexpr uint64_t kScriptStepBudget = 10'000;

// A datum of exactly one 0xFF byte marks a contract state machine's final
// state; spending it releases the continuity requirement.
inline constexpr uint8_t kTerminalDatumByte = 0xFF;

// Proof-of-work identity search gives up after this many nonce attempts.
inline constexpr uint64_t kPowMaxAttempts = 1ULL << 32;
inline constexpr uint32_t kPowMaxDifficulty = 24;

// Epoch formation retries (salted re-draws) before giving up on the
// minimum-shard-size constraint.
inline constexpr uint32_t kMaxFormationSalts = 64;

}  // namespace shardsim
