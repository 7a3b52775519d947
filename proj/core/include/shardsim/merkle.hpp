#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "shardsim/bytes.hpp"
#include "shardsim/digest.hpp"

namespace shardsim::crypto {

// Binary Merkle tree. Parents are hash256(left || right), never sorted; an
// odd node at any level is paired with itself (duplicate-last rule). A
// single leaf is its own root; an empty leaf list hashes the empty string.

enum class Side : uint8_t { left = 0, right = 1 };  // where the sibling sits

struct ProofStep {
    Digest sibling;
    Side side;
};

struct MerkleProof {
    uint64_t leaf_index = 0;
    std::vector<ProofStep> path;  // ordered leaf level -> root level
};

class MerkleTree {
  public:
    static MerkleTree build(std::vector<Digest> leaves);

    const Digest& root() const { return root_; }
    size_t leaf_count() const { return levels_.empty() ? 0 : levels_[0].size(); }

    // levels()[0] are the leaves; the last level holds exactly the root.
    // Odd duplicates are implicit, not stored.
    const std::vector<std::vector<Digest>>& levels() const { return levels_; }

    MerkleProof prove(size_t index) const;  // throws on out-of-range index

  private:
    std::vector<std::vector<Digest>> levels_;
    Digest root_;
};

Digest merkle_root(std::span<const Digest> leaves);

// True iff replaying the path from the leaf reproduces the root and the side
// sequence is consistent with leaf_index (the sides determine the index bit
// by bit, so a tampered index cannot verify).
bool merkle_verify(const Digest& root, const Digest& leaf, const MerkleProof& proof);

}  // namespace shardsim::crypto
