#include "shardsim/merkle.hpp"

#include "shardsim/crypto.hpp"
#include "shardsim/error.hpp"

namespace shardsim::crypto {

namespace {

Digest hash_pair(const Digest& left, const Digest& right) {
    return hash256({left.span(), right.span()});
}

}  // namespace

MerkleTree MerkleTree::build(std::vector<Digest> leaves) {
    MerkleTree tree;
    if (leaves.empty()) {
        tree.root_ = hash256(ByteSpan{});
        return tree;
    }
    tree.levels_.push_back(std::move(leaves));
    while (tree.levels_.back().size() > 1) {
        const auto& prev = tree.levels_.back();
        std::vector<Digest> next;
        next.reserve((prev.size() + 1) / 2);
        for (size_t i = 0; i < prev.size(); i += 2) {
            const Digest& left = prev[i];
            const Digest& right = (i + 1 < prev.size()) ? prev[i + 1] : prev[i];
            next.push_back(hash_pair(left, right));
        }
        tree.levels_.push_back(std::move(next));
    }
    tree.root_ = tree.levels_.back()[0];
    return tree;
}

MerkleProof MerkleTree::prove(size_t index) const {
    if (levels_.empty() || index >= levels_[0].size())
        throw Error("merkle: proof index out of range");
    MerkleProof proof;
    proof.leaf_index = index;
    size_t idx = index;
    for (size_t lvl = 0; lvl + 1 < levels_.size(); ++lvl) {
        const auto& nodes = levels_[lvl];
        size_t sib = (idx % 2 == 0) ? idx + 1 : idx - 1;
        if (sib >= nodes.size()) sib = idx;  // odd tail pairs with itself
        proof.path.push_back({nodes[sib], idx % 2 == 0 ? Side::right : Side::left});
        idx /= 2;
    }
    return proof;
}

Digest merkle_root(std::span<const Digest> leaves) {
    return MerkleTree::build(std::vector<Digest>(leaves.begin(), leaves.end())).root();
}

bool merkle_verify(const Digest& root, const Digest& leaf, const MerkleProof& proof) {
    if (proof.path.size() >= 64) return false;
    Digest acc = leaf;
    uint64_t index = 0;
    for (size_t i = 0; i < proof.path.size(); ++i) {
        const ProofStep& step = proof.path[i];
        // a right-hand sibling means the node is a left child: index bit 0
        if (step.side == Side::left) index |= uint64_t(1) << i;
        acc = step.side == Side::right ? hash_pair(acc, step.sibling)
                                       : hash_pair(step.sibling, acc);
    }
    if (index != proof.leaf_index) return false;
    return acc == root;
}

}  // namespace shardsim::crypto
