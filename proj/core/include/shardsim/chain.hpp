#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "shardsim/crypto.hpp"
#include "shardsim/digest.hpp"
#include "shardsim/ledger.hpp"
#include "shardsim/merkle.hpp"

namespace shardsim::chain {

struct BlockHeader {
    uint64_t timestamp = 0;  // simulation slot, not wall-clock
    uint64_t nonce = 0;      // retained for structural fidelity; always 0
    Digest tx_root{};
    Digest prev_hash{};
    Digest producer{};
    Digest block_hash{};
};

struct Vote {
    Digest voter{};
    crypto::Signature sig;  // over block_hash
};

struct Block {
    BlockHeader header;
    std::vector<ledger::Transaction> transactions;
    std::vector<Vote> votes;
};

struct QuorumResult {
    bool accepted = false;
    uint32_t valid_votes = 0;
    uint32_t required = 0;
};

// floor(2n/3) + 1
uint32_t quorum_threshold(size_t shard_size);

Digest header_hash(const BlockHeader& h);  // over all fields except block_hash
Digest tx_root_of(std::span<const ledger::Transaction> txs);

// Throws Error listing the clashing refs if two transactions share an input.
Block build_block(std::vector<ledger::Transaction> txs, const Digest& prev_hash,
                  uint64_t slot, const Digest& producer);

enum class BlockViolation : uint8_t {
    bad_prev_hash,
    bad_tx_root,
    bad_block_hash,
    invalid_tx,
    intra_block_conflict,
};

const char* block_violation_name(BlockViolation v);

struct BlockReport {
    struct Entry {
        BlockViolation kind;
        int tx_index;  // -1 when not tx-specific
        std::string detail;
    };
    std::vector<Entry> violations;
    bool ok() const { return violations.empty(); }
    bool has(BlockViolation kind) const;
    std::string to_string() const;
};

// Hook for transactions settled by an external protocol (cross-shard commits
// whose inputs live on other shards): nullopt = not recognized, validate as
// an ordinary ledger tx; true = externally validated, apply outputs only;
// false = recognized and invalid.
using ForeignTxCheck = std::function<std::optional<bool>(const ledger::Transaction&)>;

BlockReport validate_block(const ledger::UtxoSet& utxo, const Block& block,
                           const Digest& expected_prev_hash,
                           const ForeignTxCheck& foreign = {});

// Precondition: validate_block reported no violations. Applies transactions
// in order; throws (with the set untouched) otherwise.
ledger::UtxoSet apply_block(const ledger::UtxoSet& utxo, const Block& block,
                            const ForeignTxCheck& foreign = {});
void apply_block_in_place(ledger::UtxoSet& utxo, const Block& block,
                          const ForeignTxCheck& foreign = {});

// Counts valid signatures over block_hash from distinct shard members.
QuorumResult collect_votes(const Block& block, std::span<const Vote> votes,
                           std::span<const Digest> shard_members,
                           const std::function<ByteSpan(const Digest&)>& pubkey_of);

struct ChainReport {
    bool ok = true;
    size_t first_bad_index = 0;
    std::string reason;
};

// Verifies hash-pointer linkage, header hashes and tx roots; reports the
// first broken index. Blocks before it are untouched by later mutations.
ChainReport validate_chain(const Digest& genesis_hash, std::span<const Block> blocks);

Bytes block_bytes(const Block& block);
Block parse_block(Reader& r);

}  // namespace shardsim::chain
