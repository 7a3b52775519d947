#include "shardsim/chain.hpp"

#include <unordered_set>

#include "shardsim/error.hpp"
#include "shardsim/serial.hpp"

namespace shardsim::chain {

uint32_t quorum_threshold(size_t shard_size) {
    return static_cast<uint32_t>((2 * shard_size) / 3 + 1);
}

Digest header_hash(const BlockHeader& h) {
    Writer w;
    w.u64(h.timestamp);
    w.u64(h.nonce);
    w.digest(h.tx_root);
    w.digest(h.prev_hash);
    w.digest(h.producer);
    return crypto::hash256(as_span(w.bytes()));
}

Digest tx_root_of(std::span<const ledger::Transaction> txs) {
    std::vector<Digest> ids;
    ids.reserve(txs.size());
    for (const auto& tx : txs) ids.push_back(ledger::tx_id(tx));
    return crypto::merkle_root(ids);
}

Block build_block(std::vector<ledger::Transaction> txs, const Digest& prev_hash,
                  uint64_t slot, const Digest& producer) {
    std::unordered_set<ledger::OutputRef, ledger::OutputRefHash> seen;
    for (const auto& tx : txs)
        for (const auto& in : tx.inputs)
            if (!seen.insert(in.ref).second)
                throw Error("build_block: conflicting input " + in.ref.tx_id.hex() + ":" +
                            std::to_string(in.ref.index));
    Block b;
    b.header.timestamp = slot;
    b.header.nonce = 0;
    b.header.prev_hash = prev_hash;
    b.header.producer = producer;
    b.header.tx_root = tx_root_of(txs);
    b.transactions = std::move(txs);
    b.header.block_hash = header_hash(b.header);
    return b;
}

const char* block_violation_name(BlockViolation v) {
    switch (v) {
        case BlockViolation::bad_prev_hash: return "BadPrevHash";
        case BlockViolation::bad_tx_root: return "BadTxRoot";
        case BlockViolation::bad_block_hash: return "BadBlockHash";
        case BlockViolation::invalid_tx: return "InvalidTx";
        case BlockViolation::intra_block_conflict: return "IntraBlockConflict";
    }
    return "?";
}

bool BlockReport::has(BlockViolation kind) const {
    for (const auto& v : violations)
        if (v.kind == kind) return true;
    return false;
}

std::string BlockReport::to_string() const {
    if (ok()) return "valid";
    std::string s;
    for (const auto& v : violations) {
        if (!s.empty()) s += "; ";
        s += block_violation_name(v.kind);
        if (v.tx_index >= 0) s += "[" + std::to_string(v.tx_index) + "]";
        if (!v.detail.empty()) s += ": " + v.detail;
    }
    return s;
}

BlockReport validate_block(const ledger::UtxoSet& utxo, const Block& block,
                           const Digest& expected_prev_hash, const ForeignTxCheck& foreign) {
    BlockReport report;
    auto violate = [&](BlockViolation kind, int idx, std::string detail = {}) {
        report.violations.push_back({kind, idx, std::move(detail)});
    };

    if (block.header.prev_hash != expected_prev_hash)
        violate(BlockViolation::bad_prev_hash, -1);
    if (block.header.tx_root != tx_root_of(block.transactions))
        violate(BlockViolation::bad_tx_root, -1);
    if (block.header.block_hash != header_hash(block.header))
        violate(BlockViolation::bad_block_hash, -1);

    std::unordered_set<ledger::OutputRef, ledger::OutputRefHash> seen;
    for (size_t t = 0; t < block.transactions.size(); ++t)
        for (const auto& in : block.transactions[t].inputs)
            if (!seen.insert(in.ref).second)
                violate(BlockViolation::intra_block_conflict, int(t));

    // Sequential validation on a scratch set so chained spends within the
    // block resolve.
    ledger::UtxoSet scratch = utxo;
    for (size_t t = 0; t < block.transactions.size(); ++t) {
        const auto& tx = block.transactions[t];
        std::optional<bool> external = foreign ? foreign(tx) : std::nullopt;
        if (external.has_value()) {
            if (!*external) violate(BlockViolation::invalid_tx, int(t), "foreign tx rejected");
            else {
                Digest id = ledger::tx_id(tx);
                for (uint32_t i = 0; i < tx.outputs.size(); ++i)
                    if (!scratch.contains({id, i})) scratch.insert({id, i}, tx.outputs[i]);
            }
            continue;
        }
        ledger::ValidationReport r = ledger::validate_tx(scratch, tx, block.header.timestamp);
        if (!r.ok()) {
            violate(BlockViolation::invalid_tx, int(t), r.to_string());
            continue;
        }
        ledger::apply_tx_in_place(scratch, tx);
    }
    return report;
}

void apply_block_in_place(ledger::UtxoSet& utxo, const Block& block,
                          const ForeignTxCheck& foreign) {
    for (const auto& tx : block.transactions) {
        std::optional<bool> external = foreign ? foreign(tx) : std::nullopt;
        if (external.has_value()) {
            if (!*external) throw Error("apply_block: invalid foreign tx");
            Digest id = ledger::tx_id(tx);
            for (uint32_t i = 0; i < tx.outputs.size(); ++i)
                utxo.insert({id, i}, tx.outputs[i]);
            continue;
        }
        ledger::apply_tx_in_place(utxo, tx);
    }
}

ledger::UtxoSet apply_block(const ledger::UtxoSet& utxo, const Block& block,
                            const ForeignTxCheck& foreign) {
    ledger::UtxoSet next = utxo;
    apply_block_in_place(next, block, foreign);
    return next;
}

QuorumResult collect_votes(const Block& block, std::span<const Vote> votes,
                           std::span<const Digest> shard_members,
                           const std::function<ByteSpan(const Digest&)>& pubkey_of) {
    QuorumResult result;
    result.required = quorum_threshold(shard_members.size());
    std::unordered_set<Digest, DigestHash> counted;
    for (const auto& vote : votes) {
        bool member = false;
        for (const auto& m : shard_members)
            if (m == vote.voter) {
                member = true;
                break;
            }
        if (!member) continue;
        if (counted.count(vote.voter)) continue;  // one vote per member
        ByteSpan pk = pubkey_of(vote.voter);
        if (pk.empty()) continue;
        if (crypto::address_of(pk) != vote.voter) continue;
        if (!crypto::verify_sig(pk, block.header.block_hash.span(), vote.sig)) continue;
        counted.insert(vote.voter);
    }
    result.valid_votes = static_cast<uint32_t>(counted.size());
    result.accepted = result.valid_votes >= result.required;
    return result;
}

ChainReport validate_chain(const Digest& genesis_hash, std::span<const Block> blocks) {
    Digest prev = genesis_hash;
    for (size_t i = 0; i < blocks.size(); ++i) {
        const Block& b = blocks[i];
        if (b.header.prev_hash != prev)
            return {false, i, "prev-hash link broken"};
        if (b.header.block_hash != header_hash(b.header))
            return {false, i, "stored block hash mismatches header"};
        if (b.header.tx_root != tx_root_of(b.transactions))
            return {false, i, "tx root mismatches transactions"};
        prev = b.header.block_hash;
    }
    return {};
}

Bytes block_bytes(const Block& block) {
    Writer w;
    w.u64(block.header.timestamp);
    w.u64(block.header.nonce);
    w.digest(block.header.tx_root);
    w.digest(block.header.prev_hash);
    w.digest(block.header.producer);
    w.digest(block.header.block_hash);
    w.u32(static_cast<uint32_t>(block.transactions.size()));
    for (const auto& tx : block.transactions) ledger::serialize_tx(w, tx, true);
    w.u32(static_cast<uint32_t>(block.votes.size()));
    for (const auto& v : block.votes) {
        // the voter address identifies the key; no redundant signer bytes
        w.digest(v.voter);
        w.u8(static_cast<uint8_t>(v.sig.scheme));
        w.var_bytes(as_span(v.sig.bytes));
    }
    return w.take();
}

Block parse_block(Reader& r) {
    Block b;
    b.header.timestamp = r.u64();
    b.header.nonce = r.u64();
    b.header.tx_root = r.digest();
    b.header.prev_hash = r.digest();
    b.header.producer = r.digest();
    b.header.block_hash = r.digest();
    uint32_t n_tx = r.u32();
    b.transactions.reserve(n_tx);
    for (uint32_t i = 0; i < n_tx; ++i) b.transactions.push_back(ledger::parse_tx(r));
    uint32_t n_votes = r.u32();
    b.votes.reserve(n_votes);
    for (uint32_t i = 0; i < n_votes; ++i) {
        Vote v;
        v.voter = r.digest();
        uint8_t scheme = r.u8();
        if (scheme > 1) throw Error("block: bad vote scheme tag");
        v.sig.scheme = static_cast<crypto::SigScheme>(scheme);
        v.sig.bytes = r.var_bytes();
        b.votes.push_back(std::move(v));
    }
    return b;
}

}  // namespace shardsim::chain
