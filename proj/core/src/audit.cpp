#include "shardsim/audit.hpp"

#include <map>
#include <optional>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "json_codec.hpp"
#include "shardsim/error.hpp"
#include "shardsim/serial.hpp"
#include "shardsim/transcript.hpp"

namespace shardsim::audit {

using codec::json;
using codec::ordered_json;

namespace {

// The auditor keeps its own replay structures and rule checks, deliberately
// apart from ledger::validate_tx / chain::validate_block, so protocol bugs
// cannot hide behind shared code.

struct ReplayOutput {
    ledger::Output output;
};

using ShardMap = std::unordered_map<ledger::OutputRef, ReplayOutput, ledger::OutputRefHash>;

struct EpochRoster {
    std::vector<std::vector<Digest>> membership;
};

struct LockEvent {
    uint64_t slot = 0;
    uint32_t shard = 0;
    uint64_t deadline = 0;
    std::vector<ledger::OutputRef> refs;
    bool released = false;
    uint64_t release_slot = 0;
};

struct SessionInfo {
    std::vector<uint32_t> input_shards;
    uint32_t output_shard = 0;
    std::optional<ledger::Transaction> tx;
    std::set<uint32_t> committed_shards;
    std::set<uint32_t> rolled_back_shards;
    std::set<uint32_t> locked_shards;
    uint64_t deleted_value = 0;
    bool settled_in_block = false;
    uint64_t init_slot = 0;
};

struct Auditor {
    AuditReport report;
    std::map<uint64_t, EpochRoster> rosters;
    std::map<Digest, Bytes> pubkeys;
    std::vector<ShardMap> shards;
    std::vector<Digest> heads;
    std::vector<uint64_t> heights;
    std::set<ledger::OutputRef> spent;  // global, forever
    std::map<Digest, SessionInfo> sessions;
    std::vector<LockEvent> locks;
    std::map<Digest, std::vector<size_t>> locks_by_session;
    std::set<Digest> committed_sessions;
    uint64_t last_slot = 0;
    uint32_t shard_count = 0;
    uint32_t validation_period = 0;
    uint64_t genesis_total = 0;
    uint64_t fees_total = 0;

    // peg accounting (event-ordered, exact)
    std::map<uint64_t, uint64_t> lock_amount_by_nonce;
    std::set<uint64_t> minted_nonces;
    std::map<uint64_t, std::pair<uint64_t, uint64_t>> burns;  // nonce -> (amount, slot)
    std::set<uint64_t> unlocked_burn_nonces;
    uint64_t peg_pool = 0, peg_unminted = 0, peg_circulating = 0, peg_pending = 0;

    // child chain replay
    ShardMap child_map;

    // rollup
    struct Commitment {
        Digest prev, post, tx_root;
        uint64_t slot = 0;
        uint64_t batch_slot = 0;
        std::vector<ledger::Transaction> txs;
        std::vector<std::pair<ledger::OutputRef, ledger::Output>> deposits;
        bool rolled_back = false;
    };
    std::vector<Commitment> commitments;

    void fail(const std::string& kind, const std::string& detail, uint64_t slot,
              int64_t shard = -1) {
        report.findings.push_back({kind, detail, slot, shard});
    }
};

// Independent script evaluation (same canonical semantics, separate code).
bool audit_eval(const ledger::Script& s, const ledger::Transaction& tx, const Digest& txid,
                uint64_t slot, const ledger::Output* spent_out,
                const ledger::Output* continuing, size_t depth = 0) {
    using K = ledger::Script::Kind;
    if (depth > kScriptMaxDepth) return false;
    switch (s.kind) {
        case K::const_true: return true;
        case K::const_false: return false;
        case K::signed_by: {
            for (const auto& in : tx.inputs) {
                if (in.signature.empty()) continue;
                if (crypto::hash256(as_span(in.signature.signer)) != s.address) continue;
                if (crypto::verify_sig(as_span(in.signature.signer), txid.span(), in.signature))
                    return true;
            }
            return false;
        }
        case K::after: return slot >= s.slot;
        case K::before: return slot < s.slot;
        case K::datum_equals: return spent_out && spent_out->datum == s.data;
        case K::next_datum_equals: return continuing && continuing->datum == s.data;
        case K::value_preserved:
            return spent_out && continuing && continuing->value >= spent_out->value;
        case K::continues_contract: return continuing != nullptr;
        case K::and_: {
            for (const auto& c : s.children)
                if (!audit_eval(c, tx, txid, slot, spent_out, continuing, depth + 1))
                    return false;
            return true;
        }
        case K::or_: {
            for (const auto& c : s.children)
                if (audit_eval(c, tx, txid, slot, spent_out, continuing, depth + 1)) return true;
            return false;
        }
        case K::not_:
            return !audit_eval(s.children[0], tx, txid, slot, spent_out, continuing, depth + 1);
    }
    return false;
}

const ledger::Output* unique_continuing(const ledger::Transaction& tx, const Digest& vh) {
    // datum-carrying outputs are the contract state; plain ones only count
    // when no stateful candidate exists
    const ledger::Output* stateful = nullptr;
    int stateful_n = 0;
    const ledger::Output* plain = nullptr;
    int plain_n = 0;
    for (const auto& o : tx.outputs) {
        if (ledger::script_hash(o.validator) != vh) continue;
        if (!o.datum.empty()) {
            stateful = &o;
            ++stateful_n;
        } else {
            plain = &o;
            ++plain_n;
        }
    }
    if (stateful_n > 0) return stateful_n == 1 ? stateful : nullptr;
    return plain_n == 1 ? plain : nullptr;
}

// Full independent transaction check against a single shard map. Returns a
// reason string on failure.
std::optional<std::string> audit_check_tx(Auditor& a, const ShardMap& map,
                                          const ledger::Transaction& tx, uint64_t slot) {
    if (tx.inputs.empty()) return "no inputs";
    if (slot < tx.valid_from || slot > tx.valid_to) return "outside validity range";
    std::set<ledger::OutputRef> seen;
    unsigned __int128 in_sum = 0;
    std::vector<const ledger::Output*> resolved;
    for (const auto& in : tx.inputs) {
        if (!seen.insert(in.ref).second) return "duplicate input within tx";
        auto it = map.find(in.ref);
        if (it == map.end()) return "unknown input " + in.ref.tx_id.hex().substr(0, 12);
        resolved.push_back(&it->second.output);
        in_sum += it->second.output.value;
    }
    unsigned __int128 out_sum = tx.fee;
    for (const auto& o : tx.outputs) out_sum += o.value;
    if (in_sum != out_sum) return "value imbalance";
    Digest id = ledger::tx_id(tx);
    for (const auto& in : tx.inputs) {
        if (in.signature.empty()) continue;
        if (!crypto::verify_sig(as_span(in.signature.signer), id.span(), in.signature))
            return "bad signature";
    }
    for (size_t i = 0; i < tx.inputs.size(); ++i) {
        const ledger::Output* out = resolved[i];
        Digest vh = ledger::script_hash(out->validator);
        if (!audit_eval(out->validator, tx, id, slot, out, unique_continuing(tx, vh)))
            return "script rejected at input " + std::to_string(i);
    }
    // continuity per distinct contract validator
    std::vector<Digest> validators;
    for (const auto* out : resolved) {
        if (!out->is_contract()) continue;
        Digest vh = ledger::script_hash(out->validator);
        bool known = false;
        for (const auto& v : validators) known = known || v == vh;
        if (!known) validators.push_back(vh);
    }
    for (const auto& vh : validators) {
        bool all_terminal = true;
        for (const auto* out : resolved) {
            if (!out->is_contract() || ledger::script_hash(out->validator) != vh) continue;
            if (!out->has_terminal_datum()) all_terminal = false;
        }
        if (all_terminal) continue;
        size_t continuing = 0;
        for (const auto& o : tx.outputs)
            if (!o.datum.empty() && ledger::script_hash(o.validator) == vh) ++continuing;
        if (continuing != 1) return "continuity violation";
    }
    (void)a;
    return std::nullopt;
}

void audit_apply_tx(Auditor& a, ShardMap& map, const ledger::Transaction& tx, uint64_t slot,
                    uint32_t shard, bool outputs_only) {
    Digest id = ledger::tx_id(tx);
    if (!outputs_only) {
        for (const auto& in : tx.inputs) {
            if (!a.spent.insert(in.ref).second)
                a.fail("DuplicateSpend", "ref " + in.ref.tx_id.hex().substr(0, 12) + ":" +
                                             std::to_string(in.ref.index),
                       slot, shard);
            map.erase(in.ref);
        }
    }
    for (uint32_t i = 0; i < tx.outputs.size(); ++i)
        map[{id, i}] = ReplayOutput{tx.outputs[i]};
}

Digest audit_header_hash(const json& b) {
    Writer w;
    w.u64(b.at("timestamp").get<uint64_t>());
    w.u64(b.at("nonce").get<uint64_t>());
    w.digest(Digest::from_hex(b.at("txRoot").get<std::string>()));
    w.digest(Digest::from_hex(b.at("prevHash").get<std::string>()));
    w.digest(Digest::from_hex(b.at("producer").get<std::string>()));
    return crypto::hash256(as_span(w.bytes()));
}

Digest audit_state_root(const ShardMap& map) {
    std::vector<std::pair<ledger::OutputRef, ledger::Output>> entries;
    entries.reserve(map.size());
    for (const auto& [ref, out] : map) entries.emplace_back(ref, out.output);
    std::sort(entries.begin(), entries.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    std::vector<Digest> leaves;
    leaves.reserve(entries.size());
    for (const auto& [ref, out] : entries) {
        Writer w;
        ledger::serialize_ref(w, ref);
        ledger::serialize_output(w, out);
        leaves.push_back(crypto::hash256(as_span(w.bytes())));
    }
    return crypto::merkle_root(leaves);
}

void audit_block(Auditor& a, const json& line) {
    uint64_t slot = line.at("slot").get<uint64_t>();
    uint32_t shard = line.at("shard").get<uint32_t>();
    uint64_t epoch = line.at("epoch").get<uint64_t>();
    const json& jb = line.at("block");
    ++a.report.blocks_checked;
    if (shard >= a.shards.size()) {
        a.fail("CorruptTranscript", "block for unknown shard", slot, shard);
        return;
    }

    // header integrity
    Digest stored_hash = Digest::from_hex(jb.at("blockHash").get<std::string>());
    if (audit_header_hash(jb) != stored_hash)
        a.fail("InvalidCommittedBlock", "stored block hash mismatches header", slot, shard);
    Digest prev = Digest::from_hex(jb.at("prevHash").get<std::string>());
    if (prev != a.heads[shard])
        a.fail("BadChainLink", "prev hash does not extend the shard head", slot, shard);
    a.heads[shard] = stored_hash;
    a.heights[shard]++;

    chain::Block block = codec::block_from_json(jb);

    // tx root
    std::vector<Digest> ids;
    for (const auto& tx : block.transactions) ids.push_back(ledger::tx_id(tx));
    if (crypto::merkle_root(ids) != block.header.tx_root)
        a.fail("InvalidCommittedBlock", "tx root mismatches transactions", slot, shard);

    // quorum of valid member votes over the block hash
    auto roster = a.rosters.find(epoch);
    if (roster == a.rosters.end() || shard >= roster->second.membership.size()) {
        a.fail("CorruptTranscript", "no roster for epoch", slot, shard);
    } else {
        const auto& members = roster->second.membership[shard];
        std::set<Digest> counted;
        for (const auto& vote : block.votes) {
            bool member = false;
            for (const auto& m : members) member = member || m == vote.voter;
            if (!member || counted.count(vote.voter)) continue;
            auto pk = a.pubkeys.find(vote.voter);
            if (pk == a.pubkeys.end()) continue;
            if (crypto::hash256(as_span(pk->second)) != vote.voter) continue;
            if (!crypto::verify_sig(as_span(pk->second), stored_hash.span(), vote.sig)) continue;
            counted.insert(vote.voter);
        }
        uint32_t threshold = uint32_t(2 * members.size() / 3 + 1);
        if (counted.size() < threshold)
            a.fail("BadQuorum",
                   "votes " + std::to_string(counted.size()) + " below threshold " +
                       std::to_string(threshold),
                   slot, shard);
    }

    // replay transactions
    ShardMap& map = a.shards[shard];
    for (const auto& tx : block.transactions) {
        Digest id = ledger::tx_id(tx);
        ++a.report.txs_replayed;
        a.fees_total += tx.fee;
        if (a.committed_sessions.count(id)) {
            // cross-shard settlement: inputs were deleted at their shards
            audit_apply_tx(a, map, tx, slot, shard, /*outputs_only=*/true);
            auto s = a.sessions.find(id);
            if (s != a.sessions.end()) s->second.settled_in_block = true;
            continue;
        }
        if (auto why = audit_check_tx(a, map, tx, block.header.timestamp)) {
            a.fail("InvalidCommittedBlock", *why + " (tx " + id.hex().substr(0, 12) + ")",
                   slot, shard);
            continue;
        }
        audit_apply_tx(a, map, tx, slot, shard, false);
    }
}

void audit_peg_tx(Auditor& a, const json& line, const char* kind) {
    uint64_t slot = line.at("slot").get<uint64_t>();
    uint32_t shard = line.at("shard").get<uint32_t>();
    if (shard >= a.shards.size()) {
        a.fail("CorruptTranscript", "peg event for unknown shard", slot, shard);
        return;
    }
    ledger::Transaction tx = codec::tx_from_json(line.at("tx"));
    ++a.report.peg_events_checked;
    if (auto why = audit_check_tx(a, a.shards[shard], tx, slot)) {
        a.fail("InvalidCommittedBlock", std::string(kind) + ": " + *why, slot, shard);
        return;
    }
    audit_apply_tx(a, a.shards[shard], tx, slot, shard, false);
    a.fees_total += tx.fee;
}

void check_peg_identity(Auditor& a, uint64_t slot) {
    if (a.peg_pool != a.peg_unminted + a.peg_circulating + a.peg_pending)
        a.fail("ConservationViolation",
               "peg identity: pool " + std::to_string(a.peg_pool) + " != unminted " +
                   std::to_string(a.peg_unminted) + " + circulating " +
                   std::to_string(a.peg_circulating) + " + pending " +
                   std::to_string(a.peg_pending),
               slot);
}

}  // namespace

AuditReport audit_run(const std::vector<std::string>& transcript_lines) {
    Auditor a;
    std::vector<json> lines;
    lines.reserve(transcript_lines.size());
    for (size_t i = 0; i < transcript_lines.size(); ++i) {
        try {
            lines.push_back(json::parse(transcript_lines[i]));
        } catch (const json::exception& e) {
            throw Error("transcript: line " + std::to_string(i + 1) + " unparseable: " +
                        e.what());
        }
    }

    try {
        for (const json& line : lines) {
            std::string type = line.at("type").get<std::string>();
            if (line.contains("slot")) a.last_slot = std::max(a.last_slot, line.at("slot").get<uint64_t>());

            if (type == "config") {
                a.shard_count = line.at("json").at("shardCount").get<uint32_t>();
                a.validation_period = line.at("json").at("validationPeriod").get<uint32_t>();
                a.shards.assign(a.shard_count, {});
                a.heads.assign(a.shard_count, Digest{});
                a.heights.assign(a.shard_count, 0);
            } else if (type == "genesis_shard") {
                uint32_t s = line.at("shard").get<uint32_t>();
                if (s < a.heads.size())
                    a.heads[s] = Digest::from_hex(line.at("head").get<std::string>());
            } else if (type == "genesis_output") {
                uint32_t s = line.at("shard").get<uint32_t>();
                ledger::OutputRef ref = codec::ref_from_json(line.at("ref"));
                ledger::Output out = codec::output_from_json(line.at("output"));
                a.genesis_total += out.value;
                if (s < a.shards.size()) a.shards[s][ref] = ReplayOutput{out};
            } else if (type == "epoch_start") {
                EpochRoster roster;
                for (const auto& shard_members : line.at("membership")) {
                    std::vector<Digest> members;
                    for (const auto& m : shard_members)
                        members.push_back(Digest::from_hex(m.get<std::string>()));
                    roster.membership.push_back(std::move(members));
                }
                a.rosters[line.at("epoch").get<uint64_t>()] = std::move(roster);
                for (auto it = line.at("pubkeys").begin(); it != line.at("pubkeys").end(); ++it)
                    a.pubkeys[Digest::from_hex(it.key())] = from_hex(it.value().get<std::string>());
            } else if (type == "block_committed") {
                audit_block(a, line);
            } else if (type == "session_init") {
                SessionInfo info;
                for (const auto& s : line.at("inputShards"))
                    info.input_shards.push_back(s.get<uint32_t>());
                info.output_shard = line.at("outputShard").get<uint32_t>();
                info.tx = codec::tx_from_json(line.at("tx"));
                info.init_slot = line.at("slot").get<uint64_t>();
                a.sessions[Digest::from_hex(line.at("session").get<std::string>())] = info;
            } else if (type == "session_lock") {
                Digest sid = Digest::from_hex(line.at("session").get<std::string>());
                const json& proof = line.at("proof");
                bool accepted = proof.at("verdict").get<std::string>() == "accept";
                uint64_t slot = line.at("slot").get<uint64_t>();
                uint32_t shard = line.at("shard").get<uint32_t>();
                ++a.report.locks_checked;
                // a quorum-checked PoA/PoR is the shard's consensus artifact
                crossshard::ShardProof sp = codec::proof_from_json(proof);
                auto roster = a.rosters.find(sp.epoch);
                bool quorum_ok = false;
                if (roster != a.rosters.end() && sp.shard < roster->second.membership.size()) {
                    quorum_ok = crossshard::proof_quorum_valid(
                        sp, roster->second.membership[sp.shard], [&](const Digest& addr) {
                            auto pk = a.pubkeys.find(addr);
                            return pk == a.pubkeys.end() ? ByteSpan{} : as_span(pk->second);
                        });
                }
                if (!quorum_ok)
                    a.fail("BadQuorum", "lock proof lacks a valid quorum", slot, shard);
                if (accepted) {
                    LockEvent ev;
                    ev.slot = slot;
                    ev.shard = shard;
                    ev.deadline = line.at("deadline").get<uint64_t>();
                    for (const auto& r : line.at("lockedRefs"))
                        ev.refs.push_back(codec::ref_from_json(r));
                    a.locks_by_session[sid].push_back(a.locks.size());
                    a.locks.push_back(std::move(ev));
                    a.sessions[sid].locked_shards.insert(shard);
                }
            } else if (type == "session_commit") {
                Digest sid = Digest::from_hex(line.at("session").get<std::string>());
                uint64_t slot = line.at("slot").get<uint64_t>();
                uint32_t shard = line.at("shard").get<uint32_t>();
                if (shard >= a.shards.size()) {
                    a.fail("CorruptTranscript", "session commit for unknown shard", slot, shard);
                    continue;
                }
                SessionInfo& info = a.sessions[sid];
                info.committed_shards.insert(shard);
                a.committed_sessions.insert(sid);
                for (const auto& r : line.at("deletedRefs")) {
                    ledger::OutputRef ref = codec::ref_from_json(r);
                    auto& map = a.shards[shard];
                    auto it = map.find(ref);
                    if (it == map.end()) {
                        a.fail("DuplicateSpend", "session deletes absent ref", slot, shard);
                    } else {
                        info.deleted_value += it->second.output.value;
                        map.erase(it);
                    }
                    if (!a.spent.insert(ref).second)
                        a.fail("DuplicateSpend", "session ref already spent", slot, shard);
                }
                for (size_t idx : a.locks_by_session[sid]) {
                    if (a.locks[idx].shard == shard && !a.locks[idx].released) {
                        a.locks[idx].released = true;
                        a.locks[idx].release_slot = slot;
                    }
                }
            } else if (type == "session_timeout" || type == "session_abort") {
                Digest sid = Digest::from_hex(line.at("session").get<std::string>());
                uint64_t slot = line.at("slot").get<uint64_t>();
                uint32_t shard = line.at("shard").get<uint32_t>();
                a.sessions[sid].rolled_back_shards.insert(shard);
                for (size_t idx : a.locks_by_session[sid]) {
                    if (a.locks[idx].shard == shard && !a.locks[idx].released) {
                        a.locks[idx].released = true;
                        a.locks[idx].release_slot = slot;
                    }
                }
            } else if (type == "peg_lock") {
                uint64_t amount = line.at("amount").get<uint64_t>();
                uint64_t nonce = line.at("nonce").get<uint64_t>();
                audit_peg_tx(a, line, "peg_lock");
                a.lock_amount_by_nonce[nonce] = amount;
                a.peg_pool += amount;
                a.peg_unminted += amount;
                check_peg_identity(a, line.at("slot").get<uint64_t>());
            } else if (type == "peg_mint") {
                uint64_t nonce = line.at("nonce").get<uint64_t>();
                uint64_t amount = line.at("amount").get<uint64_t>();
                uint64_t slot = line.at("slot").get<uint64_t>();
                ++a.report.peg_events_checked;
                auto lock = a.lock_amount_by_nonce.find(nonce);
                if (lock == a.lock_amount_by_nonce.end())
                    a.fail("PegViolation", "mint without matching lock", slot);
                else if (lock->second != amount)
                    a.fail("PegViolation", "mint amount mismatches lock", slot);
                if (!a.minted_nonces.insert(nonce).second)
                    a.fail("PegViolation", "mint authorization reused", slot);
                else {
                    a.peg_unminted -= std::min(a.peg_unminted, amount);
                    a.peg_circulating += amount;
                }
                // child-side replay of the mint
                ledger::OutputRef ref = codec::ref_from_json(line.at("childRef"));
                ledger::Output out;
                out.validator = ledger::pay_to_address(
                    Digest::from_hex(line.at("owner").get<std::string>()));
                out.value = amount;
                a.child_map[ref] = ReplayOutput{out};
                check_peg_identity(a, slot);
            } else if (type == "child_tx") {
                uint64_t slot = line.at("slot").get<uint64_t>();
                ledger::Transaction tx = codec::tx_from_json(line.at("tx"));
                if (auto why = audit_check_tx(a, a.child_map, tx, slot))
                    a.fail("InvalidChildTx", *why, slot);
                else {
                    // child refs live outside the parent ledger's spent set
                    Digest id = ledger::tx_id(tx);
                    for (const auto& in : tx.inputs) a.child_map.erase(in.ref);
                    for (uint32_t i = 0; i < tx.outputs.size(); ++i)
                        a.child_map[{id, i}] = ReplayOutput{tx.outputs[i]};
                    a.peg_circulating -= tx.fee;
                }
            } else if (type == "peg_burn") {
                uint64_t nonce = line.at("nonce").get<uint64_t>();
                uint64_t amount = line.at("amount").get<uint64_t>();
                uint64_t slot = line.at("slot").get<uint64_t>();
                ++a.report.peg_events_checked;
                if (a.burns.count(nonce)) a.fail("PegViolation", "burn nonce reused", slot);
                a.burns[nonce] = {amount, line.at("burnSlot").get<uint64_t>()};
                if (amount > a.peg_circulating)
                    a.fail("PegViolation", "burn exceeds circulating supply", slot);
                a.peg_circulating -= std::min(a.peg_circulating, amount);
                a.peg_pending += amount;
                check_peg_identity(a, slot);
            } else if (type == "peg_unlock") {
                uint64_t nonce = line.at("nonce").get<uint64_t>();
                uint64_t amount = line.at("amount").get<uint64_t>();
                uint64_t slot = line.at("slot").get<uint64_t>();
                audit_peg_tx(a, line, "peg_unlock");
                auto burn = a.burns.find(nonce);
                if (burn == a.burns.end())
                    a.fail("PegViolation", "unlock without matching burn", slot);
                else {
                    if (burn->second.first != amount)
                        a.fail("PegViolation", "unlock amount mismatches burn", slot);
                    if (slot < burn->second.second + a.validation_period)
                        a.fail("PegViolation", "unlock before the validation period", slot);
                }
                if (!a.unlocked_burn_nonces.insert(nonce).second)
                    a.fail("PegViolation", "burn proof replayed", slot);
                a.peg_pool -= std::min(a.peg_pool, amount);
                a.peg_pending -= std::min(a.peg_pending, amount);
                check_peg_identity(a, slot);
            } else if (type == "batch_commit") {
                ++a.report.batches_checked;
                Auditor::Commitment c;
                c.prev = Digest::from_hex(line.at("prevRoot").get<std::string>());
                c.post = Digest::from_hex(line.at("postRoot").get<std::string>());
                c.tx_root = Digest::from_hex(line.at("txDataRoot").get<std::string>());
                c.slot = line.at("slot").get<uint64_t>();
                c.batch_slot = line.at("batchSlot").get<uint64_t>();
                for (const auto& t : line.at("txs")) c.txs.push_back(codec::tx_from_json(t));
                for (const auto& d : line.at("deposits"))
                    c.deposits.emplace_back(codec::ref_from_json(d.at("ref")),
                                            codec::output_from_json(d.at("output")));
                std::vector<Digest> leaves;
                for (const auto& tx : c.txs) leaves.push_back(ledger::tx_id(tx));
                for (const auto& [ref, out] : c.deposits) {
                    Writer w;
                    ledger::serialize_ref(w, ref);
                    ledger::serialize_output(w, out);
                    leaves.push_back(crypto::hash256(as_span(w.bytes())));
                }
                if (crypto::merkle_root(leaves) != c.tx_root)
                    a.fail("RollupViolation", "tx data root mismatches batch", c.slot);
                Digest head{};
                bool found = false;
                for (size_t i = a.commitments.size(); i > 0 && !found; --i)
                    if (!a.commitments[i - 1].rolled_back) {
                        head = a.commitments[i - 1].post;
                        found = true;
                    }
                if (found && c.prev != head)
                    a.fail("RollupViolation", "commitment does not extend the head", c.slot);
                a.commitments.push_back(std::move(c));
            } else if (type == "batch_rollback") {
                uint64_t from = line.at("fromIndex").get<uint64_t>();
                uint64_t slot = line.at("slot").get<uint64_t>();
                for (size_t i = from; i < a.commitments.size(); ++i) {
                    if (a.commitments[i].rolled_back && i + 1 < a.commitments.size() &&
                        !a.commitments[i + 1].rolled_back)
                        a.fail("RollupViolation", "rollback region not a suffix", slot);
                    a.commitments[i].rolled_back = true;
                }
            }
        }
    } catch (const json::exception& e) {
        throw Error(std::string("transcript: malformed event: ") + e.what());
    }

    // ---- end-of-run cross checks ----

    // Session atomicity: never committed on one shard and rolled back on a
    // locked shard of the same session.
    for (const auto& [sid, info] : a.sessions) {
        ++a.report.sessions_checked;
        bool committed = !info.committed_shards.empty();
        if (committed) {
            for (uint32_t shard : info.rolled_back_shards)
                if (info.locked_shards.count(shard) && !info.committed_shards.count(shard))
                    a.fail("MixedTerminalSession",
                           "session " + sid.hex().substr(0, 12) + " committed elsewhere but "
                           "rolled back on shard " + std::to_string(shard),
                           a.last_slot, shard);
            // committed sessions must have deleted inputs covering outputs+fee
            if (info.tx) {
                unsigned __int128 out_sum = info.tx->fee;
                for (const auto& o : info.tx->outputs) out_sum += o.value;
                // all input shards must have committed
                for (uint32_t shard : info.input_shards)
                    if (!info.committed_shards.count(shard))
                        a.fail("MixedTerminalSession",
                               "committed session missing input-shard deletion on shard " +
                                   std::to_string(shard),
                               a.last_slot, shard);
                if (info.committed_shards.size() >= info.input_shards.size() &&
                    info.deleted_value != out_sum)
                    a.fail("ConservationViolation",
                           "session outputs+fee exceed deleted inputs", a.last_slot);
                if (!info.settled_in_block)
                    a.fail("MissingSettlement",
                           "committed session never appeared in an output-shard block",
                           a.last_slot, info.output_shard);
            }
        }
    }

    // Lock residence: every lock is released within deadline + 1 sweep.
    for (const auto& lock : a.locks) {
        if (!lock.released) {
            if (lock.deadline + 1 <= a.last_slot)
                a.fail("ResidualLock", "lock never released", lock.slot, lock.shard);
            continue;
        }
        if (lock.release_slot > lock.deadline + 1)
            a.fail("ResidualLock",
                   "lock released at slot " + std::to_string(lock.release_slot) +
                       " after deadline " + std::to_string(lock.deadline),
                   lock.slot, lock.shard);
    }

    // Rollup: every surviving commitment must replay to its claimed root.
    {
        ShardMap child;
        for (const auto& c : a.commitments) {
            if (c.rolled_back) continue;
            for (const auto& [ref, out] : c.deposits)
                if (!child.count(ref)) child[ref] = ReplayOutput{out};
            for (const auto& tx : c.txs) {
                if (audit_check_tx(a, child, tx, c.batch_slot)) continue;  // skip rule
                Digest id = ledger::tx_id(tx);
                for (const auto& in : tx.inputs) child.erase(in.ref);
                for (uint32_t i = 0; i < tx.outputs.size(); ++i)
                    child[{id, i}] = ReplayOutput{tx.outputs[i]};
            }
            if (audit_state_root(child) != c.post)
                a.fail("RollupViolation",
                       "surviving commitment's post root contradicts replay", c.slot);
        }
    }

    // Global value conservation: what the shards hold now plus burned fees
    // equals what genesis injected (pegged value stays on the parent ledger).
    {
        unsigned __int128 held = 0;
        for (const auto& map : a.shards)
            for (const auto& [ref, out] : map) held += out.output.value;
        if (held + a.fees_total != a.genesis_total)
            a.fail("ConservationViolation",
                   "final holdings " + std::to_string(uint64_t(held)) + " + fees " +
                       std::to_string(a.fees_total) + " != genesis " +
                       std::to_string(a.genesis_total),
                   a.last_slot);
    }

    return a.report;
}

AuditReport audit_file(const std::string& path) {
    return audit_run(sim::Transcript::read_file(path));
}

std::string AuditReport::to_string() const {
    std::string s;
    s += "audit: " + std::to_string(blocks_checked) + " blocks, " +
         std::to_string(txs_replayed) + " txs, " + std::to_string(sessions_checked) +
         " sessions, " + std::to_string(locks_checked) + " locks, " +
         std::to_string(batches_checked) + " batches, " +
         std::to_string(peg_events_checked) + " peg events\n";
    if (clean()) {
        s += "clean: no safety findings\n";
        return s;
    }
    s += std::to_string(findings.size()) + " finding(s):\n";
    for (const auto& f : findings) {
        s += "  [" + f.kind + "] slot " + std::to_string(f.slot);
        if (f.shard >= 0) s += " shard " + std::to_string(f.shard);
        s += ": " + f.detail + "\n";
    }
    return s;
}

std::string AuditReport::to_json() const {
    ordered_json j;
    j["clean"] = clean();
    j["blocksChecked"] = blocks_checked;
    j["txsReplayed"] = txs_replayed;
    j["sessionsChecked"] = sessions_checked;
    j["locksChecked"] = locks_checked;
    j["batchesChecked"] = batches_checked;
    j["pegEventsChecked"] = peg_events_checked;
    ordered_json fs = ordered_json::array();
    for (const auto& f : findings)
        fs.push_back(ordered_json{{"kind", f.kind},
                                  {"detail", f.detail},
                                  {"slot", f.slot},
                                  {"shard", f.shard}});
    j["findings"] = std::move(fs);
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Inspection
// ---------------------------------------------------------------------------

namespace {
bool hex_prefix_match(const std::string& hex, const std::string& prefix) {
    return hex.size() >= prefix.size() && hex.compare(0, prefix.size(), prefix) == 0;
}
}  // namespace

std::string inspect_block(const std::vector<std::string>& transcript_lines,
                          const std::string& block_hash_prefix) {
    std::map<uint64_t, std::vector<std::vector<Digest>>> rosters;
    std::map<Digest, Bytes> pubkeys;
    for (const auto& raw : transcript_lines) {
        json line = json::parse(raw);
        std::string type = line.at("type").get<std::string>();
        if (type == "epoch_start") {
            std::vector<std::vector<Digest>> membership;
            for (const auto& shard_members : line.at("membership")) {
                std::vector<Digest> members;
                for (const auto& m : shard_members)
                    members.push_back(Digest::from_hex(m.get<std::string>()));
                membership.push_back(std::move(members));
            }
            rosters[line.at("epoch").get<uint64_t>()] = std::move(membership);
            for (auto it = line.at("pubkeys").begin(); it != line.at("pubkeys").end(); ++it)
                pubkeys[Digest::from_hex(it.key())] = from_hex(it.value().get<std::string>());
            continue;
        }
        if (type != "block_committed") continue;
        const json& jb = line.at("block");
        std::string hash_hex = jb.at("blockHash").get<std::string>();
        if (!hex_prefix_match(hash_hex, block_hash_prefix)) continue;

        chain::Block block = codec::block_from_json(jb);
        uint64_t epoch = line.at("epoch").get<uint64_t>();
        uint32_t shard = line.at("shard").get<uint32_t>();
        std::string out;
        out += "block " + hash_hex + "\n";
        out += "  slot " + std::to_string(block.header.timestamp) + ", shard " +
               std::to_string(shard) + ", epoch " + std::to_string(epoch) + ", height " +
               std::to_string(line.at("height").get<uint64_t>()) + "\n";
        out += "  producer " + block.header.producer.hex() + "\n";
        out += "  prevHash " + block.header.prev_hash.hex() + "\n";
        Digest recomputed = chain::header_hash(block.header);
        out += "  headerHash " + std::string(recomputed == block.header.block_hash
                                                 ? "recomputed: match"
                                                 : "recomputed: MISMATCH") + "\n";
        Digest txroot = chain::tx_root_of(block.transactions);
        out += "  txRoot " + block.header.tx_root.hex() +
               (txroot == block.header.tx_root ? " (recomputed: match)"
                                               : " (recomputed: MISMATCH)") + "\n";
        uint32_t valid_votes = 0;
        auto roster = rosters.find(epoch);
        size_t shard_size = 0;
        if (roster != rosters.end() && shard < roster->second.size()) {
            shard_size = roster->second[shard].size();
            std::set<Digest> counted;
            for (const auto& vote : block.votes) {
                auto pk = pubkeys.find(vote.voter);
                if (pk == pubkeys.end() || counted.count(vote.voter)) continue;
                if (crypto::verify_sig(as_span(pk->second), block.header.block_hash.span(),
                                       vote.sig))
                    counted.insert(vote.voter);
            }
            valid_votes = uint32_t(counted.size());
        }
        out += "  votes " + std::to_string(block.votes.size()) + " (" +
               std::to_string(valid_votes) + " valid of " + std::to_string(shard_size) +
               " members, threshold " + std::to_string(2 * shard_size / 3 + 1) + ")\n";
        out += "  transactions " + std::to_string(block.transactions.size()) + "\n";
        for (const auto& tx : block.transactions)
            out += "    " + ledger::tx_id(tx).hex().substr(0, 16) + "  in=" +
                   std::to_string(tx.inputs.size()) + " out=" +
                   std::to_string(tx.outputs.size()) + " fee=" + std::to_string(tx.fee) + "\n";
        return out;
    }
    throw Error("inspect: no committed block matches " + block_hash_prefix);
}

std::string inspect_session(const std::vector<std::string>& transcript_lines,
                            const std::string& session_id_prefix) {
    std::string out;
    bool found = false;
    std::string state = "Initialized";
    for (const auto& raw : transcript_lines) {
        json line = json::parse(raw);
        if (!line.contains("session")) continue;
        std::string sid = line.at("session").get<std::string>();
        if (!hex_prefix_match(sid, session_id_prefix)) continue;
        std::string type = line.at("type").get<std::string>();
        if (!found) {
            out += "session " + sid + "\n";
            found = true;
        }
        out += "  slot " + std::to_string(line.at("slot").get<uint64_t>()) + "  " + type;
        if (line.contains("shard")) out += " @ shard " + std::to_string(line.at("shard").get<uint32_t>());
        if (type == "session_lock")
            out += " verdict=" + line.at("proof").at("verdict").get<std::string>() +
                   " reason=" + line.at("proof").at("reason").get<std::string>();
        out += "\n";
        if (type == "session_commit") state = "Committed";
        if (type == "session_timeout" || type == "session_abort") {
            if (state != "Committed") state = "RolledBack";
        }
        if (type == "session_lock") {
            if (state == "Initialized") state = "Locked";
        }
    }
    if (!found) throw Error("inspect: no session matches " + session_id_prefix);
    out += "  terminal state: " + state + "\n";
    return out;
}

}  // namespace shardsim::audit
