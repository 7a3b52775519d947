#include "shardsim/crossshard.hpp"

#include <algorithm>
#include <set>

#include "shardsim/error.hpp"
#include "shardsim/serial.hpp"

namespace shardsim::crossshard {

const char* session_state_name(SessionState s) {
    switch (s) {
        case SessionState::initialized: return "Initialized";
        case SessionState::locked: return "Locked";
        case SessionState::committed: return "Committed";
        case SessionState::rolled_back: return "RolledBack";
    }
    return "?";
}

const char* reject_reason_name(RejectReason r) {
    switch (r) {
        case RejectReason::none: return "None";
        case RejectReason::unknown_input: return "UnknownInput";
        case RejectReason::already_locked: return "AlreadyLocked";
        case RejectReason::bad_signature: return "BadSignature";
        case RejectReason::script_rejected: return "ScriptRejected";
        case RejectReason::outside_validity: return "OutsideValidity";
    }
    return "?";
}

Bytes proof_payload(const Digest& session_id, uint32_t shard, uint64_t epoch, Verdict verdict,
                    uint64_t locked_value) {
    Writer w;
    w.digest(session_id);
    w.u32(shard);
    w.u64(epoch);
    w.u8(static_cast<uint8_t>(verdict));
    w.u64(locked_value);
    return w.take();
}

bool proof_quorum_valid(const ShardProof& proof, std::span<const Digest> shard_members,
                        const PubkeyFn& pubkey_of) {
    Bytes payload =
        proof_payload(proof.session_id, proof.shard, proof.epoch, proof.verdict,
                      proof.locked_value);
    std::set<Digest> counted;
    for (const auto& vote : proof.signatures) {
        bool member = false;
        for (const auto& m : shard_members)
            if (m == vote.voter) {
                member = true;
                break;
            }
        if (!member || counted.count(vote.voter)) continue;
        ByteSpan pk = pubkey_of(vote.voter);
        if (pk.empty() || crypto::address_of(pk) != vote.voter) continue;
        if (!crypto::verify_sig(pk, as_span(payload), vote.sig)) continue;
        counted.insert(vote.voter);
    }
    return counted.size() >= chain::quorum_threshold(shard_members.size());
}

CrossShardSession initiate(const ledger::Transaction& tx, uint32_t shard_count,
                           const sharding::RoutingTable& table, uint64_t now,
                           uint64_t lock_deadline_slots) {
    CrossShardSession session;
    session.tx = tx;
    session.session_id = ledger::tx_id(tx);
    session.output_shard = sharding::route_tx(tx, shard_count, table);
    std::vector<uint32_t> per_input = sharding::input_shards_of(tx, shard_count, table);
    for (size_t i = 0; i < tx.inputs.size(); ++i)
        session.refs_by_shard[per_input[i]].push_back(tx.inputs[i].ref);
    for (const auto& [shard, refs] : session.refs_by_shard)
        session.input_shards.push_back(shard);
    std::sort(session.input_shards.begin(), session.input_shards.end());

    bool single_shard = session.input_shards.size() == 1 &&
                        session.input_shards[0] == session.output_shard;
    if (single_shard)
        throw Error("initiate: single-shard transaction, use the normal path");

    session.state = SessionState::initialized;
    session.deadline_slot = now + lock_deadline_slots;
    return session;
}

const LockOverlay::Entry* LockOverlay::find(const ledger::OutputRef& ref) const {
    auto it = locks_.find(ref);
    return it == locks_.end() ? nullptr : &it->second;
}

bool LockOverlay::lock(const ledger::OutputRef& ref, const Digest& session, uint64_t deadline) {
    auto it = locks_.find(ref);
    if (it != locks_.end()) return it->second.session == session;
    locks_.emplace(ref, Entry{session, deadline});
    return true;
}

void LockOverlay::unlock(const ledger::OutputRef& ref) { locks_.erase(ref); }

std::vector<std::pair<Digest, std::vector<ledger::OutputRef>>> LockOverlay::sweep(uint64_t now) {
    std::map<Digest, std::vector<ledger::OutputRef>> expired;
    for (const auto& [ref, entry] : locks_)
        if (entry.deadline < now) expired[entry.session].push_back(ref);
    std::vector<std::pair<Digest, std::vector<ledger::OutputRef>>> out;
    for (auto& [session, refs] : expired) {
        std::sort(refs.begin(), refs.end());
        for (const auto& ref : refs) locks_.erase(ref);
        out.emplace_back(session, std::move(refs));
    }
    return out;
}

std::vector<ledger::OutputRef> LockOverlay::refs_of(const Digest& session) const {
    std::vector<ledger::OutputRef> refs;
    for (const auto& [ref, entry] : locks_)
        if (entry.session == session) refs.push_back(ref);
    std::sort(refs.begin(), refs.end());
    return refs;
}

namespace {

ShardProof assemble_proof(const Digest& session_id, uint32_t shard, uint64_t epoch,
                          Verdict verdict, uint64_t locked_value, RejectReason reason,
                          std::span<const crypto::KeyPair* const> signers) {
    ShardProof proof;
    proof.session_id = session_id;
    proof.shard = shard;
    proof.epoch = epoch;
    proof.verdict = verdict;
    proof.locked_value = locked_value;
    proof.reason = reason;
    Bytes payload = proof_payload(session_id, shard, epoch, verdict, locked_value);
    for (const auto* key : signers) {
        chain::Vote vote;
        vote.voter = key->address;
        vote.sig = crypto::sign(*key, as_span(payload));
        proof.signatures.push_back(std::move(vote));
    }
    return proof;
}

}  // namespace

LockOutcome shard_lock(const CrossShardSession& session, uint32_t shard, uint64_t epoch,
                       uint64_t now, const ledger::UtxoSet& utxo, LockOverlay& overlay,
                       std::span<const crypto::KeyPair* const> signers) {
    auto it = session.refs_by_shard.find(shard);
    if (it == session.refs_by_shard.end())
        throw Error("shard_lock: session assigns no inputs to shard " + std::to_string(shard));
    const auto& refs = it->second;

    Verdict verdict = Verdict::accept;
    RejectReason reason = RejectReason::none;
    uint64_t locked_value = 0;

    if (now < session.tx.valid_from || now > session.tx.valid_to) {
        verdict = Verdict::reject;
        reason = RejectReason::outside_validity;
    }

    std::vector<ledger::Output> local_spent;
    for (const auto& ref : refs) {
        if (verdict == Verdict::reject) break;
        const ledger::Output* out = utxo.find(ref);
        if (!out) {
            verdict = Verdict::reject;
            reason = RejectReason::unknown_input;
            break;
        }
        const LockOverlay::Entry* lock = overlay.find(ref);
        if (lock && lock->session != session.session_id) {
            verdict = Verdict::reject;
            reason = RejectReason::already_locked;
            break;
        }
        local_spent.push_back(*out);
        locked_value += out->value;
    }

    // Scripts and continuity are locally decidable: the full spending tx is
    // in hand and the spent outputs live here.
    if (verdict == Verdict::accept) {
        Digest id = session.session_id;
        for (size_t i = 0; i < session.tx.inputs.size() && verdict == Verdict::accept; ++i) {
            const auto& in = session.tx.inputs[i];
            if (std::find(refs.begin(), refs.end(), in.ref) == refs.end()) continue;
            if (!in.signature.empty() &&
                !crypto::verify_sig(as_span(in.signature.signer), id.span(), in.signature)) {
                verdict = Verdict::reject;
                reason = RejectReason::bad_signature;
                break;
            }
            const ledger::Output* out = utxo.find(in.ref);
            ledger::ScriptContext ctx;
            ctx.tx = &session.tx;
            ctx.spending_tx_id = id;
            ctx.input_index = i;
            ctx.current_slot = now;
            ctx.spent = out;
            ctx.continuing =
                ledger::find_continuing_output(session.tx, ledger::script_hash(out->validator));
            if (!ledger::eval_script(out->validator, ctx).accepted) {
                verdict = Verdict::reject;
                reason = RejectReason::script_rejected;
            }
        }
        for (const auto& out : local_spent) {
            if (!out.is_contract()) continue;
            if (!ledger::check_state_continuity(session.tx, ledger::script_hash(out.validator),
                                                local_spent)) {
                verdict = Verdict::reject;
                reason = RejectReason::script_rejected;
                break;
            }
        }
    }

    LockOutcome outcome;
    if (verdict == Verdict::accept) {
        for (const auto& ref : refs)
            overlay.lock(ref, session.session_id, session.deadline_slot);
        outcome.locked_refs = refs;
    } else {
        locked_value = 0;
    }
    outcome.proof = assemble_proof(session.session_id, shard, epoch, verdict, locked_value,
                                   reason, signers);
    return outcome;
}

CommitCertificate client_commit(const CrossShardSession& session,
                                std::span<const ShardProof> proofs,
                                const QuorumCheck& quorum_ok) {
    CommitCertificate cert;
    cert.session_id = session.session_id;
    for (uint32_t shard : session.input_shards) {
        const ShardProof* found = nullptr;
        for (const auto& p : proofs) {
            if (p.shard != shard || p.session_id != session.session_id) continue;
            if (!p.is_acceptance())
                throw Error("client_commit: PoR present from shard " + std::to_string(shard) +
                            " (" + reject_reason_name(p.reason) + "), abort required");
            found = &p;
            break;
        }
        if (!found)
            throw Error("client_commit: missing PoA from shard " + std::to_string(shard));
        if (!quorum_ok(*found))
            throw Error("client_commit: PoA from shard " + std::to_string(shard) +
                        " fails quorum check");
        cert.acceptances.push_back(*found);
    }
    return cert;
}

bool verify_commit_certificate(const CommitCertificate& cert, const CrossShardSession& session,
                               const QuorumCheck& quorum_ok, std::string* why) {
    auto fail = [&](const std::string& reason) {
        if (why) *why = reason;
        return false;
    };
    if (cert.session_id != session.session_id) return fail("certificate session mismatch");
    unsigned __int128 attested = 0;
    for (uint32_t shard : session.input_shards) {
        const ShardProof* found = nullptr;
        for (const auto& p : cert.acceptances)
            if (p.shard == shard && p.session_id == session.session_id && p.is_acceptance()) {
                found = &p;
                break;
            }
        if (!found) return fail("missing PoA for shard " + std::to_string(shard));
        if (!quorum_ok(*found))
            return fail("PoA quorum invalid for shard " + std::to_string(shard));
        attested += found->locked_value;
    }
    unsigned __int128 spent = session.tx.fee;
    for (const auto& out : session.tx.outputs) spent += out.value;
    if (attested != spent) return fail("attested locked value mismatches outputs+fee");
    return true;
}

}  // namespace shardsim::crossshard
