#include <algorithm>
#include <unordered_set>

#include "shardsim/error.hpp"
#include "shardsim/ledger.hpp"

namespace shardsim::ledger {

void serialize_ref(Writer& w, const OutputRef& ref) {
    w.digest(ref.tx_id);
    w.u32(ref.index);
}

OutputRef parse_ref(Reader& r) {
    OutputRef ref;
    ref.tx_id = r.digest();
    ref.index = r.u32();
    return ref;
}

void serialize_output(Writer& w, const Output& o) {
    serialize_script(w, o.validator);
    w.u64(o.value);
    w.var_bytes(as_span(o.datum));
}

Output parse_output(Reader& r) {
    Output o;
    o.validator = parse_script(r);
    o.value = r.u64();
    o.datum = r.var_bytes();
    return o;
}

void serialize_tx(Writer& w, const Transaction& tx, bool include_signatures) {
    w.u32(static_cast<uint32_t>(tx.inputs.size()));
    for (const auto& in : tx.inputs) {
        serialize_ref(w, in.ref);
        w.var_bytes(as_span(in.redeemer));
        if (include_signatures) {
            w.u8(static_cast<uint8_t>(in.signature.scheme));
            w.var_bytes(as_span(in.signature.bytes));
            w.var_bytes(as_span(in.signature.signer));
        }
    }
    w.u32(static_cast<uint32_t>(tx.outputs.size()));
    for (const auto& out : tx.outputs) serialize_output(w, out);
    w.u64(tx.fee);
    w.u64(tx.valid_from);
    w.u64(tx.valid_to);
    w.digest(tx.sender);
}

Digest tx_id(const Transaction& tx) {
    Writer w;
    serialize_tx(w, tx, /*include_signatures=*/false);
    return crypto::hash256(as_span(w.bytes()));
}

Bytes tx_bytes(const Transaction& tx) {
    Writer w;
    serialize_tx(w, tx, /*include_signatures=*/true);
    return w.take();
}

Transaction parse_tx(Reader& r) {
    Transaction tx;
    uint32_t n_in = r.u32();
    tx.inputs.reserve(n_in);
    for (uint32_t i = 0; i < n_in; ++i) {
        TxInput in;
        in.ref = parse_ref(r);
        in.redeemer = r.var_bytes();
        uint8_t scheme = r.u8();
        if (scheme > 1) throw Error("tx: bad signature scheme tag");
        in.signature.scheme = static_cast<crypto::SigScheme>(scheme);
        in.signature.bytes = r.var_bytes();
        in.signature.signer = r.var_bytes();
        tx.inputs.push_back(std::move(in));
    }
    uint32_t n_out = r.u32();
    tx.outputs.reserve(n_out);
    for (uint32_t i = 0; i < n_out; ++i) tx.outputs.push_back(parse_output(r));
    tx.fee = r.u64();
    tx.valid_from = r.u64();
    tx.valid_to = r.u64();
    tx.sender = r.digest();
    return tx;
}

const Output* UtxoSet::find(const OutputRef& ref) const {
    auto it = entries_.find(ref);
    return it == entries_.end() ? nullptr : &it->second;
}

void UtxoSet::insert(const OutputRef& ref, Output out) {
    auto [it, inserted] = entries_.emplace(ref, std::move(out));
    if (!inserted) throw Error("utxo: ref already present: " + ref.tx_id.hex());
}

void UtxoSet::erase(const OutputRef& ref) {
    if (entries_.erase(ref) == 0) throw Error("utxo: erasing absent ref: " + ref.tx_id.hex());
}

uint64_t UtxoSet::total_value() const {
    uint64_t sum = 0;
    for (const auto& [ref, out] : entries_) sum += out.value;
    return sum;
}

std::vector<std::pair<OutputRef, Output>> UtxoSet::sorted_entries() const {
    std::vector<std::pair<OutputRef, Output>> v(entries_.begin(), entries_.end());
    std::sort(v.begin(), v.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return v;
}

const char* violation_name(Violation v) {
    switch (v) {
        case Violation::unknown_input: return "UnknownInput";
        case Violation::double_spend_within_tx: return "DoubleSpendWithinTx";
        case Violation::value_imbalance: return "ValueImbalance";
        case Violation::bad_signature: return "BadSignature";
        case Violation::script_rejected: return "ScriptRejected";
        case Violation::outside_validity_range: return "OutsideValidityRange";
        case Violation::continuity_violation: return "ContinuityViolation";
    }
    return "?";
}

bool ValidationReport::has(Violation kind) const {
    for (const auto& v : violations)
        if (v.kind == kind) return true;
    return false;
}

std::string ValidationReport::to_string() const {
    if (ok()) return "valid";
    std::string s;
    for (const auto& v : violations) {
        if (!s.empty()) s += "; ";
        s += violation_name(v.kind);
        if (v.input_index >= 0) s += "[" + std::to_string(v.input_index) + "]";
        if (!v.detail.empty()) s += ": " + v.detail;
    }
    return s;
}

bool check_state_continuity(const Transaction& tx, const Digest& validator_hash,
                            std::span<const Output> spent_outputs) {
    bool all_terminal = true;
    bool spends_validator = false;
    for (const auto& out : spent_outputs) {
        if (!out.is_contract()) continue;
        if (script_hash(out.validator) != validator_hash) continue;
        spends_validator = true;
        if (!out.has_terminal_datum()) all_terminal = false;
    }
    if (!spends_validator) return true;
    if (all_terminal) return true;  // final state reached, requirement released
    size_t continuing = 0;
    for (const auto& out : tx.outputs)
        if (out.is_contract() && script_hash(out.validator) == validator_hash) ++continuing;
    return continuing == 1;
}

const Output* find_continuing_output(const Transaction& tx, const Digest& validator_hash) {
    const Output* contract_found = nullptr;
    bool contract_ambiguous = false;
    const Output* plain_found = nullptr;
    bool plain_ambiguous = false;
    for (const auto& out : tx.outputs) {
        if (script_hash(out.validator) != validator_hash) continue;
        if (out.is_contract()) {
            contract_ambiguous = contract_found != nullptr;
            contract_found = &out;
        } else {
            plain_ambiguous = plain_found != nullptr;
            plain_found = &out;
        }
    }
    if (contract_found) return contract_ambiguous ? nullptr : contract_found;
    return plain_ambiguous ? nullptr : plain_found;
}

ValidationReport validate_tx(const UtxoSet& utxo, const Transaction& tx, uint64_t slot) {
    ValidationReport report;
    auto violate = [&](Violation kind, int idx, std::string detail = {}) {
        report.violations.push_back({kind, idx, std::move(detail)});
    };

    if (tx.inputs.empty()) {
        violate(Violation::value_imbalance, -1, "transaction has no inputs");
        return report;
    }

    if (slot < tx.valid_from || slot > tx.valid_to)
        violate(Violation::outside_validity_range, -1,
                "slot " + std::to_string(slot) + " outside [" + std::to_string(tx.valid_from) +
                    "," + std::to_string(tx.valid_to) + "]");

    // Resolve inputs; collect duplicates and unknowns.
    std::unordered_set<size_t> seen_hashes;
    std::vector<const Output*> resolved(tx.inputs.size(), nullptr);
    {
        std::vector<OutputRef> refs;
        refs.reserve(tx.inputs.size());
        for (size_t i = 0; i < tx.inputs.size(); ++i) {
            const auto& ref = tx.inputs[i].ref;
            for (const auto& prev : refs)
                if (prev == ref) {
                    violate(Violation::double_spend_within_tx, int(i));
                    break;
                }
            refs.push_back(ref);
            resolved[i] = utxo.find(ref);
            if (!resolved[i]) violate(Violation::unknown_input, int(i));
        }
    }

    // Signatures must verify over the tx id whenever present.
    Digest id = tx_id(tx);
    for (size_t i = 0; i < tx.inputs.size(); ++i) {
        const auto& sig = tx.inputs[i].signature;
        if (sig.empty()) continue;
        if (!crypto::verify_sig(as_span(sig.signer), id.span(), sig))
            violate(Violation::bad_signature, int(i));
    }

    // Value conservation (only meaningful once inputs resolve).
    if (std::all_of(resolved.begin(), resolved.end(), [](const Output* o) { return o; })) {
        unsigned __int128 in_sum = 0, out_sum = tx.fee;
        for (const auto* o : resolved) in_sum += o->value;
        for (const auto& o : tx.outputs) out_sum += o.value;
        if (in_sum != out_sum)
            violate(Violation::value_imbalance, -1,
                    "inputs " + std::to_string(uint64_t(in_sum)) + " != outputs+fee " +
                        std::to_string(uint64_t(out_sum)));
    }

    // Outputs must respect the datum bound.
    for (size_t i = 0; i < tx.outputs.size(); ++i)
        if (tx.outputs[i].datum.size() > kDatumMaxBytes)
            violate(Violation::script_rejected, -1,
                    "output " + std::to_string(i) + " datum exceeds bound");

    // Per-input script evaluation.
    std::vector<Output> spent;
    spent.reserve(tx.inputs.size());
    for (const auto* o : resolved)
        if (o) spent.push_back(*o);
    for (size_t i = 0; i < tx.inputs.size(); ++i) {
        const Output* out = resolved[i];
        if (!out) continue;
        if (out->datum.size() > kDatumMaxBytes) {
            violate(Violation::script_rejected, int(i), "datum exceeds bound");
            continue;
        }
        ScriptContext ctx;
        ctx.tx = &tx;
        ctx.spending_tx_id = id;
        ctx.input_index = i;
        ctx.current_slot = slot;
        ctx.spent = out;
        ctx.continuing = find_continuing_output(tx, script_hash(out->validator));
        EvalResult r = eval_script(out->validator, ctx);
        if (!r.accepted) {
            violate(Violation::script_rejected, int(i),
                    r.error == ScriptError::budget_exhausted  ? "budget exhausted"
                    : r.error == ScriptError::depth_exceeded ? "depth exceeded"
                                                             : "");
        }
    }

    // Contract-state continuity, independently per validator.
    {
        std::vector<Digest> validators;
        for (const auto* o : resolved) {
            if (!o || !o->is_contract()) continue;
            Digest vh = script_hash(o->validator);
            if (std::find(validators.begin(), validators.end(), vh) == validators.end())
                validators.push_back(vh);
        }
        for (const auto& vh : validators)
            if (!check_state_continuity(tx, vh, spent))
                violate(Violation::continuity_violation, -1, vh.hex().substr(0, 16));
    }

    return report;
}

void apply_tx_in_place(UtxoSet& utxo, const Transaction& tx) {
    // Structural re-check so a bad call can never half-apply.
    for (size_t i = 0; i < tx.inputs.size(); ++i) {
        if (!utxo.contains(tx.inputs[i].ref))
            throw Error("apply_tx: UnknownInput at index " + std::to_string(i));
        for (size_t j = i + 1; j < tx.inputs.size(); ++j)
            if (tx.inputs[i].ref == tx.inputs[j].ref)
                throw Error("apply_tx: duplicate input ref");
    }
    Digest id = tx_id(tx);
    for (const auto& in : tx.inputs) utxo.erase(in.ref);
    for (uint32_t i = 0; i < tx.outputs.size(); ++i)
        utxo.insert({id, i}, tx.outputs[i]);
}

UtxoSet apply_tx(const UtxoSet& utxo, const Transaction& tx) {
    UtxoSet next = utxo;
    apply_tx_in_place(next, tx);
    return next;
}

uint64_t balance_of(const UtxoSet& utxo, const Digest& address) {
    uint64_t sum = 0;
    for (const auto& [ref, out] : utxo.entries()) {
        if (out.validator.kind == Script::Kind::signed_by && out.validator.address == address)
            sum += out.value;
    }
    return sum;
}

}  // namespace shardsim::ledger
