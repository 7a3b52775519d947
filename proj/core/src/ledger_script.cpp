#include "shardsim/error.hpp"
#include "shardsim/ledger.hpp"

namespace shardsim::ledger {

Script Script::constant(bool accept) {
    Script s;
    s.kind = accept ? Kind::const_true : Kind::const_false;
    return s;
}

Script Script::signed_by_addr(const Digest& address) {
    Script s;
    s.kind = Kind::signed_by;
    s.address = address;
    return s;
}

Script Script::after_slot(uint64_t slot) {
    Script s;
    s.kind = Kind::after;
    s.slot = slot;
    return s;
}

Script Script::before_slot(uint64_t slot) {
    Script s;
    s.kind = Kind::before;
    s.slot = slot;
    return s;
}

Script Script::datum_eq(Bytes data) {
    Script s;
    s.kind = Kind::datum_equals;
    s.data = std::move(data);
    return s;
}

Script Script::next_datum_eq(Bytes data) {
    Script s;
    s.kind = Kind::next_datum_equals;
    s.data = std::move(data);
    return s;
}

Script Script::preserves_value() {
    Script s;
    s.kind = Kind::value_preserved;
    return s;
}

Script Script::continues() {
    Script s;
    s.kind = Kind::continues_contract;
    return s;
}

Script Script::all_of(std::vector<Script> children) {
    Script s;
    s.kind = Kind::and_;
    s.children = std::move(children);
    return s;
}

Script Script::any_of(std::vector<Script> children) {
    Script s;
    s.kind = Kind::or_;
    s.children = std::move(children);
    return s;
}

Script Script::negation(Script child) {
    Script s;
    s.kind = Kind::not_;
    s.children.push_back(std::move(child));
    return s;
}

Script pay_to_address(const Digest& address) { return Script::signed_by_addr(address); }

void serialize_script(Writer& w, const Script& s) {
    w.u8(static_cast<uint8_t>(s.kind));
    switch (s.kind) {
        case Script::Kind::const_true:
        case Script::Kind::const_false:
        case Script::Kind::value_preserved:
        case Script::Kind::continues_contract:
            break;
        case Script::Kind::signed_by:
            w.digest(s.address);
            break;
        case Script::Kind::after:
        case Script::Kind::before:
            w.u64(s.slot);
            break;
        case Script::Kind::datum_equals:
        case Script::Kind::next_datum_equals:
            w.var_bytes(as_span(s.data));
            break;
        case Script::Kind::and_:
        case Script::Kind::or_:
        case Script::Kind::not_:
            w.u32(static_cast<uint32_t>(s.children.size()));
            for (const auto& c : s.children) serialize_script(w, c);
            break;
    }
}

namespace {

Script parse_script_inner(Reader& r, size_t depth) {
    if (depth > kScriptMaxDepth) throw Error("script: depth limit exceeded");
    Script s;
    uint8_t tag = r.u8();
    if (tag > static_cast<uint8_t>(Script::Kind::not_)) throw Error("script: bad tag");
    s.kind = static_cast<Script::Kind>(tag);
    switch (s.kind) {
        case Script::Kind::const_true:
        case Script::Kind::const_false:
        case Script::Kind::value_preserved:
        case Script::Kind::continues_contract:
            break;
        case Script::Kind::signed_by:
            s.address = r.digest();
            break;
        case Script::Kind::after:
        case Script::Kind::before:
            s.slot = r.u64();
            break;
        case Script::Kind::datum_equals:
        case Script::Kind::next_datum_equals:
            s.data = r.var_bytes();
            break;
        case Script::Kind::and_:
        case Script::Kind::or_:
        case Script::Kind::not_: {
            uint32_t n = r.u32();
            if (s.kind == Script::Kind::not_ && n != 1) throw Error("script: not_ arity");
            s.children.reserve(n);
            for (uint32_t i = 0; i < n; ++i) s.children.push_back(parse_script_inner(r, depth + 1));
            break;
        }
    }
    return s;
}

}  // namespace

Script parse_script(Reader& r) { return parse_script_inner(r, 1); }

Digest script_hash(const Script& s) {
    Writer w;
    serialize_script(w, s);
    return crypto::hash256(as_span(w.bytes()));
}

size_t script_depth(const Script& s) {
    size_t deepest = 0;
    for (const auto& c : s.children) deepest = std::max(deepest, script_depth(c));
    return 1 + deepest;
}

namespace {

struct EvalState {
    uint64_t steps = 0;
    ScriptError error = ScriptError::none;
};

bool eval_node(const Script& s, const ScriptContext& ctx, EvalState& st, size_t depth) {
    if (st.error != ScriptError::none) return false;
    if (++st.steps > kScriptStepBudget) {
        st.error = ScriptError::budget_exhausted;
        return false;
    }
    if (depth > kScriptMaxDepth) {
        st.error = ScriptError::depth_exceeded;
        return false;
    }
    switch (s.kind) {
        case Script::Kind::const_true:
            return true;
        case Script::Kind::const_false:
            return false;
        case Script::Kind::signed_by: {
            if (!ctx.tx) return false;
            for (const auto& in : ctx.tx->inputs) {
                if (in.signature.empty()) continue;
                if (crypto::address_of(as_span(in.signature.signer)) != s.address) continue;
                if (crypto::verify_sig(as_span(in.signature.signer), ctx.spending_tx_id.span(),
                                       in.signature))
                    return true;
            }
            return false;
        }
        case Script::Kind::after:
            return ctx.current_slot >= s.slot;
        case Script::Kind::before:
            return ctx.current_slot < s.slot;
        case Script::Kind::datum_equals:
            return ctx.spent && ctx.spent->datum == s.data;
        case Script::Kind::next_datum_equals:
            return ctx.continuing && ctx.continuing->datum == s.data;
        case Script::Kind::value_preserved:
            return ctx.spent && ctx.continuing && ctx.continuing->value >= ctx.spent->value;
        case Script::Kind::continues_contract:
            return ctx.continuing != nullptr;
        case Script::Kind::and_: {
            for (const auto& c : s.children)
                if (!eval_node(c, ctx, st, depth + 1)) return false;
            return true;
        }
        case Script::Kind::or_: {
            for (const auto& c : s.children)
                if (eval_node(c, ctx, st, depth + 1)) return st.error == ScriptError::none;
            return false;
        }
        case Script::Kind::not_:
            return !eval_node(s.children[0], ctx, st, depth + 1) &&
                   st.error == ScriptError::none;
    }
    return false;
}

}  // namespace

EvalResult eval_script(const Script& script, const ScriptContext& ctx) {
    EvalState st;
    bool accepted = eval_node(script, ctx, st, 1);
    if (st.error != ScriptError::none) return {false, st.error};
    return {accepted, ScriptError::none};
}

}  // namespace shardsim::ledger
