#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "shardsim/bytes.hpp"
#include "shardsim/constants.hpp"
#include "shardsim/crypto.hpp"
#include "shardsim/digest.hpp"
#include "shardsim/serial.hpp"

namespace shardsim::ledger {

// ---------------------------------------------------------------------------
// Validator scripts
// ---------------------------------------------------------------------------

// Constraint-language validator. An output is spendable when its validator
// accepts the spending context. Payment outputs use signed_by(address) and
// an empty datum; contract outputs carry state in the datum.
struct Script {
    enum class Kind : uint8_t {
        const_true = 0,
        const_false = 1,
        signed_by = 2,           // some input carries a valid signature by `address`
        after = 3,               // current slot >= `slot`
        before = 4,              // current slot < `slot`
        datum_equals = 5,        // datum of the spent output equals `data`
        next_datum_equals = 6,   // datum of the unique continuing output equals `data`
        value_preserved = 7,     // continuing output's value >= spent output's value
        continues_contract = 8,  // a unique same-validator continuing output exists
        and_ = 9,
        or_ = 10,
        not_ = 11,
    };

    Kind kind = Kind::const_true;
    Digest address{};               // signed_by
    uint64_t slot = 0;              // after / before
    Bytes data;                     // datum_equals / next_datum_equals
    std::vector<Script> children;   // and_ / or_ / not_

    bool operator==(const Script&) const = default;

    static Script constant(bool accept);
    static Script signed_by_addr(const Digest& address);
    static Script after_slot(uint64_t slot);
    static Script before_slot(uint64_t slot);
    static Script datum_eq(Bytes data);
    static Script next_datum_eq(Bytes data);
    static Script preserves_value();
    static Script continues();
    static Script all_of(std::vector<Script> children);
    static Script any_of(std::vector<Script> children);
    static Script negation(Script child);
};

void serialize_script(Writer& w, const Script& s);
Script parse_script(Reader& r);  // throws Error on malformed or too-deep input
Digest script_hash(const Script& s);
size_t script_depth(const Script& s);

// Pay-to-address is a one-constraint script.
Script pay_to_address(const Digest& address);

// ---------------------------------------------------------------------------
// Outputs and transactions
// ---------------------------------------------------------------------------

// The eUTXO treble: validator, value, datum. A non-empty datum makes the
// output a contract output.
struct Output {
    Script validator;
    uint64_t value = 0;
    Bytes datum;

    bool operator==(const Output&) const = default;

    bool is_contract() const { return !datum.empty(); }
    bool has_terminal_datum() const {
        return datum.size() == 1 && datum[0] == kTerminalDatumByte;
    }
};

struct OutputRef {
    Digest tx_id{};
    uint32_t index = 0;

    auto operator<=>(const OutputRef&) const = default;
};

struct OutputRefHash {
    size_t operator()(const OutputRef& r) const {
        return DigestHash{}(r.tx_id) ^ (size_t(r.index) * 0x9e3779b97f4a7c15ULL);
    }
};

struct TxInput {
    OutputRef ref;
    Bytes redeemer;
    crypto::Signature signature;  // may be absent (empty) for script-only spends
};

struct Transaction {
    std::vector<TxInput> inputs;
    std::vector<Output> outputs;
    uint64_t fee = 0;
    uint64_t valid_from = 0;
    uint64_t valid_to = UINT64_MAX;
    Digest sender{};  // routing key
};

// Hash of the canonical bytes excluding signatures; input signatures sign
// this id.
Digest tx_id(const Transaction& tx);

void serialize_tx(Writer& w, const Transaction& tx, bool include_signatures);
Bytes tx_bytes(const Transaction& tx);  // full canonical form, signatures included
Transaction parse_tx(Reader& r);

void serialize_output(Writer& w, const Output& o);
Output parse_output(Reader& r);
void serialize_ref(Writer& w, const OutputRef& ref);
OutputRef parse_ref(Reader& r);

// ---------------------------------------------------------------------------
// UTXO set
// ---------------------------------------------------------------------------

class UtxoSet {
  public:
    using Map = std::unordered_map<OutputRef, Output, OutputRefHash>;

    bool contains(const OutputRef& ref) const { return entries_.count(ref) != 0; }
    const Output* find(const OutputRef& ref) const;
    void insert(const OutputRef& ref, Output out);  // throws if ref already present
    void erase(const OutputRef& ref);               // throws if absent
    size_t size() const { return entries_.size(); }
    uint64_t total_value() const;
    const Map& entries() const { return entries_; }

    // Entries ordered by ref bytes; the basis of state-root commitments.
    std::vector<std::pair<OutputRef, Output>> sorted_entries() const;

  private:
    Map entries_;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

enum class Violation : uint8_t {
    unknown_input,
    double_spend_within_tx,
    value_imbalance,
    bad_signature,
    script_rejected,
    outside_validity_range,
    continuity_violation,
};

const char* violation_name(Violation v);

struct ValidationReport {
    struct Entry {
        Violation kind;
        int input_index;  // -1 when not input-specific
        std::string detail;
    };
    std::vector<Entry> violations;

    bool ok() const { return violations.empty(); }
    bool has(Violation kind) const;
    std::string to_string() const;
};

struct ScriptContext {
    const Transaction* tx = nullptr;
    Digest spending_tx_id{};
    size_t input_index = 0;
    uint64_t current_slot = 0;
    const Output* spent = nullptr;
    const Output* continuing = nullptr;  // unique same-validator output, if any
};

enum class ScriptError : uint8_t { none = 0, budget_exhausted, depth_exceeded };

struct EvalResult {
    bool accepted = false;
    ScriptError error = ScriptError::none;
};

EvalResult eval_script(const Script& script, const ScriptContext& ctx);

// True iff the continuity rule holds for `validator_hash`: the spent
// contract outputs of that validator are all terminal, or exactly one output
// of tx carries the same validator together with contract state (a datum).
// Plain value outputs under the same validator are payments, not state.
bool check_state_continuity(const Transaction& tx, const Digest& validator_hash,
                            std::span<const Output> spent_outputs);

// The unique same-validator output, or nullptr when absent or ambiguous.
// Datum-carrying outputs take precedence over plain ones.
const Output* find_continuing_output(const Transaction& tx, const Digest& validator_hash);

ValidationReport validate_tx(const UtxoSet& utxo, const Transaction& tx, uint64_t slot);

// Preconditions: validate_tx reported no violations. Structural failures
// (missing or duplicated input refs, duplicate output ref) throw Error and
// leave nothing applied.
UtxoSet apply_tx(const UtxoSet& utxo, const Transaction& tx);
void apply_tx_in_place(UtxoSet& utxo, const Transaction& tx);

uint64_t balance_of(const UtxoSet& utxo, const Digest& address);

// Human-readable JSON debug forms (never hashed; the canonical byte format
// is the hashed representation).
std::string debug_json(const Transaction& tx);
std::string debug_json(const UtxoSet& utxo);

}  // namespace shardsim::ledger
