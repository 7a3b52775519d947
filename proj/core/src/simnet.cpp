#include "shardsim/simnet.hpp"

#include <algorithm>
#include <future>
#include <set>
#include <unordered_set>

#include "json_codec.hpp"
#include "shardsim/constants.hpp"
#include "shardsim/error.hpp"
#include "shardsim/rng.hpp"
#include "shardsim/serial.hpp"

namespace shardsim::sim {

using codec::ordered_json;

// ---------------------------------------------------------------------------
// Scheduler
// ---------------------------------------------------------------------------

uint64_t Scheduler::enqueue(uint64_t deliver_slot, uint32_t from, uint32_t to,
                            Payload payload) {
    if (deliver_slot < current_slot_)
        throw Error("scheduler: event scheduled into the past");
    SimEvent ev;
    ev.deliver_slot = deliver_slot;
    ev.seq = next_seq_++;
    ev.from = from;
    ev.to = to;
    ev.payload = std::move(payload);
    by_slot_[deliver_slot].push_back(std::move(ev));
    ++pending_;
    return next_seq_ - 1;
}

std::vector<uint64_t> Scheduler::enqueue_broadcast(
    uint32_t from, const Payload& payload, const std::function<uint64_t()>& latency_draw,
    uint64_t now) {
    std::vector<uint64_t> seqs;
    seqs.reserve(broadcast_targets_.size());
    for (uint32_t target : broadcast_targets_)
        seqs.push_back(enqueue(now + latency_draw(), from, target, payload));
    return seqs;
}

bool Scheduler::step(SimEvent& out) {
    auto it = by_slot_.find(current_slot_);
    if (it == by_slot_.end() || it->second.empty()) return false;
    out = std::move(it->second.front());
    it->second.pop_front();
    if (it->second.empty()) by_slot_.erase(it);
    ++processed_;
    --pending_;
    return true;
}

void Scheduler::advance_to(uint64_t slot) {
    if (slot < current_slot_) throw Error("scheduler: cannot rewind");
    current_slot_ = slot;
}

// ---------------------------------------------------------------------------
// SimResult
// ---------------------------------------------------------------------------

Digest SimResult::digest() const {
    Writer w;
    w.u64(config.seed);
    w.u64(config.nodes);
    w.u64(config.shard_count);
    w.u64(config.epochs);
    w.u64(config.epoch_length);
    w.u32(static_cast<uint32_t>(epochs.size()));
    for (const auto& e : epochs) {
        w.u64(e.epoch);
        w.u32(static_cast<uint32_t>(e.committed_tx_per_shard.size()));
        for (uint64_t c : e.committed_tx_per_shard) w.u64(c);
        w.u64(e.committed_tx_total);
        w.u64(e.blocks_committed);
        w.u64(e.fees_burned);
        w.u64(e.sessions_initiated);
        w.u64(e.sessions_committed);
        w.u64(e.sessions_rolled_back);
        w.u64(e.late_certificates);
        w.u64(e.locks_outstanding_end);
        w.u64(e.workload_emitted);
        w.u64(e.workload_committed);
        w.u64(e.invalid_blocks_proposed);
        w.u64(e.equivocations);
        w.u64(e.coordinator_mismatches);
        w.u64(e.formation_salt);
        w.u64(e.batches_committed);
        w.u64(e.batches_rolled_back);
        w.u64(e.fraud_proofs_accepted);
        w.u64(e.fraud_proofs_rejected);
        w.u64(e.pegs_locked);
        w.u64(e.pegs_minted);
        w.u64(e.pegs_burned);
        w.u64(e.pegs_unlocked);
        w.u64(e.max_byz_shard_permille);
    }
    w.u64(total_committed_tx);
    w.u64(total_sessions_initiated);
    w.u64(total_sessions_committed);
    w.u64(total_sessions_rolled_back);
    w.u64(final_locks_outstanding);
    return crypto::hash256(as_span(w.bytes()));
}

namespace {

ordered_json epoch_to_json(const EpochMetrics& e) {
    return ordered_json{{"epoch", e.epoch},
                        {"committedTxPerShard", e.committed_tx_per_shard},
                        {"committedTxTotal", e.committed_tx_total},
                        {"blocksCommitted", e.blocks_committed},
                        {"feesBurned", e.fees_burned},
                        {"sessionsInitiated", e.sessions_initiated},
                        {"sessionsCommitted", e.sessions_committed},
                        {"sessionsRolledBack", e.sessions_rolled_back},
                        {"lateCertificates", e.late_certificates},
                        {"locksOutstandingEnd", e.locks_outstanding_end},
                        {"workloadEmitted", e.workload_emitted},
                        {"workloadCommitted", e.workload_committed},
                        {"invalidBlocksProposed", e.invalid_blocks_proposed},
                        {"equivocations", e.equivocations},
                        {"coordinatorMismatches", e.coordinator_mismatches},
                        {"formationSalt", e.formation_salt},
                        {"batchesCommitted", e.batches_committed},
                        {"batchesRolledBack", e.batches_rolled_back},
                        {"fraudProofsAccepted", e.fraud_proofs_accepted},
                        {"fraudProofsRejected", e.fraud_proofs_rejected},
                        {"pegsLocked", e.pegs_locked},
                        {"pegsMinted", e.pegs_minted},
                        {"pegsBurned", e.pegs_burned},
                        {"pegsUnlocked", e.pegs_unlocked},
                        {"maxByzShardPermille", e.max_byz_shard_permille}};
}

}  // namespace

std::string SimResult::to_json() const {
    ordered_json j;
    j["config"] = ordered_json::parse(config.to_json_text());
    j["digest"] = digest().hex();
    j["totals"] = ordered_json{{"committedTx", total_committed_tx},
                               {"sessionsInitiated", total_sessions_initiated},
                               {"sessionsCommitted", total_sessions_committed},
                               {"sessionsRolledBack", total_sessions_rolled_back},
                               {"workloadEmitted", total_workload_emitted},
                               {"workloadCommitted", total_workload_committed},
                               {"locksOutstanding", final_locks_outstanding},
                               {"committedPerEpoch", committed_per_epoch()}};
    ordered_json rows = ordered_json::array();
    for (const auto& e : epochs) rows.push_back(epoch_to_json(e));
    j["epochs"] = std::move(rows);
    return j.dump(2);
}

std::string SimResult::epochs_csv() const {
    std::string csv =
        "epoch,committed_tx,blocks,fees,sessions_initiated,sessions_committed,"
        "sessions_rolled_back,late_certs,locks_end,workload_emitted,workload_committed,"
        "invalid_blocks_proposed,equivocations,coordinator_mismatches,formation_salt,"
        "batches_committed,batches_rolled_back,fraud_accepted,fraud_rejected,"
        "pegs_locked,pegs_minted,pegs_burned,pegs_unlocked,max_byz_shard_permille\n";
    for (const auto& e : epochs) {
        csv += std::to_string(e.epoch) + "," + std::to_string(e.committed_tx_total) + "," +
               std::to_string(e.blocks_committed) + "," + std::to_string(e.fees_burned) + "," +
               std::to_string(e.sessions_initiated) + "," +
               std::to_string(e.sessions_committed) + "," +
               std::to_string(e.sessions_rolled_back) + "," +
               std::to_string(e.late_certificates) + "," +
               std::to_string(e.locks_outstanding_end) + "," +
               std::to_string(e.workload_emitted) + "," +
               std::to_string(e.workload_committed) + "," +
               std::to_string(e.invalid_blocks_proposed) + "," +
               std::to_string(e.equivocations) + "," +
               std::to_string(e.coordinator_mismatches) + "," +
               std::to_string(e.formation_salt) + "," +
               std::to_string(e.batches_committed) + "," +
               std::to_string(e.batches_rolled_back) + "," +
               std::to_string(e.fraud_proofs_accepted) + "," +
               std::to_string(e.fraud_proofs_rejected) + "," +
               std::to_string(e.pegs_locked) + "," + std::to_string(e.pegs_minted) + "," +
               std::to_string(e.pegs_burned) + "," + std::to_string(e.pegs_unlocked) + "," +
               std::to_string(e.max_byz_shard_permille) + "\n";
    }
    return csv;
}

// ---------------------------------------------------------------------------
// Simulation
// ---------------------------------------------------------------------------

namespace {

constexpr uint32_t kShardBase = 10'000;
constexpr uint32_t kUserBase = 20'000;
constexpr uint32_t kChildOp = 30'000;
constexpr uint32_t kWatcher = 30'001;
constexpr uint32_t kChildChainId = 1;

enum class Behavior : uint8_t { honest, sign_invalid, equivocate, silent, bad_coordinator };

enum WorkKind : uint8_t { kIntra = 0, kSeed, kCross, kContract };

struct Validator {
    crypto::KeyPair key;
    sharding::IpAddress ip{};
    Behavior behavior = Behavior::honest;
};

struct WalletEntry {
    uint64_t value = 0;
    uint32_t shard = 0;
    bool reserved = false;
};

struct User {
    crypto::KeyPair key;
    uint32_t home = 0;
    bool vanishing = false;
    bool session_active = false;
    std::map<ledger::OutputRef, WalletEntry> wallet;
    // peg state machine
    enum class PegPhase : uint8_t { idle, locking, minted, paid, burned } peg_phase =
        PegPhase::idle;
    std::vector<std::pair<ledger::OutputRef, uint64_t>> child_refs;
};

struct ClientSession {
    crossshard::CrossShardSession session;
    std::map<uint32_t, crossshard::ShardProof> proofs;
    bool aborted = false;
    bool commit_sent = false;
};

struct SessionRecord {
    crossshard::CrossShardSession session;
    crossshard::SessionState state = crossshard::SessionState::initialized;
    bool locked_here = false;
    bool included = false;
    bool have_cert = false;
};

struct ShardState {
    uint32_t index = 0;
    ledger::UtxoSet utxo;
    crossshard::LockOverlay locks;
    std::deque<ledger::Transaction> mempool;
    std::unordered_set<Digest, DigestHash> mempool_ids;
    std::deque<Digest> cert_queue;
    std::unordered_map<Digest, SessionRecord, DigestHash> sessions;
    Digest head{};
    uint64_t height = 0;
    uint64_t committed_epoch = 0;
};

struct SubRound {
    std::optional<chain::Block> committed;
    uint32_t invalid_proposed = 0;
    uint32_t equivocated = 0;
};

Bytes u64_datum(uint64_t v) {
    Writer w;
    w.u64(v);
    return w.take();
}

class Simulation {
  public:
    Simulation(const ScenarioConfig& cfg, Transcript* tr, bool parallel)
        : cfg_(cfg),
          tr_(tr),
          parallel_(parallel),
          scheme_(cfg.scheme()),
          rng_latency_(Rng(cfg.seed).fork(1)),
          rng_workload_(Rng(cfg.seed).fork(2)),
          rng_byz_(Rng(cfg.seed).fork(3)),
          rng_keys_(Rng(cfg.seed).fork(4)) {}

    SimResult run();

  private:
    // --- setup -----------------------------------------------------------
    void setup_validators();
    void setup_users();
    void setup_genesis();
    void setup_layer2();

    // --- per-slot phases --------------------------------------------------
    void form_epoch_now();
    void emit_workload();
    void deliver_events();
    void consensus_round();
    void sweep_locks(ShardState& sh);
    void process_pending_unlocks();
    void finalize_epoch_now();

    // --- event handlers ----------------------------------------------------
    void dispatch(const SimEvent& ev);
    void on_tx_submit(uint32_t shard, const PTxSubmit& p);
    void on_tx_routed(uint32_t shard, const PTxRouted& p);
    void on_lock_request(uint32_t shard, const PLockRequest& p);
    void on_proof(uint32_t user, const PProof& p);
    void on_commit_cert(uint32_t shard, const PCommitCert& p);
    void on_cert_forward(uint32_t shard, const PCertForward& p);
    void on_abort_cert(uint32_t shard, const PAbortCert& p);
    void on_peg_lock(uint32_t shard, const PPegLock& p);
    void on_mint_auth(const PMintAuth& p);
    void on_child_pay(const PChildPay& p);
    void on_burn_request(const PBurnRequest& p);
    void on_burn_proof(uint32_t shard, const PBurnProof& p);
    void on_batch_commit(uint32_t shard, const PBatchCommit& p);
    void on_batch_observed(const PBatchObserved& p);
    void on_fraud_proof(uint32_t shard, const PFraudProof& p);
    void on_rollback_notice(const PRollbackNotice& p);

    // --- helpers ------------------------------------------------------------
    uint64_t latency() { return rng_latency_.in_range(cfg_.latency.min_slots, cfg_.latency.max_slots); }
    void send(uint32_t from, uint32_t to, Payload p) {
        sched_.enqueue(t_ + latency(), from, to, std::move(p));
    }
    void emit_line(ordered_json j) {
        if (tr_) tr_->emit(j.dump());
    }
    Behavior behavior_of(const Digest& address) const {
        auto it = validator_by_address_.find(address);
        return it == validator_by_address_.end() ? Behavior::honest
                                                 : validators_[it->second].behavior;
    }
    ByteSpan pubkey_of(const Digest& address) const {
        auto it = validator_by_address_.find(address);
        return it == validator_by_address_.end()
                   ? ByteSpan{}
                   : as_span(validators_[it->second].key.public_key);
    }
    crossshard::QuorumCheck quorum_check() {
        return [this](const crossshard::ShardProof& proof) {
            auto it = membership_history_.find(proof.epoch);
            if (it == membership_history_.end()) return false;
            if (proof.shard >= it->second.size()) return false;
            return crossshard::proof_quorum_valid(
                proof, it->second[proof.shard],
                [this](const Digest& a) { return pubkey_of(a); });
        };
    }
    chain::ForeignTxCheck foreign_check(const ShardState& sh) const {
        return [&sh](const ledger::Transaction& tx) -> std::optional<bool> {
            auto it = sh.sessions.find(ledger::tx_id(tx));
            if (it == sh.sessions.end()) return std::nullopt;
            const SessionRecord& rec = it->second;
            return rec.state == crossshard::SessionState::committed && rec.have_cert &&
                   !rec.included;
        };
    }
    ledger::Transaction make_payment(const User& from, const Digest& to_addr,
                                     std::vector<ledger::OutputRef> refs, uint64_t total,
                                     uint64_t fee);
    void credit_outputs(const ledger::Transaction& tx, const Digest& id, uint32_t shard);
    void debit_input(const ledger::OutputRef& ref);
    void unreserve(const ledger::OutputRef& ref);
    void mark_session_committed(const Digest& sid);
    void mark_session_rolled_back(const Digest& sid);
    SubRound run_subround(const ShardState& sh) const;
    chain::Block build_candidate(const ShardState& sh, const Digest& producer,
                                 bool* has_cert_txs) const;
    bool member_accepts(const ShardState& sh, const chain::Block& block) const;
    void commit_block(ShardState& sh, chain::Block block);
    void cut_rollup_batch();
    void child_send_batch(uint64_t child_index, uint64_t extra_latency);
    void erase_session_refs(ShardState& sh, SessionRecord& rec);
    crypto::Seed32 next_seed(Rng& rng);

    // --- state ----------------------------------------------------------
    ScenarioConfig cfg_;
    Transcript* tr_;
    bool parallel_;
    crypto::SigScheme scheme_;
    Rng rng_latency_, rng_workload_, rng_byz_, rng_keys_;
    Scheduler sched_;

    std::vector<Validator> validators_;
    std::map<Digest, uint32_t> validator_by_address_;
    std::vector<User> users_;
    std::vector<std::vector<uint32_t>> users_by_shard_;
    std::map<Digest, uint32_t> user_by_address_;
    std::unordered_map<ledger::OutputRef, uint32_t, ledger::OutputRefHash> wallet_index_;
    std::vector<ShardState> shards_;
    sharding::RoutingTable routing_;

    sharding::EpochContext ectx_;
    std::map<uint64_t, std::vector<std::vector<Digest>>> membership_history_;
    Digest next_randomness_{};

    std::map<Digest, ClientSession> client_sessions_;
    std::map<Digest, uint8_t> session_global_;  // 0 open, 1 committed, 2 rolled back

    // layer 2
    std::optional<layer2::ParentPeg> peg_;
    std::optional<layer2::ChildChain> child_;
    std::optional<layer2::RollupContract> rollup_;
    ledger::UtxoSet watcher_state_;
    Digest watcher_root_{};
    std::vector<layer2::Batch> child_batches_;
    std::vector<Digest> child_post_roots_;     // honest roots per child batch
    std::vector<Digest> child_claimed_roots_;  // as last sent to the parent
    size_t child_applied_cursor_ = 0;
    std::vector<std::pair<ledger::OutputRef, ledger::Output>> child_deposits_pending_;
    std::set<uint64_t> corrupted_batches_;
    std::vector<uint64_t> rollup_child_index_;  // commitment index -> child batch index
    struct PendingUnlock {
        layer2::BurnProof proof;
    };
    std::vector<PendingUnlock> pending_unlocks_;

    // counter contract tracking
    bool contract_enabled_ = false;
    ledger::Script contract_validator_;
    Digest contract_vh_{};
    ledger::OutputRef contract_ref_{};
    uint64_t contract_value_ = 0;
    uint64_t contract_datum_ = 0;
    uint32_t contract_home_ = 0;
    uint32_t contract_owner_ = 0;
    bool step_pending_ = false;
    Digest pending_step_id_{};

    std::unordered_map<Digest, uint8_t, DigestHash> emitted_kind_;

    uint64_t t_ = 0;
    uint64_t epoch_ = 0;
    uint64_t total_slots_ = 0;
    EpochMetrics em_;
    SimResult result_;
};

crypto::Seed32 Simulation::next_seed(Rng& rng) {
    crypto::Seed32 seed{};
    for (int i = 0; i < 4; ++i) {
        uint64_t v = rng.next();
        for (int b = 0; b < 8; ++b) seed[i * 8 + b] = uint8_t(v >> (8 * (7 - b)));
    }
    return seed;
}

void Simulation::setup_validators() {
    validators_.reserve(cfg_.nodes);
    for (uint32_t i = 0; i < cfg_.nodes; ++i) {
        Validator v;
        v.key = crypto::keygen(scheme_, next_seed(rng_keys_));
        v.ip = {10, 0, uint8_t(i >> 8), uint8_t(i & 0xFF)};
        validators_.push_back(std::move(v));
    }
    uint32_t byz_count = uint32_t(double(cfg_.nodes) * cfg_.byzantine.fraction);
    std::vector<uint32_t> order(cfg_.nodes);
    for (uint32_t i = 0; i < cfg_.nodes; ++i) order[i] = i;
    rng_byz_.shuffle(order);
    Behavior beh = Behavior::sign_invalid;
    if (cfg_.byzantine.behavior == "equivocate") beh = Behavior::equivocate;
    else if (cfg_.byzantine.behavior == "silent") beh = Behavior::silent;
    else if (cfg_.byzantine.behavior == "bad_coordinator") beh = Behavior::bad_coordinator;
    for (uint32_t i = 0; i < byz_count; ++i) validators_[order[i]].behavior = beh;
    for (uint32_t i = 0; i < cfg_.nodes; ++i)
        validator_by_address_[validators_[i].key.address] = i;
}

void Simulation::setup_users() {
    users_by_shard_.assign(cfg_.shard_count, {});
    uint32_t needed = cfg_.users_per_shard;
    uint32_t filled = 0;
    uint64_t guard = 0;
    while (filled < cfg_.shard_count * needed) {
        if (++guard > 1'000'000) throw Error("simnet: user sampling did not converge");
        crypto::KeyPair key = crypto::keygen(scheme_, next_seed(rng_keys_));
        uint32_t home = sharding::home_shard(key.address, cfg_.shard_count);
        if (users_by_shard_[home].size() >= needed) continue;
        User u;
        u.key = std::move(key);
        u.home = home;
        u.vanishing = rng_byz_.chance(cfg_.workload.vanishing_client_fraction);
        uint32_t idx = uint32_t(users_.size());
        users_by_shard_[home].push_back(idx);
        user_by_address_[u.key.address] = idx;
        users_.push_back(std::move(u));
        ++filled;
    }
}

void Simulation::setup_genesis() {
    shards_.resize(cfg_.shard_count);
    for (uint32_t s = 0; s < cfg_.shard_count; ++s) {
        shards_[s].index = s;
        Writer w;
        w.raw(str_span("shard-genesis"));
        w.u32(s);
        w.u64(cfg_.seed);
        shards_[s].head = crypto::hash256(as_span(w.bytes()));
        emit_line({{"type", "genesis_shard"}, {"shard", s}, {"head", shards_[s].head.hex()}});
    }

    auto add_genesis_output = [&](uint32_t user_idx, uint32_t shard, uint32_t serial) {
        User& u = users_[user_idx];
        Writer w;
        w.raw(str_span("genesis-utxo"));
        w.u32(user_idx);
        w.u32(serial);
        ledger::OutputRef ref{crypto::hash256(as_span(w.bytes())), 0};
        ledger::Output out;
        out.validator = ledger::pay_to_address(u.key.address);
        out.value = cfg_.genesis_value;
        shards_[shard].utxo.insert(ref, out);
        routing_.add(ref, {shard, ledger::script_hash(out.validator), false});
        u.wallet[ref] = {cfg_.genesis_value, shard, false};
        wallet_index_[ref] = user_idx;
        emit_line({{"type", "genesis_output"},
                   {"shard", shard},
                   {"ref", codec::ref_to_json(ref)},
                   {"output", codec::output_to_json(out)}});
    };

    for (uint32_t i = 0; i < users_.size(); ++i) {
        uint32_t serial = 0;
        for (uint32_t j = 0; j < cfg_.genesis_outputs_per_user; ++j)
            add_genesis_output(i, users_[i].home, serial++);
        for (uint32_t j = 0; j < cfg_.genesis_foreign_outputs_per_user; ++j) {
            if (cfg_.shard_count == 1) break;
            uint32_t foreign = (users_[i].home + 1 + j) % cfg_.shard_count;
            if (foreign == users_[i].home) foreign = (foreign + 1) % cfg_.shard_count;
            add_genesis_output(i, foreign, serial++);
        }
    }

    if (cfg_.workload.contract_step > 0) {
        contract_enabled_ = true;
        contract_owner_ = 0;
        contract_validator_ = ledger::pay_to_address(users_[contract_owner_].key.address);
        contract_vh_ = ledger::script_hash(contract_validator_);
        contract_home_ = sharding::trailing_index(contract_vh_, cfg_.shard_count);
        contract_value_ = cfg_.genesis_value;
        contract_datum_ = 0;
        Writer w;
        w.raw(str_span("genesis-contract"));
        w.u64(cfg_.seed);
        contract_ref_ = {crypto::hash256(as_span(w.bytes())), 0};
        ledger::Output out;
        out.validator = contract_validator_;
        out.value = contract_value_;
        out.datum = u64_datum(0);
        shards_[contract_home_].utxo.insert(contract_ref_, out);
        routing_.add(contract_ref_, {contract_home_, contract_vh_, true});
        emit_line({{"type", "genesis_output"},
                   {"shard", contract_home_},
                   {"ref", codec::ref_to_json(contract_ref_)},
                   {"output", codec::output_to_json(out)}});
    }
}

void Simulation::setup_layer2() {
    if (cfg_.workload.peg_op <= 0 && cfg_.workload.rollup_batch_every == 0) return;
    peg_.emplace(crypto::keygen(scheme_, next_seed(rng_keys_)), cfg_.validation_period);
    child_.emplace(kChildChainId, crypto::keygen(scheme_, next_seed(rng_keys_)));
    peg_->register_child_operator(kChildChainId, child_->operator_key().public_key);
    rollup_.emplace(layer2::state_root(ledger::UtxoSet{}));
    watcher_root_ = rollup_->genesis_root();
}

// --- payments ----------------------------------------------------------

ledger::Transaction Simulation::make_payment(const User& from, const Digest& to_addr,
                                             std::vector<ledger::OutputRef> refs,
                                             uint64_t total, uint64_t fee) {
    ledger::Transaction tx;
    tx.sender = from.key.address;
    for (auto& ref : refs) tx.inputs.push_back({ref, {}, {}});
    ledger::Output out;
    out.validator = ledger::pay_to_address(to_addr);
    out.value = total - fee;
    tx.outputs.push_back(std::move(out));
    tx.fee = fee;
    Digest id = ledger::tx_id(tx);
    for (auto& in : tx.inputs) in.signature = crypto::sign(from.key, id.span());
    return tx;
}

void Simulation::credit_outputs(const ledger::Transaction& tx, const Digest& id,
                                uint32_t shard) {
    for (uint32_t i = 0; i < tx.outputs.size(); ++i) {
        const ledger::Output& out = tx.outputs[i];
        ledger::OutputRef ref{id, i};
        Digest vh = ledger::script_hash(out.validator);
        routing_.add(ref, {shard, vh, out.is_contract()});
        if (out.validator.kind == ledger::Script::Kind::signed_by && !out.is_contract()) {
            auto it = user_by_address_.find(out.validator.address);
            if (it != user_by_address_.end()) {
                users_[it->second].wallet[ref] = {out.value, shard, false};
                wallet_index_[ref] = it->second;
            }
        }
    }
}

void Simulation::debit_input(const ledger::OutputRef& ref) {
    routing_.remove(ref);
    auto it = wallet_index_.find(ref);
    if (it != wallet_index_.end()) {
        users_[it->second].wallet.erase(ref);
        wallet_index_.erase(it);
    }
}

void Simulation::unreserve(const ledger::OutputRef& ref) {
    auto it = wallet_index_.find(ref);
    if (it == wallet_index_.end()) return;
    auto w = users_[it->second].wallet.find(ref);
    if (w != users_[it->second].wallet.end()) w->second.reserved = false;
}

void Simulation::mark_session_committed(const Digest& sid) {
    auto it = session_global_.find(sid);
    if (it == session_global_.end() || it->second != 0) return;
    it->second = 1;
    ++em_.sessions_committed;
    auto cs = client_sessions_.find(sid);
    if (cs != client_sessions_.end()) {
        auto u = user_by_address_.find(cs->second.session.tx.sender);
        if (u != user_by_address_.end()) users_[u->second].session_active = false;
    }
}

void Simulation::mark_session_rolled_back(const Digest& sid) {
    auto it = session_global_.find(sid);
    if (it == session_global_.end() || it->second != 0) return;
    it->second = 2;
    ++em_.sessions_rolled_back;
    auto cs = client_sessions_.find(sid);
    if (cs != client_sessions_.end()) {
        auto u = user_by_address_.find(cs->second.session.tx.sender);
        if (u != user_by_address_.end()) users_[u->second].session_active = false;
    }
}

// --- epoch formation ---------------------------------------------------

void Simulation::form_epoch_now() {
    sharding::FormationParams params;
    params.shard_count = cfg_.shard_count;
    params.difficulty = cfg_.difficulty;
    params.min_shard_size = cfg_.min_shard_size;

    auto identity_fn = [this](const Digest& randomness, size_t i) {
        const Validator& v = validators_[i];
        bool grind = v.behavior != Behavior::honest && cfg_.byzantine.target_shard >= 0;
        if (!grind)
            return sharding::establish_identity(randomness, v.ip, v.key, cfg_.difficulty,
                                                epoch_);
        // Adversarial grinding: keep searching valid solutions until one
        // lands in the target shard.
        sharding::NodeIdentity id;
        id.public_key = v.key.public_key;
        id.ip = v.ip;
        id.epoch = epoch_;
        for (uint64_t nonce = 0; nonce < kPowMaxAttempts; ++nonce) {
            Digest h = sharding::pow_digest(randomness, v.ip, as_span(v.key.public_key), nonce);
            if (h.leading_zero_bits() < cfg_.difficulty) continue;
            if (sharding::trailing_index(h, cfg_.shard_count) !=
                uint32_t(cfg_.byzantine.target_shard))
                continue;
            id.nonce = nonce;
            id.pow_hash = h;
            return id;
        }
        throw Error("simnet: grinding search exhausted");
    };
    auto vrf_fn = [this](const Digest& randomness, size_t i) {
        sharding::VrfTicket ticket;
        ticket.address = validators_[i].key.address;
        ticket.public_key = validators_[i].key.public_key;
        ticket.output = crypto::vrf_eval(validators_[i].key, randomness.span());
        return ticket;
    };

    ectx_ = sharding::form_epoch(epoch_, next_randomness_, validators_.size(), identity_fn,
                                 vrf_fn, params);
    membership_history_[epoch_] = ectx_.membership;
    em_.formation_salt = ectx_.salt;

    // A byzantine coordinator announcing a mismatched roster is detected by
    // honest recomputation; the recomputed values stand.
    if (behavior_of(ectx_.coordinator) == Behavior::bad_coordinator) {
        ++em_.coordinator_mismatches;
        emit_line({{"type", "coordinator_mismatch"},
                   {"epoch", epoch_},
                   {"slot", t_},
                   {"coordinator", ectx_.coordinator.hex()}});
    }

    uint64_t max_permille = 0;
    ordered_json membership = ordered_json::array();
    for (uint32_t s = 0; s < cfg_.shard_count; ++s) {
        ordered_json addrs = ordered_json::array();
        uint64_t byz = 0;
        for (const auto& a : ectx_.membership[s]) {
            addrs.push_back(a.hex());
            if (behavior_of(a) != Behavior::honest) ++byz;
        }
        max_permille =
            std::max(max_permille, byz * 1000 / std::max<uint64_t>(1, ectx_.membership[s].size()));
        membership.push_back(std::move(addrs));
    }
    em_.max_byz_shard_permille = max_permille;

    ordered_json pubkeys = ordered_json::object();
    for (const auto& v : validators_)
        pubkeys[v.key.address.hex()] = to_hex(as_span(v.key.public_key));
    emit_line({{"type", "epoch_start"},
               {"epoch", epoch_},
               {"slot", t_},
               {"salt", ectx_.salt},
               {"randomness", ectx_.randomness.hex()},
               {"coordinator", ectx_.coordinator.hex()},
               {"urs", ectx_.urs.hex()},
               {"dss", ectx_.dss_index},
               {"membership", std::move(membership)},
               {"pubkeys", std::move(pubkeys)}});
}

// --- workload ----------------------------------------------------------

namespace {
uint32_t count_from_rate(double rate, Rng& rng) {
    uint32_t n = uint32_t(rate);
    if (rng.chance(rate - double(n))) ++n;
    return n;
}
}  // namespace

void Simulation::emit_workload() {
    uint64_t dss_actor = kShardBase + ectx_.dss_index;
    uint64_t lat_max = cfg_.latency.max_slots;
    uint64_t intra_drain = 2 * lat_max + 4;
    uint64_t cross_drain = cfg_.effective_lock_deadline() + 4 * lat_max + 4;

    bool intra_open = t_ + intra_drain < total_slots_;
    bool cross_open = t_ + cross_drain < total_slots_;

    auto submit = [&](const ledger::Transaction& tx, uint32_t user_idx, WorkKind kind) {
        Digest id = ledger::tx_id(tx);
        emitted_kind_[id] = kind;
        ++em_.workload_emitted;
        send(kUserBase + user_idx, uint32_t(dss_actor), PTxSubmit{tx});
    };

    // Intra-shard self-payments, per shard.
    if (intra_open && cfg_.workload.intra_shard_payment > 0) {
        for (uint32_t s = 0; s < cfg_.shard_count; ++s) {
            uint32_t want = count_from_rate(cfg_.workload.intra_shard_payment, rng_workload_);
            const auto& pool = users_by_shard_[s];
            if (pool.empty()) continue;
            uint32_t emitted = 0;
            for (size_t k = 0; k < pool.size() && emitted < want; ++k) {
                uint32_t ui = pool[(t_ + k) % pool.size()];
                User& u = users_[ui];
                for (auto& [ref, entry] : u.wallet) {
                    if (entry.reserved || entry.shard != u.home || entry.value < 2) continue;
                    ledger::Transaction tx =
                        make_payment(u, u.key.address, {ref}, entry.value, 1);
                    entry.reserved = true;
                    submit(tx, ui, kIntra);
                    ++emitted;
                    break;
                }
            }
        }
    }

    // Cross-shard payments: spend a foreign-located ref, creating a session;
    // fall back to a seeding payment that hands another user a foreign ref.
    if (cross_open && cfg_.workload.cross_shard_payment > 0 && cfg_.shard_count > 1) {
        uint32_t want = count_from_rate(cfg_.workload.cross_shard_payment, rng_workload_);
        uint32_t emitted = 0;
        for (size_t k = 0; k < users_.size() && emitted < want; ++k) {
            uint32_t ui = uint32_t((t_ * 13 + k) % users_.size());
            User& u = users_[ui];
            if (u.session_active) continue;
            std::vector<ledger::OutputRef> refs;
            uint64_t total = 0;
            uint32_t first_shard = UINT32_MAX;
            for (auto& [ref, entry] : u.wallet) {
                if (entry.reserved || entry.shard == u.home || entry.value < 2) continue;
                if (refs.empty()) {
                    refs.push_back(ref);
                    total = entry.value;
                    first_shard = entry.shard;
                } else if (entry.shard != first_shard) {
                    // occasionally exercise multi-input, multi-shard sessions
                    if (rng_workload_.chance(0.25)) {
                        refs.push_back(ref);
                        total += entry.value;
                    }
                    break;
                }
            }
            if (!refs.empty()) {
                uint32_t vi = uint32_t(rng_workload_.below(users_.size()));
                if (vi == ui) vi = (vi + 1) % uint32_t(users_.size());
                ledger::Transaction tx =
                    make_payment(u, users_[vi].key.address, refs, total, 1);
                crossshard::CrossShardSession session;
                try {
                    session = crossshard::initiate(tx, cfg_.shard_count, routing_, t_,
                                                   cfg_.effective_lock_deadline());
                } catch (const Error&) {
                    continue;  // resolved to a single shard after all
                }
                for (const auto& ref : refs) {
                    auto w = u.wallet.find(ref);
                    if (w != u.wallet.end()) w->second.reserved = true;
                }
                u.session_active = true;
                Digest sid = session.session_id;
                session_global_[sid] = 0;
                ++em_.sessions_initiated;
                emitted_kind_[sid] = kCross;
                ++em_.workload_emitted;
                ordered_json shard_list = ordered_json::array();
                for (uint32_t s : session.input_shards) shard_list.push_back(s);
                emit_line({{"type", "session_init"},
                           {"slot", t_},
                           {"session", sid.hex()},
                           {"inputShards", std::move(shard_list)},
                           {"outputShard", session.output_shard},
                           {"deadline", session.deadline_slot},
                           {"tx", codec::tx_to_json(tx)}});
                ClientSession cs;
                cs.session = session;
                client_sessions_[sid] = std::move(cs);
                for (uint32_t s : session.input_shards)
                    send(kUserBase + ui, kShardBase + s, PLockRequest{session});
                ++emitted;
            } else {
                // seed: intra payment to a user homed elsewhere
                for (auto& [ref, entry] : u.wallet) {
                    if (entry.reserved || entry.shard != u.home || entry.value < 2) continue;
                    uint32_t vi = uint32_t(rng_workload_.below(users_.size()));
                    if (users_[vi].home == u.home) vi = users_by_shard_[(u.home + 1) % cfg_.shard_count][0];
                    ledger::Transaction tx =
                        make_payment(u, users_[vi].key.address, {ref}, entry.value, 1);
                    entry.reserved = true;
                    submit(tx, ui, kSeed);
                    ++emitted;
                    break;
                }
            }
        }
    }

    // Contract steps: one in flight at a time.
    if (intra_open && contract_enabled_ && !step_pending_ &&
        count_from_rate(cfg_.workload.contract_step, rng_workload_) > 0) {
        User& owner = users_[contract_owner_];
        ledger::Transaction tx;
        tx.sender = owner.key.address;
        tx.inputs.push_back({contract_ref_, {}, {}});
        ledger::Output next;
        next.validator = contract_validator_;
        next.value = contract_value_;
        next.datum = u64_datum(contract_datum_ + 1);
        tx.outputs.push_back(std::move(next));
        tx.fee = 0;
        Digest id = ledger::tx_id(tx);
        tx.inputs[0].signature = crypto::sign(owner.key, id.span());
        step_pending_ = true;
        pending_step_id_ = id;
        submit(tx, contract_owner_, kContract);
    }

    // Peg state machines.
    if (intra_open && peg_ && cfg_.workload.peg_op > 0) {
        uint32_t want = count_from_rate(cfg_.workload.peg_op, rng_workload_);
        uint32_t advanced = 0;
        const auto& pool = users_by_shard_[cfg_.layer2_parent_shard];
        for (size_t k = 0; k < pool.size() && advanced < want; ++k) {
            uint32_t ui = pool[(t_ + k) % pool.size()];
            User& u = users_[ui];
            switch (u.peg_phase) {
                case User::PegPhase::idle: {
                    for (auto& [ref, entry] : u.wallet) {
                        if (entry.reserved || entry.shard != u.home || entry.value < 20)
                            continue;
                        entry.reserved = true;
                        u.peg_phase = User::PegPhase::locking;
                        send(kUserBase + ui, kShardBase + cfg_.layer2_parent_shard,
                             PPegLock{ui, ref, entry.value / 2});
                        ++advanced;
                        break;
                    }
                    break;
                }
                case User::PegPhase::minted: {
                    send(kUserBase + ui, kChildOp, PChildPay{ui});
                    u.peg_phase = User::PegPhase::paid;
                    ++advanced;
                    break;
                }
                case User::PegPhase::paid: {
                    send(kUserBase + ui, kChildOp, PBurnRequest{ui});
                    u.peg_phase = User::PegPhase::burned;
                    ++advanced;
                    break;
                }
                default:
                    break;  // locking/burned: waiting on the protocol
            }
        }
    }

    // Rollup batch cadence.
    if (rollup_ && cfg_.workload.rollup_batch_every > 0 &&
        (t_ + 1) % cfg_.workload.rollup_batch_every == 0) {
        cut_rollup_batch();
    }
}

void Simulation::cut_rollup_batch() {
    const auto& applied = child_->applied_txs();
    if (child_applied_cursor_ >= applied.size() && child_deposits_pending_.empty()) return;
    layer2::Batch batch;
    batch.slot = t_;
    batch.txs.assign(applied.begin() + child_applied_cursor_, applied.end());
    batch.deposits = std::move(child_deposits_pending_);
    child_deposits_pending_.clear();
    child_applied_cursor_ = applied.size();

    Digest honest = layer2::state_root(child_->state());
    uint64_t idx = child_batches_.size();
    child_batches_.push_back(batch);
    child_post_roots_.push_back(honest);
    Digest claimed = honest;
    if (cfg_.byzantine.fraudulent_batcher && rng_byz_.chance(0.3)) {
        claimed.bytes[0] ^= 0xFF;
        corrupted_batches_.insert(idx);
    }
    child_claimed_roots_.push_back(claimed);
    child_send_batch(idx, 0);
}

void Simulation::child_send_batch(uint64_t child_index, uint64_t extra_latency) {
    PBatchCommit msg;
    msg.batch = child_batches_[child_index];
    msg.prev_root =
        child_index == 0 ? rollup_->genesis_root() : child_claimed_roots_[child_index - 1];
    msg.post_root = child_claimed_roots_[child_index];
    msg.child_index = child_index;
    uint64_t lat = latency() + extra_latency;
    sched_.enqueue(t_ + lat, kChildOp, kShardBase + cfg_.layer2_parent_shard, msg);
    PBatchObserved obs;
    obs.batch = msg.batch;
    obs.prev_root = msg.prev_root;
    obs.post_root = msg.post_root;
    sched_.enqueue(t_ + lat + latency(), kChildOp, kWatcher, obs);
}

// --- event dispatch ----------------------------------------------------

void Simulation::deliver_events() {
    SimEvent ev;
    while (sched_.step(ev)) dispatch(ev);
}

void Simulation::dispatch(const SimEvent& ev) {
    uint32_t to = ev.to;
    if (to >= kShardBase && to < kShardBase + cfg_.shard_count) {
        uint32_t shard = to - kShardBase;
        if (auto* p = std::get_if<PTxSubmit>(&ev.payload)) return on_tx_submit(shard, *p);
        if (auto* p = std::get_if<PTxRouted>(&ev.payload)) return on_tx_routed(shard, *p);
        if (auto* p = std::get_if<PLockRequest>(&ev.payload)) return on_lock_request(shard, *p);
        if (auto* p = std::get_if<PCommitCert>(&ev.payload)) return on_commit_cert(shard, *p);
        if (auto* p = std::get_if<PCertForward>(&ev.payload)) return on_cert_forward(shard, *p);
        if (auto* p = std::get_if<PAbortCert>(&ev.payload)) return on_abort_cert(shard, *p);
        if (auto* p = std::get_if<PPegLock>(&ev.payload)) return on_peg_lock(shard, *p);
        if (auto* p = std::get_if<PBurnProof>(&ev.payload)) return on_burn_proof(shard, *p);
        if (auto* p = std::get_if<PBatchCommit>(&ev.payload)) return on_batch_commit(shard, *p);
        if (auto* p = std::get_if<PFraudProof>(&ev.payload)) return on_fraud_proof(shard, *p);
        if (std::get_if<PEpochSummary>(&ev.payload)) return;  // sync bookkeeping only
        return;
    }
    if (to >= kUserBase && to < kUserBase + users_.size()) {
        if (auto* p = std::get_if<PProof>(&ev.payload)) return on_proof(to - kUserBase, *p);
        return;
    }
    if (to == kChildOp) {
        if (auto* p = std::get_if<PMintAuth>(&ev.payload)) return on_mint_auth(*p);
        if (auto* p = std::get_if<PChildPay>(&ev.payload)) return on_child_pay(*p);
        if (auto* p = std::get_if<PBurnRequest>(&ev.payload)) return on_burn_request(*p);
        if (auto* p = std::get_if<PRollbackNotice>(&ev.payload))
            return on_rollback_notice(*p);
        return;
    }
    if (to == kWatcher) {
        if (auto* p = std::get_if<PBatchObserved>(&ev.payload)) return on_batch_observed(*p);
        return;
    }
}

void Simulation::on_tx_submit(uint32_t shard, const PTxSubmit& p) {
    // Directory service: route by sender address or spent contract state.
    uint32_t home = sharding::route_tx(p.tx, cfg_.shard_count, routing_);
    sched_.enqueue(t_ + latency(), kShardBase + shard, kShardBase + home, PTxRouted{p.tx});
}

void Simulation::on_tx_routed(uint32_t shard, const PTxRouted& p) {
    ShardState& sh = shards_[shard];
    Digest id = ledger::tx_id(p.tx);
    if (sh.mempool_ids.count(id)) return;
    sh.mempool_ids.insert(id);
    sh.mempool.push_back(p.tx);
}

void Simulation::on_lock_request(uint32_t shard, const PLockRequest& p) {
    ShardState& sh = shards_[shard];
    Digest sid = p.session.session_id;
    auto [it, fresh] = sh.sessions.try_emplace(sid, SessionRecord{p.session});
    SessionRecord& rec = it->second;
    if (!fresh && rec.state != crossshard::SessionState::initialized) return;

    const auto& members = ectx_.membership[shard];
    std::vector<const crypto::KeyPair*> signers;
    for (const auto& m : members) {
        if (behavior_of(m) == Behavior::silent) continue;
        signers.push_back(&validators_[validator_by_address_.at(m)].key);
    }
    if (signers.size() < chain::quorum_threshold(members.size())) {
        emit_line({{"type", "lock_no_quorum"}, {"slot", t_}, {"shard", shard},
                   {"session", sid.hex()}});
        return;
    }
    crossshard::LockOutcome outcome =
        crossshard::shard_lock(rec.session, shard, ectx_.epoch_number, t_, sh.utxo, sh.locks,
                               signers);
    rec.locked_here = !outcome.locked_refs.empty();
    rec.state = rec.locked_here ? crossshard::SessionState::locked
                                : crossshard::SessionState::rolled_back;
    ordered_json refs = ordered_json::array();
    for (const auto& r : outcome.locked_refs) refs.push_back(codec::ref_to_json(r));
    emit_line({{"type", "session_lock"},
               {"slot", t_},
               {"shard", shard},
               {"session", sid.hex()},
               {"deadline", rec.session.deadline_slot},
               {"lockedRefs", std::move(refs)},
               {"proof", codec::proof_to_json(outcome.proof)}});
    auto u = user_by_address_.find(rec.session.tx.sender);
    if (u != user_by_address_.end())
        send(kShardBase + shard, kUserBase + u->second, PProof{outcome.proof});
}

void Simulation::on_proof(uint32_t user_idx, const PProof& p) {
    auto it = client_sessions_.find(p.proof.session_id);
    if (it == client_sessions_.end()) return;
    ClientSession& cs = it->second;
    if (!cs.proofs.count(p.proof.shard)) cs.proofs[p.proof.shard] = p.proof;
    User& u = users_[user_idx];

    if (u.vanishing) return;  // drops everything after collecting proofs

    if (!p.proof.is_acceptance() && !cs.aborted) {
        cs.aborted = true;
        mark_session_rolled_back(cs.session.session_id);
        for (const auto& [shard, proof] : cs.proofs) {
            if (!proof.is_acceptance()) continue;
            crossshard::AbortCertificate abort{cs.session.session_id, p.proof};
            send(kUserBase + user_idx, kShardBase + shard,
                 PAbortCert{cs.session, abort});
        }
        return;
    }
    if (cs.aborted) {
        if (p.proof.is_acceptance()) {
            const crossshard::ShardProof* por = nullptr;
            for (const auto& [shard, proof] : cs.proofs)
                if (!proof.is_acceptance()) por = &proof;
            if (por) {
                crossshard::AbortCertificate abort{cs.session.session_id, *por};
                send(kUserBase + user_idx, kShardBase + p.proof.shard,
                     PAbortCert{cs.session, abort});
            }
        }
        return;
    }
    if (cs.commit_sent) return;
    std::vector<crossshard::ShardProof> proofs;
    for (uint32_t shard : cs.session.input_shards) {
        auto pr = cs.proofs.find(shard);
        if (pr == cs.proofs.end() || !pr->second.is_acceptance()) return;  // not yet complete
        proofs.push_back(pr->second);
    }
    try {
        crossshard::CommitCertificate cert =
            crossshard::client_commit(cs.session, proofs, quorum_check());
        cs.commit_sent = true;
        send(kUserBase + user_idx, kShardBase + cs.session.output_shard,
             PCommitCert{cs.session, cert});
    } catch (const Error&) {
        // a proof failed its quorum check; leave the locks to the timeout
    }
}

void Simulation::erase_session_refs(ShardState& sh, SessionRecord& rec) {
    auto refs = rec.session.refs_by_shard.find(sh.index);
    if (refs == rec.session.refs_by_shard.end()) return;
    for (const auto& ref : refs->second) {
        if (sh.utxo.contains(ref)) sh.utxo.erase(ref);
        sh.locks.unlock(ref);
        debit_input(ref);
    }
}

void Simulation::on_commit_cert(uint32_t shard, const PCommitCert& p) {
    ShardState& sh = shards_[shard];
    Digest sid = p.session.session_id;
    auto [it, fresh] = sh.sessions.try_emplace(sid, SessionRecord{p.session});
    SessionRecord& rec = it->second;
    if (rec.state == crossshard::SessionState::committed) return;  // replay: no-op
    if (rec.state == crossshard::SessionState::rolled_back ||
        t_ + cfg_.latency.max_slots > rec.session.deadline_slot) {
        ++em_.late_certificates;
        emit_line({{"type", "late_certificate"}, {"slot", t_}, {"shard", shard},
                   {"session", sid.hex()}, {"role", "output"}});
        return;
    }
    std::string why;
    if (!crossshard::verify_commit_certificate(p.cert, rec.session, quorum_check(), &why)) {
        emit_line({{"type", "cert_rejected"}, {"slot", t_}, {"shard", shard},
                   {"session", sid.hex()}, {"why", why}});
        return;
    }
    rec.state = crossshard::SessionState::committed;
    rec.have_cert = true;
    ordered_json deleted = ordered_json::array();
    if (rec.locked_here) {
        auto refs = rec.session.refs_by_shard.find(shard);
        if (refs != rec.session.refs_by_shard.end())
            for (const auto& r : refs->second) deleted.push_back(codec::ref_to_json(r));
        erase_session_refs(sh, rec);
    }
    sh.cert_queue.push_back(sid);
    mark_session_committed(sid);
    ordered_json poas = ordered_json::array();
    for (const auto& poa : p.cert.acceptances) poas.push_back(codec::proof_to_json(poa));
    emit_line({{"type", "session_commit"},
               {"slot", t_},
               {"shard", shard},
               {"session", sid.hex()},
               {"role", "output"},
               {"deletedRefs", std::move(deleted)},
               {"cert", std::move(poas)}});
    for (uint32_t in_shard : rec.session.input_shards) {
        if (in_shard == shard) continue;
        send(kShardBase + shard, kShardBase + in_shard, PCertForward{p.session, p.cert});
    }
}

void Simulation::on_cert_forward(uint32_t shard, const PCertForward& p) {
    ShardState& sh = shards_[shard];
    Digest sid = p.session.session_id;
    auto [it, fresh] = sh.sessions.try_emplace(sid, SessionRecord{p.session});
    SessionRecord& rec = it->second;
    if (rec.state == crossshard::SessionState::committed) return;
    if (rec.state == crossshard::SessionState::rolled_back) {
        ++em_.late_certificates;
        emit_line({{"type", "late_certificate"}, {"slot", t_}, {"shard", shard},
                   {"session", sid.hex()}, {"role", "input"}});
        return;
    }
    std::string why;
    if (!crossshard::verify_commit_certificate(p.cert, rec.session, quorum_check(), &why)) {
        emit_line({{"type", "cert_rejected"}, {"slot", t_}, {"shard", shard},
                   {"session", sid.hex()}, {"why", why}});
        return;
    }
    rec.state = crossshard::SessionState::committed;
    rec.have_cert = true;
    ordered_json deleted = ordered_json::array();
    auto refs = rec.session.refs_by_shard.find(shard);
    if (refs != rec.session.refs_by_shard.end())
        for (const auto& r : refs->second) deleted.push_back(codec::ref_to_json(r));
    erase_session_refs(sh, rec);
    mark_session_committed(sid);
    emit_line({{"type", "session_commit"},
               {"slot", t_},
               {"shard", shard},
               {"session", sid.hex()},
               {"role", "input"},
               {"deletedRefs", std::move(deleted)}});
}

void Simulation::on_abort_cert(uint32_t shard, const PAbortCert& p) {
    ShardState& sh = shards_[shard];
    Digest sid = p.session.session_id;
    auto it = sh.sessions.find(sid);
    if (it == sh.sessions.end()) return;
    SessionRecord& rec = it->second;
    if (rec.state != crossshard::SessionState::locked) return;
    // Only a quorum-signed rejection can trigger an early unlock.
    if (p.cert.rejection.session_id != sid || p.cert.rejection.is_acceptance()) return;
    if (!quorum_check()(p.cert.rejection)) {
        emit_line({{"type", "abort_rejected"}, {"slot", t_}, {"shard", shard},
                   {"session", sid.hex()}});
        return;
    }
    auto refs = rec.session.refs_by_shard.find(shard);
    ordered_json unlocked = ordered_json::array();
    if (refs != rec.session.refs_by_shard.end()) {
        for (const auto& r : refs->second) {
            sh.locks.unlock(r);
            unreserve(r);
            unlocked.push_back(codec::ref_to_json(r));
        }
    }
    rec.state = crossshard::SessionState::rolled_back;
    mark_session_rolled_back(sid);
    emit_line({{"type", "session_abort"},
               {"slot", t_},
               {"shard", shard},
               {"session", sid.hex()},
               {"unlockedRefs", std::move(unlocked)}});
}

// --- layer 2 handlers ----------------------------------------------------

void Simulation::on_peg_lock(uint32_t shard, const PPegLock& p) {
    if (!peg_ || shard != cfg_.layer2_parent_shard) return;
    ShardState& sh = shards_[shard];
    User& u = users_[p.user];
    try {
        layer2::PegLockResult res =
            peg_->peg_lock(sh.utxo, u.key, p.funding, p.amount, kChildChainId, t_);
        Digest id = ledger::tx_id(res.tx);
        debit_input(p.funding);
        credit_outputs(res.tx, id, shard);
        ++em_.pegs_locked;
        emit_line({{"type", "peg_lock"},
                   {"slot", t_},
                   {"shard", shard},
                   {"nonce", res.auth.nonce},
                   {"amount", p.amount},
                   {"owner", u.key.address.hex()},
                   {"tx", codec::tx_to_json(res.tx)}});
        send(kShardBase + shard, kChildOp, PMintAuth{res.auth});
    } catch (const Error& e) {
        unreserve(p.funding);
        u.peg_phase = User::PegPhase::idle;
        emit_line({{"type", "peg_error"}, {"slot", t_}, {"what", e.what()}});
    }
}

void Simulation::on_mint_auth(const PMintAuth& p) {
    if (!child_ || !peg_) return;
    try {
        ledger::OutputRef ref =
            child_->peg_mint(p.auth, as_span(peg_->authority_public_key()));
        peg_->note_minted(p.auth.nonce);
        child_deposits_pending_.emplace_back(ref, *child_->state().find(ref));
        ++em_.pegs_minted;
        auto u = user_by_address_.find(p.auth.owner);
        if (u != user_by_address_.end()) {
            users_[u->second].child_refs.emplace_back(ref, p.auth.amount);
            users_[u->second].peg_phase = User::PegPhase::minted;
        }
        emit_line({{"type", "peg_mint"},
                   {"slot", t_},
                   {"nonce", p.auth.nonce},
                   {"amount", p.auth.amount},
                   {"owner", p.auth.owner.hex()},
                   {"childRef", codec::ref_to_json(ref)}});
    } catch (const Error& e) {
        emit_line({{"type", "peg_error"}, {"slot", t_}, {"what", e.what()}});
    }
}

void Simulation::on_child_pay(const PChildPay& p) {
    if (!child_) return;
    User& u = users_[p.user];
    if (u.child_refs.empty()) return;
    auto [ref, value] = u.child_refs.back();
    u.child_refs.pop_back();
    ledger::Transaction tx = make_payment(u, u.key.address, {ref}, value, 0);
    if (child_->apply_tx(tx, t_)) {
        Digest id = ledger::tx_id(tx);
        u.child_refs.emplace_back(ledger::OutputRef{id, 0}, value);
        emit_line({{"type", "child_tx"}, {"slot", t_}, {"tx", codec::tx_to_json(tx)}});
    } else {
        u.child_refs.emplace_back(ref, value);  // keep it; should not happen
    }
}

void Simulation::on_burn_request(const PBurnRequest& p) {
    if (!child_ || !peg_) return;
    User& u = users_[p.user];
    if (u.child_refs.empty()) {
        u.peg_phase = User::PegPhase::idle;
        return;
    }
    std::vector<ledger::OutputRef> refs;
    for (const auto& [ref, value] : u.child_refs) refs.push_back(ref);
    u.child_refs.clear();
    try {
        layer2::BurnProof proof = child_->peg_burn(u.key, refs, t_);
        ++em_.pegs_burned;
        emit_line({{"type", "peg_burn"},
                   {"slot", t_},
                   {"nonce", proof.nonce},
                   {"amount", proof.amount},
                   {"burner", proof.burner.hex()},
                   {"burnSlot", proof.burn_slot}});
        send(kChildOp, kShardBase + cfg_.layer2_parent_shard, PBurnProof{proof});
    } catch (const Error& e) {
        emit_line({{"type", "peg_error"}, {"slot", t_}, {"what", e.what()}});
    }
}

void Simulation::on_burn_proof(uint32_t shard, const PBurnProof& p) {
    if (!peg_ || shard != cfg_.layer2_parent_shard) return;
    peg_->note_burned(p.proof.amount);
    pending_unlocks_.push_back({p.proof});
}

void Simulation::process_pending_unlocks() {
    if (!peg_) return;
    ShardState& sh = shards_[cfg_.layer2_parent_shard];
    std::vector<PendingUnlock> remaining;
    for (auto& pending : pending_unlocks_) {
        if (t_ < pending.proof.burn_slot + cfg_.validation_period) {
            remaining.push_back(std::move(pending));
            continue;
        }
        try {
            ledger::Transaction tx = peg_->peg_unlock(sh.utxo, pending.proof, t_);
            Digest id = ledger::tx_id(tx);
            for (const auto& in : tx.inputs) debit_input(in.ref);
            credit_outputs(tx, id, sh.index);
            ++em_.pegs_unlocked;
            auto u = user_by_address_.find(pending.proof.burner);
            if (u != user_by_address_.end())
                users_[u->second].peg_phase = User::PegPhase::idle;
            emit_line({{"type", "peg_unlock"},
                       {"slot", t_},
                       {"shard", sh.index},
                       {"nonce", pending.proof.nonce},
                       {"amount", pending.proof.amount},
                       {"tx", codec::tx_to_json(tx)}});
        } catch (const Error& e) {
            emit_line({{"type", "peg_error"}, {"slot", t_}, {"what", e.what()}});
        }
    }
    pending_unlocks_ = std::move(remaining);
}

void Simulation::on_batch_commit(uint32_t shard, const PBatchCommit& p) {
    if (!rollup_ || shard != cfg_.layer2_parent_shard) return;
    try {
        const layer2::BatchCommitment& c = rollup_->commit(p.batch, p.prev_root, p.post_root);
        rollup_child_index_.push_back(p.child_index);
        ++em_.batches_committed;
        ordered_json txs = ordered_json::array();
        for (const auto& tx : p.batch.txs) txs.push_back(codec::tx_to_json(tx));
        ordered_json deposits = ordered_json::array();
        for (const auto& [ref, out] : p.batch.deposits)
            deposits.push_back(ordered_json{{"ref", codec::ref_to_json(ref)},
                                            {"output", codec::output_to_json(out)}});
        emit_line({{"type", "batch_commit"},
                   {"slot", t_},
                   {"index", c.batch_index},
                   {"childIndex", p.child_index},
                   {"batchSlot", p.batch.slot},
                   {"prevRoot", c.prev_state_root.hex()},
                   {"postRoot", c.post_state_root.hex()},
                   {"txDataRoot", c.tx_data_root.hex()},
                   {"txs", std::move(txs)},
                   {"deposits", std::move(deposits)}});
    } catch (const Error&) {
        emit_line({{"type", "batch_stale"}, {"slot", t_}, {"childIndex", p.child_index}});
        // Tell the operator where the accepted chain actually ends.
        uint64_t resume = 0;
        for (size_t i = rollup_->commitments().size(); i > 0; --i) {
            if (rollup_->commitments()[i - 1].status !=
                layer2::BatchCommitment::Status::rolled_back) {
                resume = rollup_child_index_[i - 1] + 1;
                break;
            }
        }
        send(kShardBase + shard, kChildOp, PRollbackNotice{resume});
    }
}

void Simulation::on_batch_observed(const PBatchObserved& p) {
    if (!rollup_) return;
    if (p.prev_root != watcher_root_) {
        if (p.retries < 100) {
            PBatchObserved retry = p;
            retry.retries++;
            sched_.enqueue(t_ + 1, kWatcher, kWatcher, retry);
        }
        return;
    }
    Digest honest = layer2::rollup_replay(p.batch, watcher_state_);
    if (honest == p.post_root) {
        for (const auto& [ref, out] : p.batch.deposits)
            if (!watcher_state_.contains(ref)) watcher_state_.insert(ref, out);
        for (const auto& tx : p.batch.txs) {
            if (!ledger::validate_tx(watcher_state_, tx, p.batch.slot).ok()) continue;
            ledger::apply_tx_in_place(watcher_state_, tx);
        }
        watcher_root_ = honest;
        return;
    }
    // Fraud: find the matching accepted commitment and challenge it.
    Digest batch_root = layer2::batch_tx_root(p.batch);
    const auto& commitments = rollup_->commitments();
    for (size_t i = 0; i < commitments.size(); ++i) {
        if (commitments[i].status == layer2::BatchCommitment::Status::rolled_back) continue;
        if (commitments[i].prev_state_root != p.prev_root) continue;
        if (commitments[i].tx_data_root != batch_root) continue;
        if (commitments[i].post_state_root != p.post_root) continue;
        auto proof = layer2::fraud_prove(*rollup_, i, layer2::make_witness(watcher_state_));
        if (proof) {
            send(kWatcher, kShardBase + cfg_.layer2_parent_shard, PFraudProof{*proof});
        }
        return;
    }
    // Commitment not registered yet; retry while the commit message is in flight.
    if (p.retries < 100) {
        PBatchObserved retry = p;
        retry.retries++;
        sched_.enqueue(t_ + 1, kWatcher, kWatcher, retry);
    }
}

void Simulation::on_fraud_proof(uint32_t shard, const PFraudProof& p) {
    if (!rollup_ || shard != cfg_.layer2_parent_shard) return;
    std::string why;
    size_t before = rollup_->commitments().size();
    bool ok = fraud_verify(*rollup_, p.proof, &why);
    emit_line({{"type", "fraud_proof"},
               {"slot", t_},
               {"index", p.proof.batch_index},
               {"accepted", ok},
               {"why", why}});
    if (!ok) {
        ++em_.fraud_proofs_rejected;
        return;
    }
    ++em_.fraud_proofs_accepted;
    uint64_t rolled = before - p.proof.batch_index;
    em_.batches_rolled_back += rolled;
    emit_line({{"type", "batch_rollback"},
               {"slot", t_},
               {"fromIndex", p.proof.batch_index},
               {"count", rolled}});
    send(kShardBase + shard, kChildOp,
         PRollbackNotice{rollup_child_index_[p.proof.batch_index]});
}

void Simulation::on_rollback_notice(const PRollbackNotice& p) {
    if (!child_) return;
    // Re-commit every batch from the rollback point, honestly this time, in
    // forced arrival order.
    for (uint64_t i = p.from_child_index; i < child_batches_.size(); ++i) {
        child_claimed_roots_[i] = child_post_roots_[i];
        child_send_batch(i, i - p.from_child_index);
    }
}

// --- consensus ----------------------------------------------------------

chain::Block Simulation::build_candidate(const ShardState& sh, const Digest& producer,
                                         bool* has_cert_txs) const {
    ledger::UtxoSet scratch = sh.utxo;
    std::vector<ledger::Transaction> txs;
    if (has_cert_txs) *has_cert_txs = false;
    for (const Digest& sid : sh.cert_queue) {
        if (txs.size() >= cfg_.block_capacity) break;
        auto it = sh.sessions.find(sid);
        if (it == sh.sessions.end() || it->second.included) continue;
        const ledger::Transaction& tx = it->second.session.tx;
        Digest id = ledger::tx_id(tx);
        for (uint32_t i = 0; i < tx.outputs.size(); ++i)
            if (!scratch.contains({id, i})) scratch.insert({id, i}, tx.outputs[i]);
        txs.push_back(tx);
        if (has_cert_txs) *has_cert_txs = true;
    }
    for (const auto& tx : sh.mempool) {
        if (txs.size() >= cfg_.block_capacity) break;
        bool locked = false;
        for (const auto& in : tx.inputs)
            if (sh.locks.is_locked(in.ref)) locked = true;
        if (locked) continue;
        if (!ledger::validate_tx(scratch, tx, t_).ok()) continue;
        ledger::apply_tx_in_place(scratch, tx);
        txs.push_back(tx);
    }
    return chain::build_block(std::move(txs), sh.head, t_, producer);
}

bool Simulation::member_accepts(const ShardState& sh, const chain::Block& block) const {
    if (!chain::validate_block(sh.utxo, block, sh.head, foreign_check(sh)).ok()) return false;
    // Refs locked by a session are invisible to ordinary spending.
    for (const auto& tx : block.transactions) {
        auto it = sh.sessions.find(ledger::tx_id(tx));
        if (it != sh.sessions.end()) continue;  // session settlement, inputs foreign
        for (const auto& in : tx.inputs)
            if (sh.locks.is_locked(in.ref)) return false;
    }
    return true;
}

SubRound Simulation::run_subround(const ShardState& sh) const {
    SubRound result;
    const auto& members = ectx_.membership[sh.index];
    if (members.empty()) return result;
    const Digest& producer = members[t_ % members.size()];
    Behavior beh = behavior_of(producer);
    if (beh == Behavior::silent) return result;

    std::vector<chain::Block> variants;
    bool cert_txs = false;
    chain::Block honest = build_candidate(sh, producer, &cert_txs);
    if (beh == Behavior::sign_invalid) {
        // Producer slips in a fabricated transaction spending a nonexistent
        // output; only a colluding supermajority can commit it.
        chain::Block bad = honest;
        ledger::Transaction bogus;
        Writer w;
        w.raw(str_span("bogus"));
        w.u64(t_);
        w.u32(sh.index);
        bogus.inputs.push_back({{crypto::hash256(as_span(w.bytes())), 0}, {}, {}});
        ledger::Output out;
        out.validator = ledger::pay_to_address(producer);
        out.value = 1;
        bogus.outputs.push_back(std::move(out));
        bogus.sender = producer;
        std::vector<ledger::Transaction> txs = bad.transactions;
        txs.push_back(std::move(bogus));
        bad = chain::build_block(std::move(txs), sh.head, t_, producer);
        variants.push_back(std::move(bad));
        result.invalid_proposed = 1;
    } else if (beh == Behavior::equivocate && honest.transactions.size() > 1) {
        std::vector<ledger::Transaction> fewer(honest.transactions.begin(),
                                               honest.transactions.end() - 1);
        chain::Block alt = chain::build_block(std::move(fewer), sh.head, t_, producer);
        variants.push_back(honest);
        variants.push_back(std::move(alt));
        result.equivocated = 1;
    } else {
        variants.push_back(honest);
    }

    uint32_t threshold = chain::quorum_threshold(members.size());
    std::vector<std::vector<chain::Vote>> votes(variants.size());
    for (size_t mi = 0; mi < members.size(); ++mi) {
        const Digest& addr = members[mi];
        Behavior mb = behavior_of(addr);
        if (mb == Behavior::silent) continue;
        size_t seen = variants.size() == 1 ? 0 : mi % variants.size();
        const chain::Block& block = variants[seen];
        bool approve = mb == Behavior::sign_invalid ? true : member_accepts(sh, block);
        if (!approve) continue;
        const Validator& v = validators_[validator_by_address_.at(addr)];
        votes[seen].push_back({addr, crypto::sign(v.key, block.header.block_hash.span())});
    }
    for (size_t vi = 0; vi < variants.size(); ++vi) {
        if (votes[vi].size() >= threshold) {
            chain::Block committed = variants[vi];
            committed.votes = std::move(votes[vi]);
            std::sort(committed.votes.begin(), committed.votes.end(),
                      [](const chain::Vote& a, const chain::Vote& b) { return a.voter < b.voter; });
            result.committed = std::move(committed);
            break;
        }
    }
    return result;
}

void Simulation::commit_block(ShardState& sh, chain::Block block) {
    // Per-tx application. A block that reached quorum is committed even if a
    // colluding supermajority forced an unappliable transaction through;
    // such txs settle as no-ops here and the auditor flags the block.
    auto hook = foreign_check(sh);
    for (const auto& tx : block.transactions) {
        std::optional<bool> external = hook(tx);
        try {
            if (external.has_value()) {
                Digest id = ledger::tx_id(tx);
                for (uint32_t i = 0; i < tx.outputs.size(); ++i)
                    if (!sh.utxo.contains({id, i})) sh.utxo.insert({id, i}, tx.outputs[i]);
            } else {
                ledger::apply_tx_in_place(sh.utxo, tx);
            }
        } catch (const Error&) {
        }
    }
    sh.head = block.header.block_hash;
    sh.height++;
    sh.committed_epoch += block.transactions.size();
    em_.committed_tx_total += block.transactions.size();
    ++em_.blocks_committed;

    std::set<Digest> included_sessions;
    for (const auto& tx : block.transactions) {
        Digest id = ledger::tx_id(tx);
        em_.fees_burned += tx.fee;
        auto rec = sh.sessions.find(id);
        if (rec != sh.sessions.end() &&
            rec->second.state == crossshard::SessionState::committed) {
            rec->second.included = true;
            included_sessions.insert(id);
            credit_outputs(tx, id, sh.index);
        } else {
            for (const auto& in : tx.inputs) debit_input(in.ref);
            credit_outputs(tx, id, sh.index);
            if (step_pending_ && id == pending_step_id_) {
                ++contract_datum_;
                step_pending_ = false;
                for (uint32_t i = 0; i < tx.outputs.size(); ++i)
                    if (ledger::script_hash(tx.outputs[i].validator) == contract_vh_)
                        contract_ref_ = {id, i};
            }
        }
        auto kind = emitted_kind_.find(id);
        if (kind != emitted_kind_.end()) {
            ++em_.workload_committed;
            emitted_kind_.erase(kind);
        }
        sh.mempool_ids.erase(id);
    }
    if (!included_sessions.empty()) {
        std::deque<Digest> rest;
        for (const auto& sid : sh.cert_queue)
            if (!included_sessions.count(sid)) rest.push_back(sid);
        sh.cert_queue = std::move(rest);
    }
    std::deque<ledger::Transaction> rest;
    for (auto& tx : sh.mempool)
        if (sh.mempool_ids.count(ledger::tx_id(tx))) rest.push_back(std::move(tx));
    sh.mempool = std::move(rest);

    emit_line({{"type", "block_committed"},
               {"slot", t_},
               {"epoch", epoch_},
               {"shard", sh.index},
               {"height", sh.height},
               {"block", codec::block_to_json(block)}});
}

void Simulation::sweep_locks(ShardState& sh) {
    for (auto& [sid, refs] : sh.locks.sweep(t_)) {
        auto it = sh.sessions.find(sid);
        if (it != sh.sessions.end() &&
            it->second.state == crossshard::SessionState::locked)
            it->second.state = crossshard::SessionState::rolled_back;
        for (const auto& ref : refs) unreserve(ref);
        mark_session_rolled_back(sid);
        ordered_json out = ordered_json::array();
        for (const auto& ref : refs) out.push_back(codec::ref_to_json(ref));
        emit_line({{"type", "session_timeout"},
                   {"slot", t_},
                   {"shard", sh.index},
                   {"session", sid.hex()},
                   {"refs", std::move(out)}});
    }
}

void Simulation::consensus_round() {
    std::vector<SubRound> results(shards_.size());
    if (parallel_ && shards_.size() > 1) {
        std::vector<std::future<SubRound>> futures;
        futures.reserve(shards_.size());
        for (const auto& sh : shards_)
            futures.push_back(std::async(std::launch::async,
                                         [this, &sh] { return run_subround(sh); }));
        for (size_t i = 0; i < futures.size(); ++i) results[i] = futures[i].get();
    } else {
        for (size_t i = 0; i < shards_.size(); ++i) results[i] = run_subround(shards_[i]);
    }
    for (size_t i = 0; i < shards_.size(); ++i) {
        em_.invalid_blocks_proposed += results[i].invalid_proposed;
        em_.equivocations += results[i].equivocated;
        if (results[i].committed) commit_block(shards_[i], std::move(*results[i].committed));
        sweep_locks(shards_[i]);
    }
}

void Simulation::finalize_epoch_now() {
    if (epoch_ + 1 == cfg_.epochs) {
        // A session can end the run with no terminal event only when nothing
        // was ever locked (every shard rejected, or the client vanished
        // before any lock landed); it is trivially rolled back.
        for (auto& [sid, state] : session_global_) {
            if (state != 0) continue;
            bool any_locked = false;
            for (auto& sh : shards_)
                if (!sh.locks.refs_of(sid).empty()) any_locked = true;
            if (!any_locked) mark_session_rolled_back(sid);
        }
    }

    std::vector<std::optional<Digest>> roots;
    roots.reserve(shards_.size());
    for (const auto& sh : shards_) roots.push_back(sh.head);
    sharding::EpochSummary summary = sharding::finalize_epoch(epoch_, roots);
    next_randomness_ = sharding::next_epoch_randomness(ectx_.urs, summary.global_root);

    ordered_json shard_roots = ordered_json::array();
    for (const auto& r : summary.shard_roots) shard_roots.push_back(r.hex());
    emit_line({{"type", "epoch_summary"},
               {"epoch", epoch_},
               {"slot", t_},
               {"shardRoots", std::move(shard_roots)},
               {"globalRoot", summary.global_root.hex()}});

    // The DSS broadcasts the synchronized state to every shard.
    std::vector<uint32_t> targets;
    for (uint32_t s = 0; s < cfg_.shard_count; ++s) targets.push_back(kShardBase + s);
    sched_.set_broadcast_targets(targets);
    sched_.enqueue_broadcast(kShardBase + ectx_.dss_index, PEpochSummary{summary},
                             [this] { return latency(); }, t_);

    EpochMetrics snapshot = em_;
    snapshot.epoch = epoch_;
    for (const auto& sh : shards_) {
        snapshot.committed_tx_per_shard.push_back(sh.committed_epoch);
        snapshot.locks_outstanding_end += sh.locks.size();
    }
    result_.epochs.push_back(snapshot);
    em_ = EpochMetrics{};
    for (auto& sh : shards_) sh.committed_epoch = 0;
}

SimResult Simulation::run() {
    result_.config = cfg_;
    if (cfg_.epochs == 0) return result_;

    emit_line({{"type", "config"},
               {"json", ordered_json::parse(cfg_.to_json_text())}});

    setup_validators();
    setup_users();
    setup_genesis();
    setup_layer2();

    total_slots_ = uint64_t(cfg_.epochs) * cfg_.epoch_length;
    {
        Writer w;
        w.raw(str_span("epoch-0-randomness"));
        w.u64(cfg_.seed);
        next_randomness_ = crypto::hash256(as_span(w.bytes()));
    }

    for (epoch_ = 0; epoch_ < cfg_.epochs; ++epoch_) {
        form_epoch_now();
        for (uint32_t s = 0; s < cfg_.epoch_length; ++s) {
            emit_workload();
            deliver_events();
            consensus_round();
            process_pending_unlocks();
            if (s + 1 < cfg_.epoch_length || epoch_ + 1 < cfg_.epochs) {
                ++t_;
                sched_.advance_slot();
            }
        }
        finalize_epoch_now();
    }

    for (const auto& e : result_.epochs) {
        result_.total_committed_tx += e.committed_tx_total;
        result_.total_sessions_initiated += e.sessions_initiated;
        result_.total_sessions_committed += e.sessions_committed;
        result_.total_sessions_rolled_back += e.sessions_rolled_back;
        result_.total_workload_emitted += e.workload_emitted;
        result_.total_workload_committed += e.workload_committed;
    }
    for (const auto& sh : shards_) result_.final_locks_outstanding += sh.locks.size();

    ordered_json totals;
    totals["committedTx"] = result_.total_committed_tx;
    totals["sessionsInitiated"] = result_.total_sessions_initiated;
    totals["sessionsCommitted"] = result_.total_sessions_committed;
    totals["sessionsRolledBack"] = result_.total_sessions_rolled_back;
    totals["locksOutstanding"] = result_.final_locks_outstanding;
    emit_line({{"type", "run_end"}, {"slot", t_}, {"totals", std::move(totals)},
               {"digest", result_.digest().hex()}});
    return result_;
}

}  // namespace

SimResult run_scenario(const ScenarioConfig& config, Transcript* transcript, bool parallel) {
    config.validate();
    Simulation sim(config, transcript, parallel);
    return sim.run();
}

}  // namespace shardsim::sim
