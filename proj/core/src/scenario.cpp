#include "shardsim/scenario.hpp"

#include <bit>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "shardsim/constants.hpp"
#include "shardsim/error.hpp"

namespace shardsim::sim {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& scope) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw Error("config: unknown key '" + (scope.empty() ? "" : scope + ".") +
                        it.key() + "'");
}

template <typename T>
void get_to(const json& obj, const char* key, T& out) {
    if (!obj.contains(key)) return;
    try {
        obj.at(key).get_to(out);
    } catch (const json::exception& e) {
        throw Error(std::string("config: bad value for '") + key + "': " + e.what());
    }
}

}  // namespace

ScenarioConfig ScenarioConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::exception& e) {
        throw Error(std::string("config: parse error: ") + e.what());
    }
    if (!j.is_object()) throw Error("config: top level must be an object");

    reject_unknown(j, {"seed", "nodes", "shardCount", "difficulty", "epochLength", "epochs",
                       "minShardSize", "blockCapacity", "usersPerShard", "genesisValue",
                       "genesisOutputsPerUser", "genesisForeignOutputsPerUser", "byzantine",
                       "workload", "latency", "lockDeadline", "validationPeriod", "sigScheme",
                       "layer2ParentShard"},
                   "");

    ScenarioConfig c;
    get_to(j, "seed", c.seed);
    get_to(j, "nodes", c.nodes);
    get_to(j, "shardCount", c.shard_count);
    get_to(j, "difficulty", c.difficulty);
    get_to(j, "epochLength", c.epoch_length);
    get_to(j, "epochs", c.epochs);
    get_to(j, "minShardSize", c.min_shard_size);
    get_to(j, "blockCapacity", c.block_capacity);
    get_to(j, "usersPerShard", c.users_per_shard);
    get_to(j, "genesisValue", c.genesis_value);
    get_to(j, "genesisOutputsPerUser", c.genesis_outputs_per_user);
    get_to(j, "genesisForeignOutputsPerUser", c.genesis_foreign_outputs_per_user);
    get_to(j, "lockDeadline", c.lock_deadline);
    get_to(j, "validationPeriod", c.validation_period);
    get_to(j, "sigScheme", c.sig_scheme);
    get_to(j, "layer2ParentShard", c.layer2_parent_shard);

    if (j.contains("byzantine")) {
        const json& b = j["byzantine"];
        reject_unknown(b, {"fraction", "behavior", "targetShard", "fraudulentBatcher"},
                       "byzantine");
        get_to(b, "fraction", c.byzantine.fraction);
        get_to(b, "behavior", c.byzantine.behavior);
        get_to(b, "targetShard", c.byzantine.target_shard);
        get_to(b, "fraudulentBatcher", c.byzantine.fraudulent_batcher);
    }
    if (j.contains("workload")) {
        const json& w = j["workload"];
        reject_unknown(w, {"intraShardPayment", "crossShardPayment", "contractStep", "pegOp",
                           "rollupBatchEverySlots", "vanishingClientFraction"},
                       "workload");
        get_to(w, "intraShardPayment", c.workload.intra_shard_payment);
        get_to(w, "crossShardPayment", c.workload.cross_shard_payment);
        get_to(w, "contractStep", c.workload.contract_step);
        get_to(w, "pegOp", c.workload.peg_op);
        get_to(w, "rollupBatchEverySlots", c.workload.rollup_batch_every);
        get_to(w, "vanishingClientFraction", c.workload.vanishing_client_fraction);
    }
    if (j.contains("latency")) {
        const json& l = j["latency"];
        reject_unknown(l, {"minSlots", "maxSlots"}, "latency");
        get_to(l, "minSlots", c.latency.min_slots);
        get_to(l, "maxSlots", c.latency.max_slots);
    }
    c.validate();
    return c;
}

ScenarioConfig ScenarioConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

void ScenarioConfig::validate() const {
    auto fail = [](const std::string& field, const std::string& why) {
        throw Error("config: " + field + ": " + why);
    };
    if (nodes == 0) fail("nodes", "must be positive");
    if (shard_count == 0 || !std::has_single_bit(shard_count))
        fail("shardCount", "must be a power of two");
    if (difficulty > kPowMaxDifficulty) fail("difficulty", "exceeds desk-scale bound of 24");
    if (epoch_length == 0) fail("epochLength", "must be positive");
    if (min_shard_size == 0) fail("minShardSize", "must be positive");
    if (uint64_t(min_shard_size) * shard_count > nodes)
        fail("minShardSize", "minShardSize * shardCount exceeds node count");
    if (block_capacity == 0) fail("blockCapacity", "must be positive");
    if (users_per_shard == 0) fail("usersPerShard", "must be positive");
    if (genesis_value == 0) fail("genesisValue", "must be positive");
    if (genesis_outputs_per_user == 0) fail("genesisOutputsPerUser", "must be positive");
    if (byzantine.fraction < 0 || byzantine.fraction >= 1)
        fail("byzantine.fraction", "must be in [0, 1)");
    if (byzantine.behavior != "sign_invalid" && byzantine.behavior != "equivocate" &&
        byzantine.behavior != "silent" && byzantine.behavior != "bad_coordinator")
        fail("byzantine.behavior",
             "must be one of sign_invalid|equivocate|silent|bad_coordinator");
    if (byzantine.target_shard >= int64_t(shard_count))
        fail("byzantine.targetShard", "out of range");
    if (workload.intra_shard_payment < 0 || workload.cross_shard_payment < 0 ||
        workload.contract_step < 0 || workload.peg_op < 0)
        fail("workload", "rates must be non-negative");
    if (workload.vanishing_client_fraction < 0 || workload.vanishing_client_fraction > 1)
        fail("workload.vanishingClientFraction", "must be in [0, 1]");
    if (latency.min_slots == 0) fail("latency.minSlots", "must be at least 1 slot");
    if (latency.max_slots < latency.min_slots) fail("latency.maxSlots", "below minSlots");
    if (workload.cross_shard_payment > 0 &&
        effective_lock_deadline() < 4ULL * latency.max_slots + 2)
        fail("lockDeadline", "must be at least 4*latency.maxSlots+2 so commit certificates "
                             "always land before the timeout sweep");
    if (validation_period == 0) fail("validationPeriod", "must be positive");
    crypto::sig_scheme_from_name(sig_scheme);  // throws on unknown
    if (layer2_parent_shard >= shard_count) fail("layer2ParentShard", "out of range");
}

std::string ScenarioConfig::to_json_text() const {
    ordered_json j;
    j["seed"] = seed;
    j["nodes"] = nodes;
    j["shardCount"] = shard_count;
    j["difficulty"] = difficulty;
    j["epochLength"] = epoch_length;
    j["epochs"] = epochs;
    j["minShardSize"] = min_shard_size;
    j["blockCapacity"] = block_capacity;
    j["usersPerShard"] = users_per_shard;
    j["genesisValue"] = genesis_value;
    j["genesisOutputsPerUser"] = genesis_outputs_per_user;
    j["genesisForeignOutputsPerUser"] = genesis_foreign_outputs_per_user;
    j["byzantine"] = {{"fraction", byzantine.fraction},
                      {"behavior", byzantine.behavior},
                      {"targetShard", byzantine.target_shard},
                      {"fraudulentBatcher", byzantine.fraudulent_batcher}};
    j["workload"] = {{"intraShardPayment", workload.intra_shard_payment},
                     {"crossShardPayment", workload.cross_shard_payment},
                     {"contractStep", workload.contract_step},
                     {"pegOp", workload.peg_op},
                     {"rollupBatchEverySlots", workload.rollup_batch_every},
                     {"vanishingClientFraction", workload.vanishing_client_fraction}};
    j["latency"] = {{"minSlots", latency.min_slots}, {"maxSlots", latency.max_slots}};
    j["lockDeadline"] = lock_deadline;
    j["validationPeriod"] = validation_period;
    j["sigScheme"] = sig_scheme;
    j["layer2ParentShard"] = layer2_parent_shard;
    return j.dump(2);
}

}  // namespace shardsim::sim
