// shardsim: run, analyze, audit and inspect sharded eUTXO simulations.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "shardsim/analytics.hpp"
#include "shardsim/audit.hpp"
#include "shardsim/error.hpp"
#include "shardsim/scenario.hpp"
#include "shardsim/simnet.hpp"
#include "shardsim/transcript.hpp"

namespace fs = std::filesystem;
using namespace shardsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitSafetyFinding = 2;

int cmd_run(const std::string& config_path, std::optional<uint64_t> seed,
            const std::string& out_dir, bool parallel) {
    sim::ScenarioConfig cfg = sim::ScenarioConfig::from_file(config_path);
    if (seed) cfg.seed = *seed;  // flag > file > default
    cfg.validate();

    fs::create_directories(out_dir);
    sim::Transcript transcript;
    transcript.set_keep_in_memory(false);
    transcript.open_file((fs::path(out_dir) / "transcript.jsonl").string());

    sim::SimResult result = sim::run_scenario(cfg, &transcript, parallel);

    std::ofstream(fs::path(out_dir) / "result.json") << result.to_json() << "\n";
    std::ofstream(fs::path(out_dir) / "epochs.csv") << result.epochs_csv();
    std::cout << result.digest().hex() << "\n";
    return kExitOk;
}

int cmd_analyze(uint64_t nodes, uint64_t byzantine, uint64_t shard_size, uint32_t shards,
                uint64_t mc_samples, double threshold, double epochs_per_unit,
                std::optional<uint64_t> sweep_to, const std::string& csv_path,
                const std::string& json_path) {
    analytics::ShardModel model{nodes, byzantine, shard_size, threshold};
    model.validate();

    std::string csv =
        "shard_size,exact_probability,union_bound_k,monte_carlo,mc_ci99,time_to_failure\n";
    std::string human;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();

    // sweep by doubling: thresholds stay at a constant ratio when the base
    // shard size is a multiple of three, which keeps the column monotone
    uint64_t s_lo = shard_size;
    uint64_t s_hi = sweep_to.value_or(shard_size);
    for (uint64_t s = s_lo; s <= s_hi; s *= 2) {
        analytics::ShardModel m{nodes, byzantine, s, threshold};
        if (s > nodes) break;
        double exact = analytics::shard_failure_probability(m);
        double union_bound =
            shards ? std::min(1.0, double(shards) * exact) : exact;
        analytics::MonteCarloEstimate mc =
            analytics::shard_failure_monte_carlo(m, mc_samples, 0x5eed + s);
        auto ttf = analytics::time_to_failure(exact, epochs_per_unit);
        std::string ttf_str = ttf ? std::to_string(*ttf) : "inf";
        csv += std::to_string(s) + "," + std::to_string(exact) + "," +
               std::to_string(union_bound) + "," + std::to_string(mc.estimate) + "," +
               std::to_string(mc.ci99) + "," + ttf_str + "\n";
        rows.push_back(nlohmann::ordered_json{{"shardSize", s},
                                              {"exact", exact},
                                              {"unionBound", union_bound},
                                              {"monteCarlo", mc.estimate},
                                              {"mcCi99", mc.ci99},
                                              {"timeToFailure", ttf ? *ttf : -1.0}});
        human += "s=" + std::to_string(s) + "  P[fail] = " + std::to_string(exact) +
                 "  (mc " + std::to_string(mc.estimate) + " +/- " + std::to_string(mc.ci99) +
                 ", union-bound x" + std::to_string(shards ? shards : 1) + " = " +
                 std::to_string(union_bound) + ", ttf = " + ttf_str + ")\n";
        if (sweep_to.value_or(0) == 0) break;
    }

    nlohmann::ordered_json summary;
    summary["model"] = {{"nodes", nodes},
                        {"byzantine", byzantine},
                        {"shardSize", shard_size},
                        {"threshold", threshold},
                        {"shards", shards},
                        {"mcSamples", mc_samples},
                        {"partitionModel", "disjoint random partition of the node set"}};
    summary["rows"] = rows;

    if (shards > 0) {
        analytics::ShardModel m{nodes, byzantine, shard_size, threshold};
        if (uint64_t(shards) * shard_size <= nodes) {
            analytics::EpochFailure ef =
                analytics::epoch_failure_probability(m, shards, mc_samples, 0xef0c);
            summary["epoch"] = {{"singleShard", ef.single_shard},
                                {"unionUpperBound", ef.union_upper_bound},
                                {"monteCarlo", ef.monte_carlo.estimate},
                                {"mcCi99", ef.monte_carlo.ci99}};
            human += "epoch (k=" + std::to_string(shards) +
                     "): union bound " + std::to_string(ef.union_upper_bound) + ", mc " +
                     std::to_string(ef.monte_carlo.estimate) + " +/- " +
                     std::to_string(ef.monte_carlo.ci99) + "\n";
        }
    }

    std::cout << human;
    if (!csv_path.empty()) std::ofstream(csv_path) << csv;
    if (!json_path.empty()) std::ofstream(json_path) << summary.dump(2) << "\n";
    if (csv_path.empty() && json_path.empty()) std::cout << summary.dump(2) << "\n";
    return kExitOk;
}

int cmd_audit(const std::string& transcript_path, bool as_json) {
    audit::AuditReport report = audit::audit_file(transcript_path);
    std::cout << (as_json ? report.to_json() : report.to_string());
    if (!as_json) std::cout.flush();
    return report.clean() ? kExitOk : kExitSafetyFinding;
}

int cmd_inspect(const std::string& transcript_path, const std::string& block,
                const std::string& session) {
    auto lines = sim::Transcript::read_file(transcript_path);
    if (!block.empty())
        std::cout << audit::inspect_block(lines, block);
    else
        std::cout << audit::inspect_session(lines, session);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sharded eUTXO blockchain simulator"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "execute a scenario");
    std::string config_path, out_dir = "out";
    std::optional<uint64_t> seed;
    bool parallel = false;
    run->add_option("--config", config_path, "scenario config file")->required();
    run->add_option("--seed", seed, "override the config seed");
    run->add_option("--out", out_dir, "output directory");
    run->add_flag("--parallel", parallel, "run shard consensus on worker threads");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "shard failure analytics");
    uint64_t nodes = 0, byzantine = 0, shard_size = 0, mc_samples = 100'000;
    uint32_t shards = 0;
    double threshold = 1.0 / 3.0, epochs_per_unit = 1.0;
    std::optional<uint64_t> sweep_to;
    std::string csv_path, json_path;
    analyze->add_option("--nodes", nodes, "total nodes N")->required();
    analyze->add_option("--byzantine", byzantine, "byzantine nodes m")->required();
    analyze->add_option("--shard-size", shard_size, "shard size s")->required();
    analyze->add_option("--shards", shards, "shard count k for epoch-level bounds");
    analyze->add_option("--mc", mc_samples, "Monte Carlo samples");
    analyze->add_option("--threshold", threshold, "failure fraction (default 1/3)");
    analyze->add_option("--epochs-per-unit", epochs_per_unit, "epochs per time unit");
    analyze->add_option("--sweep-to", sweep_to, "sweep shard size up to this value");
    analyze->add_option("--csv", csv_path, "write the CSV table here");
    analyze->add_option("--json", json_path, "write the JSON summary here");

    // audit
    auto* audit_cmd = app.add_subcommand("audit", "replay and verify a run transcript");
    std::string transcript_path;
    bool audit_json = false;
    audit_cmd->add_option("--transcript", transcript_path, "transcript.jsonl path")->required();
    audit_cmd->add_flag("--json", audit_json, "JSON report");

    // inspect
    auto* inspect = app.add_subcommand("inspect", "dump a block or session from a transcript");
    std::string inspect_transcript, block_hash, session_id;
    inspect->add_option("--transcript", inspect_transcript, "transcript.jsonl path")->required();
    auto* opt_block = inspect->add_option("--block", block_hash, "block hash (hex prefix)");
    auto* opt_session = inspect->add_option("--session", session_id, "session tx id (hex prefix)");
    opt_block->excludes(opt_session);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config_path, seed, out_dir, parallel);
        if (*analyze)
            return cmd_analyze(nodes, byzantine, shard_size, shards, mc_samples, threshold,
                               epochs_per_unit, sweep_to, csv_path, json_path);
        if (*audit_cmd) return cmd_audit(transcript_path, audit_json);
        if (*inspect) {
            if (block_hash.empty() && session_id.empty()) {
                std::cerr << "inspect: need --block or --session\n";
                return kExitValidation;
            }
            return cmd_inspect(inspect_transcript, block_hash, session_id);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitValidation;
}
