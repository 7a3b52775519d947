#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace shardsim::analytics {

// Closed-form and Monte Carlo shard-security analysis: a shard of size s
// drawn without replacement from N nodes (m byzantine) fails when its
// byzantine count reaches ceil(s * threshold).

struct ShardModel {
    uint64_t total_nodes = 0;     // N
    uint64_t byzantine = 0;       // m
    uint64_t shard_size = 0;      // s
    double threshold = 1.0 / 3.0;

    uint64_t failure_count() const;  // ceil(s * threshold)
    void validate() const;           // throws Error on inconsistent parameters
};

// Exact P[X >= ceil(s*threshold)], X ~ hypergeometric(N, m, s). Uses exact
// 64-bit integer counts when C(N, s) fits, log-space otherwise.
double shard_failure_probability(const ShardModel& model);

// Exact integer tail counts (failing draws, total draws); only available
// while C(N, s) fits in uint64. The tolerance-zero oracle path.
struct TailCounts {
    uint64_t failing = 0;
    uint64_t total = 0;
};
std::optional<TailCounts> shard_failure_counts(const ShardModel& model);

// Monte Carlo estimate of the same probability (draws without replacement).
struct MonteCarloEstimate {
    double estimate = 0;
    double ci99 = 0;  // 99% confidence half-width
    uint64_t samples = 0;
};
MonteCarloEstimate shard_failure_monte_carlo(const ShardModel& model, uint64_t samples,
                                             uint64_t seed);

// Probability that at least one of k disjoint random shards fails when the
// node set is partitioned. Union upper bound plus a Monte Carlo estimate
// over random disjoint partitions.
struct EpochFailure {
    double single_shard = 0;
    double union_upper_bound = 0;
    MonteCarloEstimate monte_carlo;
};
EpochFailure epoch_failure_probability(const ShardModel& model, uint32_t shard_count,
                                       uint64_t samples, uint64_t seed);

// Geometric expectation 1/p converted to time units; nullopt means never
// (p == 0).
std::optional<double> time_to_failure(double epoch_failure_prob, double epochs_per_unit);

// ---------------------------------------------------------------------------
// Throughput scaling
// ---------------------------------------------------------------------------

struct ScalingPoint {
    uint32_t shard_count = 0;
    uint64_t committed_per_epoch = 0;
    double scaling_factor = 0;  // throughput(k) / (k * throughput(1))
};

struct ScalingReport {
    std::vector<ScalingPoint> points;
    double min_factor = 0;
    double flag_below = 0.9;
    bool all_above_flag = true;

    std::string to_csv() const;
};

struct ScalingInput {
    uint32_t shard_count = 0;
    uint64_t committed_per_epoch = 0;
    uint64_t epochs = 0;
    uint64_t per_shard_workload = 0;  // must match across runs
};

// Inputs must share per-shard workload and epoch count and include k = 1;
// else throws.
ScalingReport scaling_report(const std::vector<ScalingInput>& inputs,
                             double flag_below = 0.9);

}  // namespace shardsim::analytics
