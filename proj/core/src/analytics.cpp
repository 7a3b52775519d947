#include "shardsim/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "shardsim/error.hpp"
#include "shardsim/rng.hpp"

namespace shardsim::analytics {

uint64_t ShardModel::failure_count() const {
    return static_cast<uint64_t>(std::ceil(double(shard_size) * threshold));
}

void ShardModel::validate() const {
    if (byzantine > total_nodes) throw Error("model: byzantine > total nodes");
    if (shard_size == 0 || shard_size > total_nodes)
        throw Error("model: shard size must be in [1, N]");
    if (threshold <= 0 || threshold > 1) throw Error("model: threshold must be in (0, 1]");
}

namespace {

// C(n, k) in uint64, or nullopt on overflow.
std::optional<uint64_t> choose_u64(uint64_t n, uint64_t k) {
    if (k > n) return 0;
    k = std::min(k, n - k);
    unsigned __int128 result = 1;
    for (uint64_t i = 1; i <= k; ++i) {
        result = result * (n - k + i) / i;  // exact: partial products are integral
        if (result > UINT64_MAX) return std::nullopt;
    }
    return static_cast<uint64_t>(result);
}

double log_choose(uint64_t n, uint64_t k) {
    if (k > n) return -INFINITY;
    return std::lgamma(double(n) + 1) - std::lgamma(double(k) + 1) -
           std::lgamma(double(n - k) + 1);
}

}  // namespace

std::optional<TailCounts> shard_failure_counts(const ShardModel& model) {
    model.validate();
    uint64_t n = model.total_nodes, m = model.byzantine, s = model.shard_size;
    uint64_t r = model.failure_count();
    auto total = choose_u64(n, s);
    if (!total) return std::nullopt;
    unsigned __int128 failing = 0;
    uint64_t j_max = std::min(m, s);
    for (uint64_t j = r; j <= j_max; ++j) {
        auto a = choose_u64(m, j);
        auto b = choose_u64(n - m, s - j);
        if (!a || !b) return std::nullopt;
        unsigned __int128 term = static_cast<unsigned __int128>(*a) * *b;
        failing += term;
        if (failing > UINT64_MAX) return std::nullopt;
    }
    return TailCounts{static_cast<uint64_t>(failing), *total};
}

double shard_failure_probability(const ShardModel& model) {
    model.validate();
    if (auto counts = shard_failure_counts(model))
        return double(counts->failing) / double(counts->total);

    // Log-space hypergeometric tail for large parameters.
    uint64_t n = model.total_nodes, m = model.byzantine, s = model.shard_size;
    uint64_t r = model.failure_count();
    uint64_t j_max = std::min(m, s);
    if (r > j_max) return 0.0;
    double log_total = log_choose(n, s);
    double max_log = -INFINITY;
    std::vector<double> logs;
    logs.reserve(j_max - r + 1);
    for (uint64_t j = r; j <= j_max; ++j) {
        if (s - j > n - m) {
            logs.push_back(-INFINITY);
            continue;
        }
        double lg = log_choose(m, j) + log_choose(n - m, s - j) - log_total;
        logs.push_back(lg);
        max_log = std::max(max_log, lg);
    }
    if (max_log == -INFINITY) return 0.0;
    double sum = 0;
    for (double lg : logs) sum += std::exp(lg - max_log);
    double p = std::exp(max_log) * sum;
    return std::min(1.0, p);
}

MonteCarloEstimate shard_failure_monte_carlo(const ShardModel& model, uint64_t samples,
                                             uint64_t seed) {
    model.validate();
    if (samples == 0) throw Error("monte carlo: samples must be positive");
    Rng rng(seed);
    uint64_t n = model.total_nodes, m = model.byzantine, s = model.shard_size;
    uint64_t r = model.failure_count();
    uint64_t hits = 0;
    // Draw s of n without replacement via partial Fisher-Yates over indices;
    // indices < m are byzantine.
    std::vector<uint64_t> idx(n);
    for (uint64_t t = 0; t < samples; ++t) {
        std::iota(idx.begin(), idx.end(), 0);
        uint64_t byz = 0;
        for (uint64_t i = 0; i < s; ++i) {
            uint64_t j = i + rng.below(n - i);
            std::swap(idx[i], idx[j]);
            if (idx[i] < m) ++byz;
        }
        if (byz >= r) ++hits;
    }
    MonteCarloEstimate est;
    est.samples = samples;
    est.estimate = double(hits) / double(samples);
    est.ci99 = 2.5758 * std::sqrt(std::max(est.estimate * (1 - est.estimate), 1e-12) /
                                  double(samples));
    return est;
}

EpochFailure epoch_failure_probability(const ShardModel& model, uint32_t shard_count,
                                       uint64_t samples, uint64_t seed) {
    model.validate();
    if (shard_count == 0) throw Error("epoch failure: shard count must be positive");
    if (uint64_t(shard_count) * model.shard_size > model.total_nodes)
        throw Error("epoch failure: k*s exceeds N for the disjoint-partition model");
    EpochFailure result;
    result.single_shard = shard_failure_probability(model);
    result.union_upper_bound = std::min(1.0, double(shard_count) * result.single_shard);

    Rng rng(seed);
    uint64_t n = model.total_nodes, m = model.byzantine, s = model.shard_size;
    uint64_t r = model.failure_count();
    uint64_t hits = 0;
    std::vector<uint64_t> idx(n);
    for (uint64_t t = 0; t < samples; ++t) {
        std::iota(idx.begin(), idx.end(), 0);
        // Partition: the first k*s positions of a random shuffle, cut into
        // k consecutive shards.
        bool failed = false;
        uint64_t drawn = uint64_t(shard_count) * s;
        for (uint64_t i = 0; i < drawn; ++i) {
            uint64_t j = i + rng.below(n - i);
            std::swap(idx[i], idx[j]);
        }
        for (uint32_t k = 0; k < shard_count && !failed; ++k) {
            uint64_t byz = 0;
            for (uint64_t i = 0; i < s; ++i)
                if (idx[k * s + i] < m) ++byz;
            if (byz >= r) failed = true;
        }
        if (failed) ++hits;
    }
    result.monte_carlo.samples = samples;
    result.monte_carlo.estimate = double(hits) / double(samples);
    result.monte_carlo.ci99 =
        2.5758 * std::sqrt(std::max(result.monte_carlo.estimate *
                                        (1 - result.monte_carlo.estimate),
                                    1e-12) /
                           double(samples));
    return result;
}

std::optional<double> time_to_failure(double epoch_failure_prob, double epochs_per_unit) {
    if (epoch_failure_prob < 0 || epoch_failure_prob > 1)
        throw Error("time_to_failure: probability out of [0, 1]");
    if (epochs_per_unit <= 0) throw Error("time_to_failure: epochs_per_unit must be positive");
    if (epoch_failure_prob == 0) return std::nullopt;  // never fails
    return 1.0 / (epoch_failure_prob * epochs_per_unit);
}

ScalingReport scaling_report(const std::vector<ScalingInput>& inputs, double flag_below) {
    if (inputs.empty()) throw Error("scaling_report: no inputs");
    const ScalingInput* base = nullptr;
    for (const auto& in : inputs)
        if (in.shard_count == 1) base = &in;
    if (!base) throw Error("scaling_report: missing the k=1 baseline run");
    for (const auto& in : inputs) {
        if (in.epochs != base->epochs)
            throw Error("scaling_report: runs disagree on epoch count");
        if (in.per_shard_workload != base->per_shard_workload)
            throw Error("scaling_report: runs disagree on per-shard workload");
    }
    ScalingReport report;
    report.flag_below = flag_below;
    report.min_factor = INFINITY;
    std::vector<ScalingInput> sorted = inputs;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.shard_count < b.shard_count; });
    for (const auto& in : sorted) {
        ScalingPoint p;
        p.shard_count = in.shard_count;
        p.committed_per_epoch = in.committed_per_epoch;
        p.scaling_factor = double(in.committed_per_epoch) /
                           (double(in.shard_count) * double(base->committed_per_epoch));
        report.min_factor = std::min(report.min_factor, p.scaling_factor);
        if (p.scaling_factor < flag_below) report.all_above_flag = false;
        report.points.push_back(p);
    }
    return report;
}

std::string ScalingReport::to_csv() const {
    std::string csv = "shards,committed_per_epoch,scaling_factor,flagged\n";
    for (const auto& p : points) {
        csv += std::to_string(p.shard_count) + "," + std::to_string(p.committed_per_epoch) +
               "," + std::to_string(p.scaling_factor) + "," +
               (p.scaling_factor < flag_below ? "yes" : "no") + "\n";
    }
    return csv;
}

}  // namespace shardsim::analytics
