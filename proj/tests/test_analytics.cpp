#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "shardsim/analytics.hpp"
#include "shardsim/error.hpp"

using namespace shardsim;
using namespace shardsim::analytics;

namespace {

// Exhaustive subset enumeration: counts shards of size s (members 0..N-1,
// byzantine below m) with at least r byzantine members.
struct BruteForce {
    uint64_t failing = 0;
    uint64_t total = 0;

    BruteForce(uint64_t n, uint64_t m, uint64_t s, uint64_t r) {
        std::vector<uint64_t> pick(s);
        recurse(n, m, s, r, 0, 0, 0, pick);
    }

  private:
    void recurse(uint64_t n, uint64_t m, uint64_t s, uint64_t r, uint64_t next,
                 uint64_t chosen, uint64_t byz, std::vector<uint64_t>& pick) {
        if (chosen == s) {
            ++total;
            if (byz >= r) ++failing;
            return;
        }
        for (uint64_t i = next; i + (s - chosen) <= n; ++i) {
            pick[chosen] = i;
            recurse(n, m, s, r, i + 1, chosen + 1, byz + (i < m ? 1 : 0), pick);
        }
    }
};

}  // namespace

TEST_CASE("shard failure probability: boundary values") {
    CHECK(shard_failure_probability({100, 0, 10}) == 0.0);
    CHECK(shard_failure_probability({10, 10, 3}) == 1.0);
    CHECK(shard_failure_probability({10, 10, 10}) == 1.0);
}

TEST_CASE("N=10 m=3 s=4 matches exhaustive enumeration exactly") {
    ShardModel model{10, 3, 4};
    CHECK(model.failure_count() == 2);
    BruteForce oracle(10, 3, 4, 2);
    auto counts = shard_failure_counts(model);
    REQUIRE(counts.has_value());
    CHECK(counts->total == oracle.total);
    CHECK(counts->failing == oracle.failing);
    CHECK(oracle.total == 210);  // C(10,4)
    CHECK(shard_failure_probability(model) ==
          double(oracle.failing) / double(oracle.total));
}

TEST_CASE("exact integer counts agree with enumeration on a sweep of models") {
    for (uint64_t n : {8, 11, 12}) {
        for (uint64_t m = 0; m <= n; m += 3) {
            for (uint64_t s = 1; s <= n; s += 3) {
                ShardModel model{n, m, s};
                BruteForce oracle(n, m, s, model.failure_count());
                auto counts = shard_failure_counts(model);
                REQUIRE(counts.has_value());
                CAPTURE(n);
                CAPTURE(m);
                CAPTURE(s);
                CHECK(counts->failing == oracle.failing);  // tolerance zero
                CHECK(counts->total == oracle.total);
            }
        }
    }
}

TEST_CASE("log-space path agrees with the exact path where both exist") {
    // large enough to exercise log-space in spirit, small enough for u64
    ShardModel model{60, 20, 25};
    auto counts = shard_failure_counts(model);
    REQUIRE(counts.has_value());
    double exact = double(counts->failing) / double(counts->total);
    double p = shard_failure_probability(model);
    CHECK(p == doctest::Approx(exact).epsilon(1e-12));

    // beyond u64: still a sane probability
    ShardModel big{600, 150, 100};
    CHECK_FALSE(shard_failure_counts(big).has_value());
    double pb = shard_failure_probability(big);
    CHECK(pb >= 0.0);
    CHECK(pb <= 1.0);
}

TEST_CASE("Monte Carlo lands within 3 sigma of the exact value") {
    std::vector<ShardModel> models = {{40, 12, 9}, {64, 20, 12}, {100, 30, 15}, {30, 10, 6}};
    for (const auto& model : models) {
        double exact = shard_failure_probability(model);
        MonteCarloEstimate mc = shard_failure_monte_carlo(model, 100'000, 0xABC);
        double sigma = std::sqrt(exact * (1 - exact) / 100'000.0);
        CAPTURE(model.total_nodes);
        CHECK(std::abs(mc.estimate - exact) <= 3 * sigma + 1e-12);
    }
}

TEST_CASE("epoch failure probability: identities and the small exhaustive check") {
    ShardModel model{64, 16, 8};

    SUBCASE("k=1 equals the single-shard probability") {
        EpochFailure ef = epoch_failure_probability(model, 1, 50'000, 7);
        CHECK(ef.union_upper_bound == doctest::Approx(ef.single_shard));
        double sigma = std::sqrt(ef.single_shard * (1 - ef.single_shard) / 50'000.0);
        CHECK(std::abs(ef.monte_carlo.estimate - ef.single_shard) <= 4 * sigma + 1e-12);
    }
    SUBCASE("no byzantine nodes, no failures") {
        ShardModel clean{64, 0, 8};
        EpochFailure ef = epoch_failure_probability(clean, 4, 10'000, 7);
        CHECK(ef.single_shard == 0.0);
        CHECK(ef.union_upper_bound == 0.0);
        CHECK(ef.monte_carlo.estimate == 0.0);
    }
    SUBCASE("k*s must fit inside N") {
        CHECK_THROWS_AS(epoch_failure_probability(model, 9, 1000, 7), Error);
    }
    SUBCASE("exhaustive partition oracle at N=12 m=3 k=3") {
        // enumerate all ordered partitions of 12 nodes into 3 shards of 4:
        // C(12,4)*C(8,4) = 34650; a partition fails when any shard holds
        // >= ceil(4/3) = 2 byzantine members
        ShardModel small{12, 3, 4};
        uint64_t r = small.failure_count();
        uint64_t failing = 0, total = 0;
        std::vector<int> nodes(12);
        for (int i = 0; i < 12; ++i) nodes[i] = i;
        std::vector<int> mask(12, 0);
        // choose shard 0
        std::vector<int> idx0(4), idx1(4);
        std::function<void(int, int)> choose1;
        std::function<void(int, int)> choose0 = [&](int start, int chosen) {
            if (chosen == 4) {
                choose1(0, 0);
                return;
            }
            for (int i = start; i < 12; ++i) {
                if (mask[i]) continue;
                mask[i] = 1;
                idx0[chosen] = i;
                choose0(i + 1, chosen + 1);
                mask[i] = 0;
            }
        };
        choose1 = [&](int start, int chosen) {
            if (chosen == 4) {
                auto byz_in = [&](const std::vector<int>& v) {
                    uint64_t c = 0;
                    for (int i : v)
                        if (i < 3) ++c;
                    return c;
                };
                uint64_t byz2 = 0;
                for (int i = 0; i < 12; ++i)
                    if (!mask[i] && i < 3) ++byz2;
                ++total;
                if (byz_in(idx0) >= r || byz_in(idx1) >= r || byz2 >= r) ++failing;
                return;
            }
            for (int i = start; i < 12; ++i) {
                if (mask[i]) continue;
                mask[i] = 2;
                idx1[chosen] = i;
                choose1(i + 1, chosen + 1);
                mask[i] = 0;
            }
        };
        choose0(0, 0);
        CHECK(total == 34650);
        double exact_epoch = double(failing) / double(total);

        EpochFailure ef = epoch_failure_probability(small, 3, 100'000, 0xEC);
        CHECK(std::abs(ef.monte_carlo.estimate - exact_epoch) <= ef.monte_carlo.ci99);
        CHECK(ef.union_upper_bound >= exact_epoch);  // union bound is an upper bound
    }
}

TEST_CASE("time_to_failure arithmetic") {
    CHECK(*time_to_failure(1.0, 1.0) == doctest::Approx(1.0));    // p=1: one epoch
    CHECK(*time_to_failure(0.5, 2.0) == doctest::Approx(1.0));    // 2 epochs/hour: 1 hour
    CHECK_FALSE(time_to_failure(0.0, 2.0).has_value());           // never
    CHECK_THROWS_AS(time_to_failure(1.5, 1.0), Error);
    CHECK_THROWS_AS(time_to_failure(0.5, 0.0), Error);

    SUBCASE("monotonic: larger shards survive longer at a fixed fraction") {
        double last = 0;
        for (uint64_t s : {12, 24, 48, 96}) {
            ShardModel model{400, 100, s};  // 25% adversary
            double p = shard_failure_probability(model);
            REQUIRE(p > 0);
            double ttf = *time_to_failure(p, 1.0);
            CHECK(ttf > last);
            last = ttf;
        }
    }
}

TEST_CASE("monotonicity sweeps") {
    SUBCASE("failure probability non-decreasing in m") {
        double last = -1;
        for (uint64_t m = 0; m <= 40; m += 4) {
            double p = shard_failure_probability({40, m, 10});
            CHECK(p >= last - 1e-15);
            last = p;
        }
    }
    SUBCASE("failure probability non-increasing in s when m/N is below the threshold") {
        // compared at a constant threshold ratio (s divisible by 3, so the
        // failure count is exactly s/3); across ratios the tail oscillates
        // with the ceiling
        double last = 2;
        for (uint64_t s = 6; s <= 96; s *= 2) {
            double p = shard_failure_probability({384, 96, s});  // 25% < 1/3
            CHECK(p <= last + 1e-12);
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
            last = p;
        }
        CHECK(last < 0.05);  // decays toward zero at desk scale
    }
}

TEST_CASE("scaling report") {
    SUBCASE("duplicated k=1 throughput gives factor 1.0") {
        std::vector<ScalingInput> in = {{1, 500, 4, 64}, {1, 500, 4, 64}};
        // two k=1 rows: the report treats either as baseline
        ScalingReport r = scaling_report(in);
        for (const auto& p : r.points) CHECK(p.scaling_factor == doctest::Approx(1.0));
    }
    SUBCASE("perfectly linear synthetic inputs give 1.0 everywhere") {
        std::vector<ScalingInput> in = {
            {1, 100, 4, 64}, {2, 200, 4, 64}, {4, 400, 4, 64}, {8, 800, 4, 64}};
        ScalingReport r = scaling_report(in);
        CHECK(r.points.size() == 4);
        for (const auto& p : r.points) CHECK(p.scaling_factor == doctest::Approx(1.0));
        CHECK(r.all_above_flag);
        CHECK(r.min_factor == doctest::Approx(1.0));
    }
    SUBCASE("sub-linear points are flagged") {
        std::vector<ScalingInput> in = {{1, 100, 4, 64}, {4, 320, 4, 64}};
        ScalingReport r = scaling_report(in, 0.9);
        CHECK_FALSE(r.all_above_flag);
        CHECK(r.min_factor == doctest::Approx(0.8));
        CHECK(r.to_csv().find("yes") != std::string::npos);
    }
    SUBCASE("misaligned configurations are rejected") {
        std::vector<ScalingInput> bad_epochs = {{1, 100, 4, 64}, {2, 200, 5, 64}};
        CHECK_THROWS_AS(scaling_report(bad_epochs), Error);
        std::vector<ScalingInput> bad_workload = {{1, 100, 4, 64}, {2, 200, 4, 32}};
        CHECK_THROWS_AS(scaling_report(bad_workload), Error);
        std::vector<ScalingInput> no_baseline = {{2, 200, 4, 64}, {4, 400, 4, 64}};
        CHECK_THROWS_AS(scaling_report(no_baseline), Error);
    }
}
