#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "shardsim/error.hpp"

namespace shardsim {

// Deterministic random stream. mt19937_64 has a standard-mandated output
// sequence, and all derived draws below avoid std distributions (whose
// algorithms are implementation-defined), so runs reproduce bit-exactly
// across compilers and platforms.
class Rng {
  public:
    explicit Rng(uint64_t seed) : base_seed_(seed), eng_(seed) {}

    uint64_t next() { return eng_(); }

    // Uniform in [0, n). n must be > 0. Plain modulo: bias is irrelevant for
    // simulation draws and the result is platform-stable.
    uint64_t below(uint64_t n) {
        if (n == 0) throw Error("rng: below(0)");
        return next() % n;
    }

    // Uniform in [lo, hi], inclusive.
    uint64_t in_range(uint64_t lo, uint64_t hi) {
        if (lo > hi) throw Error("rng: empty range");
        return lo + below(hi - lo + 1);
    }

    // Bernoulli with probability p (clamped to [0,1]).
    bool chance(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return double(next() >> 11) * 0x1.0p-53 < p;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent child stream; depends only on (base seed, tag), never on
    // how much the parent has been consumed.
    Rng fork(uint64_t tag) const { return Rng(mix(base_seed_, tag)); }

    static uint64_t mix(uint64_t a, uint64_t b) {
        // splitmix64 over the combined words
        uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

  private:
    uint64_t base_seed_;
    std::mt19937_64 eng_;
};

}  // namespace shardsim
