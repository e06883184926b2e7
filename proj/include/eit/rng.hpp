#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "eit/core.hpp"

namespace eit {

/// Deterministic standard-normal sampler: Box-Muller over mt19937_64.
/// std::normal_distribution is implementation-defined, so noise injection
/// uses this sampler to keep seeded runs bit-identical across toolchains.
class GaussianSampler {
  public:
    explicit GaussianSampler(std::uint64_t seed) : engine_(seed) {}

    double operator()() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] so that log(u1) is finite; u2 in [0, 1)
        double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
        double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = kTwoPi * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // modulo bias is irrelevant for the test-harness uses (n << 2^64)
        return engine_() % n;
    }

  private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace eit
