#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

#include <Eigen/Dense>

namespace loopm {

// Counter-based splittable stream built on the splitmix64 mixer.  A stream is
// keyed by (seed, stream index), so any parallel schedule that hands worker i
// the stream Splitmix64(seed, i) reproduces the serial results.
class Splitmix64 {
  public:
    using result_type = std::uint64_t;

    explicit Splitmix64(std::uint64_t seed) : state_(seed) {}

    Splitmix64(std::uint64_t seed, std::uint64_t stream)
        : state_(mix(seed + 0x9e3779b97f4a7c15ULL * (stream + 1))) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() {
        return std::numeric_limits<std::uint64_t>::max();
    }

    result_type operator()() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    // Uniform in [0,1).
    double uniform() {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double exponential(double rate) {
        double x;
        do { x = uniform(); } while (x <= 0.0);
        return -std::log(x) / rate;
    }

    // Index sampled proportionally to nonnegative weights.
    int discrete(const Eigen::VectorXd& weights) {
        const double total = weights.sum();
        double target = uniform() * total;
        for (int i = 0; i < weights.size() - 1; ++i) {
            target -= weights[i];
            if (target < 0.0) return i;
        }
        return static_cast<int>(weights.size()) - 1;
    }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

}  // namespace loopm
