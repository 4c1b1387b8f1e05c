#pragma once

#include <cmath>
#include <algorithm>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "loopm/chain.hpp"
#include "loopm/errors.hpp"
#include "loopm/measure.hpp"
#include "loopm/quadrature.hpp"
#include "loopm/rng.hpp"

namespace loopm {

// Piecewise-constant based loop: states[i] holds on [t_i, t_{i+1}) with
// t_0 = 0 and t_{last+1} = lifetime.  Bridge samples return to base at the
// lifetime.
struct LoopSample {
    double lifetime = 0.0;
    int base = 0;
    std::vector<double> jump_times;
    std::vector<int> states;
    double weight = 1.0;
};

// Loop measure restricted to lifetimes in [a,b]; the full measure has
// infinite mass from the 1/t small-loop divergence.
struct RestrictedLoopMeasureSpec {
    TransientChain chain;
    double a;
    double b;

    RestrictedLoopMeasureSpec(TransientChain c, double lo, double hi)
        : chain(std::move(c)), a(lo), b(hi) {
        if (!(0.0 < a && a < b))
            throw ConfigInvalid("lifetime window needs 0 < a < b");
    }

    static RestrictedLoopMeasureSpec with_default_window(TransientChain c) {
        const double rate = -c.spectral_abscissa();
        return RestrictedLoopMeasureSpec(std::move(c), 0.2 / rate, 5.0 / rate);
    }
};

// Total restricted mass: integral over [a,b] of trace(exp(tQ))/t.
inline double restricted_mass(const RestrictedLoopMeasureSpec& spec,
                              double rel_tol = 1e-10) {
    const auto integrand = [&](double t) {
        return matrix_exponential(t * spec.chain.rates()).trace() / t;
    };
    return adaptive_simpson_rel(integrand, spec.a, spec.b, rel_tol);
}

// Bridge sampler under the restricted loop measure: lifetime by inverse CDF
// of trace(exp(tQ))/t, base point proportional to diag(exp(tQ)), skeleton by
// conditioned uniformization with backward filtering.
class LoopSampler {
  public:
    explicit LoopSampler(RestrictedLoopMeasureSpec spec, int grid_points = 4096)
        : spec_(std::move(spec)) {
        const Matrix& q = spec_.chain.rates();
        Eigen::EigenSolver<Matrix> es(q);
        eigvals_ = es.eigenvalues();
        eigvecs_ = es.eigenvectors();
        eigvecs_inv_ = eigvecs_.inverse();
        // Fall back to scaling-and-squaring when the eigenbasis is poor.
        use_eigen_ = (eigvecs_ * eigvecs_inv_ -
                      Eigen::MatrixXcd::Identity(q.rows(), q.cols()))
                         .cwiseAbs()
                         .maxCoeff() < 1e-9;

        uniformization_rate_ = 1.1 * (-q.diagonal().minCoeff());
        skeleton_ = Matrix::Identity(q.rows(), q.cols()) +
                    q / uniformization_rate_;
        skeleton_powers_.push_back(
            Matrix::Identity(q.rows(), q.cols()));

        grid_t_.resize(grid_points + 1);
        grid_cdf_.resize(grid_points + 1);
        const double dt = (spec_.b - spec_.a) / grid_points;
        grid_t_[0] = spec_.a;
        grid_cdf_[0] = 0.0;
        double prev = exp_q(spec_.a).trace() / spec_.a;
        for (int k = 1; k <= grid_points; ++k) {
            grid_t_[k] = spec_.a + k * dt;
            const double cur = exp_q(grid_t_[k]).trace() / grid_t_[k];
            grid_cdf_[k] = grid_cdf_[k - 1] + 0.5 * dt * (prev + cur);
            prev = cur;
        }
        total_mass_ = grid_cdf_.back();
    }

    const RestrictedLoopMeasureSpec& spec() const { return spec_; }
    double grid_mass() const { return total_mass_; }

    Matrix exp_q(double t) const {
        if (!use_eigen_)
            return matrix_exponential(t * spec_.chain.rates());
        const Eigen::VectorXcd scaled = (t * eigvals_.array()).exp();
        return (eigvecs_ * scaled.asDiagonal() * eigvecs_inv_).real();
    }

    double sample_lifetime(Splitmix64& rng) const {
        const double target = rng.uniform() * total_mass_;
        const auto it =
            std::upper_bound(grid_cdf_.begin(), grid_cdf_.end(), target);
        const std::size_t k =
            std::min<std::size_t>(grid_cdf_.size() - 1,
                                  std::max<std::size_t>(
                                      1, static_cast<std::size_t>(
                                             it - grid_cdf_.begin())));
        const double frac = (target - grid_cdf_[k - 1]) /
                            std::max(grid_cdf_[k] - grid_cdf_[k - 1], 1e-300);
        return grid_t_[k - 1] + frac * (grid_t_[k] - grid_t_[k - 1]);
    }

    LoopSample sample(Splitmix64& rng) const {
        const double t = sample_lifetime(rng);
        const Matrix e = exp_q(t);
        const Vector diag = e.diagonal().cwiseMax(0.0);
        const int base = rng.discrete(diag);
        return sample_bridge(rng, base, t);
    }

    // Bridge skeleton at fixed lifetime and base, via uniformization.
    LoopSample sample_bridge(Splitmix64& rng, int base, double t) const {
        const double lam_t = uniformization_rate_ * t;
        // event-count weights (lam t)^n / n! [P^n]_{bb}
        std::vector<double> count_weights;
        double log_poisson = -0.0;
        double total = 0.0;
        int n_max = 0;
        for (int n = 0;; ++n) {
            const double w =
                std::exp(log_poisson) * skeleton_power(n)(base, base);
            count_weights.push_back(w);
            total += w;
            ++n_max;
            log_poisson += std::log(lam_t) - std::log(n + 1.0);
            if (n > lam_t && w < 1e-16 * total) break;
            if (n > 4000) throw QuadratureFailed("uniformization cap hit");
        }
        double target = rng.uniform() * total;
        int n_events = n_max - 1;
        for (int n = 0; n < n_max; ++n) {
            target -= count_weights[n];
            if (target < 0.0) {
                n_events = n;
                break;
            }
        }

        // backward-filtered skeleton states
        std::vector<int> skeleton(n_events + 1);
        skeleton[0] = base;
        const int n_states = spec_.chain.size();
        for (int step = 1; step <= n_events; ++step) {
            const int remaining = n_events - step;
            Vector w(n_states);
            for (int v = 0; v < n_states; ++v)
                w[v] = skeleton_(skeleton[step - 1], v) *
                       skeleton_power(remaining)(v, base);
            skeleton[step] = rng.discrete(w);
        }

        // event times: sorted uniforms, then drop virtual self-transitions
        std::vector<double> times(n_events);
        for (auto& x : times) x = rng.uniform() * t;
        std::sort(times.begin(), times.end());

        LoopSample out;
        out.lifetime = t;
        out.base = base;
        out.states.push_back(base);
        for (int i = 0; i < n_events; ++i) {
            if (skeleton[i + 1] != out.states.back()) {
                out.states.push_back(skeleton[i + 1]);
                out.jump_times.push_back(times[i]);
            }
        }
        return out;
    }

  private:
    const Matrix& skeleton_power(int n) const {
        while (static_cast<int>(skeleton_powers_.size()) <= n)
            skeleton_powers_.push_back(skeleton_powers_.back() * skeleton_);
        return skeleton_powers_[n];
    }

    RestrictedLoopMeasureSpec spec_;
    Eigen::VectorXcd eigvals_;
    Eigen::MatrixXcd eigvecs_, eigvecs_inv_;
    bool use_eigen_ = false;
    double uniformization_rate_ = 0.0;
    Matrix skeleton_;
    mutable std::vector<Matrix> skeleton_powers_;
    std::vector<double> grid_t_, grid_cdf_;
    double total_mass_ = 0.0;
};

// L^nu over the whole loop, from holding intervals; k=2 returns the product
// of the two single CAF totals (the two cyclic orderings exhaust the double
// integral).
inline double evaluate_restricted_caf(const LoopSample& sample,
                                      const Vector& m,
                                      const std::vector<RevuzMeasure>& nus) {
    if (nus.empty() || nus.size() > 2)
        throw KUnsupported("Monte-Carlo CAF evaluation limited to k <= 2");
    double product = 1.0;
    for (const auto& nu : nus) {
        const Vector f = nu.density_vs_m(m);
        double total = 0.0;
        for (std::size_t i = 0; i < sample.states.size(); ++i) {
            const double t0 = i == 0 ? 0.0 : sample.jump_times[i - 1];
            const double t1 = i + 1 < sample.states.size()
                                  ? sample.jump_times[i]
                                  : sample.lifetime;
            total += f[sample.states[i]] * (t1 - t0);
        }
        product *= total;
    }
    return product;
}

struct McEstimate {
    double estimate;
    double stderr_;
    long samples;
};

inline McEstimate estimate_restricted_moment(
    const LoopSampler& sampler, const std::vector<RevuzMeasure>& nus,
    long n_samples, std::uint64_t seed) {
    const double mass = restricted_mass(sampler.spec());
    const Vector& m = sampler.spec().chain.reference();
    double sum = 0.0, sum_sq = 0.0;
    for (long i = 0; i < n_samples; ++i) {
        Splitmix64 rng(seed, static_cast<std::uint64_t>(i));
        const LoopSample s = sampler.sample(rng);
        const double v = evaluate_restricted_caf(s, m, nus);
        sum += v;
        sum_sq += v * v;
    }
    const double mean = sum / n_samples;
    const double var =
        std::max(0.0, sum_sq / n_samples - mean * mean) /
        std::max<long>(1, n_samples - 1) * n_samples;
    return McEstimate{mass * mean,
                      mass * std::sqrt(var / n_samples), n_samples};
}

// Re-base the loop at time u mod lifetime; CAF totals are preserved.
inline LoopSample rotate_loop(const LoopSample& sample, double u) {
    const double zeta = sample.lifetime;
    double v = std::fmod(u, zeta);
    if (v < 0.0) v += zeta;
    if (v == 0.0) return sample;

    const std::size_t n_seg = sample.states.size();
    const auto seg_start = [&](std::size_t i) {
        return i == 0 ? 0.0 : sample.jump_times[i - 1];
    };
    std::size_t pivot = 0;
    while (pivot + 1 < n_seg && sample.jump_times[pivot] <= v) ++pivot;

    LoopSample out;
    out.lifetime = zeta;
    out.weight = sample.weight;
    out.base = sample.states[pivot];
    out.states.push_back(sample.states[pivot]);
    for (std::size_t i = pivot + 1; i < n_seg; ++i) {
        out.states.push_back(sample.states[i]);
        out.jump_times.push_back(seg_start(i) - v);
    }
    // wrap: continue with the head of the original path
    if (sample.states[0] != out.states.back()) {
        out.states.push_back(sample.states[0]);
        out.jump_times.push_back(zeta - v);
    }
    for (std::size_t i = 1; i <= pivot; ++i) {
        out.states.push_back(sample.states[i]);
        out.jump_times.push_back(seg_start(i) + zeta - v);
    }
    return out;
}

}  // namespace loopm
