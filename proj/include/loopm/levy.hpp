#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "loopm/errors.hpp"
#include "loopm/measure.hpp"

namespace loopm {

using Complex = std::complex<double>;
using VectorC = Eigen::VectorXcd;
using MatrixC = Eigen::MatrixXcd;

// Lattice Levy model on the discrete torus {0..N-1}^d: a characteristic
// exponent psi sampled on the dual torus, optionally with a perturbation
// exponent kappa bounded by |kappa| <= C |psi|.
//
// DFT convention used throughout: forward sums carry no prefactor, inverse
// transforms carry N^{-d}.
class LevyTorusModel {
  public:
    LevyTorusModel(int d, int n, VectorC psi,
                   std::optional<VectorC> kappa = std::nullopt)
        : d_(d), n_(n), psi_(std::move(psi)), kappa_(std::move(kappa)) {
        if (d_ < 1 || n_ < 1) throw ConfigInvalid("torus dimensions invalid");
        if (psi_.size() != points())
            throw ConfigInvalid("psi table size mismatch");
        psi_min_ = psi_.real().minCoeff();
        if (!(psi_min_ > 0.0))
            throw NonTransient("Re psi must be strictly positive");
        if (kappa_) {
            if (kappa_->size() != points())
                throw ConfigInvalid("kappa table size mismatch");
            bound_constant_ = 0.0;
            for (Eigen::Index i = 0; i < points(); ++i)
                bound_constant_ = std::max(
                    bound_constant_, std::abs((*kappa_)[i]) / std::abs(psi_[i]));
        }
    }

    int dim() const { return d_; }
    int points_per_axis() const { return n_; }
    Eigen::Index points() const {
        Eigen::Index p = 1;
        for (int i = 0; i < d_; ++i) p *= n_;
        return p;
    }
    const VectorC& psi() const { return psi_; }
    bool has_kappa() const { return kappa_.has_value(); }
    const VectorC& kappa() const {
        if (!kappa_) throw ConfigInvalid("model has no kappa");
        return *kappa_;
    }
    double psi_min() const { return psi_min_; }
    // Smallest C with |kappa| <= C |psi| on the grid.
    double kappa_bound_constant() const { return bound_constant_; }

    // lambda . z summed per axis, from flat indices.
    long dual_dot(Eigen::Index lambda, Eigen::Index z) const {
        long acc = 0;
        for (int axis = 0; axis < d_; ++axis) {
            acc += static_cast<long>(lambda % n_) * static_cast<long>(z % n_);
            lambda /= n_;
            z /= n_;
        }
        return acc;
    }

    Eigen::Index wrap_diff(Eigen::Index a, Eigen::Index b) const {
        // componentwise (a - b) mod N on flat indices
        Eigen::Index out = 0;
        Eigen::Index stride = 1;
        for (int axis = 0; axis < d_; ++axis) {
            const Eigen::Index ai = a % n_, bi = b % n_;
            out += ((ai - bi + n_) % n_) * stride;
            stride *= n_;
            a /= n_;
            b /= n_;
        }
        return out;
    }

    // Inverse DFT of the given dual-grid table.
    VectorC inverse_dft(const VectorC& table) const {
        const Eigen::Index p = points();
        VectorC out(p);
        const double norm = 1.0 / static_cast<double>(p);
        for (Eigen::Index z = 0; z < p; ++z) {
            Complex acc{0.0, 0.0};
            for (Eigen::Index lam = 0; lam < p; ++lam) {
                const double angle = 2.0 * std::numbers::pi *
                                     static_cast<double>(dual_dot(lam, z)) / n_;
                acc += std::polar(1.0, angle) * table[lam];
            }
            out[z] = norm * acc;
        }
        return out;
    }

    // Forward DFT (no prefactor) of state-space weights.
    VectorC forward_dft(const Vector& weights) const {
        const Eigen::Index p = points();
        VectorC out(p);
        for (Eigen::Index lam = 0; lam < p; ++lam) {
            Complex acc{0.0, 0.0};
            for (Eigen::Index z = 0; z < p; ++z) {
                const double angle = -2.0 * std::numbers::pi *
                                     static_cast<double>(dual_dot(lam, z)) / n_;
                acc += std::polar(1.0, angle) * weights[z];
            }
            out[lam] = acc;
        }
        return out;
    }

  private:
    int d_;
    int n_;
    VectorC psi_;
    std::optional<VectorC> kappa_;
    double psi_min_ = 0.0;
    double bound_constant_ = 0.0;
};

// u(z) = N^{-d} sum_lambda e^{2 pi i lambda.z / N} / psi(lambda).
inline VectorC levy_potential(const LevyTorusModel& model) {
    return model.inverse_dft(model.psi().cwiseInverse());
}

inline VectorC perturbed_potential(const LevyTorusModel& model, double eps) {
    const VectorC shifted = model.psi() + eps * model.kappa();
    if (shifted.real().minCoeff() < 0.5 * model.psi_min())
        throw EpsilonTooLarge("Re(psi + eps kappa) dropped below psi_min/2");
    return model.inverse_dft(shifted.cwiseInverse());
}

// u'(z) = -N^{-d} sum_lambda e^{2 pi i lambda.z / N} kappa / psi^2: the
// double-smoothed insertion kernel in Fourier form.
inline VectorC levy_derivative_kernel(const LevyTorusModel& model) {
    const VectorC psi_sq = model.psi().cwiseProduct(model.psi());
    return -model.inverse_dft(model.kappa().cwiseQuotient(psi_sq));
}

// Translation-invariant kernel matrix u(x,y) = pot[y - x].
inline MatrixC translation_kernel(const LevyTorusModel& model,
                                  const VectorC& pot) {
    const Eigen::Index p = model.points();
    MatrixC u(p, p);
    for (Eigen::Index x = 0; x < p; ++x)
        for (Eigen::Index y = 0; y < p; ++y)
            u(x, y) = pot[model.wrap_diff(y, x)];
    return u;
}

// ||nu||^2 = N^{-d} sum_lambda [(1/|psi|) conv (1/|psi|)](lambda) |nu^(lambda)|^2
// with the normalized circular convolution (f conv g)(l) =
// N^{-d} sum_s f(s) g(l - s).
inline double psi_norm(const LevyTorusModel& model, const FiniteMeasure& nu) {
    const Eigen::Index p = model.points();
    const Vector inv_abs_psi = model.psi().cwiseAbs().cwiseInverse();
    Vector conv(p);
    for (Eigen::Index lam = 0; lam < p; ++lam) {
        double acc = 0.0;
        for (Eigen::Index s = 0; s < p; ++s)
            acc += inv_abs_psi[s] * inv_abs_psi[model.wrap_diff(lam, s)];
        conv[lam] = acc / static_cast<double>(p);
    }
    const VectorC nu_hat = model.forward_dft(nu.weights);
    double total = 0.0;
    for (Eigen::Index lam = 0; lam < p; ++lam)
        total += conv[lam] * std::norm(nu_hat[lam]);
    return std::sqrt(total / static_cast<double>(p));
}

// Built-in exponent families on the dual torus.
inline VectorC killed_walk_exponent(int d, int n, double mass) {
    Eigen::Index p = 1;
    for (int i = 0; i < d; ++i) p *= n;
    VectorC psi(p);
    for (Eigen::Index lam = 0; lam < p; ++lam) {
        double acc = mass * mass;
        Eigen::Index rest = lam;
        for (int axis = 0; axis < d; ++axis) {
            const double frac = static_cast<double>(rest % n) / n;
            acc += 2.0 * (1.0 - std::cos(2.0 * std::numbers::pi * frac));
            rest /= n;
        }
        psi[lam] = acc;
    }
    return psi;
}

inline VectorC relativistic_exponent(int d, int n, double mass, double index_s) {
    VectorC base = killed_walk_exponent(d, n, mass);
    for (Eigen::Index i = 0; i < base.size(); ++i)
        base[i] = std::pow(base[i].real(), 0.5 * index_s);
    return base;
}

}  // namespace loopm
