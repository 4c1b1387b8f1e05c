#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include <Eigen/Dense>

#include "loopm/chain.hpp"
#include "loopm/errors.hpp"

namespace loopm {

// Finite signed measure on the state set: one weight per state.
struct FiniteMeasure {
    Vector weights;

    double total_variation() const { return weights.cwiseAbs().sum(); }
};

// Positive measure whose associated additive functional is
// L_t = integral of (nu/m)(X_s) ds.
struct RevuzMeasure {
    Vector weights;

    RevuzMeasure() = default;
    explicit RevuzMeasure(Vector w) : weights(std::move(w)) {
        if ((weights.array() < 0.0).any())
            throw ConfigInvalid("Revuz measure weights must be >= 0");
    }

    Vector density_vs_m(const Vector& m) const {
        return weights.cwiseQuotient(m);
    }
};

enum class NormTag { W_NORM, PSI_NORM, U2INF_NORM };

// Kernel smoothed on both sides by w: M_nu(x,z) = sum_y w(x,y) w(y,z) nu_y.
inline Matrix smoothed_measure_kernel(const SqrtKernel& sk,
                                      const FiniteMeasure& nu) {
    return sk.w * nu.weights.asDiagonal() * sk.w;
}

// L^2(m x m) norm of M_nu; the Hilbert-Schmidt norm of the m-weighted
// operator with kernel M_nu.
inline double w_norm(const TransientChain& chain, const SqrtKernel& sk,
                     const FiniteMeasure& nu) {
    const Matrix m_nu = smoothed_measure_kernel(sk, nu);
    const Vector& m = chain.reference();
    double acc = 0.0;
    for (int x = 0; x < chain.size(); ++x)
        for (int z = 0; z < chain.size(); ++z)
            acc += m_nu(x, z) * m_nu(x, z) * m[x] * m[z];
    return std::sqrt(acc);
}

// max( |nu|(S), sup_x sum_y (u(x,y)^2 + u(y,x)^2) |nu|_y ).
inline double u2inf_norm(const GreenKernel& g, const FiniteMeasure& nu) {
    const Vector abs_nu = nu.weights.cwiseAbs();
    const Matrix u2 = g.u.cwiseAbs2() + g.u.transpose().cwiseAbs2();
    const double sup = (u2 * abs_nu).maxCoeff();
    return std::max(abs_nu.sum(), sup);
}

}  // namespace loopm
