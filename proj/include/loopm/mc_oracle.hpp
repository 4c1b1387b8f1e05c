#pragma once

#include "loopm/chain.hpp"
#include "loopm/measure.hpp"
#include "loopm/quadrature.hpp"
#include "loopm/sampler.hpp"

namespace loopm {

// Quadrature oracles for the restricted loop-measure moments.  Both reductions
// collapse the bridge time-integral against the 1/t mixing weight:
//
//   k=1:  integral over [a,b] of trace(diag(nu/m) exp(tQ)) dt
//   k=2:  integral over [a,b] of
//            integral over [0,t] of
//               trace(diag(f1) exp(tau Q) diag(f2) exp((t-tau) Q)) dtau dt
//
// The unreduced double/triple quadratures that justify these reductions live
// in the test suite.

inline double restricted_moment_oracle_k1(const RestrictedLoopMeasureSpec& spec,
                                          const RevuzMeasure& nu,
                                          double rel_tol = 1e-10) {
    const Vector f = nu.density_vs_m(spec.chain.reference());
    const auto integrand = [&](double t) {
        return (f.asDiagonal() * matrix_exponential(t * spec.chain.rates()))
            .trace();
    };
    return adaptive_simpson_rel(integrand, spec.a, spec.b, rel_tol);
}

inline double restricted_moment_oracle_k2(const RestrictedLoopMeasureSpec& spec,
                                          const RevuzMeasure& nu1,
                                          const RevuzMeasure& nu2,
                                          double rel_tol = 1e-8) {
    const Vector f1 = nu1.density_vs_m(spec.chain.reference());
    const Vector f2 = nu2.density_vs_m(spec.chain.reference());
    const Matrix& q = spec.chain.rates();
    const auto outer = [&](double t) {
        const auto inner = [&](double tau) {
            return (f1.asDiagonal() * matrix_exponential(tau * q) *
                    f2.asDiagonal() * matrix_exponential((t - tau) * q))
                .trace();
        };
        return adaptive_simpson_rel(inner, 0.0, t, 0.1 * rel_tol);
    };
    return adaptive_simpson_rel(outer, spec.a, spec.b, rel_tol);
}

}  // namespace loopm
