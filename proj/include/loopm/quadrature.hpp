#pragma once

#include <cmath>
#include <functional>
#include <utility>

#include "loopm/errors.hpp"

namespace loopm {

namespace detail {

template <typename F, typename V>
V adaptive_simpson_rec(const F& f, double a, double b, const V& fa,
                       const V& fm, const V& fb, const V& whole, double tol,
                       int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const V flm = f(lm);
    const V frm = f(rm);
    const V left = (b - a) / 12.0 * (fa + 4.0 * flm + fm);
    const V right = (b - a) / 12.0 * (fm + 4.0 * frm + fb);
    const V both = left + right;
    double err;
    if constexpr (std::is_arithmetic_v<V>) {
        err = std::abs(both - whole);
    } else {
        err = (both - whole).cwiseAbs().maxCoeff();
    }
    if (depth <= 0) throw QuadratureFailed("adaptive Simpson: depth exhausted");
    if (err <= 15.0 * tol) return both + (both - whole) / 15.0;
    return adaptive_simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol,
                                depth - 1) +
           adaptive_simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol,
                                depth - 1);
}

}  // namespace detail

// Adaptive Simpson for scalar- or Eigen-matrix-valued integrands.  `tol` is
// absolute; callers wanting a relative tolerance rescale from a pilot pass.
template <typename F>
auto adaptive_simpson(const F& f, double a, double b, double tol,
                      int max_depth = 48) {
    using V = decltype(f(a));
    const V fa = f(a);
    const V fb = f(b);
    const V fm = f(0.5 * (a + b));
    const V whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::adaptive_simpson_rec(f, a, b, fa, fm, fb, whole, tol,
                                        max_depth);
}

// Relative-tolerance wrapper: pilot pass at loose absolute tolerance fixes the
// scale, then a second pass hits rel_tol against it.
template <typename F>
double adaptive_simpson_rel(const F& f, double a, double b, double rel_tol) {
    const double pilot = adaptive_simpson(f, a, b, 1e-6);
    const double scale = std::max(std::abs(pilot), 1e-300);
    return adaptive_simpson(f, a, b, rel_tol * scale);
}

}  // namespace loopm
