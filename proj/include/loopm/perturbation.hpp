#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "loopm/chain.hpp"
#include "loopm/errors.hpp"
#include "loopm/levy.hpp"
#include "loopm/measure.hpp"
#include "loopm/moments.hpp"

namespace loopm {

enum class PerturbFamily { KILLING, LEVY, JUMP };

struct FdEntry {
    double step;
    double value;
};

struct FdResult {
    std::vector<FdEntry> table;
    double richardson = 0.0;
    double observed_order = 0.0;
};

// Verdict object for one derivative theorem check: the analytic value (two
// independent forms) against Richardson-extrapolated finite differences.
struct PerturbationReport {
    PerturbFamily family;
    double analytic = 0.0;
    double analytic_alt = 0.0;    // second analytic form of the same derivative
    double form_agreement = 0.0;  // rel diff between the two analytic forms
    std::vector<FdEntry> fd_table;
    double richardson = 0.0;
    double rel_error = 0.0;
    double observed_order = 0.0;
    double tolerance = 1e-6;
    bool pass = false;
};

inline const std::vector<double>& default_eps_grid() {
    static const std::vector<double> grid{1e-2, 3e-3, 1e-3, 3e-4, 1e-4};
    return grid;
}

namespace detail {

inline double rel_diff(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) / scale;
}

// Derivative-vs-FD comparison with the scale floored at a fraction of the
// unperturbed moment: a derivative that is negligible against the moment
// itself cannot be resolved relatively by finite differences.
inline double rel_diff_floored(double a, double b, double base_moment) {
    const double scale = std::max(
        {std::abs(a), std::abs(b), 1e-3 * std::abs(base_moment), 1e-300});
    return std::abs(a - b) / scale;
}

// Least-squares slope of log|residual| vs log(step) over the coarse entries;
// the finest entries feed the Richardson value and are excluded.
inline double fit_order(const std::vector<FdEntry>& table, double reference) {
    std::vector<double> xs, ys;
    const std::size_t usable = table.size() > 2 ? table.size() - 2 : table.size();
    for (std::size_t i = 0; i < usable; ++i) {
        const double resid = std::abs(table[i].value - reference);
        if (resid < 1e-14 * std::max(1.0, std::abs(reference))) continue;
        xs.push_back(std::log(table[i].step));
        ys.push_back(std::log(resid));
    }
    if (xs.size() < 2) return 0.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double n = static_cast<double>(xs.size());
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace detail

// Difference table plus Richardson extrapolation.  Central differences
// (order 2) when the evaluator admits negative steps; otherwise a 4-point
// forward stencil (order 3) for families restricted to eps >= 0.
inline FdResult fd_derivative(const std::function<double(double)>& evaluator,
                              const std::vector<double>& grid,
                              bool one_sided = false) {
    if (grid.size() < 2) throw ConfigInvalid("fd grid needs >= 2 steps");
    FdResult out;
    const auto eval = [&](double eps) {
        try {
            return evaluator(eps);
        } catch (const Error&) {
            throw EvaluatorFailed("evaluator failed inside fd grid");
        }
    };
    for (double h : grid) {
        double d;
        if (one_sided) {
            d = (-11.0 * eval(0.0) + 18.0 * eval(h) - 9.0 * eval(2.0 * h) +
                 2.0 * eval(3.0 * h)) /
                (6.0 * h);
        } else {
            d = (eval(h) - eval(-h)) / (2.0 * h);
        }
        out.table.push_back({h, d});
    }
    const double p = one_sided ? 3.0 : 2.0;
    const auto& fine = out.table[out.table.size() - 1];
    const auto& coarse = out.table[out.table.size() - 2];
    const double w1 = std::pow(coarse.step, p);
    const double w2 = std::pow(fine.step, p);
    out.richardson = (w1 * fine.value - w2 * coarse.value) / (w1 - w2);
    out.observed_order = detail::fit_order(out.table, out.richardson);
    return out;
}

// ---------------------------------------------------------------------------
// Killing family: Q_eps = Q - eps diag(nu/m).
// ---------------------------------------------------------------------------

inline TransientChain killing_perturbed_chain(const TransientChain& chain,
                                              const RevuzMeasure& nu,
                                              double eps) {
    const Vector f = nu.density_vs_m(chain.reference());
    return TransientChain(chain.rates() - eps * Matrix(f.asDiagonal()),
                          chain.reference());
}

inline PerturbationReport killing_derivative(const TransientChain& chain,
                                             const RevuzMeasure& nu,
                                             const CafProductSpec& spec,
                                             std::vector<double> grid = {},
                                             double tolerance = 1e-6) {
    PerturbationReport rep;
    rep.family = PerturbFamily::KILLING;
    rep.tolerance = tolerance;
    const GreenKernel g = green_kernel(chain);
    rep.analytic = -insertion_sum<double>(g.u, spec, nu.weights);
    rep.analytic_alt =
        -bridge_moment_matrix<double>(g.u, spec).diagonal().dot(nu.weights);
    rep.form_agreement = detail::rel_diff(rep.analytic, rep.analytic_alt);

    if (grid.empty()) grid = default_eps_grid();
    const double f_sup =
        std::max(nu.density_vs_m(chain.reference()).maxCoeff(), 1e-12);
    for (double& h : grid) h /= f_sup;
    const auto evaluator = [&](double eps) {
        const TransientChain perturbed = killing_perturbed_chain(chain, nu, eps);
        return caf_moment(green_kernel(perturbed), spec);
    };
    const FdResult fd = fd_derivative(evaluator, grid, /*one_sided=*/false);
    rep.fd_table = fd.table;
    rep.richardson = fd.richardson;
    rep.observed_order = fd.observed_order;
    rep.rel_error = detail::rel_diff_floored(rep.analytic, rep.richardson,
                                             caf_moment(g, spec));
    rep.pass = rep.rel_error <= tolerance;
    return rep;
}

// Remainder bound for the exponential multiplicative functional:
// |I(eps) - I(0) + eps mu(L A)| <= eps^2 mu(L^2 A), with the right side
// evaluated exactly by inserting nu twice.
struct RemainderCheck {
    double lhs;
    double rhs;
    bool pass;
};

inline double double_insertion_moment(const GreenKernel& g,
                                      const CafProductSpec& spec,
                                      const RevuzMeasure& nu) {
    const auto base = spec.weight_list();
    const int k = spec.order();
    double total = 0.0;
    for (int slot = 1; slot <= k; ++slot) {
        CafProductSpec once;
        once.measures.reserve(base.size() + 1);
        for (int j = 0; j < slot; ++j)
            once.measures.push_back(RevuzMeasure(base[j]));
        once.measures.push_back(nu);
        for (int j = slot; j < k; ++j)
            once.measures.push_back(RevuzMeasure(base[j]));
        total += insertion_sum<double>(g.u, once, nu.weights);
    }
    return total;
}

inline RemainderCheck killing_remainder_check(const TransientChain& chain,
                                              const RevuzMeasure& nu,
                                              const CafProductSpec& spec,
                                              double eps) {
    const GreenKernel g = green_kernel(chain);
    const double base = caf_moment(g, spec);
    const double perturbed =
        caf_moment(green_kernel(killing_perturbed_chain(chain, nu, eps)), spec);
    const double first_order = insertion_sum<double>(g.u, spec, nu.weights);
    const double lhs = std::abs(perturbed - base + eps * first_order);
    const double rhs = eps * eps * double_insertion_moment(g, spec, nu);
    return RemainderCheck{lhs, rhs, lhs <= rhs * (1.0 + 1e-12)};
}

// ---------------------------------------------------------------------------
// Levy family on the torus.
// ---------------------------------------------------------------------------

// Insertion sum with the kernel at one slot replaced by the derivative
// kernel: sum_i trace(D_1 U ... D_i U' D_{i+1} U ... D_k U).
template <typename Scalar>
Scalar insertion_with_kernel(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& u,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& u_prime,
    const CafProductSpec& spec) {
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    spec.check();
    const auto weights = spec.weight_list();
    const int k = spec.order();
    Scalar total{};
    for (int slot = 0; slot < k; ++slot) {
        Mat acc = Mat::Identity(u.rows(), u.cols());
        for (int j = 0; j < k; ++j) {
            const Mat& kernel = (j == slot) ? u_prime : u;
            acc = acc * (weights[j].template cast<Scalar>().asDiagonal() * kernel);
        }
        total += acc.trace();
    }
    return total;
}

inline PerturbationReport levy_derivative(const LevyTorusModel& model,
                                          const CafProductSpec& spec,
                                          std::vector<double> grid = {},
                                          double tolerance = 1e-6) {
    if (!model.has_kappa())
        throw Condition38Violated("levy derivative needs kappa");
    PerturbationReport rep;
    rep.family = PerturbFamily::LEVY;
    rep.tolerance = tolerance;

    const MatrixC u = translation_kernel(model, levy_potential(model));
    const MatrixC u_prime =
        translation_kernel(model, levy_derivative_kernel(model));
    const Complex form1 = insertion_with_kernel<Complex>(u, u_prime, spec);

    // Fourier form: -N^{-d} sum_lambda kappa(lambda) Qhat(lambda,-lambda)
    // with the endpoint transform sum_{x,y} e^{2 pi i lambda.(x-y)/N} Q^{x,y}.
    const MatrixC bridge = bridge_moment_matrix<Complex>(u, spec);
    const Eigen::Index p = model.points();
    Complex form2{0.0, 0.0};
    for (Eigen::Index lam = 0; lam < p; ++lam) {
        Complex qhat{0.0, 0.0};
        for (Eigen::Index x = 0; x < p; ++x)
            for (Eigen::Index y = 0; y < p; ++y) {
                const double angle =
                    2.0 * std::numbers::pi *
                    static_cast<double>(model.dual_dot(lam, x) -
                                        model.dual_dot(lam, y)) /
                    model.points_per_axis();
                qhat += std::polar(1.0, angle) * bridge(x, y);
            }
        form2 += model.kappa()[lam] * qhat;
    }
    form2 *= -1.0 / static_cast<double>(p);

    rep.analytic = form1.real();
    rep.analytic_alt = form2.real();
    rep.form_agreement =
        std::abs(form1 - form2) /
        std::max({std::abs(form1), std::abs(form2), 1e-300});

    if (grid.empty()) grid = default_eps_grid();
    const double kappa_scale = std::max(model.kappa_bound_constant(), 1e-12);
    for (double& h : grid) h /= kappa_scale;
    const auto evaluator = [&](double eps) {
        const MatrixC u_eps =
            translation_kernel(model, perturbed_potential(model, eps));
        return caf_moment<Complex>(u_eps, spec).real();
    };
    const FdResult fd = fd_derivative(evaluator, grid, /*one_sided=*/false);
    rep.fd_table = fd.table;
    rep.richardson = fd.richardson;
    rep.observed_order = fd.observed_order;
    rep.rel_error = detail::rel_diff_floored(
        rep.analytic, rep.richardson, caf_moment<Complex>(u, spec).real());
    rep.pass = rep.rel_error <= tolerance && rep.form_agreement <= 1e-10;
    return rep;
}

// ---------------------------------------------------------------------------
// Jump family: add jumps at rate eps c(x) with distribution G(x,.).
// ---------------------------------------------------------------------------

struct JumpPerturbation {
    Matrix j;      // jump intensity density against m x m
    Vector c;      // c_x = sum_y j(x,y) m_y
    Matrix G;      // row-stochastic jump distribution
    Matrix G_hat;  // dual kernel built from j^T
};

inline JumpPerturbation make_jump_perturbation(const TransientChain& chain,
                                               const Matrix& j,
                                               double tol = 1e-10) {
    const int n = chain.size();
    if (j.rows() != n || j.cols() != n)
        throw ConfigInvalid("jump intensity size mismatch");
    if ((j.array() < 0.0).any())
        throw ConfigInvalid("jump intensity must be nonnegative");
    const Vector& m = chain.reference();
    const Vector c = j * m;
    const Vector c_in = j.transpose() * m;
    for (int x = 0; x < n; ++x) {
        if (std::abs(c[x] - c_in[x]) > tol * std::max(1.0, std::abs(c[x])))
            throw MarginalAsymmetry("jump intensity marginals differ");
        if (!(c[x] > 0.0))
            throw ConfigInvalid("jump rate c must be strictly positive");
    }
    JumpPerturbation jp;
    jp.j = j;
    jp.c = c;
    jp.G = c.cwiseInverse().asDiagonal() * j * m.asDiagonal();
    jp.G_hat = c.cwiseInverse().asDiagonal() * j.transpose() * m.asDiagonal();
    return jp;
}

inline Matrix jump_generator(const TransientChain& chain,
                             const JumpPerturbation& jp, double eps) {
    return chain.rates() +
           eps * Matrix(jp.c.asDiagonal()) *
               (jp.G - Matrix::Identity(chain.size(), chain.size()));
}

struct JumpPotential {
    Matrix direct;           // Green density of the jump-added generator
    Matrix series;           // truncated Neumann series
    int terms_used = 0;
    double spectral_radius = 0.0;  // of eps c G V_{eps c}
    double tail_ratio = 0.0;       // observed geometric decay of term norms
};

inline JumpPotential jump_perturbed_potential(const TransientChain& chain,
                                              const JumpPerturbation& jp,
                                              double eps,
                                              double series_tol = 1e-14,
                                              int max_terms = 400) {
    if (eps < 0.0) throw ConfigInvalid("jump family needs eps >= 0");
    const int n = chain.size();
    JumpPotential out;
    out.direct =
        green_kernel(TransientChain(jump_generator(chain, jp, eps),
                                    chain.reference()))
            .u;

    // killed resolvent operator (-Q + eps diag(c))^{-1}
    const Matrix v_bar =
        (-chain.rates() + eps * Matrix(jp.c.asDiagonal())).inverse();
    const Matrix k_op = eps * Matrix(jp.c.asDiagonal()) * jp.G * v_bar;
    out.spectral_radius = k_op.eigenvalues().cwiseAbs().maxCoeff();
    if (out.spectral_radius >= 1.0)
        throw SeriesDiverged("Neumann series spectral radius >= 1");

    Matrix term = v_bar;
    Matrix sum = Matrix::Zero(n, n);
    std::vector<double> term_norms;
    const double head = v_bar.cwiseAbs().maxCoeff();
    int used = 0;
    bool converged = false;
    while (used < max_terms) {
        sum += term;
        term_norms.push_back(term.cwiseAbs().maxCoeff());
        ++used;
        const Matrix next = term * k_op;  // V (eps c G V)^n
        if (next.cwiseAbs().maxCoeff() < series_tol * head) {
            converged = true;
            break;
        }
        term = next;
    }
    if (!converged)
        throw SeriesDiverged("Neumann series truncation failed to converge");
    out.terms_used = used;
    out.series = sum * chain.reference().cwiseInverse().asDiagonal();
    if (term_norms.size() >= 6) {
        const std::size_t hi = term_norms.size() - 1;
        const std::size_t lo = term_norms.size() / 2;
        out.tail_ratio = std::pow(term_norms[hi] / term_norms[lo],
                                  1.0 / static_cast<double>(hi - lo));
    }
    return out;
}

inline PerturbationReport jump_derivative(const TransientChain& chain,
                                          const JumpPerturbation& jp,
                                          const CafProductSpec& spec,
                                          std::vector<double> grid = {},
                                          double tolerance = 1e-6) {
    PerturbationReport rep;
    rep.family = PerturbFamily::JUMP;
    rep.tolerance = tolerance;
    const GreenKernel g = green_kernel(chain);
    const int n = chain.size();

    // insertion form: u' = U diag(c m) (G - I) U
    const Vector cm = jp.c.cwiseProduct(chain.reference());
    const Matrix u_prime = g.u * cm.asDiagonal() *
                           (jp.G - Matrix::Identity(n, n)) * g.u;
    rep.analytic = insertion_with_kernel<double>(g.u, u_prime, spec);

    // (Q^{y,x} - Q^{x,x}) form against c(x) G(x,dy) m(x)
    const Matrix bridge = bridge_moment_matrix<double>(g.u, spec);
    double form2 = 0.0;
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y)
            form2 += (bridge(y, x) - bridge(x, x)) * jp.c[x] * jp.G(x, y) *
                     chain.reference()[x];
    rep.analytic_alt = form2;
    rep.form_agreement = detail::rel_diff(rep.analytic, rep.analytic_alt);

    if (grid.empty()) grid = default_eps_grid();
    const double c_sup = std::max(jp.c.maxCoeff(), 1e-12);
    for (double& h : grid) h /= c_sup;
    const auto evaluator = [&](double eps) {
        const Matrix u_eps =
            green_kernel(TransientChain(jump_generator(chain, jp, eps),
                                        chain.reference()))
                .u;
        return caf_moment<double>(u_eps, spec);
    };
    const FdResult fd = fd_derivative(evaluator, grid, /*one_sided=*/true);
    rep.fd_table = fd.table;
    rep.richardson = fd.richardson;
    rep.observed_order = fd.observed_order;
    rep.rel_error = detail::rel_diff_floored(rep.analytic, rep.richardson,
                                             caf_moment<double>(g.u, spec));
    rep.pass = rep.rel_error <= tolerance && rep.form_agreement <= 1e-10;
    return rep;
}

struct DualCheckReport {
    double max_rel_error;
    bool pass;
};

// Adding jumps with kernel G-hat to the dual chain must reproduce the
// transpose of the perturbed potential; both sides are built by independent
// linear solves.
inline DualCheckReport jump_dual_check(const TransientChain& chain,
                                       const JumpPerturbation& jp, double eps,
                                       double tol = 1e-10) {
    const TransientChain dual = dual_chain(chain);
    const Matrix u_forward =
        green_kernel(TransientChain(jump_generator(chain, jp, eps),
                                    chain.reference()))
            .u;
    const Matrix dual_gen =
        dual.rates() + eps * Matrix(jp.c.asDiagonal()) *
                           (jp.G_hat - Matrix::Identity(chain.size(), chain.size()));
    const Matrix u_dual =
        green_kernel(TransientChain(dual_gen, chain.reference())).u;
    const double scale = u_forward.cwiseAbs().maxCoeff();
    const double err =
        (u_dual - u_forward.transpose()).cwiseAbs().maxCoeff() / scale;
    return DualCheckReport{err, err <= tol};
}

struct SemigroupCheckReport {
    double max_abs_error;
    int terms_used;
    int grid_intervals;
    bool pass;
};

// Time-ordered expansion of the jump-added semigroup built from the killed
// semigroup exp(t(Q - eps diag(c))), integrated on a trapezoid grid with
// exact between-node propagation and grid-doubling until the sum settles.
inline SemigroupCheckReport jump_semigroup_check(const TransientChain& chain,
                                                 const JumpPerturbation& jp,
                                                 double eps, double t,
                                                 double tol = 1e-6,
                                                 int max_order = 20) {
    const int n = chain.size();
    const Matrix a = chain.rates() - eps * Matrix(jp.c.asDiagonal());
    const Matrix b = eps * Matrix(jp.c.asDiagonal()) * jp.G;
    const Matrix exact = matrix_exponential(t * jump_generator(chain, jp, eps));

    const auto expand = [&](int intervals, int& order_used) {
        const double dt = t / intervals;
        const Matrix step = matrix_exponential(dt * a);
        // level 0: killed semigroup on the grid
        std::vector<Matrix> prev(intervals + 1);
        prev[0] = Matrix::Identity(n, n);
        for (int k = 1; k <= intervals; ++k) prev[k] = prev[k - 1] * step;
        Matrix total = prev[intervals];
        order_used = 0;
        for (int level = 1; level <= max_order; ++level) {
            std::vector<Matrix> cur(intervals + 1);
            cur[0] = Matrix::Zero(n, n);
            for (int k = 1; k <= intervals; ++k) {
                cur[k] = cur[k - 1] * step +
                         0.5 * dt * (prev[k - 1] * b * step + prev[k] * b);
            }
            total += cur[intervals];
            order_used = level;
            if (cur[intervals].cwiseAbs().maxCoeff() <
                0.01 * tol * total.cwiseAbs().maxCoeff())
                break;
            prev = std::move(cur);
        }
        return total;
    };

    int intervals = 64;
    int order_used = 0;
    Matrix coarse = expand(intervals, order_used);
    Matrix fine;
    for (;;) {
        fine = expand(2 * intervals, order_used);
        const Matrix richardson = (4.0 * fine - coarse) / 3.0;
        const double change = (fine - coarse).cwiseAbs().maxCoeff();
        if (change < 0.1 * tol || intervals >= 1 << 14) {
            fine = richardson;
            intervals *= 2;
            break;
        }
        coarse = fine;
        intervals *= 2;
    }
    const double m_scale = chain.reference().maxCoeff();
    const double err =
        (fine - exact).cwiseAbs().maxCoeff() / std::max(1.0, m_scale);
    return SemigroupCheckReport{err, order_used, intervals, err <= tol};
}

}  // namespace loopm
