#pragma once

#include <cmath>
#include <utility>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "loopm/errors.hpp"

namespace loopm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kTransienceMargin = 1e-12;

// Killed finite-state CTMC: rate matrix Q with nonnegative off-diagonals,
// nonpositive row sums (the deficit is the killing rate), strictly negative
// spectral abscissa, and a strictly positive reference measure m.  All kernel
// densities below are taken with respect to m.
class TransientChain {
  public:
    TransientChain(Matrix Q, Vector m)
        : q_(std::move(Q)), m_(std::move(m)) {
        if (q_.rows() != q_.cols())
            throw ConfigInvalid("rate matrix must be square");
        if (m_.size() != q_.rows())
            throw ConfigInvalid("reference measure length mismatch");
        const int n = size();
        for (int i = 0; i < n; ++i) {
            if (!(m_[i] > 0.0))
                throw NonPositiveReference("reference weight must be > 0");
            double row = 0.0;
            for (int j = 0; j < n; ++j) {
                if (i != j && q_(i, j) < 0.0)
                    throw NegativeOffDiagonal("negative off-diagonal rate");
                row += q_(i, j);
            }
            if (row > 1e-12)
                throw NonTransient("positive row sum (negative killing rate)");
        }
        abscissa_ = q_.eigenvalues().real().maxCoeff();
        if (abscissa_ >= -kTransienceMargin)
            throw NonTransient("spectral abscissa not strictly negative");
    }

    int size() const { return static_cast<int>(q_.rows()); }
    const Matrix& rates() const { return q_; }
    const Vector& reference() const { return m_; }
    double spectral_abscissa() const { return abscissa_; }

    Vector killing() const { return -q_.rowwise().sum(); }

    bool is_m_symmetric(double tol = 1e-10) const {
        const int n = size();
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                if (std::abs(m_[i] * q_(i, j) - m_[j] * q_(j, i)) > tol)
                    return false;
        return true;
    }

  private:
    Matrix q_;
    Vector m_;
    double abscissa_;
};

inline TransientChain validate_chain(Matrix Q, Vector m) {
    return TransientChain(std::move(Q), std::move(m));
}

inline Matrix matrix_exponential(const Matrix& A) { return A.exp(); }

// p_t(x,y) = [exp(tQ)]_{xy} / m_y.
inline Matrix transition_density(const TransientChain& chain, double t) {
    if (t < 0.0) throw ConfigInvalid("transition density needs t >= 0");
    return matrix_exponential(t * chain.rates()) *
           chain.reference().cwiseInverse().asDiagonal();
}

// Potential density u(x,y) with respect to m, together with the measure it is
// a density against.  u = (-Q)^{-1} diag(m)^{-1}.
struct GreenKernel {
    Matrix u;
    Vector m;
};

inline GreenKernel green_kernel(const TransientChain& chain) {
    const Matrix neg_q = -chain.rates();
    Eigen::FullPivLU<Matrix> lu(neg_q);
    if (!lu.isInvertible())
        throw SingularSolve("generator numerically singular");
    Matrix u = lu.inverse() * chain.reference().cwiseInverse().asDiagonal();
    return GreenKernel{std::move(u), chain.reference()};
}

// Dual generator diag(m)^{-1} Q^T diag(m); admissible only when its row sums
// stay nonpositive, i.e. m supports a substochastic dual.
inline TransientChain dual_chain(const TransientChain& chain) {
    const Vector& m = chain.reference();
    const Matrix q_hat = m.cwiseInverse().asDiagonal() *
                         chain.rates().transpose() * m.asDiagonal();
    const Vector row_sums = q_hat.rowwise().sum();
    if ((row_sums.array() > 1e-12).any())
        throw NotDualAdmissible(
            "reference measure incompatible with a substochastic dual");
    return TransientChain(q_hat, m);
}

// w with W diag(m) W = U, i.e. the m-weighted operator square root of the
// Green kernel.  Requires m-symmetry so that diag(sqrt(m)) (-Q) diag(1/sqrt(m))
// is symmetric and the eigendecomposition is exact.
struct SqrtKernel {
    Matrix w;
};

inline SqrtKernel sqrt_kernel(const TransientChain& chain) {
    if (!chain.is_m_symmetric())
        throw NotSymmetric("sqrt kernel requires an m-symmetric chain");
    const Vector sqrt_m = chain.reference().cwiseSqrt();
    const Matrix sym = sqrt_m.asDiagonal() * (-chain.rates()) *
                       sqrt_m.cwiseInverse().asDiagonal();
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (sym + sym.transpose()));
    const Matrix inv_sqrt = es.eigenvectors() *
                            es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
                            es.eigenvectors().transpose();
    // W diag(m) = diag(1/sqrt(m)) (-Q_sym)^{-1/2} diag(sqrt(m))
    Matrix w = sqrt_m.cwiseInverse().asDiagonal() * inv_sqrt *
               sqrt_m.asDiagonal() * chain.reference().cwiseInverse().asDiagonal();
    return SqrtKernel{std::move(w)};
}

struct TimeChangeReport {
    Matrix u_x;           // potential of X w.r.t. m
    Matrix u_y;           // potential of diag(a) Q w.r.t. m
    double max_rel_error; // of u_Y(x,y) vs u_X(x,y)/a(y)
    // The identity validates for densities taken against m on both sides; it
    // does not hold against a*m, and this report records the m convention.
    bool densities_wrt_m = true;
};

inline TimeChangeReport time_change_check(const TransientChain& chain,
                                          const Vector& a) {
    if (a.size() != chain.size() || (a.array() <= 0.0).any())
        throw NonPositiveA("time change needs strictly positive a");
    const Matrix u_x = green_kernel(chain).u;
    const TransientChain y_chain(a.asDiagonal() * chain.rates(),
                                 chain.reference());
    const Matrix u_y = green_kernel(y_chain).u;
    const Matrix expected = u_x * a.cwiseInverse().asDiagonal();
    const double scale = expected.cwiseAbs().maxCoeff();
    const double err = (u_y - expected).cwiseAbs().maxCoeff() / scale;
    return TimeChangeReport{u_x, u_y, err};
}

}  // namespace loopm
