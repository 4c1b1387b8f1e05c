#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "loopm/chain.hpp"
#include "loopm/errors.hpp"
#include "loopm/measure.hpp"

namespace loopm {

// (k-1)! circle-permutation representatives and n^k index sums stay desk-scale
// under this cap.
inline constexpr int kMaxCafOrder = 8;

// Ordered tuple of Revuz measures defining a multiple CAF.
struct CafProductSpec {
    std::vector<RevuzMeasure> measures;

    int order() const { return static_cast<int>(measures.size()); }

    void check() const {
        if (measures.empty()) throw ConfigInvalid("empty CAF product spec");
        if (order() > kMaxCafOrder)
            throw KTooLarge("CAF product order exceeds cap");
    }

    std::vector<Vector> weight_list() const {
        std::vector<Vector> out;
        out.reserve(measures.size());
        for (const auto& nu : measures) out.push_back(nu.weights);
        return out;
    }
};

enum class CyclicKind { PERMUTATIONS_ON_CIRCLE, CYCLIC_TRANSLATIONS };

// Equivalence classes of orderings of 1..k on the circle.  Circle permutations
// are represented with the first element fixed; cyclic translations are the k
// shifts j -> j+i mod k.
struct CyclicClass {
    CyclicKind kind;
    int k;
    std::vector<std::vector<int>> members;  // 0-based index tuples
};

inline CyclicClass enumerate_cyclic(CyclicKind kind, int k) {
    if (k < 1 || k > kMaxCafOrder) throw KTooLarge("cyclic order out of range");
    CyclicClass cls{kind, k, {}};
    if (kind == CyclicKind::CYCLIC_TRANSLATIONS) {
        for (int shift = 0; shift < k; ++shift) {
            std::vector<int> perm(k);
            for (int j = 0; j < k; ++j) perm[j] = (j + shift) % k;
            cls.members.push_back(std::move(perm));
        }
    } else {
        std::vector<int> rest(k - 1);
        std::iota(rest.begin(), rest.end(), 1);
        do {
            std::vector<int> perm;
            perm.reserve(k);
            perm.push_back(0);
            perm.insert(perm.end(), rest.begin(), rest.end());
            cls.members.push_back(std::move(perm));
        } while (std::next_permutation(rest.begin(), rest.end()));
    }
    return cls;
}

// Cyclic product integral for one fixed ordering:
//   sum over tuples of u(y_1,y_2)...u(y_k,y_1) prod nu_j(y_j)
// evaluated as trace(D_1 U D_2 U ... D_k U).  Works for real chain kernels and
// complex torus kernels alike.
template <typename Scalar>
Scalar cyclic_product(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& u,
                      const std::vector<Vector>& weights) {
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    if (weights.empty()) throw ConfigInvalid("empty measure tuple");
    Mat acc = weights[0].template cast<Scalar>().asDiagonal() * u;
    for (std::size_t j = 1; j < weights.size(); ++j)
        acc = acc * (weights[j].template cast<Scalar>().asDiagonal() * u);
    return acc.trace();
}

// mu-moment of the multiple CAF: single cyclic ordering, no permutation sum.
template <typename Scalar>
Scalar caf_moment(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& u,
                  const CafProductSpec& spec) {
    spec.check();
    return cyclic_product(u, spec.weight_list());
}

inline double caf_moment(const GreenKernel& g, const CafProductSpec& spec) {
    return caf_moment<double>(g.u, spec);
}

// mu-moment of prod_j phi(f_j): sum over circle-permutation representatives of
// the cyclic product with nu_j = f_j * m.
inline double phi_moment(const GreenKernel& g,
                         const std::vector<Vector>& densities) {
    const int k = static_cast<int>(densities.size());
    if (k < 2) throw ConfigInvalid("phi moment needs k >= 2");
    std::vector<Vector> weights;
    weights.reserve(densities.size());
    for (const auto& f : densities) weights.push_back(f.cwiseProduct(g.m));
    const CyclicClass cls =
        enumerate_cyclic(CyclicKind::PERMUTATIONS_ON_CIRCLE, k);
    double total = 0.0;
    std::vector<Vector> ordered(k);
    for (const auto& perm : cls.members) {
        for (int j = 0; j < k; ++j) ordered[j] = weights[perm[j]];
        total += cyclic_product<double>(g.u, ordered);
    }
    return total;
}

// Full matrix of bridge moments Q^{x,y}(M^{nu_1..nu_k}): the translation sum
// over k cyclic shifts of U D_{pi(1)} U ... D_{pi(k)} U.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> bridge_moment_matrix(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& u,
    const CafProductSpec& spec) {
    using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    spec.check();
    const auto weights = spec.weight_list();
    const int k = spec.order();
    Mat total = Mat::Zero(u.rows(), u.cols());
    for (int shift = 0; shift < k; ++shift) {
        Mat acc = u;
        for (int j = 0; j < k; ++j) {
            const int idx = (j + shift) % k;
            acc = acc * (weights[idx].template cast<Scalar>().asDiagonal() * u);
        }
        total += acc;
    }
    return total;
}

inline double bridge_moment(const GreenKernel& g, int x, int y,
                            const CafProductSpec& spec) {
    return bridge_moment_matrix<double>(g.u, spec)(x, y);
}

// Both sides of the insertion identity: the k-term insertion sum equals the
// diagonal bridge moment integrated against nu.
struct InsertionReport {
    double insertion_sum;
    double bridge_integral;
    double rel_error;
};

template <typename Scalar>
Scalar insertion_sum(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& u,
                     const CafProductSpec& spec, const Vector& nu_weights) {
    spec.check();
    const auto base = spec.weight_list();
    const int k = spec.order();
    Scalar total{};
    for (int slot = 1; slot <= k; ++slot) {
        std::vector<Vector> inserted;
        inserted.reserve(base.size() + 1);
        inserted.insert(inserted.end(), base.begin(), base.begin() + slot);
        inserted.push_back(nu_weights);
        inserted.insert(inserted.end(), base.begin() + slot, base.end());
        total += cyclic_product(u, inserted);
    }
    return total;
}

inline InsertionReport insertion_identity_check(const GreenKernel& g,
                                                const CafProductSpec& spec,
                                                const RevuzMeasure& nu) {
    const double lhs = insertion_sum<double>(g.u, spec, nu.weights);
    const double rhs =
        bridge_moment_matrix<double>(g.u, spec).diagonal().dot(nu.weights);
    const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
    return InsertionReport{lhs, rhs, std::abs(lhs - rhs) / scale};
}

}  // namespace loopm
