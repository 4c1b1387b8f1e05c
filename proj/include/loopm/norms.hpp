#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "loopm/chain.hpp"
#include "loopm/levy.hpp"
#include "loopm/measure.hpp"
#include "loopm/moments.hpp"
#include "loopm/rng.hpp"

namespace loopm {

// Empirical proper-norm constant: smallest C with
//   |cyclic product of u against nu_1..nu_n| <= C^n prod ||nu_j||
// over the sampled tuples.  The w-norm admits C = 1; for the other norms the
// observed value is reported, not asserted against a universal constant.
struct NormCertificate {
    NormTag norm;
    int samples;
    double c_observed;
    std::uint64_t worst_tuple_seed;
};

namespace detail {

inline Vector random_positive_weights(int n, Splitmix64& rng) {
    Vector w(n);
    for (int i = 0; i < n; ++i) w[i] = rng.uniform(0.0, 1.0);
    return w;
}

}  // namespace detail

template <typename NormFn>
NormCertificate proper_norm_certificate(const Matrix& u, NormTag tag,
                                        const NormFn& norm_of, int samples,
                                        int max_n, std::uint64_t seed) {
    const int n_states = static_cast<int>(u.rows());
    NormCertificate cert{tag, samples, 0.0, seed};
    for (int s = 0; s < samples; ++s) {
        Splitmix64 rng(seed, static_cast<std::uint64_t>(s));
        const int tuple_n =
            2 + static_cast<int>(rng.uniform() * (max_n - 1));
        std::vector<Vector> weights;
        double norm_product = 1.0;
        for (int j = 0; j < tuple_n; ++j) {
            weights.push_back(detail::random_positive_weights(n_states, rng));
            norm_product *= norm_of(weights.back());
        }
        if (norm_product <= 0.0) continue;
        const double lhs = std::abs(cyclic_product<double>(u, weights));
        const double c =
            std::pow(lhs / norm_product, 1.0 / static_cast<double>(tuple_n));
        if (c > cert.c_observed) {
            cert.c_observed = c;
            cert.worst_tuple_seed = static_cast<std::uint64_t>(s);
        }
    }
    return cert;
}

inline NormCertificate w_norm_certificate(const TransientChain& chain,
                                          int samples, int max_n,
                                          std::uint64_t seed) {
    const GreenKernel g = green_kernel(chain);
    const SqrtKernel sk = sqrt_kernel(chain);
    const auto norm_of = [&](const Vector& w) {
        return w_norm(chain, sk, FiniteMeasure{w});
    };
    return proper_norm_certificate(g.u, NormTag::W_NORM, norm_of, samples,
                                   max_n, seed);
}

inline NormCertificate u2inf_norm_certificate(const TransientChain& chain,
                                              int samples, int max_n,
                                              std::uint64_t seed) {
    const GreenKernel g = green_kernel(chain);
    const auto norm_of = [&](const Vector& w) {
        return u2inf_norm(g, FiniteMeasure{w});
    };
    return proper_norm_certificate(g.u, NormTag::U2INF_NORM, norm_of, samples,
                                   max_n, seed);
}

inline NormCertificate psi_norm_certificate(const LevyTorusModel& model,
                                            int samples, int max_n,
                                            std::uint64_t seed) {
    const MatrixC u_c = translation_kernel(model, levy_potential(model));
    if (u_c.imag().cwiseAbs().maxCoeff() > 1e-9)
        throw ConfigInvalid("psi certificate needs a real potential kernel");
    const Matrix u = u_c.real();
    const auto norm_of = [&](const Vector& w) {
        return psi_norm(model, FiniteMeasure{w});
    };
    return proper_norm_certificate(u, NormTag::PSI_NORM, norm_of, samples,
                                   max_n, seed);
}

}  // namespace loopm
