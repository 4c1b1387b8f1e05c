#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "loopm/chain.hpp"
#include "loopm/errors.hpp"
#include "loopm/levy.hpp"
#include "loopm/measure.hpp"
#include "loopm/moments.hpp"
#include "loopm/perturbation.hpp"
#include "loopm/rng.hpp"

namespace loopm {

struct GeneratorParams {
    int n = 6;
    double density = 0.6;        // edge probability for off-diagonal rates
    bool symmetric = false;      // m-symmetric chain
    bool dual_admissible = false;  // counting m with substochastic transpose
    double rate_scale = 1.0;
};

// Deterministic for a given seed.  Every state gets a strictly positive
// killing rate, which pins the spectral abscissa below zero by Gershgorin.
inline TransientChain generate_random_chain(const GeneratorParams& params,
                                            std::uint64_t seed) {
    if (params.n < 1 || !(params.density > 0.0) || params.density > 1.0)
        throw ConfigInvalid("generator params invalid");
    for (int attempt = 0; attempt < 32; ++attempt) {
        Splitmix64 rng(seed, 0xc4a1u + attempt);
        const int n = params.n;
        Vector m(n);
        for (int i = 0; i < n; ++i)
            m[i] = (params.symmetric || !params.dual_admissible)
                       ? rng.uniform(0.5, 2.0)
                       : 1.0;
        if (params.dual_admissible) m.setOnes();

        Matrix rates = Matrix::Zero(n, n);
        if (params.symmetric) {
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j)
                    if (rng.uniform() < params.density) {
                        const double s =
                            rng.uniform(0.1, 1.0) * params.rate_scale;
                        rates(i, j) = s / m[i];
                        rates(j, i) = s / m[j];
                    }
        } else {
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j)
                    if (i != j && rng.uniform() < params.density)
                        rates(i, j) = rng.uniform(0.1, 1.0) * params.rate_scale;
        }

        Vector killing(n);
        for (int i = 0; i < n; ++i)
            killing[i] = rng.uniform(0.1, 0.6) * params.rate_scale;
        if (params.dual_admissible) {
            // keep the transpose substochastic as well
            const Vector col_excess =
                rates.colwise().sum().transpose() - rates.rowwise().sum();
            for (int i = 0; i < n; ++i)
                killing[i] += std::max(0.0, col_excess[i]);
        }
        for (int i = 0; i < n; ++i)
            rates(i, i) = -(rates.row(i).sum() - rates(i, i)) - killing[i];

        try {
            return TransientChain(rates, m);
        } catch (const Error&) {
            continue;
        }
    }
    throw GenerationFailed("could not generate a valid chain");
}

inline RevuzMeasure generate_random_measure(int n, Splitmix64& rng) {
    Vector w(n);
    for (int i = 0; i < n; ++i) w[i] = rng.uniform(0.0, 1.0);
    return RevuzMeasure(w);
}

inline CafProductSpec generate_random_spec(int n, int k, Splitmix64& rng) {
    CafProductSpec spec;
    for (int j = 0; j < k; ++j)
        spec.measures.push_back(generate_random_measure(n, rng));
    return spec;
}

// Random admissible jump intensity: symmetrization makes the marginals match
// for any m, and the positive diagonal keeps c strictly positive.
inline Matrix generate_random_jump_intensity(int n, Splitmix64& rng,
                                             double density = 0.7) {
    Matrix j = Matrix::Zero(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            if (rng.uniform() < density) j(a, b) = rng.uniform(0.0, 1.0);
    j = Matrix(0.5 * (j + j.transpose().eval()));
    j.diagonal().array() += 0.05;
    return j;
}

// Random exponent pair satisfying the relative bound |kappa| <= C |psi| by
// construction (both are strictly positive walk-type exponents).
inline LevyTorusModel generate_random_levy_model(int d, int n,
                                                std::uint64_t seed) {
    Splitmix64 rng(seed, 0x1e57u);
    const double mass_psi = rng.uniform(0.5, 2.0);
    const double mass_kappa = rng.uniform(0.3, 1.5);
    VectorC psi = killed_walk_exponent(d, n, mass_psi);
    VectorC kappa;
    if (rng.uniform() < 0.5) {
        kappa = killed_walk_exponent(d, n, mass_kappa);
    } else {
        kappa = relativistic_exponent(d, n, mass_kappa, rng.uniform(1.0, 1.8));
    }
    kappa *= rng.uniform(0.2, 1.0);
    return LevyTorusModel(d, n, std::move(psi), std::move(kappa));
}

}  // namespace loopm
