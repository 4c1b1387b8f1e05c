#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "loopm/chain.hpp"
#include "loopm/generator.hpp"
#include "loopm/moments.hpp"
#include "loopm/rng.hpp"

using namespace loopm;

namespace {

Matrix mat1(double v) {
    Matrix q(1, 1);
    q(0, 0) = v;
    return q;
}

Vector vec1(double v) {
    Vector out(1);
    out[0] = v;
    return out;
}

CafProductSpec spec_of(std::initializer_list<Vector> ws) {
    CafProductSpec spec;
    for (const auto& w : ws) spec.measures.emplace_back(w);
    return spec;
}

// naive k-nested tuple sum: sum over y_1..y_k of u(y1,y2)...u(yk,y1) prod nu_j
double brute_cyclic(const Matrix& u, const std::vector<Vector>& nus) {
    const int n = static_cast<int>(u.rows());
    const int k = static_cast<int>(nus.size());
    std::vector<int> idx(k, 0);
    double total = 0.0;
    for (;;) {
        double term = 1.0;
        for (int j = 0; j < k; ++j) {
            term *= nus[j][idx[j]];
            term *= u(idx[j], idx[(j + 1) % k]);
        }
        total += term;
        int pos = k - 1;
        while (pos >= 0 && ++idx[pos] == n) idx[pos--] = 0;
        if (pos < 0) break;
    }
    return total;
}

// brute-force bridge moment: k cyclic shifts of the chain x -> y_1 ... y_k -> y
double brute_bridge(const Matrix& u, int x, int y,
                    const std::vector<Vector>& nus) {
    const int n = static_cast<int>(u.rows());
    const int k = static_cast<int>(nus.size());
    double total = 0.0;
    for (int shift = 0; shift < k; ++shift) {
        std::vector<int> idx(k, 0);
        for (;;) {
            double term = u(x, idx[0]);
            for (int j = 0; j < k; ++j) {
                term *= nus[(j + shift) % k][idx[j]];
                term *= (j + 1 < k) ? u(idx[j], idx[j + 1]) : u(idx[j], y);
            }
            total += term;
            int pos = k - 1;
            while (pos >= 0 && ++idx[pos] == n) idx[pos--] = 0;
            if (pos < 0) break;
        }
    }
    return total;
}

}  // namespace

TEST_CASE("cyclic class enumeration") {
    const CyclicClass perms = enumerate_cyclic(CyclicKind::PERMUTATIONS_ON_CIRCLE, 3);
    REQUIRE(perms.members.size() == 2);
    CHECK(perms.members[0] == std::vector<int>{0, 1, 2});
    CHECK(perms.members[1] == std::vector<int>{0, 2, 1});

    CHECK(enumerate_cyclic(CyclicKind::CYCLIC_TRANSLATIONS, 3).members.size() == 3);
    CHECK(enumerate_cyclic(CyclicKind::PERMUTATIONS_ON_CIRCLE, 1).members.size() == 1);
    CHECK(enumerate_cyclic(CyclicKind::PERMUTATIONS_ON_CIRCLE, 5).members.size() == 24);
    CHECK_THROWS_AS(enumerate_cyclic(CyclicKind::PERMUTATIONS_ON_CIRCLE, 9),
                    KTooLarge);
}

TEST_CASE("caf moment closed forms") {
    const TransientChain one(mat1(-2.0), Vector::Ones(1));
    const GreenKernel g = green_kernel(one);
    CHECK(caf_moment(g, spec_of({vec1(3.0), vec1(4.0)})) ==
          Catch::Approx(3.0).epsilon(1e-13));
    CHECK(caf_moment(g, spec_of({vec1(3.0)})) ==
          Catch::Approx(1.5).epsilon(1e-13));
    CHECK_THROWS_AS(caf_moment(g, CafProductSpec{}), ConfigInvalid);
}

TEST_CASE("caf and bridge moments match brute force") {
    const TransientChain chain = generate_random_chain({.n = 6}, 77);
    const GreenKernel g = green_kernel(chain);
    Splitmix64 rng(77, 1);
    for (int k = 1; k <= 3; ++k) {
        const CafProductSpec spec = generate_random_spec(6, k, rng);
        const double fast = caf_moment(g, spec);
        const double slow = brute_cyclic(g.u, spec.weight_list());
        CHECK(fast == Catch::Approx(slow).epsilon(1e-12));

        const Matrix bridge = bridge_moment_matrix<double>(g.u, spec);
        for (int x = 0; x < 6; ++x)
            for (int y = 0; y < 6; ++y)
                CHECK(bridge(x, y) ==
                      Catch::Approx(brute_bridge(g.u, x, y, spec.weight_list()))
                          .epsilon(1e-11));
    }
}

TEST_CASE("bridge moment closed forms") {
    const TransientChain one(mat1(-2.0), Vector::Ones(1));
    const GreenKernel g1 = green_kernel(one);
    CHECK(bridge_moment(g1, 0, 0, spec_of({vec1(3.0)})) ==
          Catch::Approx(0.75).epsilon(1e-13));

    const TransientChain decoupled(-Matrix::Identity(2, 2), Vector::Ones(2));
    Vector delta0(2);
    delta0 << 1.0, 0.0;
    CHECK(bridge_moment(green_kernel(decoupled), 0, 1, spec_of({delta0})) ==
          Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("phi moment") {
    const TransientChain one(mat1(-2.0), Vector::Ones(1));
    const GreenKernel g = green_kernel(one);
    // k=3, all densities 1: (k-1)! = 2 identical terms of u^3
    CHECK(phi_moment(g, {vec1(1.0), vec1(1.0), vec1(1.0)}) ==
          Catch::Approx(0.25).epsilon(1e-13));
    CHECK_THROWS_AS(phi_moment(g, {vec1(1.0)}), ConfigInvalid);

    // k=2 equals the caf moment of nu_j = f_j m
    const TransientChain chain = generate_random_chain({.n = 5}, 31);
    const GreenKernel gc = green_kernel(chain);
    Splitmix64 rng(31, 4);
    Vector f1(5), f2(5);
    for (int i = 0; i < 5; ++i) {
        f1[i] = rng.uniform(0.0, 1.0);
        f2[i] = rng.uniform(0.0, 1.0);
    }
    const CafProductSpec spec =
        spec_of({f1.cwiseProduct(chain.reference()),
                 f2.cwiseProduct(chain.reference())});
    CHECK(phi_moment(gc, {f1, f2}) ==
          Catch::Approx(caf_moment(gc, spec)).epsilon(1e-12));
}

TEST_CASE("phi moment equals the full-permutation sum over the class size") {
    const TransientChain chain = generate_random_chain({.n = 5}, 13);
    const GreenKernel g = green_kernel(chain);
    Splitmix64 rng(13, 8);
    const int k = 4;
    std::vector<Vector> fs;
    std::vector<Vector> nus;
    for (int j = 0; j < k; ++j) {
        Vector f(5);
        for (int i = 0; i < 5; ++i) f[i] = rng.uniform(0.0, 1.0);
        fs.push_back(f);
        nus.push_back(f.cwiseProduct(chain.reference()));
    }
    // all 24 orderings, then divide by the cyclic class size k
    std::vector<int> perm{0, 1, 2, 3};
    double full = 0.0;
    do {
        std::vector<Vector> ordered;
        for (int p : perm) ordered.push_back(nus[p]);
        full += cyclic_product<double>(g.u, ordered);
    } while (std::next_permutation(perm.begin(), perm.end()));
    CHECK(phi_moment(g, fs) == Catch::Approx(full / k).epsilon(1e-12));
}

TEST_CASE("cyclic invariance of the caf moment") {
    const TransientChain chain = generate_random_chain({.n = 6}, 3);
    const GreenKernel g = green_kernel(chain);
    Splitmix64 rng(3, 6);
    for (int k = 2; k <= 4; ++k) {
        const CafProductSpec spec = generate_random_spec(6, k, rng);
        CafProductSpec rotated;
        for (int j = 0; j < k; ++j)
            rotated.measures.push_back(spec.measures[(j + 1) % k]);
        const double a = caf_moment(g, spec);
        const double b = caf_moment(g, rotated);
        CHECK(std::abs(a - b) / std::max(std::abs(a), 1e-300) <= 1e-12);
    }

    // phi moment is invariant under arbitrary reordering
    std::vector<Vector> fs;
    for (int j = 0; j < 3; ++j) {
        Vector f(6);
        for (int i = 0; i < 6; ++i) f[i] = rng.uniform(0.0, 1.0);
        fs.push_back(f);
    }
    const double base = phi_moment(g, fs);
    std::swap(fs[0], fs[2]);
    CHECK(std::abs(phi_moment(g, fs) - base) / std::abs(base) <= 1e-12);
}

TEST_CASE("insertion identity") {
    const TransientChain one(mat1(-2.0), Vector::Ones(1));
    const GreenKernel g1 = green_kernel(one);
    const InsertionReport trivial =
        insertion_identity_check(g1, spec_of({vec1(3.0)}), RevuzMeasure(vec1(2.0)));
    CHECK(trivial.insertion_sum == Catch::Approx(1.5).epsilon(1e-13));
    CHECK(trivial.bridge_integral == Catch::Approx(1.5).epsilon(1e-13));

    const InsertionReport zero =
        insertion_identity_check(g1, spec_of({vec1(3.0)}), RevuzMeasure(vec1(0.0)));
    CHECK(zero.insertion_sum == 0.0);
    CHECK(zero.bridge_integral == 0.0);

    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const TransientChain chain = generate_random_chain({.n = 6}, seed);
        const GreenKernel g = green_kernel(chain);
        Splitmix64 rng(seed, 12);
        for (int k = 1; k <= 3; ++k) {
            const CafProductSpec spec = generate_random_spec(6, k, rng);
            const RevuzMeasure nu = generate_random_measure(6, rng);
            CHECK(insertion_identity_check(g, spec, nu).rel_error <= 1e-10);
        }
    }
}
