#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "loopm/chain.hpp"
#include "loopm/generator.hpp"
#include "loopm/quadrature.hpp"
#include "loopm/rng.hpp"

using namespace loopm;

namespace {

Matrix mat1(double v) {
    Matrix q(1, 1);
    q(0, 0) = v;
    return q;
}

Matrix mat2(double a, double b, double c, double d) {
    Matrix q(2, 2);
    q << a, b, c, d;
    return q;
}

}  // namespace

TEST_CASE("chain validation") {
    const TransientChain one(mat1(-2.0), Vector::Ones(1));
    CHECK(one.spectral_abscissa() == Catch::Approx(-2.0).margin(1e-14));
    CHECK(one.killing()[0] == Catch::Approx(2.0));

    CHECK_NOTHROW(TransientChain(mat2(-3, 1, 2, -4), Vector::Ones(2)));
    CHECK_THROWS_AS(TransientChain(Matrix::Zero(2, 2), Vector::Ones(2)),
                    NonTransient);
    CHECK_THROWS_AS(TransientChain(mat2(-3, -1, 2, -4), Vector::Ones(2)),
                    NegativeOffDiagonal);
    CHECK_THROWS_AS(TransientChain(mat2(-3, 4, 2, -4), Vector::Ones(2)),
                    NonTransient);
    Vector bad_m(2);
    bad_m << 1.0, 0.0;
    CHECK_THROWS_AS(TransientChain(mat2(-3, 1, 2, -4), bad_m), NonPositiveReference);
    CHECK_THROWS_AS(TransientChain(mat2(-3, 1, 2, -4), Vector::Ones(3)),
                    ConfigInvalid);
}

TEST_CASE("transition density") {
    const TransientChain one(mat1(-2.0), Vector::Ones(1));
    CHECK(transition_density(one, 1.0)(0, 0) ==
          Catch::Approx(std::exp(-2.0)).epsilon(1e-12));

    Vector m(2);
    m << 1.0, 3.0;
    const TransientChain two(mat2(-3, 1, 2, -4), m);
    const Matrix p0 = transition_density(two, 0.0);
    CHECK(p0(0, 0) == Catch::Approx(1.0));
    CHECK(p0(1, 1) == Catch::Approx(1.0 / 3.0));
    CHECK(p0(0, 1) == Catch::Approx(0.0).margin(1e-15));
    CHECK_THROWS_AS(transition_density(two, -0.5), ConfigInvalid);
}

TEST_CASE("matrix exponential vs eigendecomposition oracle") {
    const Matrix q = mat2(-3, 1, 2, -4);
    const double t = 0.7;
    Eigen::EigenSolver<Matrix> es(q);
    const Matrix oracle = (es.eigenvectors() *
                           (t * es.eigenvalues().array()).exp().matrix().asDiagonal() *
                           es.eigenvectors().inverse())
                              .real();
    const Matrix e = matrix_exponential(t * q);
    CHECK((e - oracle).cwiseAbs().maxCoeff() / oracle.cwiseAbs().maxCoeff() <=
          1e-12);
}

TEST_CASE("semigroup property on random chains") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const TransientChain chain = generate_random_chain({.n = 6}, seed);
        Splitmix64 rng(seed, 17);
        const double t = rng.uniform(0.0, 5.0);
        const double s = rng.uniform(0.0, 5.0);
        const Matrix lhs = transition_density(chain, t + s);
        const Matrix rhs = transition_density(chain, t) *
                           chain.reference().asDiagonal() *
                           transition_density(chain, s);
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("green kernel closed forms") {
    const TransientChain one(mat1(-2.0), Vector::Ones(1));
    CHECK(green_kernel(one).u(0, 0) == Catch::Approx(0.5).epsilon(1e-13));

    const TransientChain decoupled(-Matrix::Identity(2, 2), Vector::Ones(2));
    const Matrix u = green_kernel(decoupled).u;
    CHECK((u - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("green kernel vs time quadrature of the semigroup") {
    const TransientChain chain = generate_random_chain({.n = 8}, 42);
    const Matrix u = green_kernel(chain).u;
    // integrate exp(tQ) out to where the tail is ~e^{-45}
    const double horizon = 45.0 / (-chain.spectral_abscissa());
    const Matrix integral = adaptive_simpson(
        [&](double t) -> Matrix { return matrix_exponential(t * chain.rates()); },
        0.0, horizon, 1e-12);
    const Matrix quad_u =
        integral * chain.reference().cwiseInverse().asDiagonal();
    CHECK((u - quad_u).cwiseAbs().maxCoeff() / u.cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("dual chain") {
    const TransientChain counting(mat2(-3, 1, 2, -4), Vector::Ones(2));
    const TransientChain dual = dual_chain(counting);
    CHECK((dual.rates() - counting.rates().transpose()).cwiseAbs().maxCoeff() <=
          1e-14);

    const TransientChain sym(mat2(-3, 1, 1, -4), Vector::Ones(2));
    CHECK((dual_chain(sym).rates() - sym.rates()).cwiseAbs().maxCoeff() <= 1e-14);

    Vector m(2);
    m << 1.0, 2.0;
    CHECK_THROWS_AS(dual_chain(TransientChain(mat2(-3, 1, 2, -4), m)),
                    NotDualAdmissible);
}

TEST_CASE("dual transition densities transpose") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const TransientChain chain =
            generate_random_chain({.n = 5, .dual_admissible = true}, seed);
        const TransientChain dual = dual_chain(chain);
        Splitmix64 rng(seed, 3);
        for (int rep = 0; rep < 5; ++rep) {
            const double t = rng.uniform(0.1, 3.0);
            const Matrix fwd = transition_density(chain, t);
            const Matrix bwd = transition_density(dual, t);
            CHECK((bwd - fwd.transpose()).cwiseAbs().maxCoeff() <= 1e-10);
        }
    }
}

TEST_CASE("sqrt kernel closed forms") {
    const TransientChain four(mat1(-4.0), Vector::Ones(1));
    const SqrtKernel sk4 = sqrt_kernel(four);
    CHECK(sk4.w(0, 0) == Catch::Approx(0.5).epsilon(1e-13));
    CHECK(sk4.w(0, 0) * sk4.w(0, 0) ==
          Catch::Approx(green_kernel(four).u(0, 0)).epsilon(1e-12));

    // one state, killing 2: w = 1/sqrt(2), which is also the half-integral
    // of the semigroup, integral of e^{-2s}/sqrt(pi s) ds = 1/sqrt(2)
    const TransientChain two(mat1(-2.0), Vector::Ones(1));
    CHECK(sqrt_kernel(two).w(0, 0) ==
          Catch::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-13));

    CHECK_THROWS_AS(sqrt_kernel(TransientChain(mat2(-3, 1, 2, -4), Vector::Ones(2))),
                    NotSymmetric);
}

TEST_CASE("sqrt kernel squares to the green kernel") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const TransientChain chain =
            generate_random_chain({.n = 6, .symmetric = true}, seed);
        REQUIRE(chain.is_m_symmetric());
        const SqrtKernel sk = sqrt_kernel(chain);
        const Matrix u = green_kernel(chain).u;
        const Matrix resid =
            sk.w * Matrix(chain.reference().asDiagonal()) * sk.w - u;
        CHECK(resid.cwiseAbs().maxCoeff() / u.cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("time change identity") {
    const TransientChain one(mat1(-2.0), Vector::Ones(1));
    Vector a1(1);
    a1 << 2.0;
    const TimeChangeReport rep = time_change_check(one, a1);
    CHECK(rep.u_y(0, 0) == Catch::Approx(0.25).epsilon(1e-13));
    CHECK(rep.densities_wrt_m);

    const TransientChain chain = generate_random_chain({.n = 5}, 9);
    CHECK(time_change_check(chain, Vector::Ones(5)).max_rel_error <= 1e-13);

    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const TransientChain c = generate_random_chain({.n = 5}, seed);
        Splitmix64 rng(seed, 5);
        Vector a(5);
        for (int i = 0; i < 5; ++i) a[i] = rng.uniform(0.5, 2.0);
        CHECK(time_change_check(c, a).max_rel_error <= 1e-10);
    }

    Vector bad(5);
    bad << 1, 1, 0, 1, 1;
    CHECK_THROWS_AS(time_change_check(chain, bad), NonPositiveA);
}

TEST_CASE("generator determinism and audit") {
    const TransientChain a = generate_random_chain({.n = 8}, 123);
    const TransientChain b = generate_random_chain({.n = 8}, 123);
    CHECK((a.rates() - b.rates()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.reference() - b.reference()).cwiseAbs().maxCoeff() == 0.0);

    const TransientChain single = generate_random_chain({.n = 1}, 7);
    CHECK(single.size() == 1);
    CHECK(single.killing()[0] > 0.0);

    for (std::uint64_t seed = 0; seed < 100; ++seed)
        CHECK_NOTHROW(generate_random_chain({.n = 8}, seed));
}
