#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "jmlab/gaussian.hpp"

#include <cmath>
#include <random>

using namespace jmlab;

TEST_CASE("harmonic evolution is a phase-space rotation") {
    // H = (x^2 + p^2)/2 gives x(t) = x cos t + p sin t, p(t) = -x sin t + p cos t
    const double t = 0.7;
    const SymplecticModel m = symplectic_from_quadratic(RMat::Identity(2, 2), t);
    RMat expect(2, 2);
    expect << std::cos(t), std::sin(t), -std::sin(t), std::cos(t);
    CHECK((m.S - expect).norm() < 1e-12);
    CHECK(m.shift.norm() == 0.0);

    const SymplecticModel two = compose(symplectic_from_quadratic(RMat::Identity(2, 2), 0.4), m);
    RMat r(2, 2);
    r << std::cos(1.1), std::sin(1.1), -std::sin(1.1), std::cos(1.1);
    CHECK((two.S - r).norm() < 1e-12);
}

TEST_CASE("random quadratic generators give symplectic maps") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 5; ++trial) {
        RMat a(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) a(i, j) = g(rng);
        const RMat sym = 0.5 * (a + a.transpose());
        const SymplecticModel m = symplectic_from_quadratic(sym, 0.8);
        CHECK(symplectic_defect(m.S) < 1e-10);
    }
}

TEST_CASE("linear drive shifts the conjugate quadrature") {
    // H = f p: dx/dt = f
    RVec d(2);
    d << 0.0, 0.3;
    const SymplecticModel m = affine_from_quadratic(RMat::Zero(2, 2), d, 2.0);
    CHECK((m.S - RMat::Identity(2, 2)).norm() < 1e-12);
    CHECK(std::abs(m.shift(0) - 0.6) < 1e-12);
    CHECK(std::abs(m.shift(1)) < 1e-12);
}

TEST_CASE("vacuum moments and physicality") {
    const double hbar = 2.0;
    const GaussianState v = vacuum_state(1, hbar);
    const QuadForm x = quadrature(1, 0, false), p = quadrature(1, 0, true);
    CHECK(second_moment(x, v) == doctest::Approx(hbar / 2).epsilon(1e-14));
    const cplx xp = product_moment(x, p, v);
    CHECK(std::abs(xp - cplx(0, hbar / 2)) < 1e-14);
    CHECK(std::abs(physicality_margin(v.cov, hbar)) < 1e-12);
    RMat thermal = hbar * RMat::Identity(2, 2);
    CHECK(physicality_margin(thermal, hbar) == doctest::Approx(hbar / 2));
    RMat bad = 0.1 * RMat::Identity(2, 2);
    CHECK(physicality_margin(bad, hbar) < 0);
}

TEST_CASE("pushing a displaced squeezed state through a rotation") {
    const GaussianState g = single_mode_state(1.0, 1.0, 0.0, 2.0);
    const SymplecticModel quarter = symplectic_from_quadratic(RMat::Identity(2, 2), M_PI / 2);
    const GaussianState out = push_state(quarter, g);
    // a quarter turn exchanges the quadratures: x -> p, p -> -x
    CHECK(std::abs(out.mean(0)) < 1e-12);
    CHECK(std::abs(out.mean(1) + 1.0) < 1e-12);
    CHECK(std::abs(out.cov(0, 0) - 0.125) < 1e-12);
    CHECK(std::abs(out.cov(1, 1) - 2.0) < 1e-12);
}

TEST_CASE("direct sums and lifted couplings") {
    const GaussianState a = single_mode_state(1.0, 0.5, -0.5, 0.5);
    const GaussianState b = vacuum_state(2);
    const GaussianState s = direct_sum(a, b);
    CHECK(s.modes == 3);
    CHECK(s.mean(0) == 0.5);
    CHECK(s.cov(4, 4) == 0.5);
    CHECK(s.cov(0, 2) == 0.0);

    RMat local = RMat::Zero(4, 4);
    local(0, 3) = local(3, 0) = 1.0;
    const RMat lifted = lift_coupling(local, {0, 2}, 3);
    CHECK(lifted(0, 5) == 1.0);
    CHECK(lifted(5, 0) == 1.0);
    CHECK(lifted.sum() == 2.0);
}

TEST_CASE("first and second moments of a linear observable") {
    GaussianState g = single_mode_state(1.0, 2.0, 1.0, 0.5);
    QuadForm q;
    q.linear = RVec::Zero(2);
    q.linear << 1.0, -1.0;
    q.constant = 0.5;
    // <x - p + 1/2> = 1.5, variance 0.5 + 0.5
    CHECK(first_moment(q, g) == doctest::Approx(1.5));
    CHECK(second_moment(q, g) == doctest::Approx(1.5 * 1.5 + 1.0));
}
