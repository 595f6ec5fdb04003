#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "jmlab/errlab.hpp"

#include <cmath>
#include <random>

using namespace jmlab;

TEST_CASE("Arthurs-Kelly error forms and maximal rms values") {
    for (double s : {0.25, 1.0, 2.0, 4.0}) {
        const MeasurementModel m = arthurs_kelly(1.0, s);
        const ErrorForms f = error_forms(m);
        // e_Xi = muX + piP/2
        RVec expect = RVec::Zero(6);
        expect(2) = 1.0;
        expect(5) = 0.5;
        CHECK((f[ErrorKind::eps_xi].linear - expect).norm() < 1e-12);
        // <e_Xi^2> = s hbar/2, <e_Pi^2> = hbar/(2s)
        CHECK(gaussian_maximal_rms(m, ErrorKind::eps_xi).value == doctest::Approx(std::sqrt(s / 2)).epsilon(1e-13));
        CHECK(gaussian_maximal_rms(m, ErrorKind::eps_pi).value == doctest::Approx(std::sqrt(1 / (2 * s))).epsilon(1e-13));
        // disturbance d_X = piP, d_P = -piX
        CHECK(gaussian_maximal_rms(m, ErrorKind::del_x).value == doctest::Approx(std::sqrt(s)).epsilon(1e-13));
        CHECK(gaussian_maximal_rms(m, ErrorKind::del_p).value == doctest::Approx(std::sqrt(1 / s)).epsilon(1e-13));
        for (double d : unbiasedness_defect(m, Backend::gaussian)) CHECK(d < 1e-14);
    }
}

TEST_CASE("swap model: e_Xi vanishes and e_Pi is unbounded") {
    const MeasurementModel m = swap_rotation_model();
    const RmsValue xi = gaussian_maximal_rms(m, ErrorKind::eps_xi);
    CHECK(xi.value == 0.0);
    CHECK_FALSE(xi.infinite);
    const RmsValue pi = gaussian_maximal_rms(m, ErrorKind::eps_pi);
    CHECK(pi.infinite);
    CHECK(std::isinf(pi.value));
}

TEST_CASE("offset bias shows up as a defect") {
    const MeasurementModel m = biased_variant(arthurs_kelly(1.0, 1.0), {1.0, 0.5, 1.0, -0.3});
    const auto d = unbiasedness_defect(m, Backend::gaussian);
    CHECK(d[0] == doctest::Approx(0.5));
    CHECK(d[1] == doctest::Approx(0.3));
    // 24 levels still leave about 1e-4 of truncation error here
    const auto df = unbiasedness_defect(m, Backend::fock, FockSettings{});
    CHECK(df[0] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(df[1] == doctest::Approx(0.3).epsilon(1e-6));
}

TEST_CASE("fast Fock moments equal the dense partial expectations") {
    const MeasurementModel m = biased_variant(arthurs_kelly(1.0, 1.5), {1.0, 0.2, 1.0, 0.0});
    const FockRealization f = realize(m, 5);
    const ErrorOperators e = error_operators(f);
    const SystemMoments s = fock_moments(f, 5);
    for (ErrorKind a : {ErrorKind::eps_xi, ErrorKind::eps_pf, ErrorKind::del_p}) {
        const CMat first = partial_expectation(e[a], f);
        CHECK((first - s.first[index_of(a)]).norm() < 1e-10);
        const CMat second = partial_expectation(e[a] * e[a], f);
        CHECK((second - s.second(a)).norm() < 1e-10);
    }
}

TEST_CASE("Gaussian moments reproduce the state-independent AK second moment") {
    const MeasurementModel m = arthurs_kelly(1.0, 2.0);
    const SystemMoments g = gaussian_moments(m, 8);
    CHECK((g.second(ErrorKind::eps_xi) - CMat::Identity(8, 8)).norm() < 1e-12);
}

TEST_CASE("refinement growth detection") {
    CHECK(rms_from_refinement({1.0, 2.0, 3.0}).infinite);
    CHECK_FALSE(rms_from_refinement({1.0, 1.0, 1.0}).infinite);
    CHECK_FALSE(rms_from_refinement({1.0, 1.01, 1.02}).infinite);
    const std::vector<int> r = refinement_probes(6);
    CHECK(r.front() == 6);
    CHECK(r.back() > r[1]);
}

TEST_CASE("constrained supremum of <x^2> over a box") {
    // sup = (|x0| + L/2)^2 + sigma^2 at a minimum-uncertainty state on the edge
    const double hbar = 1.0;
    const RangeBox box{0.5, 0.0, 2.0, 2.0, 1.0, 1.0};
    const int n = probe_for_box(box, hbar);
    const ModeSpace mode = make_mode(n + 2, hbar);
    const CMat a = (mode.x_op * mode.x_op).topLeftCorner(n, n);
    OptimizerSettings opt;
    const ConstrainedValue v = constrained_supremum(a, box, hbar, opt);
    CHECK(v.feasible);
    CHECK(v.lower_bound);
    CHECK(v.max_violation <= opt.feasibility_tolerance);
    CHECK(v.value == doctest::Approx(std::sqrt(1.5 * 1.5 + 1.0)).epsilon(1e-6));

    // same seed, same answer
    const ConstrainedValue again = constrained_supremum(a, box, hbar, opt);
    CHECK(again.value == v.value);
    CHECK(again.best_start == v.best_start);
}

TEST_CASE("range box validation") {
    CHECK_THROWS_AS(validate(RangeBox{0, 0, 1, 1, 0.1, 0.1}, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(validate(RangeBox{0, 0, -1, 1, 1, 1}, 1.0), std::invalid_argument);
    CHECK_NOTHROW(validate(RangeBox{0, 0, 1, 1, 1, 0.5}, 1.0));
    CHECK(contains(RangeBox{0, 0, 4, 4, 1, 1}, RangeBox{0.5, 0, 2, 2, 1, 1}));
    CHECK_FALSE(contains(RangeBox{0, 0, 4, 4, 1, 1}, RangeBox{1.5, 0, 2, 2, 1, 1}));
}

TEST_CASE("pointer joint distribution, Gaussian and Fock routes") {
    const MeasurementModel m = arthurs_kelly(1.0, 1.0);
    const GaussianState sys = single_mode_state(1.0, 1.0, 0.0, 0.5);
    PointerGrid grid;
    const PointerDistribution g = pointer_joint_distribution(m, sys, grid);
    // var muXf = s/4 + 1/2 + s/4 = 1 at s = 1
    CHECK(g.mean(0) == doctest::Approx(1.0));
    CHECK(g.mean(1) == doctest::Approx(0.0));
    CHECK(g.cov(0, 0) == doctest::Approx(1.0));
    CHECK(g.mass == doctest::Approx(1.0).epsilon(1e-3));

    const FockRealization f = realize(m, 24);
    const PointerDistribution d = pointer_joint_distribution(f, coherent_state(24, 1.0, 1.0, 0.0), grid);
    CHECK(d.mass == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(d.mean(0) == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(d.cov(0, 0) == doctest::Approx(1.0).epsilon(1e-2));
}
