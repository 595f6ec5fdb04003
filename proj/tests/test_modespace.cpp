#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "jmlab/modespace.hpp"

#include <cmath>
#include <random>

using namespace jmlab;

namespace {

CMat random_matrix(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    CMat m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = cplx(g(rng), g(rng));
    return m;
}

CVec random_vector(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    CVec v(n);
    for (int i = 0; i < n; ++i) v(i) = cplx(g(rng), g(rng));
    return v.normalized();
}

double moment(const CVec& v, const CMat& op) { return v.dot(op * v).real(); }

} // namespace

TEST_CASE("truncated commutator is i hbar except at the last level") {
    for (int d : {2, 5, 17}) {
        const double hbar = 0.7;
        const ModeSpace m = make_mode(d, hbar);
        const CMat c = m.x_op * m.p_op - m.p_op * m.x_op;
        // [x, p] = i hbar [a, a^dag] = i hbar diag(1, ..., 1, 1 - d)
        CMat expect = CMat::Zero(d, d);
        for (int i = 0; i + 1 < d; ++i) expect(i, i) = cplx(0, hbar);
        expect(d - 1, d - 1) = cplx(0, hbar * (1 - d));
        CHECK((c - expect).norm() < 1e-12);
        CHECK(hermiticity_defect(m.x_op) == 0.0);
        CHECK(hermiticity_defect(m.p_op) < 1e-15);
    }
}

TEST_CASE("apply_local matches the Kronecker product layout") {
    std::mt19937_64 rng(3);
    const std::vector<int> dims = {3, 4, 2};
    const CMat op = random_matrix(4, rng);
    CVec psi = random_vector(24, rng);
    const CVec expect = kron(CMat::Identity(3, 3), kron(op, CMat::Identity(2, 2))) * psi;
    apply_local(psi, dims, 1, op);
    CHECK((psi - expect).norm() < 1e-12);
}

TEST_CASE("apply_pair on non-adjacent factors") {
    std::mt19937_64 rng(4);
    const std::vector<int> dims = {3, 2, 4};
    const CMat a = random_matrix(3, rng), b = random_matrix(4, rng);
    CVec psi = random_vector(24, rng);
    const CVec expect = kron(a, kron(CMat::Identity(2, 2), b)) * psi;
    apply_pair(psi, dims, 0, 2, kron(a, b));
    CHECK((psi - expect).norm() < 1e-12);
}

TEST_CASE("block application of a passive two-mode gate equals the dense one") {
    const int d = 6;
    const ModeSpace m = make_mode(d);
    const CMat a = lowering(d), id = CMat::Identity(d, d);
    // beam splitter generator a^dag b + b^dag a conserves the total number
    const CMat h = kron(a.adjoint(), a) + kron(a, a.adjoint());
    const CMat u = evolve_unitary(h, 0.4, m.hbar);
    const auto blocks = sparsity_blocks(u);
    CHECK(blocks.size() == size_t(2 * d - 1));
    std::vector<CMat> ops;
    for (const auto& idx : blocks) {
        CMat b(idx.size(), idx.size());
        for (size_t i = 0; i < idx.size(); ++i)
            for (size_t j = 0; j < idx.size(); ++j) b(i, j) = u(idx[i], idx[j]);
        ops.push_back(b);
    }
    std::mt19937_64 rng(5);
    const std::vector<int> dims = {d, 3, d};
    CVec psi = random_vector(d * 3 * d, rng), dense = psi;
    apply_pair(dense, dims, 0, 2, u);
    apply_pair_blocks(psi, dims, 0, 2, blocks, ops);
    CHECK((psi - dense).norm() < 1e-12);
}

TEST_CASE("evolve_unitary against the number-operator phases and a Taylor series") {
    const int d = 7;
    const double hbar = 1.3, t = 0.9;
    const CMat a = lowering(d);
    const CMat u = evolve_unitary(a.adjoint() * a, t, hbar);
    for (int n = 0; n < d; ++n) CHECK(std::abs(u(n, n) - std::exp(cplx(0, -n * t / hbar))) < 1e-12);

    std::mt19937_64 rng(6);
    CMat h = random_matrix(5, rng);
    h = (0.05 * (h + h.adjoint())).eval();
    const CMat v = evolve_unitary(h, 1.0, 1.0);
    CMat series = CMat::Identity(5, 5), term = CMat::Identity(5, 5);
    for (int k = 1; k < 30; ++k) {
        term = (term * (cplx(0, -1) * h) / double(k)).eval();
        series += term;
    }
    CHECK((v - series).norm() < 1e-12);
    CHECK((v * v.adjoint() - CMat::Identity(5, 5)).norm() < 1e-12);
}

TEST_CASE("coherent and squeezed states have the requested moments") {
    const int d = 60;
    const double hbar = 1.0;
    const ModeSpace m = make_mode(d, hbar);
    const CVec c = coherent_state(d, hbar, 1.0, -0.5);
    CHECK(std::abs(c.norm() - 1.0) < 1e-12);
    CHECK(std::abs(moment(c, m.x_op) - 1.0) < 1e-10);
    CHECK(std::abs(moment(c, m.p_op) + 0.5) < 1e-10);
    CHECK(std::abs(moment(c, m.x_op * m.x_op) - 1.0 - hbar / 2) < 1e-10);

    const CVec s = squeezed_vacuum(d, hbar, 0.2);
    CHECK(std::abs(moment(s, m.x_op * m.x_op) - 0.2) < 1e-10);
    CHECK(std::abs(moment(s, m.p_op * m.p_op) - hbar * hbar / (4 * 0.2)) < 1e-10);

    const CVec g = gaussian_pure_state(d, hbar, 0.3, 0.4, 1.5);
    const double mx = moment(g, m.x_op), mp = moment(g, m.p_op);
    CHECK(std::abs(mx - 0.3) < 1e-10);
    CHECK(std::abs(mp - 0.4) < 1e-10);
    CHECK(std::abs(moment(g, m.x_op * m.x_op) - mx * mx - 1.5) < 1e-10);
    CHECK(std::abs(moment(g, m.p_op * m.p_op) - mp * mp - hbar * hbar / 6.0) < 1e-10);
}

TEST_CASE("displacing the vacuum gives the coherent state") {
    const int d = 50;
    const ModeSpace m = make_mode(d);
    const CVec vac = fock_state(d, 0);
    const CVec dv = displacement_local(m, 0.8, -0.6) * vac;
    const CVec c = coherent_state(d, 1.0, 0.8, -0.6);
    CHECK(std::abs(std::abs(c.dot(dv)) - 1.0) < 1e-10);
}

TEST_CASE("composite spaces and operator algebra") {
    const SpacePtr sp = make_space({3, 2}, {Role::system, Role::pointer_x});
    CHECK(sp->total_dim() == 6);
    CHECK(sp->factor_of(Role::pointer_x) == 1);
    CHECK(sp->factor_of(Role::pointer_p) == -1);
    const OperatorMatrix x = embed(sp->factors[0].x_op, 0, sp);
    const OperatorMatrix mu = embed(sp->factors[1].x_op, 1, sp);
    // different factors commute exactly
    CHECK(commutator(x, mu).entries.norm() == 0.0);
    const StateVector s = product_state(sp, {fock_state(3, 1), fock_state(2, 0)});
    const OperatorMatrix n = x * x;
    CHECK(std::abs(expectation(n, s) - cplx(1.5, 0)) < 1e-12);

    const SpacePtr other = make_space({2, 3}, {Role::system, Role::pointer_x});
    CHECK_THROWS_AS(x * embed(other->factors[0].x_op, 0, other), SpaceMismatch);
}
