#include "jmlab/errlab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace jmlab {

std::string short_name(ErrorKind k) {
    switch (k) {
    case ErrorKind::eps_xi: return "ei_x";
    case ErrorKind::eps_pi: return "ei_p";
    case ErrorKind::eps_xf: return "ef_x";
    case ErrorKind::eps_pf: return "ef_p";
    case ErrorKind::del_x: return "d_x";
    case ErrorKind::del_p: return "d_p";
    }
    return "?";
}

ErrorKind parse_error_kind(const std::string& s) {
    for (ErrorKind k : kErrorKinds)
        if (short_name(k) == s) return k;
    throw std::invalid_argument("unknown error operator '" + s + "'");
}

OperatorMatrix heisenberg_final(const OperatorMatrix& o, const FockRealization& f) {
    if (!o.space || !same_layout(*o.space, *f.space)) throw SpaceMismatch("operator not on the model space");
    const CMat u = f.dense_unitary();
    return {f.space, u.adjoint() * o.entries * u};
}

ErrorOperators error_operators(const FockRealization& f) {
    const auto& sp = f.space;
    const int px = sp->factor_of(Role::pointer_x), pp = sp->factor_of(Role::pointer_p);
    const CMat u = f.dense_unitary();
    auto fin = [&](const OperatorMatrix& o) { return OperatorMatrix{sp, u.adjoint() * o.entries * u}; };
    const OperatorMatrix x = embed(sp->factors[0].x_op, 0, sp);
    const OperatorMatrix p = embed(sp->factors[0].p_op, 0, sp);
    const OperatorMatrix mx = embed(sp->factors[px].x_op, px, sp);
    const OperatorMatrix mp = embed(sp->factors[pp].x_op, pp, sp);
    const OperatorMatrix xf = fin(x), pf = fin(p), mxf = fin(mx), mpf = fin(mp);
    ErrorOperators e;
    e.ops[index_of(ErrorKind::eps_xi)] = mxf - x;
    e.ops[index_of(ErrorKind::eps_pi)] = mpf - p;
    e.ops[index_of(ErrorKind::eps_xf)] = mxf - xf;
    e.ops[index_of(ErrorKind::eps_pf)] = mpf - pf;
    e.ops[index_of(ErrorKind::del_x)] = xf - x;
    e.ops[index_of(ErrorKind::del_p)] = pf - p;
    return e;
}

CMat partial_expectation(const OperatorMatrix& o, const FockRealization& f) {
    if (!o.space || !same_layout(*o.space, *f.space)) throw SpaceMismatch("operator not on the model space");
    const double defect = hermiticity_defect(o.entries);
    if (defect > 1e-10) throw NotHermitian(defect);
    const int d = f.space->factors[0].dim;
    CMat phi(f.space->total_dim(), d);
    for (int i = 0; i < d; ++i) phi.col(i) = f.with_apparatus(fock_state(d, i));
    CMat a = phi.adjoint() * o.entries * phi;
    return 0.5 * (a + a.adjoint());
}

namespace {

// error images from U|joint>, U x|joint>, U p|joint>
ErrorVectors assemble(const FockRealization& f, CVec u0, const CVec& ux, const CVec& up) {
    const int px = f.space->factor_of(Role::pointer_x), pp = f.space->factor_of(Role::pointer_p);
    CVec mx = u0, mp = u0, xu = u0, pu = u0;
    f.apply_quadrature(mx, px, false);
    f.apply_quadrature(mp, pp, false);
    f.apply_quadrature(xu, 0, false);
    f.apply_quadrature(pu, 0, true);
    ErrorVectors v;
    v.w[index_of(ErrorKind::eps_xi)] = mx - ux;
    v.w[index_of(ErrorKind::eps_pi)] = mp - up;
    v.w[index_of(ErrorKind::eps_xf)] = mx - xu;
    v.w[index_of(ErrorKind::eps_pf)] = mp - pu;
    v.w[index_of(ErrorKind::del_x)] = xu - ux;
    v.w[index_of(ErrorKind::del_p)] = pu - up;
    v.u0 = std::move(u0);
    return v;
}

} // namespace

ErrorVectors error_vectors(const FockRealization& f, const CVec& joint) {
    CVec u0 = joint, ux = joint, up = joint;
    f.apply(u0);
    f.apply_quadrature(ux, 0, false);
    f.apply(ux);
    f.apply_quadrature(up, 0, true);
    f.apply(up);
    return assemble(f, std::move(u0), ux, up);
}

SystemMoments SystemMoments::leading(int p) const {
    if (p > probe) throw DimensionError("requested more levels than were computed");
    SystemMoments s;
    s.probe = p;
    for (int a = 0; a < 6; ++a) {
        s.first[a] = first[a].topLeftCorner(p, p);
        for (int b = 0; b < 6; ++b) s.product[a][b] = product[a][b].topLeftCorner(p, p);
    }
    return s;
}

SystemMoments fock_moments(const FockRealization& f, int probe) {
    const int d0 = f.space->factors[0].dim;
    if (probe < 1 || probe > d0) throw DimensionError("probe exceeds the system truncation");
    const long n = f.space->total_dim();
    // x|i> and p|i> only reach |i +- 1>, so U on levels 0..probe covers everything
    const int levels = std::min(probe + 1, d0);
    CMat img(n, levels);
    for (int i = 0; i < levels; ++i) {
        CVec v = f.with_apparatus(fock_state(d0, i));
        f.apply(v);
        img.col(i) = v;
    }
    const ModeSpace& sys = f.space->factors[0];
    std::array<CMat, 6> w;
    for (auto& m : w) m.resize(n, probe);
    for (int i = 0; i < probe; ++i) {
        CVec ux = CVec::Zero(n), up = CVec::Zero(n);
        for (int k = std::max(0, i - 1); k <= std::min(i + 1, levels - 1); ++k) {
            if (sys.x_op(k, i) != 0.0) ux += sys.x_op(k, i) * img.col(k);
            if (sys.p_op(k, i) != 0.0) up += sys.p_op(k, i) * img.col(k);
        }
        const ErrorVectors ev = assemble(f, img.col(i), ux, up);
        for (int k = 0; k < 6; ++k) w[k].col(i) = ev.w[k];
    }
    SystemMoments s;
    s.probe = probe;
    for (int a = 0; a < 6; ++a) {
        CMat fa = img.leftCols(probe).adjoint() * w[a];
        s.first[a] = 0.5 * (fa + fa.adjoint());
        for (int b = 0; b < 6; ++b) s.product[a][b] = w[a].adjoint() * w[b];
        s.product[a][a] = (0.5 * (s.product[a][a] + s.product[a][a].adjoint())).eval();
    }
    return s;
}

namespace {

// psi_n(q) for n < count, rows indexed by q
RMat hermite_functions(int count, const RVec& q, double hbar) {
    RMat h(q.size(), count);
    const double norm0 = std::pow(std::numbers::pi * hbar, -0.25);
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        const double y = q(i) / std::sqrt(hbar);
        h(i, 0) = norm0 * std::exp(-0.5 * y * y);
        if (count > 1) h(i, 1) = std::sqrt(2.0) * y * h(i, 0);
        for (int n = 1; n + 1 < count; ++n)
            h(i, n + 1) = std::sqrt(2.0 / (n + 1)) * y * h(i, n) - std::sqrt(double(n) / (n + 1)) * h(i, n - 1);
    }
    return h;
}

RVec linspace(double a, double b, int n) { return RVec::LinSpaced(n, a, b); }

void table_moments(PointerDistribution& d) {
    const double hx = d.mux.size() > 1 ? d.mux(1) - d.mux(0) : 1.0;
    const double hp = d.mup.size() > 1 ? d.mup(1) - d.mup(0) : 1.0;
    const double cell = hx * hp;
    d.mass = d.density.sum() * cell;
    d.mean = RVec::Zero(2);
    d.cov = RMat::Zero(2, 2);
    for (Eigen::Index i = 0; i < d.mux.size(); ++i)
        for (Eigen::Index j = 0; j < d.mup.size(); ++j) {
            const double w = d.density(i, j) * cell;
            d.mean(0) += w * d.mux(i);
            d.mean(1) += w * d.mup(j);
        }
    d.mean /= d.mass;
    for (Eigen::Index i = 0; i < d.mux.size(); ++i)
        for (Eigen::Index j = 0; j < d.mup.size(); ++j) {
            const double w = d.density(i, j) * cell / d.mass;
            const double a = d.mux(i) - d.mean(0), b = d.mup(j) - d.mean(1);
            d.cov(0, 0) += w * a * a;
            d.cov(0, 1) += w * a * b;
            d.cov(1, 1) += w * b * b;
        }
    d.cov(1, 0) = d.cov(0, 1);
}

void check_grid(const PointerGrid& g) {
    if (g.nx < 3 || g.np < 3 || !(g.mux_max > g.mux_min) || !(g.mup_max > g.mup_min))
        throw std::invalid_argument("pointer grid must be at least 3x3 with positive extent");
}

} // namespace

PointerDistribution pointer_joint_distribution(const FockRealization& f, const CVec& system, const PointerGrid& grid) {
    check_grid(grid);
    const auto dims = f.dims();
    if (dims.size() != 3 || f.space->factor_of(Role::pointer_x) != 1 || f.space->factor_of(Role::pointer_p) != 2)
        throw std::invalid_argument("pointer distribution expects the (system, pointerX, pointerP) layout");
    if (system.size() != dims[0]) throw DimensionError("system state size mismatch");
    CVec fin = f.with_apparatus(system.normalized());
    f.apply(fin);
    PointerDistribution d;
    d.mux = linspace(grid.mux_min, grid.mux_max, grid.nx);
    d.mup = linspace(grid.mup_min, grid.mup_max, grid.np);
    const double hbar = f.space->hbar();
    const CMat hx = hermite_functions(dims[1], d.mux, hbar).cast<cplx>();
    const CMat hp = hermite_functions(dims[2], d.mup, hbar).cast<cplx>();
    d.density = RMat::Zero(grid.nx, grid.np);
    using RowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    for (int i = 0; i < dims[0]; ++i) {
        Eigen::Map<const RowMat> block(fin.data() + long(i) * dims[1] * dims[2], dims[1], dims[2]);
        const CMat amp = hx * block * hp.transpose();
        d.density += amp.cwiseAbs2();
    }
    table_moments(d);
    if (std::abs(d.mass - 1.0) > 1e-3)
        throw NumericalError("pointer grid too small or too coarse: mass " + std::to_string(d.mass));
    return d;
}

PointerDistribution pointer_joint_distribution(const MeasurementModel& m, const GaussianState& system,
                                               const PointerGrid& grid) {
    check_grid(grid);
    const GaussianState out = push_state(symplectic_map(m), joint_input(m, system));
    const int ix = 2 * m.pointer_x(), ip = 2 * m.pointer_p();
    RVec mean(2);
    mean << out.mean(ix), out.mean(ip);
    RMat cov(2, 2);
    cov << out.cov(ix, ix), out.cov(ix, ip), out.cov(ip, ix), out.cov(ip, ip);
    PointerDistribution d;
    d.mux = linspace(grid.mux_min, grid.mux_max, grid.nx);
    d.mup = linspace(grid.mup_min, grid.mup_max, grid.np);
    d.density.resize(grid.nx, grid.np);
    const RMat inv = cov.inverse();
    const double norm = 1.0 / (2.0 * std::numbers::pi * std::sqrt(cov.determinant()));
    for (int i = 0; i < grid.nx; ++i)
        for (int j = 0; j < grid.np; ++j) {
            RVec z(2);
            z << d.mux(i) - mean(0), d.mup(j) - mean(1);
            d.density(i, j) = norm * std::exp(-0.5 * z.dot(inv * z));
        }
    table_moments(d);
    if (std::abs(d.mass - 1.0) > 1e-3)
        throw NumericalError("pointer grid too small or too coarse: mass " + std::to_string(d.mass));
    d.mean = mean;
    d.cov = cov;
    return d;
}

} // namespace jmlab
