#include "jmlab/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <random>

namespace jmlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double opnorm(const CMat& a) {
    if (a.size() == 0) return 0.0;
    Eigen::BDCSVD<CMat> svd(a);
    return svd.singularValues()(0);
}

bool pure_diagonal(const GaussianState& g) {
    if (g.modes != 1) return false;
    const double det = g.cov(0, 0) * g.cov(1, 1);
    return std::abs(g.cov(0, 1)) < 1e-12 && std::abs(det - g.hbar * g.hbar / 4.0) < 1e-10 * g.hbar * g.hbar;
}

GaussianState shifted(const GaussianState& g, double x, double p) {
    GaussianState s = g;
    s.mean(0) += x;
    s.mean(1) += p;
    return s;
}

} // namespace

double convergence_order(double coarse, double fine, double ratio, double floor) {
    if (coarse <= floor && fine <= floor) return kInf;
    return std::log(coarse / std::max(fine, floor)) / std::log(ratio);
}

CMat displacement_operator(const ModeSpace& mode, double x, double p, std::vector<std::string>* warnings) {
    const double nbar = (x * x + p * p) / (2.0 * mode.hbar);
    if (warnings && nbar > mode.dim / 4.0)
        warnings->push_back("displaced vacuum photon number " + std::to_string(nbar) + " exceeds dim/4");
    return displacement_local(mode, x, p);
}

DisplacementReport check_displacement(const ModeSpace& mode, double x, double p, double x2, double p2, double h) {
    DisplacementReport r;
    const int n = mode.dim / 2;
    r.interior = n;
    const double hb = mode.hbar;
    auto block = [&](const CMat& a) { return opnorm(a.topLeftCorner(n, n)); };
    auto disp = [&](double a, double b) { return displacement_operator(mode, a, b, &r.warnings); };
    const CMat id = CMat::Identity(mode.dim, mode.dim);
    const CMat d = disp(x, p);
    r.unitarity = opnorm(d.adjoint() * d - id);
    r.shift_x = block(d.adjoint() * mode.x_op * d - mode.x_op - x * id);
    r.shift_p = block(d.adjoint() * mode.p_op * d - mode.p_op - p * id);

    const CMat d2 = disp(x2, p2), d12 = disp(x + x2, p + p2);
    const cplx phase = std::exp(cplx(0.0, (p * x2 - x * p2) / (2.0 * hb)));
    const CMat prod = d * d2;
    r.group_law = block(prod - phase * d12);
    const cplx est = (d12.adjoint() * prod).topLeftCorner(n, n).trace() / double(n);
    r.phase_modulus = std::abs(1.0 - std::abs(est));

    const cplx ih(0.0, hb);
    for (int k = 0; k < 2; ++k) {
        const double s = h / (1 << k);
        const CMat dx = ih * (disp(x + s, p) - disp(x - s, p)) / (2.0 * s);
        r.deriv_x[k] = block(dx - (mode.p_op - 0.5 * p * id) * d);
        const CMat dp = ih * (disp(x, p + s) - disp(x, p - s)) / (2.0 * s);
        r.deriv_p[k] = block(dp + (mode.x_op - 0.5 * x * id) * d);
    }
    r.order_x = convergence_order(r.deriv_x[0], r.deriv_x[1]);
    r.order_p = convergence_order(r.deriv_p[0], r.deriv_p[1]);
    return r;
}

// ---------------------------------------------------------------- commutators

namespace {

using VecOp = std::function<CVec(const CVec&)>;

VecOp minus(VecOp a, VecOp b) {
    return [a, b](const CVec& v) { return CVec(a(v) - b(v)); };
}

VecOp comm(VecOp a, VecOp b) {
    return [a, b](const CVec& v) { return CVec(a(b(v)) - b(a(v))); };
}

double power_norm(const VecOp& r, long n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    CVec v(n);
    for (long i = 0; i < n; ++i) v(i) = cplx(g(rng), g(rng));
    v.normalize();
    double est = 0.0;
    for (int it = 0; it < 300; ++it) {
        CVec w = r(v);
        const double nw = w.norm();
        if (nw == 0.0) return 0.0;
        const bool done = std::abs(nw - est) <= 1e-12 * nw;
        est = nw;
        v = w / nw;
        if (done) break;
    }
    return est;
}

} // namespace

CommutatorReport check_commutator_identities(const MeasurementModel& m, int dims, std::uint64_t seed) {
    if (dims < 4) throw DimensionError("commutator checks need at least 4 levels per mode");
    const auto t0 = std::chrono::steady_clock::now();
    const FockRealization f = realize(m, dims);
    const auto dv = f.dims();
    const long n = f.space->total_dim();
    const double hb = m.hbar;

    std::vector<long> in_idx, out_idx;
    for (long i = 0; i < n; ++i) {
        long rem = i;
        bool ok = true;
        for (int k = int(dv.size()) - 1; k >= 0; --k) {
            if (rem % dv[k] > dv[k] - 3) ok = false;
            rem /= dv[k];
        }
        (ok ? in_idx : out_idx).push_back(i);
    }
    const long nin = long(in_idx.size()), nout = long(out_idx.size());
    CMat ext(nout, nin);
    for (long j = 0; j < nin; ++j) {
        CVec e = CVec::Zero(n);
        e(in_idx[j]) = 1.0;
        f.apply(e);
        for (long r = 0; r < nout; ++r) ext(r, j) = e(out_idx[r]);
    }
    Eigen::ColPivHouseholderQR<CMat> qr(ext.adjoint());
    const long rank = qr.rank();
    const CMat q = qr.householderQ() * CMat::Identity(nin, nin);
    const CMat basis = q.rightCols(nin - rank);
    CMat v = CMat::Zero(n, basis.cols());
    for (long j = 0; j < nin; ++j) v.row(in_idx[j]) = basis.row(j);

    CommutatorReport rep;
    rep.model = m.name;
    rep.dims = dims;
    rep.subspace_dim = int(basis.cols());
    rep.leakage = opnorm(ext * basis);

    const int px = m.pointer_x(), pp = m.pointer_p();
    auto quad = [&f](int factor, bool mom) -> VecOp {
        return [&f, factor, mom](const CVec& s) {
            CVec o = s;
            f.apply_quadrature(o, factor, mom);
            return o;
        };
    };
    auto fin = [&f](VecOp op) -> VecOp {
        return [&f, op](const CVec& s) {
            CVec o = s;
            f.apply(o);
            o = op(o);
            f.apply_adjoint(o);
            return o;
        };
    };
    auto scalar = [](cplx c) -> VecOp { return [c](const CVec& s) { return CVec(c * s); }; };
    const VecOp x = quad(0, false), p = quad(0, true), mx = quad(px, false), mp = quad(pp, false);
    const VecOp e_xi = minus(fin(mx), x), e_pi = minus(fin(mp), p);
    const VecOp e_xf = fin(minus(mx, x)), e_pf = fin(minus(mp, p));
    const VecOp d_x = minus(fin(x), x), d_p = minus(fin(p), p);
    const VecOp ih = scalar(cplx(0.0, hb));
    auto sum = [](std::vector<VecOp> ops) -> VecOp {
        return [ops](const CVec& s) {
            CVec o = ops.front()(s);
            for (size_t k = 1; k < ops.size(); ++k) o += ops[k](s);
            return o;
        };
    };
    auto neg = [](VecOp a) -> VecOp { return [a](const CVec& s) { return CVec(-a(s)); }; };

    struct Item {
        const char* name;
        const char* statement;
        VecOp residual;
    };
    const std::vector<Item> items = {
        {"predictive_commutator", "[e_Xf, e_Pf] = i hbar", minus(comm(e_xf, e_pf), ih)},
        {"retrodictive_commutator", "[e_Xi, e_Pi] = -i hbar - [x_i, e_Pi] + [p_i, e_Xi]",
         sum({comm(e_xi, e_pi), ih, comm(x, e_pi), neg(comm(p, e_xi))})},
        {"retro_x_disturb_p_commutator", "[e_Xi, d_P] = -i hbar - [x_i, d_P] + [p_i, e_Xi]",
         sum({comm(e_xi, d_p), ih, comm(x, d_p), neg(comm(p, e_xi))})},
        {"retro_p_disturb_x_commutator", "[d_X, e_Pi] = -i hbar - [x_i, e_Pi] + [p_i, d_X]",
         sum({comm(d_x, e_pi), ih, comm(x, e_pi), neg(comm(p, d_x))})},
        {"pred_x_disturb_p_commutator", "[e_Xf, d_P] = -i hbar + [p_i, e_Xf]",
         sum({comm(e_xf, d_p), ih, neg(comm(p, e_xf))})},
        {"pred_p_disturb_x_commutator", "[d_X, e_Pf] = -i hbar - [x_i, e_Pf]", sum({comm(d_x, e_pf), ih, comm(x, e_pf)})},
    };
    for (const auto& it : items) {
        CMat rv(n, v.cols());
        for (long c = 0; c < v.cols(); ++c) rv.col(c) = it.residual(v.col(c));
        IdentityResidual row;
        row.name = it.name;
        row.statement = it.statement;
        row.projected = opnorm(v.adjoint() * rv);
        row.raw = power_norm(it.residual, n, seed);
        rep.rows.push_back(row);
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

// ---------------------------------------------------------------- divergence

void validate(const PhaseSpaceBox& box) {
    if (!(box.L > 0 && box.P > 0)) throw std::invalid_argument("phase-space box sides must be positive");
    if (box.nx < 3 || box.np < 3) throw std::invalid_argument("phase-space grid must be at least 3x3");
}

namespace {

struct Field {
    const MeasurementModel& m;
    const GaussianState& psi;
    QuadForm qx, qp;

    std::array<double, 2> v(double x, double p) const {
        const GaussianState g = joint_input(m, shifted(psi, x, p));
        return {first_moment(qx, g), first_moment(qp, g)};
    }
    cplx commutator(double x, double p) const {
        const GaussianState g = joint_input(m, shifted(psi, x, p));
        return product_moment(qx, qp, g) - product_moment(qp, qx, g);
    }
    std::array<double, 2> rms(double x, double p) const {
        const GaussianState g = joint_input(m, shifted(psi, x, p));
        return {std::sqrt(std::max(0.0, second_moment(qx, g))), std::sqrt(std::max(0.0, second_moment(qp, g)))};
    }
    double divergence(double x, double p, double hx, double hp) const {
        return (v(x + hx, p)[0] - v(x - hx, p)[0]) / (2 * hx) + (v(x, p + hp)[1] - v(x, p - hp)[1]) / (2 * hp);
    }
};

std::vector<double> trapezoid_weights(int n, double h) {
    std::vector<double> w(n, h);
    w.front() = w.back() = 0.5 * h;
    return w;
}

DivergenceGrid evaluate_grid(const Field& fld, const PhaseSpaceBox& box, int nx, int np, double hbar) {
    DivergenceGrid g;
    g.nx = nx;
    g.np = np;
    g.hx = box.L / (nx - 1);
    g.hp = box.P / (np - 1);
    const auto wx = trapezoid_weights(nx, g.hx), wp = trapezoid_weights(np, g.hp);
    auto xs = [&](int i) { return box.x0 - box.L / 2 + i * g.hx; };
    auto ps = [&](int j) { return box.p0 - box.P / 2 + j * g.hp; };
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < np; ++j) {
            const double div = fld.divergence(xs(i), ps(j), g.hx, g.hp);
            const cplx c = fld.commutator(xs(i), ps(j));
            g.pointwise = std::max(g.pointwise, std::abs(c - cplx(0.0, -hbar * (1.0 + div))));
            g.volume += wx[i] * wp[j] * div;
        }
    for (int j = 0; j < np; ++j) g.flux += wp[j] * (fld.v(xs(nx - 1), ps(j))[0] - fld.v(xs(0), ps(j))[0]);
    for (int i = 0; i < nx; ++i) g.flux += wx[i] * (fld.v(xs(i), ps(np - 1))[1] - fld.v(xs(i), ps(0))[1]);
    g.flux_residual = std::abs(g.volume - g.flux);
    return g;
}

} // namespace

DivergenceReport box_average_divergence_check(const MeasurementModel& m, const GaussianState& psi,
                                              const PhaseSpaceBox& box, bool fock_cross_check, const FockSettings& fs) {
    validate(box);
    validate(psi);
    if (psi.modes != 1) throw DimensionError("system state must be a single mode");
    const ErrorForms forms = error_forms(m);
    const Field fld{m, psi, forms[ErrorKind::eps_xi], forms[ErrorKind::eps_pi]};
    const double hb = m.hbar;
    DivergenceReport r;
    r.coarse = evaluate_grid(fld, box, box.nx, box.np, hb);
    r.fine = evaluate_grid(fld, box, 2 * box.nx - 1, 2 * box.np - 1, hb);

    const int nx = r.fine.nx, np = r.fine.np;
    const double hx = r.fine.hx, hp = r.fine.hp, area = box.L * box.P;
    const auto wx = trapezoid_weights(nx, hx), wp = trapezoid_weights(np, hp);
    auto xs = [&](int i) { return box.x0 - box.L / 2 + i * hx; };
    auto ps = [&](int j) { return box.p0 - box.P / 2 + j * hp; };
    double t1 = 0.0, t2 = 0.0, abs_flux = 0.0;
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < np; ++j) {
            const auto v = fld.v(xs(i), ps(j));
            r.max_abs_v = std::max({r.max_abs_v, std::abs(v[0]), std::abs(v[1])});
            const auto rms = fld.rms(xs(i), ps(j));
            t1 += wx[i] * wp[j] * 2.0 * rms[0] * rms[1];
            t2 += wx[i] * wp[j] * std::abs(fld.commutator(xs(i), ps(j)));
        }
    for (int j = 0; j < np; ++j) abs_flux += wp[j] * (std::abs(fld.v(xs(nx - 1), ps(j))[0]) + std::abs(fld.v(xs(0), ps(j))[0]));
    for (int i = 0; i < nx; ++i) abs_flux += wx[i] * (std::abs(fld.v(xs(i), ps(np - 1))[1]) + std::abs(fld.v(xs(i), ps(0))[1]));

    const double floor = 1e-11 * hb * std::max(1.0, area) * (1.0 + r.max_abs_v);
    r.pointwise_order = convergence_order(r.coarse.pointwise, r.fine.pointwise, 2.0, floor);
    r.flux_order = convergence_order(r.coarse.flux_residual, r.fine.flux_residual, 2.0, floor);
    r.mean_divergence = r.fine.volume / area;
    r.commutator_imag = fld.commutator(box.x0, box.p0).imag();

    const RmsValue dx = gaussian_maximal_rms(m, ErrorKind::eps_xi), dp = gaussian_maximal_rms(m, ErrorKind::eps_pi);
    r.delta_ei_x = dx.value;
    r.delta_ei_p = dp.value;
    double t0 = 2.0 * dx.value * dp.value;
    if (dx.infinite || dp.infinite)
        t0 = (dx.value == 0.0 || dp.value == 0.0) ? std::numeric_limits<double>::quiet_NaN() : kInf;
    const double t6 = (dx.infinite || dp.infinite) ? -kInf : hb * (1.0 - 2.0 * dx.value / box.L - 2.0 * dp.value / box.P);
    r.chain_names = {"2 D_x D_p",
                     "box mean of 2 rms_x rms_p",
                     "box mean of |<[e_xi, e_pi]>|",
                     "hbar |1 + mean div v|",
                     "hbar |1 + flux / area|",
                     "hbar (1 - boundary |n.v| / area)",
                     "hbar (1 - 2 D_x / L - 2 D_p / P)"};
    r.chain = {t0,
               t1 / area,
               t2 / area,
               hb * std::abs(1.0 + r.fine.volume / area),
               hb * std::abs(1.0 + r.fine.flux / area),
               hb * (1.0 - abs_flux / area),
               t6};
    r.chain_holds = true;
    for (size_t k = 0; k + 1 < r.chain.size(); ++k) {
        const double tol = 1e-9 * hb * (1.0 + (std::isfinite(r.chain[k]) ? std::abs(r.chain[k]) : 0.0));
        if (std::isnan(r.chain[k]) || std::isnan(r.chain[k + 1])) continue; // undefined 0 x inf
        if (!(r.chain[k] >= r.chain[k + 1] - tol)) r.chain_holds = false;
    }

    if (fock_cross_check) {
        if (!pure_diagonal(psi)) {
            r.warnings.push_back("Fock cross-check skipped: system state is not a pure uncorrelated Gaussian");
        } else {
            const int w = fs.working;
            const double vx = psi.cov(0, 0), vp = psi.cov(1, 1);
            double nbar = 0.0;
            for (double sx : {-0.5, 0.5})
                for (double sp : {-0.5, 0.5}) {
                    const double cx = psi.mean(0) + box.x0 + sx * box.L, cp = psi.mean(1) + box.p0 + sp * box.P;
                    nbar = std::max(nbar, (cx * cx + cp * cp + vx + vp) / (2.0 * hb) - 0.5);
                }
            if (nbar > w / 4.0)
                r.warnings.push_back("truncation validity violated: displaced photon number " + std::to_string(nbar) +
                                     " exceeds working/4 at a box corner");
            const FockRealization f = realize(m, w);
            const CVec sys = gaussian_pure_state(w, hb, psi.mean(0) + box.x0, psi.mean(1) + box.p0, vx);
            const ErrorVectors ev = error_vectors(f, f.with_apparatus(sys));
            const CVec& wx_ = ev.w[index_of(ErrorKind::eps_xi)];
            const CVec& wp_ = ev.w[index_of(ErrorKind::eps_pi)];
            const auto vg = fld.v(box.x0, box.p0);
            const double fvx = ev.u0.dot(wx_).real(), fvp = ev.u0.dot(wp_).real();
            const cplx fc = wx_.dot(wp_) - wp_.dot(wx_);
            r.fock_center_residual = std::max({std::abs(fvx - vg[0]), std::abs(fvp - vg[1]),
                                               std::abs(fc - fld.commutator(box.x0, box.p0))});
        }
    }
    return r;
}

// ---------------------------------------------------------------- inequalities

const Relation* InequalityMargins::find(const std::string& name) const {
    for (const auto& r : relations)
        if (r.name == name) return &r;
    return nullptr;
}

double InequalityMargins::worst_margin() const {
    double w = kInf;
    for (const auto& r : relations)
        if (r.margin) w = std::min(w, *r.margin);
    return w;
}

namespace {

bool is_zero(const RmsValue& v) { return !v.infinite && v.value <= 1e-8; }

} // namespace

Relation product_relation(const std::string& name, const RmsValue& a, const RmsValue& b, double rhs) {
    Relation r;
    r.name = name;
    r.rhs = rhs;
    if ((a.infinite && is_zero(b)) || (b.infinite && is_zero(a))) {
        r.lhs = std::numeric_limits<double>::quiet_NaN();
        r.flag = kUndefinedFlag;
        return r;
    }
    r.lhs = (a.infinite || b.infinite) ? kInf : a.value * b.value;
    r.margin = r.lhs - rhs;
    return r;
}

namespace {

GaussianState default_input(double hbar) { return single_mode_state(hbar, 0.0, 0.0, hbar / 2.0); }

bool retro_unbiased(const std::array<double, 4>& d) { return d[0] < 1e-8 && d[1] < 1e-8; }

} // namespace

PointerCheck arthurs_kelly_pointer_check(const MeasurementModel& m, const GaussianState& psi, Backend b,
                                         const FockSettings& fs) {
    validate(m);
    validate(psi);
    PointerCheck c;
    const GaussianState out = push_state(symplectic_map(m), joint_input(m, psi));
    const int ix = 2 * m.pointer_x(), ip = 2 * m.pointer_p();
    c.product = std::sqrt(out.cov(ix, ix) * out.cov(ip, ip));
    c.margin = c.product - m.hbar;
    if (!retro_unbiased(unbiasedness_defect(m, Backend::gaussian)))
        c.warning = "model is not retrodictively unbiased; the pointer relation assumes it is";
    if (b != Backend::gaussian && pure_diagonal(psi)) {
        const FockRealization f = realize(m, fs.working);
        CVec u = f.with_apparatus(gaussian_pure_state(fs.working, m.hbar, psi.mean(0), psi.mean(1), psi.cov(0, 0)));
        f.apply(u);
        auto variance = [&](int factor) {
            CVec q = u;
            f.apply_quadrature(q, factor, false);
            const double mean = u.dot(q).real();
            return q.squaredNorm() - mean * mean;
        };
        c.fock_product = std::sqrt(variance(m.pointer_x()) * variance(m.pointer_p()));
    }
    return c;
}

namespace {

std::array<RmsValue, 6> fock_deltas_at(const MeasurementModel& m, const FockSettings& fs, int working) {
    const int top = refinement_probes(fs.probe).back();
    const FockRealization f = realize(m, std::max(working, top + 2));
    const SystemMoments s = fock_moments(f, top);
    std::array<RmsValue, 6> d;
    for (ErrorKind k : kErrorKinds) d[index_of(k)] = fock_maximal_rms(s, k, fs.probe);
    return d;
}

struct FockDeltas {
    std::array<RmsValue, 6> d;
    int working = 0;
    bool converged = true;
};

FockDeltas fock_deltas(const MeasurementModel& m, const FockSettings& fs) {
    FockDeltas r;
    r.working = fs.working;
    r.d = fock_deltas_at(m, fs, r.working);
    if (fs.working_cap <= fs.working) return r;
    r.converged = false;
    while (r.working + 16 <= fs.working_cap) {
        const auto next = fock_deltas_at(m, fs, r.working + 16);
        double change = 0.0;
        for (int k = 0; k < 6; ++k)
            for (size_t i = 0; i < next[k].refinement.size(); ++i) {
                const double a = next[k].refinement[i], b = r.d[k].refinement[i];
                change = std::max(change, std::abs(a - b) / std::max(std::abs(a), 1e-12));
            }
        r.working += 16;
        r.d = next;
        if (change < fs.working_tol) {
            r.converged = true;
            break;
        }
    }
    return r;
}

std::vector<Relation> unconstrained_relations(const std::array<RmsValue, 6>& d, double hbar) {
    auto at = [&](ErrorKind k) { return d[index_of(k)]; };
    using K = ErrorKind;
    const double rhs = hbar / 2.0;
    return {product_relation("predictive_errors", at(K::eps_xf), at(K::eps_pf), rhs),
            product_relation("retrodictive_errors", at(K::eps_xi), at(K::eps_pi), rhs),
            product_relation("retro_x_disturb_p", at(K::eps_xi), at(K::del_p), rhs),
            product_relation("pred_x_disturb_p", at(K::eps_xf), at(K::del_p), rhs),
            product_relation("retro_p_disturb_x", at(K::del_x), at(K::eps_pi), rhs),
            product_relation("pred_p_disturb_x", at(K::del_x), at(K::eps_pf), rhs)};
}

std::vector<Relation> finite_relations(const std::array<ConstrainedValue, 6>& c, const RangeBox& box, double hbar) {
    auto at = [&](ErrorKind k) { return c[index_of(k)]; };
    using K = ErrorKind;
    const double rhs = hbar / 2.0 * (1.0 + 2.0 * hbar / (box.L * box.P));
    auto rel = [&](const char* name, K kx, K kp) {
        Relation r;
        r.name = name;
        r.rhs = rhs;
        const ConstrainedValue &a = at(kx), &b = at(kp);
        if (!a.feasible || !b.feasible) {
            r.lhs = std::numeric_limits<double>::quiet_NaN();
            r.flag = "infeasible";
            return r;
        }
        r.lhs = (a.value + hbar / box.P) * (b.value + hbar / box.L);
        r.margin = r.lhs - rhs;
        r.flag = "lower_bound";
        return r;
    };
    return {rel("finite_retrodictive", K::eps_xi, K::eps_pi), rel("finite_retro_x_disturb_p", K::eps_xi, K::del_p),
            rel("finite_retro_p_disturb_x", K::del_x, K::eps_pi), rel("finite_pred_x_disturb_p", K::eps_xf, K::del_p),
            rel("finite_pred_p_disturb_x", K::del_x, K::eps_pf)};
}

InequalityMargins assemble(const MeasurementModel& m, const std::array<RmsValue, 6>& d,
                           const std::optional<std::array<ConstrainedValue, 6>>& c, const std::optional<RangeBox>& box,
                           const std::array<double, 4>& defects, const GaussianState& input, const FockSettings& fs) {
    InequalityMargins out;
    const double hb = m.hbar;
    Relation prep;
    prep.name = "preparation_uncertainty";
    prep.lhs = std::sqrt(input.cov(0, 0) * input.cov(1, 1));
    prep.rhs = hb / 2.0;
    prep.margin = prep.lhs - prep.rhs;
    out.relations.push_back(prep);

    const PointerCheck pc = arthurs_kelly_pointer_check(m, input, Backend::gaussian, fs);
    Relation ptr;
    ptr.name = "pointer_uncertainty";
    ptr.lhs = pc.product;
    ptr.rhs = hb;
    ptr.margin = pc.margin;
    if (!retro_unbiased(defects)) ptr.flag = "premise_not_met";
    out.relations.push_back(ptr);

    for (auto& r : unconstrained_relations(d, hb)) out.relations.push_back(r);
    if (c && box) {
        for (auto& r : finite_relations(*c, *box, hb)) out.relations.push_back(r);
        out.confirmation_only = true;
    }
    return out;
}

} // namespace

ErrorReport error_report(const MeasurementModel& m, const std::optional<RangeBox>& box, Backend b, const FockSettings& fs,
                         const OptimizerSettings& opt, const std::optional<GaussianState>& input) {
    validate(m);
    ErrorReport rep;
    rep.backend = b;
    if (b != Backend::gaussian) {
        const FockDeltas fd = fock_deltas(m, fs);
        rep.fock_working = fd.working;
        rep.fock_converged = fd.converged;
        if (b == Backend::fock) rep.delta = fd.d;
        else rep.delta_fock = fd.d;
    }
    if (b != Backend::fock)
        for (ErrorKind k : kErrorKinds) rep.delta[index_of(k)] = gaussian_maximal_rms(m, k);
    const Backend primary = b == Backend::fock ? Backend::fock : Backend::gaussian;
    rep.defects = unbiasedness_defect(m, primary, fs);
    if (box) {
        validate(*box, m.hbar);
        rep.box = box;
        std::array<ConstrainedValue, 6> c;
        for (ErrorKind k : kErrorKinds) c[index_of(k)] = constrained_maximal_rms(k, m, *box, primary, opt, fs);
        rep.constrained = c;
    }
    const GaussianState in = input ? *input : default_input(m.hbar);
    rep.margins = assemble(m, rep.delta, rep.constrained, rep.box, rep.defects, in, fs);
    return rep;
}

InequalityMargins check_seven_inequalities(const MeasurementModel& m, const std::optional<RangeBox>& box, Backend b,
                                           const FockSettings& fs, const OptimizerSettings& opt,
                                           const std::optional<GaussianState>& input) {
    return error_report(m, box, b, fs, opt, input).margins;
}

double swap_interior_eps_xi_norm(const MeasurementModel& m, int d) {
    const FockRealization f = realize(m, d);
    std::vector<long> idx;
    for (int a = 0; a < d; ++a)
        for (int b = 0; a + b <= d - 2; ++b)
            for (int c = 0; c <= d - 3; ++c) idx.push_back((long(a) * d + b) * d + c);
    const long n = f.space->total_dim(), k = long(idx.size());
    CMat img(n, k);
    for (long j = 0; j < k; ++j) {
        CVec e = CVec::Zero(n);
        e(idx[j]) = 1.0;
        CVec fx = e;
        f.apply(fx);
        f.apply_quadrature(fx, m.pointer_x(), false);
        f.apply_adjoint(fx);
        CVec x = e;
        f.apply_quadrature(x, 0, false);
        img.col(j) = fx - x;
    }
    CMat pr(k, k);
    for (long i = 0; i < k; ++i) pr.row(i) = img.row(idx[i]);
    Eigen::BDCSVD<CMat> svd(pr);
    return svd.singularValues()(0);
}

// ---------------------------------------------------------------- appendix identity

VarianceIdentity appendix_variance_identity_check(const GaussianState& psi, double pointer_p_mean, double pointer_p_var,
                                                  int working) {
    validate(psi);
    if (psi.modes != 1) throw DimensionError("system state must be a single mode");
    SwapParams sp;
    sp.hbar = psi.hbar;
    sp.pointer_p_mean = pointer_p_mean;
    sp.pointer_p_var = pointer_p_var;
    const MeasurementModel m = swap_rotation_model(sp);
    const QuadForm q = error_forms(m)[ErrorKind::eps_pi];
    VarianceIdentity r;
    r.lhs_gaussian = second_moment(q, joint_input(m, psi));
    const GaussianState ap = apparatus_gaussian(m);
    const int ip = 2 * (m.pointer_p() - 1);
    const double dmu = ap.mean(ip) - psi.mean(1);
    r.rhs = ap.cov(ip, ip) + psi.cov(1, 1) + dmu * dmu;
    r.residual_gaussian = std::abs(r.lhs_gaussian - r.rhs);
    auto loss = [&](double x, double p, double var) {
        const CVec big = gaussian_pure_state(2 * working, psi.hbar, x, p, var);
        return big.tail(working).squaredNorm();
    };
    if (working > 0 && pure_diagonal(psi)) {
        r.truncation_loss = std::max(loss(psi.mean(0), psi.mean(1), psi.cov(0, 0)),
                                     loss(ap.mean(ip), ap.mean(ip + 1), ap.cov(ip, ip)));
    }
    if (working > 0 && pure_diagonal(psi) && r.truncation_loss <= 1e-12) {
        const FockRealization f = realize(m, working);
        const CVec sys = gaussian_pure_state(working, psi.hbar, psi.mean(0), psi.mean(1), psi.cov(0, 0));
        const ErrorVectors ev = error_vectors(f, f.with_apparatus(sys));
        r.lhs_fock = ev.w[index_of(ErrorKind::eps_pi)].squaredNorm();
        r.residual_fock = std::abs(*r.lhs_fock - r.rhs);
    }
    return r;
}

// ---------------------------------------------------------------- per-state bounds

std::array<double, 5> per_state_margins(const SystemMoments& s, const CVec& psi, double hbar) {
    if (psi.size() != s.probe) throw DimensionError("state size does not match the moment probe");
    auto mom = [&](ErrorKind k) { return psi.dot(s.second(k) * psi).real(); };
    using K = ErrorKind;
    const double q = hbar * hbar / 4.0;
    return {mom(K::eps_xi) * mom(K::eps_pi) - q, mom(K::eps_xi) * mom(K::del_p) - q, mom(K::eps_xf) * mom(K::del_p) - q,
            mom(K::del_x) * mom(K::eps_pi) - q, mom(K::del_x) * mom(K::eps_pf) - q};
}

PerStateBounds per_state_bounds(const MeasurementModel& m, int states, std::uint64_t seed, Backend b,
                                const FockSettings& fs) {
    validate(m);
    PerStateBounds r;
    r.states = states;
    const auto d = unbiasedness_defect(m, b == Backend::fock ? Backend::fock : Backend::gaussian, fs);
    r.premise = std::all_of(d.begin(), d.end(), [](double v) { return v < 1e-8; });
    const int probe = fs.probe;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<CVec> psis;
    for (int i = 0; i < states; ++i) {
        CVec v(probe);
        for (int k = 0; k < probe; ++k) v(k) = cplx(g(rng), g(rng));
        psis.push_back(v.normalized());
    }
    auto scan = [&](const SystemMoments& s) {
        std::array<double, 5> lo;
        lo.fill(kInf);
        for (const auto& v : psis) {
            const auto mg = per_state_margins(s, v, m.hbar);
            for (int k = 0; k < 5; ++k) lo[k] = std::min(lo[k], mg[k]);
        }
        return lo;
    };
    if (b == Backend::fock) {
        r.min_margin = scan(fock_moments(realize(m, std::max(fs.working, probe + 2)), probe));
    } else {
        r.min_margin = scan(gaussian_moments(m, probe));
        if (b == Backend::both) r.fock_min_margin = scan(fock_moments(realize(m, std::max(fs.working, probe + 2)), probe));
    }
    return r;
}

// ---------------------------------------------------------------- backend agreement

BackendAgreement backend_cross_validation(const MeasurementModel& m, const std::vector<std::array<double, 2>>& means,
                                          int working, int cap, double self_tol) {
    validate(m);
    const ErrorForms forms = error_forms(m);
    auto fock_moments_at = [&](int w) {
        const FockRealization f = realize(m, w);
        std::vector<double> out;
        for (const auto& mu : means) {
            const ErrorVectors ev = error_vectors(f, f.with_apparatus(coherent_state(w, m.hbar, mu[0], mu[1])));
            for (ErrorKind k : kErrorKinds) out.push_back(ev.w[index_of(k)].squaredNorm());
        }
        return out;
    };
    std::vector<double> exact;
    for (const auto& mu : means) {
        const GaussianState g = joint_input(m, single_mode_state(m.hbar, mu[0], mu[1], m.hbar / 2.0));
        for (ErrorKind k : kErrorKinds) exact.push_back(second_moment(forms[k], g));
    }
    auto scale = [](double v) { return std::max(std::abs(v), 1e-12); };

    BackendAgreement a;
    a.working = working;
    std::vector<double> fock = fock_moments_at(working);
    a.self_change = std::numeric_limits<double>::infinity();
    while (a.working + 16 <= cap) {
        const std::vector<double> next = fock_moments_at(a.working + 16);
        a.self_change = 0.0;
        for (size_t i = 0; i < next.size(); ++i)
            a.self_change = std::max(a.self_change, std::abs(next[i] - fock[i]) / scale(next[i]));
        a.working += 16;
        fock = next;
        if (a.self_change < self_tol) break;
    }
    a.converged = a.self_change < self_tol;
    for (size_t i = 0; i < fock.size(); ++i) {
        if (std::abs(exact[i]) > 1e-12)
            a.max_relative = std::max(a.max_relative, std::abs(fock[i] - exact[i]) / std::abs(exact[i]));
        else
            a.max_absolute_at_zero = std::max(a.max_absolute_at_zero, std::abs(fock[i] - exact[i]));
        ++a.samples;
    }
    return a;
}

} // namespace jmlab
