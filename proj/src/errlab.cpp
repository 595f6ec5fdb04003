#include "jmlab/errlab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace jmlab {

ErrorForms error_forms(const MeasurementModel& m) {
    validate(m);
    const SymplecticModel s = symplectic_map(m);
    const int n = 2 * m.modes();
    const int ix = 2 * m.pointer_x(), ip = 2 * m.pointer_p();
    auto unit = [&](int i) {
        RVec e = RVec::Zero(n);
        e(i) = 1.0;
        return e;
    };
    auto row = [&](int i) { return RVec(s.S.row(i).transpose()); };
    ErrorForms f;
    f.modes = m.modes();
    f.forms[index_of(ErrorKind::eps_xi)] = {row(ix) - unit(0), s.shift(ix)};
    f.forms[index_of(ErrorKind::eps_pi)] = {row(ip) - unit(1), s.shift(ip)};
    f.forms[index_of(ErrorKind::eps_xf)] = {row(ix) - row(0), s.shift(ix) - s.shift(0)};
    f.forms[index_of(ErrorKind::eps_pf)] = {row(ip) - row(1), s.shift(ip) - s.shift(1)};
    f.forms[index_of(ErrorKind::del_x)] = {row(0) - unit(0), s.shift(0)};
    f.forms[index_of(ErrorKind::del_p)] = {row(1) - unit(1), s.shift(1)};
    return f;
}

namespace {

// apparatus part of a form, constant included
QuadForm apparatus_part(const QuadForm& q) {
    return {q.linear.tail(q.linear.size() - 2), q.constant};
}

bool couples_system(const QuadForm& q) {
    const double scale = 1.0 + q.linear.cwiseAbs().maxCoeff();
    return std::abs(q.linear(0)) > 1e-12 * scale || std::abs(q.linear(1)) > 1e-12 * scale;
}

} // namespace

SystemMoments gaussian_moments(const MeasurementModel& m, int probe) {
    if (probe < 1) throw DimensionError("probe must be positive");
    const ErrorForms f = error_forms(m);
    const GaussianState ga = apparatus_gaussian(m);
    const ModeSpace mode = make_mode(probe + 2, m.hbar);
    const int n = probe + 2;
    std::array<CMat, 6> sys;
    std::array<QuadForm, 6> app;
    std::array<double, 6> app_mean;
    for (int k = 0; k < 6; ++k) {
        const QuadForm& q = f.forms[k];
        sys[k] = q.linear(0) * mode.x_op + q.linear(1) * mode.p_op;
        app[k] = {q.linear.tail(q.linear.size() - 2), 0.0};
        app_mean[k] = first_moment(app[k], ga);
        sys[k] += q.constant * CMat::Identity(n, n);
    }
    SystemMoments s;
    s.probe = probe;
    const CMat id = CMat::Identity(n, n);
    for (int a = 0; a < 6; ++a) {
        s.first[a] = (sys[a] + app_mean[a] * id).topLeftCorner(probe, probe);
        for (int b = 0; b < 6; ++b) {
            const CMat full = sys[a] * sys[b] + app_mean[b] * sys[a] + app_mean[a] * sys[b] +
                              product_moment(app[a], app[b], ga) * id;
            s.product[a][b] = full.topLeftCorner(probe, probe);
        }
    }
    return s;
}

std::vector<int> refinement_probes(int probe) {
    return {probe, (4 * probe + 2) / 3, (5 * probe + 2) / 3};
}

RmsValue rms_from_refinement(const std::vector<double>& v) {
    RmsValue r;
    r.refinement = v;
    r.value = v.front();
    if (v.size() >= 3) {
        const double inc = v[2] - v[1];
        r.infinite = v[1] > v[0] && v[2] > v[1] && inc > 0.1 * v[1] && inc > 1e-8;
    }
    if (r.infinite) r.value = std::numeric_limits<double>::infinity();
    return r;
}

RmsValue gaussian_maximal_rms(const MeasurementModel& m, ErrorKind k) {
    const QuadForm q = error_forms(m)[k];
    RmsValue r;
    if (couples_system(q)) {
        r.infinite = true;
        r.value = std::numeric_limits<double>::infinity();
        return r;
    }
    r.value = std::sqrt(std::max(0.0, second_moment(apparatus_part(q), apparatus_gaussian(m))));
    return r;
}

namespace {

double top_eigenvalue(const CMat& a) {
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (a + a.adjoint()), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed");
    return es.eigenvalues().maxCoeff();
}

double spectral_norm_hermitian(const CMat& a) {
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (a + a.adjoint()), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed");
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

} // namespace

RmsValue fock_maximal_rms(const SystemMoments& moments, ErrorKind k, int probe) {
    std::vector<double> vals;
    for (int p : refinement_probes(probe)) {
        if (p > moments.probe) throw DimensionError("moments do not span the refinement levels");
        vals.push_back(std::sqrt(std::max(0.0, top_eigenvalue(moments.second(k).topLeftCorner(p, p)))));
    }
    return rms_from_refinement(vals);
}

RmsValue maximal_rms(ErrorKind k, const MeasurementModel& m, Backend b, const FockSettings& fs) {
    if (b != Backend::fock) return gaussian_maximal_rms(m, k);
    const int top = refinement_probes(fs.probe).back();
    const FockRealization f = realize(m, std::max(fs.working, top + 2));
    return fock_maximal_rms(fock_moments(f, top), k, fs.probe);
}

void validate(const RangeBox& box, double hbar) {
    if (!(box.L > 0 && box.P > 0 && box.sigma > 0 && box.tau > 0))
        throw std::invalid_argument("range box sides and spread caps must be positive");
    if (box.sigma * box.tau < hbar / 2.0 * (1.0 - 1e-12))
        throw std::invalid_argument("range box spread caps violate sigma*tau >= hbar/2");
}

bool contains(const RangeBox& o, const RangeBox& i) {
    return o.x0 - o.L / 2 <= i.x0 - i.L / 2 && i.x0 + i.L / 2 <= o.x0 + o.L / 2 && o.p0 - o.P / 2 <= i.p0 - i.P / 2 &&
           i.p0 + i.P / 2 <= o.p0 + o.P / 2 && i.sigma <= o.sigma && i.tau <= o.tau;
}

int probe_for_box(const RangeBox& box, double hbar) {
    double r2 = 0.0;
    for (double sx : {-0.5, 0.5})
        for (double sp : {-0.5, 0.5}) {
            const double x = box.x0 + sx * box.L, p = box.p0 + sp * box.P;
            r2 = std::max(r2, x * x + p * p);
        }
    const double nbar = r2 / (2.0 * hbar) + (box.sigma * box.sigma + box.tau * box.tau) / hbar;
    const int n = int(std::ceil(2.0 * nbar + 8.0 * std::sqrt(nbar + 1.0) + 16.0));
    return std::clamp(n, 16, 120);
}

ConstrainedValue constrained_maximal_rms(ErrorKind k, const MeasurementModel& m, const RangeBox& box, Backend b,
                                         const OptimizerSettings& opt, const FockSettings& fs,
                                         const std::vector<CVec>& extra_starts) {
    validate(box, m.hbar);
    CMat a;
    if (b != Backend::fock) {
        int probe = probe_for_box(box, m.hbar);
        for (const auto& s : extra_starts) probe = std::max(probe, int(s.size()));
        a = gaussian_moments(m, probe).second(k);
    } else {
        const FockRealization f = realize(m, std::max(fs.working, fs.probe + 2));
        a = fock_moments(f, fs.probe).second(k);
    }
    std::vector<CVec> starts;
    for (const auto& s : extra_starts) {
        CVec v = CVec::Zero(a.rows());
        v.head(std::min<long>(s.size(), a.rows())) = s.head(std::min<long>(s.size(), a.rows()));
        starts.push_back(v.normalized());
    }
    return constrained_supremum(a, box, m.hbar, opt, starts);
}

std::array<double, 4> unbiasedness_defect(const MeasurementModel& m, Backend b, const FockSettings& fs) {
    std::array<double, 4> d{};
    if (b != Backend::fock) {
        const ErrorForms f = error_forms(m);
        const GaussianState ga = apparatus_gaussian(m);
        for (int k = 0; k < 4; ++k) {
            const QuadForm& q = f.forms[k];
            d[k] = couples_system(q) ? std::numeric_limits<double>::infinity()
                                     : std::abs(first_moment(apparatus_part(q), ga));
        }
        return d;
    }
    const FockRealization f = realize(m, std::max(fs.working, fs.probe + 2));
    const SystemMoments s = fock_moments(f, fs.probe);
    for (int k = 0; k < 4; ++k) d[k] = spectral_norm_hermitian(s.first[k]);
    return d;
}

} // namespace jmlab
