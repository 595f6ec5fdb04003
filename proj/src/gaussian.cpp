#include "jmlab/gaussian.hpp"

#include <unsupported/Eigen/MatrixFunctions>

namespace jmlab {

RMat symplectic_form(int modes) {
    RMat om = RMat::Zero(2 * modes, 2 * modes);
    for (int k = 0; k < modes; ++k) {
        om(2 * k, 2 * k + 1) = 1.0;
        om(2 * k + 1, 2 * k) = -1.0;
    }
    return om;
}

double symplectic_defect(const RMat& s) {
    const RMat om = symplectic_form(int(s.rows() / 2));
    return (s * om * s.transpose() - om).cwiseAbs().maxCoeff();
}

double physicality_margin(const RMat& cov, double hbar) {
    const int n = int(cov.rows());
    CMat m = cov.cast<cplx>() + cplx(0, hbar / 2) * symplectic_form(n / 2).cast<cplx>();
    Eigen::SelfAdjointEigenSolver<CMat> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

void validate(const GaussianState& g) {
    const int n = 2 * g.modes;
    if (g.mean.size() != n || g.cov.rows() != n || g.cov.cols() != n)
        throw DimensionError("Gaussian state dimensions inconsistent with mode count");
    if ((g.cov - g.cov.transpose()).cwiseAbs().maxCoeff() > 1e-10)
        throw std::invalid_argument("covariance is not symmetric");
    if (physicality_margin(g.cov, g.hbar) < -1e-10)
        throw std::invalid_argument("covariance violates the uncertainty principle");
}

SymplecticModel identity_map(int modes) {
    return {RMat::Identity(2 * modes, 2 * modes), RVec::Zero(2 * modes)};
}

SymplecticModel symplectic_from_quadratic(const RMat& g, double t) {
    if (g.rows() != g.cols() || g.rows() % 2 != 0) throw DimensionError("coupling must be 2M x 2M");
    if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw std::invalid_argument("coupling is not symmetric");
    const RMat a = symplectic_form(int(g.rows() / 2)) * g * t;
    return {a.exp(), RVec::Zero(g.rows())};
}

SymplecticModel affine_from_quadratic(const RMat& g, const RVec& d, double t) {
    if (d.size() != g.rows()) throw DimensionError("drive size mismatch");
    if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw std::invalid_argument("coupling is not symmetric");
    const int n = int(g.rows());
    const RMat om = symplectic_form(n / 2);
    RMat aug = RMat::Zero(n + 1, n + 1);
    aug.topLeftCorner(n, n) = om * g * t;
    aug.topRightCorner(n, 1) = om * d * t;
    const RMat e = aug.exp();
    return {e.topLeftCorner(n, n), e.topRightCorner(n, 1)};
}

SymplecticModel compose(const SymplecticModel& later, const SymplecticModel& earlier) {
    if (later.S.rows() != earlier.S.rows()) throw DimensionError("symplectic maps of different size");
    return {later.S * earlier.S, later.S * earlier.shift + later.shift};
}

GaussianState push_state(const SymplecticModel& m, const GaussianState& g) {
    if (m.S.rows() != g.mean.size()) throw DimensionError("model and state sizes differ");
    GaussianState out = g;
    out.mean = m.S * g.mean + m.shift;
    out.cov = m.S * g.cov * m.S.transpose();
    out.cov = (0.5 * (out.cov + out.cov.transpose())).eval();
    return out;
}

double first_moment(const QuadForm& q, const GaussianState& g) {
    if (q.linear.size() != g.mean.size()) throw DimensionError("observable and state sizes differ");
    return q.linear.dot(g.mean) + q.constant;
}

double second_moment(const QuadForm& q, const GaussianState& g) {
    const double m = first_moment(q, g);
    return q.linear.dot(g.cov * q.linear) + m * m;
}

cplx product_moment(const QuadForm& q1, const QuadForm& q2, const GaussianState& g) {
    const double m1 = first_moment(q1, g), m2 = first_moment(q2, g);
    const double sym = q1.linear.dot(g.cov * q2.linear);
    const double anti = q1.linear.dot(symplectic_form(g.modes) * q2.linear);
    return cplx(sym + m1 * m2, 0.5 * g.hbar * anti);
}

GaussianState vacuum_state(int modes, double hbar) {
    return {modes, RVec::Zero(2 * modes), 0.5 * hbar * RMat::Identity(2 * modes, 2 * modes), hbar};
}

GaussianState single_mode_state(double hbar, double mean_x, double mean_p, double var_x) {
    if (!(var_x > 0)) throw std::invalid_argument("variance must be positive");
    GaussianState g{1, RVec(2), RMat::Zero(2, 2), hbar};
    g.mean << mean_x, mean_p;
    g.cov(0, 0) = var_x;
    g.cov(1, 1) = hbar * hbar / (4.0 * var_x);
    return g;
}

GaussianState direct_sum(const GaussianState& a, const GaussianState& b) {
    if (a.hbar != b.hbar) throw std::invalid_argument("hbar mismatch");
    GaussianState g;
    g.modes = a.modes + b.modes;
    g.hbar = a.hbar;
    g.mean.resize(2 * g.modes);
    g.mean << a.mean, b.mean;
    g.cov = RMat::Zero(2 * g.modes, 2 * g.modes);
    g.cov.topLeftCorner(2 * a.modes, 2 * a.modes) = a.cov;
    g.cov.bottomRightCorner(2 * b.modes, 2 * b.modes) = b.cov;
    return g;
}

RMat lift_coupling(const RMat& local, const std::vector<int>& modes, int total_modes) {
    const int k = int(modes.size());
    if (local.rows() != 2 * k || local.cols() != 2 * k) throw DimensionError("local coupling size mismatch");
    RMat g = RMat::Zero(2 * total_modes, 2 * total_modes);
    for (int a = 0; a < 2 * k; ++a)
        for (int b = 0; b < 2 * k; ++b) g(2 * modes[a / 2] + a % 2, 2 * modes[b / 2] + b % 2) += local(a, b);
    return g;
}

RVec lift_drive(const RVec& local, const std::vector<int>& modes, int total_modes) {
    RVec d = RVec::Zero(2 * total_modes);
    for (int a = 0; a < int(local.size()); ++a) d(2 * modes[a / 2] + a % 2) += local(a);
    return d;
}

QuadForm quadrature(int modes, int mode, bool momentum) {
    QuadForm q{RVec::Zero(2 * modes), 0.0};
    q.linear(2 * mode + (momentum ? 1 : 0)) = 1.0;
    return q;
}

} // namespace jmlab
