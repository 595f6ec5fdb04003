#include "jmlab/models.hpp"

#include <cmath>
#include <numbers>

namespace jmlab {

Backend parse_backend(const std::string& s) {
    if (s == "fock") return Backend::fock;
    if (s == "gaussian") return Backend::gaussian;
    if (s == "both") return Backend::both;
    throw std::invalid_argument("unknown backend '" + s + "'");
}

std::string to_string(Backend b) {
    switch (b) {
    case Backend::fock: return "fock";
    case Backend::gaussian: return "gaussian";
    case Backend::both: return "both";
    }
    return "?";
}

int MeasurementModel::pointer_x() const {
    for (int k = 0; k < modes(); ++k)
        if (roles[k] == Role::pointer_x) return k;
    return -1;
}

int MeasurementModel::pointer_p() const {
    for (int k = 0; k < modes(); ++k)
        if (roles[k] == Role::pointer_p) return k;
    return -1;
}

namespace {

// H = c q_a q_b between two modes
Stage product_stage(int ma, bool pa, int mb, bool pb, double c, double t = 1.0) {
    Stage st;
    st.modes = {ma, mb};
    st.coupling = RMat::Zero(4, 4);
    st.coupling(pa ? 1 : 0, 2 + (pb ? 1 : 0)) = c;
    st.coupling(2 + (pb ? 1 : 0), pa ? 1 : 0) = c;
    st.drive = RVec::Zero(4);
    st.duration = t;
    return st;
}

const std::vector<Role> kLayout = {Role::system, Role::pointer_x, Role::pointer_p};

} // namespace

MeasurementModel arthurs_kelly(double coupling, double pointer_squeeze, double hbar) {
    if (coupling == 0.0 || !std::isfinite(coupling)) throw std::invalid_argument("coupling must be nonzero");
    if (!(pointer_squeeze > 0)) throw std::invalid_argument("pointer squeeze must be positive");
    MeasurementModel m;
    m.name = "arthurs_kelly";
    m.hbar = hbar;
    m.roles = kLayout;
    const double k = coupling;
    // exp(-ik(x piX + p piP)) = exp(-ik x piX) exp(-ik p piP) exp(+ik^2 piX piP / 2)
    m.stages.push_back(product_stage(1, true, 2, true, -0.5 * k * k));
    m.stages.push_back(product_stage(0, true, 2, true, k));
    m.stages.push_back(product_stage(0, false, 1, true, k));
    m.apparatus = {{0.0, 0.0, pointer_squeeze * hbar / 4.0}, {0.0, 0.0, hbar / (4.0 * pointer_squeeze)}};
    m.parameters = {{"coupling", coupling}, {"pointer_squeeze", pointer_squeeze}};
    return m;
}

MeasurementModel swap_rotation_model(const SwapParams& params) {
    const double hbar = params.hbar;
    MeasurementModel m;
    m.name = "swap_rotation";
    m.hbar = hbar;
    m.roles = kLayout;
    Stage st;
    st.modes = {0, 1};
    st.coupling = RMat::Zero(4, 4);
    // H = x piX - muX p
    st.coupling(0, 3) = st.coupling(3, 0) = 1.0;
    st.coupling(1, 2) = st.coupling(2, 1) = -1.0;
    st.drive = RVec::Zero(4);
    st.duration = std::numbers::pi / 2.0;
    m.stages.push_back(st);
    const double vx = params.pointer_x_var > 0 ? params.pointer_x_var : hbar / 2.0;
    const double vp = params.pointer_p_var > 0 ? params.pointer_p_var : hbar / 2.0;
    m.apparatus = {{0.0, 0.0, vx}, {params.pointer_p_mean, 0.0, vp}};
    m.parameters = {{"pointer_x_var", vx}, {"pointer_p_mean", params.pointer_p_mean}, {"pointer_p_var", vp}};
    return m;
}

MeasurementModel identity_model(double hbar) {
    MeasurementModel m;
    m.name = "identity";
    m.hbar = hbar;
    m.roles = kLayout;
    m.apparatus = {{0.0, 0.0, hbar / 2.0}, {0.0, 0.0, hbar / 2.0}};
    return m;
}

MeasurementModel biased_variant(const MeasurementModel& base, const Bias& bias) {
    if (bias.gain_x == 0.0 || bias.gain_p == 0.0) throw std::invalid_argument("pointer gain must be nonzero");
    MeasurementModel m = base;
    m.name = "biased:" + base.name;
    auto add = [&](int mode, double gain, double offset) {
        if (gain < 0) {
            Stage rot{{mode}, RMat::Identity(2, 2), RVec::Zero(2), std::numbers::pi};
            m.stages.push_back(rot);
        }
        if (std::abs(gain) != 1.0) {
            const double a = std::log(std::abs(gain));
            Stage sq{{mode}, RMat::Zero(2, 2), RVec::Zero(2), 1.0};
            sq.coupling(0, 1) = sq.coupling(1, 0) = a;
            m.stages.push_back(sq);
        }
        if (offset != 0.0) {
            Stage sh{{mode}, RMat::Zero(2, 2), RVec::Zero(2), 1.0};
            sh.drive(1) = offset;
            m.stages.push_back(sh);
        }
    };
    add(base.pointer_x(), bias.gain_x, bias.offset_x);
    add(base.pointer_p(), bias.gain_p, bias.offset_p);
    m.parameters.push_back({"gain_x", bias.gain_x});
    m.parameters.push_back({"offset_x", bias.offset_x});
    m.parameters.push_back({"gain_p", bias.gain_p});
    m.parameters.push_back({"offset_p", bias.offset_p});
    return m;
}

void validate(const MeasurementModel& m) {
    if (m.roles.empty() || m.roles[0] != Role::system) throw std::invalid_argument("factor 0 must be the system");
    if (int(m.apparatus.size()) != m.modes() - 1) throw std::invalid_argument("one apparatus state per pointer factor");
    if (m.pointer_x() < 0 || m.pointer_p() < 0) throw std::invalid_argument("model lacks a pointer");
    for (const auto& a : m.apparatus)
        if (!(a.var_x > 0)) throw std::invalid_argument("apparatus variance must be positive");
    for (const auto& st : m.stages) {
        const long k = long(st.modes.size());
        if (k < 1 || k > 2) throw std::invalid_argument("stages act on one or two modes");
        for (int md : st.modes)
            if (md < 0 || md >= m.modes()) throw std::out_of_range("stage mode out of range");
        if (st.coupling.rows() != 2 * k || st.coupling.cols() != 2 * k || st.drive.size() != 2 * k)
            throw DimensionError("stage coupling size mismatch");
    }
}

SymplecticModel stage_map(const Stage& st, int total_modes) {
    return affine_from_quadratic(lift_coupling(st.coupling, st.modes, total_modes),
                                 lift_drive(st.drive, st.modes, total_modes), st.duration);
}

SymplecticModel symplectic_map(const MeasurementModel& m) {
    SymplecticModel s = identity_map(m.modes());
    for (const auto& st : m.stages) s = compose(stage_map(st, m.modes()), s);
    return s;
}

GaussianState apparatus_gaussian(const MeasurementModel& m) {
    GaussianState g = single_mode_state(m.hbar, m.apparatus[0].mean_x, m.apparatus[0].mean_p, m.apparatus[0].var_x);
    for (size_t k = 1; k < m.apparatus.size(); ++k)
        g = direct_sum(g, single_mode_state(m.hbar, m.apparatus[k].mean_x, m.apparatus[k].mean_p, m.apparatus[k].var_x));
    return g;
}

GaussianState joint_input(const MeasurementModel& m, const GaussianState& system) {
    if (system.modes != 1) throw DimensionError("system state must be single-mode");
    return direct_sum(system, apparatus_gaussian(m));
}

namespace {

// single product of local quadratures between two modes, if that is what G is
bool product_form(const Stage& st, int& ia, int& ib, double& c) {
    if (st.modes.size() != 2 || st.drive.cwiseAbs().maxCoeff() != 0.0) return false;
    if (st.coupling.topLeftCorner(2, 2).cwiseAbs().maxCoeff() != 0.0) return false;
    if (st.coupling.bottomRightCorner(2, 2).cwiseAbs().maxCoeff() != 0.0) return false;
    int count = 0;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
            if (st.coupling(a, 2 + b) != 0.0) {
                ++count;
                ia = a;
                ib = b;
                c = st.coupling(a, 2 + b);
            }
    return count == 1;
}

Gate build_gate(const Stage& st, const CompositeSpace& space) {
    const double hbar = space.hbar();
    Gate g;
    g.modes = st.modes;
    int ia = 0, ib = 0;
    double c = 0;
    if (product_form(st, ia, ib, c)) {
        const ModeSpace& ma = space.factors[st.modes[0]];
        const ModeSpace& mb = space.factors[st.modes[1]];
        Eigen::SelfAdjointEigenSolver<CMat> ea(ia ? ma.p_op : ma.x_op), eb(ib ? mb.p_op : mb.x_op);
        g.factored = true;
        g.va = ea.eigenvectors();
        g.vb = eb.eigenvectors();
        g.phases.resize(ma.dim, mb.dim);
        for (int a = 0; a < ma.dim; ++a)
            for (int b = 0; b < mb.dim; ++b)
                g.phases(a, b) = std::exp(cplx(0, -c * st.duration * ea.eigenvalues()(a) * eb.eigenvalues()(b) / hbar));
        return g;
    }
    auto local = [&](int a) -> const CMat& {
        const ModeSpace& mk = space.factors[st.modes[a / 2]];
        return a % 2 ? mk.p_op : mk.x_op;
    };
    CMat h;
    if (st.modes.size() == 1) {
        h = CMat::Zero(local(0).rows(), local(0).rows());
        for (int a = 0; a < 2; ++a) {
            if (st.drive(a) != 0.0) h += st.drive(a) * local(a);
            for (int b = 0; b < 2; ++b)
                if (st.coupling(a, b) != 0.0) h += 0.5 * st.coupling(a, b) * (local(a) * local(b));
        }
    } else {
        const long da = space.factors[st.modes[0]].dim, db = space.factors[st.modes[1]].dim;
        const CMat ia_ = CMat::Identity(da, da), ib_ = CMat::Identity(db, db);
        h = CMat::Zero(da * db, da * db);
        for (int a = 0; a < 4; ++a) {
            if (st.drive(a) != 0.0) h += st.drive(a) * (a < 2 ? kron(local(a), ib_) : kron(ia_, local(a)));
            for (int b = 0; b < 4; ++b) {
                const double c = st.coupling(a, b);
                if (c == 0.0) continue;
                if (a / 2 == b / 2) {
                    const CMat prod = local(a) * local(b);
                    h += 0.5 * c * (a < 2 ? kron(prod, ib_) : kron(ia_, prod));
                } else {
                    h += 0.5 * c * (a < 2 ? kron(local(a), local(b)) : kron(local(b), local(a)));
                }
            }
        }
    }
    h = (0.5 * (h + h.adjoint())).eval();
    g.dense = evolve_unitary(h, st.duration, hbar);
    if (st.modes.size() == 2) {
        // evolve_unitary leaves exact zeros between invariant blocks
        g.blocks = sparsity_blocks(g.dense);
        if (g.blocks.size() > 1) {
            for (const auto& idx : g.blocks) {
                const int m = int(idx.size());
                CMat b(m, m);
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < m; ++j) b(i, j) = g.dense(idx[i], idx[j]);
                g.block_ops.push_back(b);
                g.block_ops_adj.push_back(b.adjoint());
            }
        } else {
            g.blocks.clear();
        }
    }
    return g;
}

void apply_gate(const Gate& g, CVec& psi, const std::vector<int>& dims, bool adjoint) {
    if (g.factored) {
        apply_local(psi, dims, g.modes[0], g.va.adjoint());
        apply_local(psi, dims, g.modes[1], g.vb.adjoint());
        scale_pair(psi, dims, g.modes[0], g.modes[1], adjoint ? CMat(g.phases.conjugate()) : g.phases);
        apply_local(psi, dims, g.modes[0], g.va);
        apply_local(psi, dims, g.modes[1], g.vb);
    } else if (g.modes.size() == 1) {
        apply_local(psi, dims, g.modes[0], adjoint ? CMat(g.dense.adjoint()) : g.dense);
    } else if (!g.blocks.empty()) {
        apply_pair_blocks(psi, dims, g.modes[0], g.modes[1], g.blocks, adjoint ? g.block_ops_adj : g.block_ops);
    } else {
        apply_pair(psi, dims, g.modes[0], g.modes[1], adjoint ? CMat(g.dense.adjoint()) : g.dense);
    }
}

} // namespace

void FockRealization::apply(CVec& psi) const {
    const auto d = dims();
    for (const auto& g : gates) apply_gate(g, psi, d, false);
}

void FockRealization::apply_adjoint(CVec& psi) const {
    const auto d = dims();
    for (auto it = gates.rbegin(); it != gates.rend(); ++it) apply_gate(*it, psi, d, true);
}

CVec FockRealization::with_apparatus(const CVec& system) const {
    std::vector<CVec> locals{system};
    locals.insert(locals.end(), apparatus_local.begin(), apparatus_local.end());
    CVec v = CVec::Ones(1);
    for (const auto& l : locals) {
        CVec next(v.size() * l.size());
        for (Eigen::Index i = 0; i < v.size(); ++i) next.segment(i * l.size(), l.size()) = v(i) * l;
        v.swap(next);
    }
    return v;
}

CMat FockRealization::dense_unitary() const {
    const int n = space->total_dim();
    CMat u(n, n);
    for (int j = 0; j < n; ++j) {
        CVec e = CVec::Zero(n);
        e(j) = 1.0;
        apply(e);
        u.col(j) = e;
    }
    return u;
}

void FockRealization::apply_quadrature(CVec& psi, int factor, bool momentum) const {
    const ModeSpace& m = space->factors[factor];
    apply_local(psi, dims(), factor, momentum ? m.p_op : m.x_op);
}

FockRealization realize(const MeasurementModel& m, const std::vector<int>& dims) {
    validate(m);
    if (int(dims.size()) != m.modes()) throw DimensionError("one truncation per mode required");
    FockRealization f;
    f.space = make_space(dims, m.roles, m.hbar);
    for (const auto& st : m.stages) f.gates.push_back(build_gate(st, *f.space));
    for (int k = 1; k < m.modes(); ++k) {
        const auto& a = m.apparatus[k - 1];
        f.apparatus_local.push_back(gaussian_pure_state(dims[k], m.hbar, a.mean_x, a.mean_p, a.var_x));
    }
    return f;
}

FockRealization realize(const MeasurementModel& m, int dims) {
    return realize(m, std::vector<int>(m.modes(), dims));
}

} // namespace jmlab
