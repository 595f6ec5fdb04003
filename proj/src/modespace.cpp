#include "jmlab/modespace.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace jmlab {

NotHermitian::NotHermitian(double d)
    : std::invalid_argument("operator is not Hermitian (defect " + std::to_string(d) + ")"),
      defect(d) {}

CMat lowering(int dim) {
    CMat a = CMat::Zero(dim, dim);
    for (int k = 1; k < dim; ++k) a(k - 1, k) = std::sqrt(double(k));
    return a;
}

ModeSpace make_mode(int dim, double hbar) {
    if (dim < 2) throw DimensionError("mode dimension must be at least 2, got " + std::to_string(dim));
    if (!(hbar > 0)) throw std::invalid_argument("hbar must be positive");
    ModeSpace m;
    m.dim = dim;
    m.hbar = hbar;
    const CMat a = lowering(dim);
    const CMat ad = a.adjoint();
    const double s = std::sqrt(hbar / 2.0);
    m.x_op = s * (a + ad);
    m.p_op = cplx(0, s) * (ad - a);
    return m;
}

int CompositeSpace::total_dim() const {
    int n = 1;
    for (const auto& f : factors) n *= f.dim;
    return n;
}

std::vector<int> CompositeSpace::dims() const {
    std::vector<int> d;
    for (const auto& f : factors) d.push_back(f.dim);
    return d;
}

int CompositeSpace::factor_of(Role r) const {
    for (size_t k = 0; k < roles.size(); ++k)
        if (roles[k] == r) return int(k);
    return -1;
}

SpacePtr make_space(const std::vector<int>& dims, const std::vector<Role>& roles, double hbar) {
    if (dims.empty() || dims.size() != roles.size())
        throw DimensionError("factor dims and roles must be non-empty and of equal length");
    int nsys = 0, npx = 0, npp = 0;
    for (Role r : roles) {
        nsys += r == Role::system;
        npx += r == Role::pointer_x;
        npp += r == Role::pointer_p;
    }
    if (nsys != 1) throw std::invalid_argument("composite needs exactly one system factor");
    if (npx > 1 || npp > 1) throw std::invalid_argument("pointer roles must be distinct");
    auto s = std::make_shared<CompositeSpace>();
    for (int d : dims) s->factors.push_back(make_mode(d, hbar));
    s->roles = roles;
    return s;
}

bool same_layout(const CompositeSpace& a, const CompositeSpace& b) {
    return a.dims() == b.dims() && a.roles == b.roles && a.hbar() == b.hbar();
}

static void require_same(const SpacePtr& a, const SpacePtr& b) {
    if (!a || !b) throw SpaceMismatch("operator without space");
    if (a != b && !same_layout(*a, *b)) throw SpaceMismatch("operands live on different spaces");
}

CMat kron(const CMat& a, const CMat& b) {
    CMat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

double hermiticity_defect(const CMat& m) {
    if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

OperatorMatrix embed(const CMat& local, int factor, const SpacePtr& space) {
    const int n = int(space->factors.size());
    if (factor < 0 || factor >= n) throw std::out_of_range("factor index out of range");
    if (local.rows() != space->factors[factor].dim || local.cols() != local.rows())
        throw DimensionError("local operator does not match factor dimension");
    CMat out = CMat::Identity(1, 1);
    for (int k = 0; k < n; ++k) {
        const int d = space->factors[k].dim;
        out = kron(out, k == factor ? local : CMat(CMat::Identity(d, d)));
    }
    return {space, out};
}

OperatorMatrix identity_operator(const SpacePtr& space) {
    const int n = space->total_dim();
    return {space, CMat::Identity(n, n)};
}

OperatorMatrix commutator(const OperatorMatrix& a, const OperatorMatrix& b) {
    require_same(a.space, b.space);
    return {a.space, a.entries * b.entries - b.entries * a.entries};
}

OperatorMatrix operator*(const OperatorMatrix& a, const OperatorMatrix& b) {
    require_same(a.space, b.space);
    return {a.space, a.entries * b.entries};
}

OperatorMatrix operator+(const OperatorMatrix& a, const OperatorMatrix& b) {
    require_same(a.space, b.space);
    return {a.space, a.entries + b.entries};
}

OperatorMatrix operator-(const OperatorMatrix& a, const OperatorMatrix& b) {
    require_same(a.space, b.space);
    return {a.space, a.entries - b.entries};
}

OperatorMatrix operator*(cplx c, const OperatorMatrix& a) { return {a.space, c * a.entries}; }

namespace {

int find_root(std::vector<int>& parent, int i) {
    while (parent[i] != i) {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    return i;
}

} // namespace

std::vector<std::vector<int>> sparsity_blocks(const CMat& h, double floor) {
    const int n = int(h.rows());
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            if (i != j && std::abs(h(i, j)) > floor) {
                int a = find_root(parent, i), b = find_root(parent, j);
                if (a != b) parent[std::max(a, b)] = std::min(a, b);
            }
    std::vector<std::vector<int>> blocks;
    std::vector<int> slot(n, -1);
    for (int i = 0; i < n; ++i) {
        int r = find_root(parent, i);
        if (slot[r] < 0) {
            slot[r] = int(blocks.size());
            blocks.emplace_back();
        }
        blocks[slot[r]].push_back(i);
    }
    return blocks;
}

CMat evolve_unitary(const CMat& h, double t, double hbar) {
    const double defect = hermiticity_defect(h);
    if (!(defect <= 1e-10)) throw NotHermitian(defect);
    const int n = int(h.rows());

    // entries at roundoff level of the largest one do not couple blocks
    const auto blocks = sparsity_blocks(h, 1e-14 * (n > 0 ? h.cwiseAbs().maxCoeff() : 0.0));

    CMat u = CMat::Zero(n, n);
    for (const auto& idx : blocks) {
        const int m = int(idx.size());
        CMat hb(m, m);
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) hb(a, b) = h(idx[a], idx[b]);
        hb = (0.5 * (hb + hb.adjoint())).eval();
        Eigen::SelfAdjointEigenSolver<CMat> es(hb);
        if (es.info() != Eigen::Success) throw NumericalError("eigensolver failed in evolve_unitary");
        CVec ph(m);
        for (int k = 0; k < m; ++k) ph(k) = std::exp(cplx(0, -es.eigenvalues()(k) * t / hbar));
        const CMat ub = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b) u(idx[a], idx[b]) = ub(a, b);
    }
    return u;
}

OperatorMatrix evolve_unitary(const OperatorMatrix& h, double t) {
    return {h.space, evolve_unitary(h.entries, t, h.space->hbar())};
}

StateVector make_state(const SpacePtr& space, const CVec& amplitudes) {
    if (amplitudes.size() != space->total_dim()) throw DimensionError("state size does not match space");
    const double n = amplitudes.norm();
    if (std::abs(n - 1.0) > 1e-12) throw std::invalid_argument("state is not normalised");
    return {space, amplitudes};
}

StateVector product_state(const SpacePtr& space, const std::vector<CVec>& locals) {
    if (locals.size() != space->factors.size()) throw DimensionError("one local state per factor required");
    CVec v = CVec::Ones(1);
    for (size_t k = 0; k < locals.size(); ++k) {
        if (locals[k].size() != space->factors[k].dim) throw DimensionError("local state size mismatch");
        CVec next(v.size() * locals[k].size());
        for (Eigen::Index i = 0; i < v.size(); ++i)
            next.segment(i * locals[k].size(), locals[k].size()) = v(i) * locals[k];
        v.swap(next);
    }
    v.normalize();
    return {space, v};
}

cplx expectation(const OperatorMatrix& o, const StateVector& s) {
    require_same(o.space, s.space);
    return s.amplitudes.dot(o.entries * s.amplitudes);
}

CVec fock_state(int dim, int n) {
    if (n < 0 || n >= dim) throw DimensionError("Fock level outside truncation");
    CVec v = CVec::Zero(dim);
    v(n) = 1.0;
    return v;
}

CVec coherent_state(int dim, double hbar, double x, double p) {
    const cplx alpha = cplx(x, p) / std::sqrt(2.0 * hbar);
    CVec v(dim);
    v(0) = std::exp(-0.5 * std::norm(alpha));
    for (int n = 1; n < dim; ++n) v(n) = v(n - 1) * alpha / std::sqrt(double(n));
    v.normalize();
    return v;
}

CVec squeezed_vacuum(int dim, double hbar, double var_x) {
    if (!(var_x > 0)) throw std::invalid_argument("variance must be positive");
    const double r = -0.5 * std::log(2.0 * var_x / hbar);
    const double th = std::tanh(r);
    CVec v = CVec::Zero(dim);
    v(0) = 1.0 / std::sqrt(std::cosh(r));
    for (int n = 2; n < dim; n += 2) v(n) = v(n - 2) * (-th) * std::sqrt(double(n - 1) / double(n));
    v.normalize();
    return v;
}

CVec gaussian_pure_state(int dim, double hbar, double mean_x, double mean_p, double var_x) {
    if (mean_x == 0.0 && mean_p == 0.0) return squeezed_vacuum(dim, hbar, var_x);
    const int big = std::max(2 * dim, dim + 48);
    ModeSpace m = make_mode(big, hbar);
    CVec v = displacement_local(m, mean_x, mean_p) * squeezed_vacuum(big, hbar, var_x);
    CVec out = v.head(dim);
    out.normalize();
    return out;
}

CMat displacement_local(const ModeSpace& mode, double x, double p) {
    const CMat h = -(p * mode.x_op - x * mode.p_op);
    return evolve_unitary(CMat(0.5 * (h + h.adjoint())), 1.0, mode.hbar);
}

namespace {

std::vector<long> strides_of(const std::vector<int>& dims) {
    std::vector<long> s(dims.size(), 1);
    for (int k = int(dims.size()) - 2; k >= 0; --k) s[k] = s[k + 1] * dims[k + 1];
    return s;
}

} // namespace

void apply_local(CVec& psi, const std::vector<int>& dims, int factor, const CMat& op) {
    const auto s = strides_of(dims);
    const long d = dims[factor];
    const long right = s[factor];
    const long left = psi.size() / (d * right);
    using RowBlock = Eigen::Map<Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> tmp(d, right);
    for (long l = 0; l < left; ++l) {
        RowBlock b(psi.data() + l * d * right, d, right);
        tmp.noalias() = op * b;
        b = tmp;
    }
}

void apply_pair(CVec& psi, const std::vector<int>& dims, int fa, int fb, const CMat& op) {
    const auto s = strides_of(dims);
    const long da = dims[fa], db = dims[fb];
    std::vector<long> base;
    base.reserve(psi.size() / (da * db));
    for (long i = 0; i < psi.size(); ++i)
        if ((i / s[fa]) % da == 0 && (i / s[fb]) % db == 0) base.push_back(i);
    CMat x(da * db, long(base.size()));
    for (long c = 0; c < long(base.size()); ++c)
        for (long ia = 0; ia < da; ++ia)
            for (long ib = 0; ib < db; ++ib) x(ia * db + ib, c) = psi(base[c] + ia * s[fa] + ib * s[fb]);
    const CMat y = op * x;
    for (long c = 0; c < long(base.size()); ++c)
        for (long ia = 0; ia < da; ++ia)
            for (long ib = 0; ib < db; ++ib) psi(base[c] + ia * s[fa] + ib * s[fb]) = y(ia * db + ib, c);
}

void apply_pair_blocks(CVec& psi, const std::vector<int>& dims, int fa, int fb,
                       const std::vector<std::vector<int>>& blocks, const std::vector<CMat>& ops) {
    const auto s = strides_of(dims);
    const long db = dims[fb];
    std::vector<long> base;
    base.reserve(psi.size() / (dims[fa] * db));
    for (long i = 0; i < psi.size(); ++i)
        if ((i / s[fa]) % dims[fa] == 0 && (i / s[fb]) % db == 0) base.push_back(i);
    const long nb = long(base.size());
    for (size_t k = 0; k < blocks.size(); ++k) {
        const auto& idx = blocks[k];
        const long m = long(idx.size());
        std::vector<long> off(m);
        for (long a = 0; a < m; ++a) off[a] = (idx[a] / db) * s[fa] + (idx[a] % db) * s[fb];
        CMat x(m, nb);
        for (long c = 0; c < nb; ++c)
            for (long a = 0; a < m; ++a) x(a, c) = psi(base[c] + off[a]);
        const CMat y = ops[k] * x;
        for (long c = 0; c < nb; ++c)
            for (long a = 0; a < m; ++a) psi(base[c] + off[a]) = y(a, c);
    }
}

void scale_pair(CVec& psi, const std::vector<int>& dims, int fa, int fb, const CMat& w) {
    const auto s = strides_of(dims);
    const long da = dims[fa], db = dims[fb];
    for (long i = 0; i < psi.size(); ++i) psi(i) *= w((i / s[fa]) % da, (i / s[fb]) % db);
}

} // namespace jmlab
