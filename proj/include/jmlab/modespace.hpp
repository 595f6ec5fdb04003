#pragma once

#include <Eigen/Dense>
#include <complex>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace jmlab {

using cplx = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct SpaceMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct NotHermitian : std::invalid_argument {
    double defect;
    explicit NotHermitian(double d);
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ModeSpace {
    int dim = 0;
    double hbar = 1.0;
    CMat x_op;
    CMat p_op;
};

CMat lowering(int dim);
ModeSpace make_mode(int dim, double hbar = 1.0);

enum class Role { system, pointer_x, pointer_p, auxiliary };

struct CompositeSpace {
    std::vector<ModeSpace> factors;
    std::vector<Role> roles;

    int total_dim() const;
    std::vector<int> dims() const;
    int factor_of(Role r) const; // -1 when absent
    double hbar() const { return factors.front().hbar; }
};

using SpacePtr = std::shared_ptr<const CompositeSpace>;

SpacePtr make_space(const std::vector<int>& dims, const std::vector<Role>& roles,
                    double hbar = 1.0);
bool same_layout(const CompositeSpace& a, const CompositeSpace& b);

struct OperatorMatrix {
    SpacePtr space;
    CMat entries;
};

struct StateVector {
    SpacePtr space;
    CVec amplitudes;
};

CMat kron(const CMat& a, const CMat& b);
double hermiticity_defect(const CMat& m);

OperatorMatrix embed(const CMat& local, int factor, const SpacePtr& space);
OperatorMatrix identity_operator(const SpacePtr& space);
OperatorMatrix commutator(const OperatorMatrix& a, const OperatorMatrix& b);
OperatorMatrix operator*(const OperatorMatrix& a, const OperatorMatrix& b);
OperatorMatrix operator+(const OperatorMatrix& a, const OperatorMatrix& b);
OperatorMatrix operator-(const OperatorMatrix& a, const OperatorMatrix& b);
OperatorMatrix operator*(cplx c, const OperatorMatrix& a);

// exp(-i H t / hbar). H is split into the connected blocks of its sparsity
// pattern before diagonalising, so passive generators stay cheap.
CMat evolve_unitary(const CMat& h, double t, double hbar);
OperatorMatrix evolve_unitary(const OperatorMatrix& h, double t);

StateVector make_state(const SpacePtr& space, const CVec& amplitudes);
StateVector product_state(const SpacePtr& space, const std::vector<CVec>& locals);
cplx expectation(const OperatorMatrix& o, const StateVector& s);

// single-mode states
CVec fock_state(int dim, int n);
CVec coherent_state(int dim, double hbar, double x, double p);
CVec squeezed_vacuum(int dim, double hbar, double var_x);
// displaced minimum-uncertainty state with Var(x) = var_x
CVec gaussian_pure_state(int dim, double hbar, double mean_x, double mean_p, double var_x);

// exp[(i/hbar)(p x_op - x p_op)] on one truncated mode
CMat displacement_local(const ModeSpace& mode, double x, double p);

// Tensor kernels. Amplitudes are stored row-major over factors: factor 0 is the
// most significant index, matching kron(A0, kron(A1, ...)).
void apply_local(CVec& psi, const std::vector<int>& dims, int factor, const CMat& op);
void apply_pair(CVec& psi, const std::vector<int>& dims, int fa, int fb, const CMat& op);
// op block-diagonal over the pair index ia * dims[fb] + ib; blocks[k] lists the
// pair indices of ops[k]
void apply_pair_blocks(CVec& psi, const std::vector<int>& dims, int fa, int fb,
                       const std::vector<std::vector<int>>& blocks, const std::vector<CMat>& ops);
// connected components of the nonzero pattern of a square matrix
std::vector<std::vector<int>> sparsity_blocks(const CMat& m, double floor = 0.0);
// multiplies amplitude (.., ia, .., ib, ..) by w(ia, ib)
void scale_pair(CVec& psi, const std::vector<int>& dims, int fa, int fb, const CMat& w);

} // namespace jmlab
