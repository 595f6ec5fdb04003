#pragma once

#include "jmlab/modespace.hpp"

namespace jmlab {

// quadrature ordering (x1, p1, x2, p2, ...)
struct GaussianState {
    int modes = 0;
    RVec mean;
    RMat cov;
    double hbar = 1.0;
};

// Heisenberg action r -> S r + shift
struct SymplecticModel {
    RMat S;
    RVec shift;
};

// observable linear . r + constant
struct QuadForm {
    RVec linear;
    double constant = 0.0;
};

RMat symplectic_form(int modes);
double symplectic_defect(const RMat& s);
// smallest eigenvalue of cov + (i hbar / 2) Omega
double physicality_margin(const RMat& cov, double hbar);
void validate(const GaussianState& g);

SymplecticModel identity_map(int modes);
SymplecticModel symplectic_from_quadratic(const RMat& g, double t);
// H = 1/2 r^T G r + d^T r evolved for time t
SymplecticModel affine_from_quadratic(const RMat& g, const RVec& d, double t);
// Heisenberg map of "earlier, then later"
SymplecticModel compose(const SymplecticModel& later, const SymplecticModel& earlier);

GaussianState push_state(const SymplecticModel& m, const GaussianState& g);
double first_moment(const QuadForm& q, const GaussianState& g);
double second_moment(const QuadForm& q, const GaussianState& g);
// <q1 q2> for linear observables, complex because of the commutator
cplx product_moment(const QuadForm& q1, const QuadForm& q2, const GaussianState& g);

GaussianState vacuum_state(int modes, double hbar = 1.0);
GaussianState single_mode_state(double hbar, double mean_x, double mean_p, double var_x);
GaussianState direct_sum(const GaussianState& a, const GaussianState& b);

// coupling on a subset of modes lifted to the full 2M x 2M layout
RMat lift_coupling(const RMat& local, const std::vector<int>& modes, int total_modes);
RVec lift_drive(const RVec& local, const std::vector<int>& modes, int total_modes);

QuadForm quadrature(int modes, int mode, bool momentum);

} // namespace jmlab
