#pragma once

#include "jmlab/gaussian.hpp"
#include "jmlab/modespace.hpp"

#include <string>
#include <utility>
#include <vector>

namespace jmlab {

enum class Backend { fock, gaussian, both };

Backend parse_backend(const std::string& s);
std::string to_string(Backend b);

// exp(-i H t / hbar) with H = 1/2 r^T G r + d^T r over `modes`
// (r ordered x, p per listed mode)
struct Stage {
    std::vector<int> modes;
    RMat coupling;
    RVec drive;
    double duration = 1.0;
};

// displaced minimum-uncertainty pointer preparation
struct ApparatusMode {
    double mean_x = 0.0;
    double mean_p = 0.0;
    double var_x = 0.5;
};

struct MeasurementModel {
    std::string name;
    Backend backend = Backend::both;
    double hbar = 1.0;
    std::vector<Role> roles;               // factor 0 is the system
    std::vector<Stage> stages;             // in order of application
    std::vector<ApparatusMode> apparatus;  // factors 1..M-1
    std::vector<std::pair<std::string, double>> parameters;

    int modes() const { return int(roles.size()); }
    int pointer_x() const;
    int pointer_p() const;
};

// a variance of 0 selects the vacuum value hbar/2
struct SwapParams {
    double hbar = 1.0;
    double pointer_x_var = 0.0;
    double pointer_p_mean = 0.0;
    double pointer_p_var = 0.0;
};

struct Bias {
    double gain_x = 1.0;
    double offset_x = 0.0;
    double gain_p = 1.0;
    double offset_p = 0.0;
};

MeasurementModel arthurs_kelly(double coupling, double pointer_squeeze, double hbar = 1.0);
MeasurementModel swap_rotation_model(const SwapParams& params = {});
MeasurementModel biased_variant(const MeasurementModel& base, const Bias& bias);
// three modes, no interaction, vacuum pointers
MeasurementModel identity_model(double hbar = 1.0);

void validate(const MeasurementModel& m);

// Gaussian backend
SymplecticModel stage_map(const Stage& st, int total_modes);
SymplecticModel symplectic_map(const MeasurementModel& m);
GaussianState apparatus_gaussian(const MeasurementModel& m);
GaussianState joint_input(const MeasurementModel& m, const GaussianState& system);

// Fock backend
struct Gate {
    std::vector<int> modes;
    bool factored = false;
    CMat dense;          // on kron(modes[0], modes[1]) when not factored
    std::vector<std::vector<int>> blocks; // invariant blocks of a two-mode dense gate
    std::vector<CMat> block_ops, block_ops_adj;
    CMat va, vb, phases; // eigenbases of the two local quadratures and the phase table
};

struct FockRealization {
    SpacePtr space;
    std::vector<Gate> gates;
    std::vector<CVec> apparatus_local;

    std::vector<int> dims() const { return space->dims(); }
    void apply(CVec& psi) const;
    void apply_adjoint(CVec& psi) const;
    CVec with_apparatus(const CVec& system) const;
    CMat dense_unitary() const;
    // quadrature of one factor applied in place
    void apply_quadrature(CVec& psi, int factor, bool momentum) const;
};

FockRealization realize(const MeasurementModel& m, const std::vector<int>& dims);
FockRealization realize(const MeasurementModel& m, int dims);

} // namespace jmlab
