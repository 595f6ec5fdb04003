#pragma once

#include "jmlab/models.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace jmlab {

enum class ErrorKind { eps_xi, eps_pi, eps_xf, eps_pf, del_x, del_p };

inline constexpr std::array<ErrorKind, 6> kErrorKinds = {ErrorKind::eps_xi, ErrorKind::eps_pi, ErrorKind::eps_xf,
                                                         ErrorKind::eps_pf, ErrorKind::del_x,  ErrorKind::del_p};

inline int index_of(ErrorKind k) { return int(k); }
// "ei_x", "ei_p", "ef_x", "ef_p", "d_x", "d_p"
std::string short_name(ErrorKind k);
ErrorKind parse_error_kind(const std::string& s);

struct ErrorOperators {
    std::array<OperatorMatrix, 6> ops;
    const OperatorMatrix& operator[](ErrorKind k) const { return ops[index_of(k)]; }
};

struct ErrorForms {
    int modes = 0;
    std::array<QuadForm, 6> forms;
    const QuadForm& operator[](ErrorKind k) const { return forms[index_of(k)]; }
};

// dense route, for small composites
OperatorMatrix heisenberg_final(const OperatorMatrix& o, const FockRealization& f);
ErrorOperators error_operators(const FockRealization& f);
// <i (x) phi| O |j (x) phi> over the full system factor
CMat partial_expectation(const OperatorMatrix& o, const FockRealization& f);

// Gaussian route
ErrorForms error_forms(const MeasurementModel& m);

// Per-mode truncations of the Fock backend: `dims` for dense composites,
// `probe` system levels spanned by suprema, `working` for propagation.
struct FockSettings {
    int dims = 12;
    int probe = 6;
    int working = 48;
    // Fock deltas grow `working` by 16 until the relative change is below
    // working_tol; working_cap <= working disables the growth
    int working_cap = 112;
    double working_tol = 1e-6;
};

// U O |joint> for the six operators (norm preserving images), plus U |joint>
struct ErrorVectors {
    CVec u0;
    std::array<CVec, 6> w;
};
ErrorVectors error_vectors(const FockRealization& f, const CVec& joint);

// partial expectations as matrices on the lowest `probe` system levels
struct SystemMoments {
    int probe = 0;
    std::array<CMat, 6> first;
    std::array<std::array<CMat, 6>, 6> product; // <O_a O_b>
    const CMat& second(ErrorKind k) const { return product[index_of(k)][index_of(k)]; }
    SystemMoments leading(int p) const;
};
SystemMoments fock_moments(const FockRealization& f, int probe);
SystemMoments gaussian_moments(const MeasurementModel& m, int probe);

struct RmsValue {
    double value = 0.0;
    bool infinite = false;
    std::vector<double> refinement;
};

std::vector<int> refinement_probes(int probe);
RmsValue rms_from_refinement(const std::vector<double>& values);
RmsValue gaussian_maximal_rms(const MeasurementModel& m, ErrorKind k);
// `moments` must span refinement_probes(probe).back() levels
RmsValue fock_maximal_rms(const SystemMoments& moments, ErrorKind k, int probe);
RmsValue maximal_rms(ErrorKind k, const MeasurementModel& m, Backend b, const FockSettings& fs = {});

struct RangeBox {
    double x0 = 0.0;
    double p0 = 0.0;
    double L = 1.0;
    double P = 1.0;
    double sigma = 1.0;
    double tau = 1.0;
};
void validate(const RangeBox& box, double hbar);
bool contains(const RangeBox& outer, const RangeBox& inner);

struct OptimizerSettings {
    int starts = 20;
    int max_iterations = 500;
    double step_tolerance = 1e-9;
    double value_tolerance = 1e-15; // relative gain per accepted step
    double feasibility_tolerance = 1e-8;
    std::uint64_t seed = 1;
};

struct ConstrainedValue {
    double value = 0.0;
    bool lower_bound = true;
    bool feasible = false;
    double max_violation = 0.0;
    int best_start = -1;
    CVec state; // probe-space system state attaining `value`
};

// maximise <psi|A|psi> over the box on the span of the lowest A.rows() levels;
// returns the square root of the best feasible value
ConstrainedValue constrained_supremum(const CMat& a, const RangeBox& box, double hbar,
                                      const OptimizerSettings& opt, const std::vector<CVec>& extra_starts = {});
int probe_for_box(const RangeBox& box, double hbar);
ConstrainedValue constrained_maximal_rms(ErrorKind k, const MeasurementModel& m, const RangeBox& box, Backend b,
                                         const OptimizerSettings& opt = {}, const FockSettings& fs = {},
                                         const std::vector<CVec>& extra_starts = {});

// operator norms of the partial expectations of eps_xi, eps_pi, eps_xf, eps_pf
std::array<double, 4> unbiasedness_defect(const MeasurementModel& m, Backend b, const FockSettings& fs = {});

struct PointerGrid {
    double mux_min = -6.0, mux_max = 6.0;
    double mup_min = -6.0, mup_max = 6.0;
    int nx = 121, np = 121;
};

struct PointerDistribution {
    RVec mux, mup;
    RMat density; // density(i, j) at (mux(i), mup(j))
    double mass = 0.0;
    RVec mean;    // from the table
    RMat cov;
};

// Fock route; `system` lives on the system factor of f
PointerDistribution pointer_joint_distribution(const FockRealization& f, const CVec& system, const PointerGrid& grid);
// Gaussian route: exact mean and covariance of (mu_X, mu_P) plus a tabulation
PointerDistribution pointer_joint_distribution(const MeasurementModel& m, const GaussianState& system,
                                               const PointerGrid& grid);

} // namespace jmlab
