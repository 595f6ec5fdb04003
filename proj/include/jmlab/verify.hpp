#pragma once

#include "jmlab/errlab.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace jmlab {

// log2-style order from errors at spacing h and h/ratio. Both errors at or
// below `floor` means the discretisation is exact; reported as +inf.
double convergence_order(double coarse, double fine, double ratio = 2.0, double floor = 1e-12);

// exp[(i/hbar)(p x_op - x p_op)]; warns when (x^2+p^2)/(2 hbar) > dim/4
CMat displacement_operator(const ModeSpace& mode, double x, double p, std::vector<std::string>* warnings = nullptr);

struct DisplacementReport {
    int interior = 0; // residuals measured on the lowest `interior` levels
    double unitarity = 0.0;
    double shift_x = 0.0; // |D^dag x D - (x + x0)|
    double shift_p = 0.0;
    double group_law = 0.0;   // D1 D2 - phase D12, analytic phase
    double phase_modulus = 0.0;
    std::array<double, 2> deriv_x{}; // at h and h/2
    std::array<double, 2> deriv_p{};
    double order_x = 0.0, order_p = 0.0;
    std::vector<std::string> warnings;
};
DisplacementReport check_displacement(const ModeSpace& mode, double x, double p, double x2, double p2,
                                      double h = 0.05);

struct IdentityResidual {
    std::string name;
    std::string statement;
    double projected = 0.0; // on Range(Pi) n Range(U^dag Pi U)
    double raw = 0.0;       // full truncated space, power iteration
};

struct CommutatorReport {
    std::string model;
    int dims = 0;
    int subspace_dim = 0;
    double leakage = 0.0; // |(1 - Pi) U V| for the subspace basis V
    std::vector<IdentityResidual> rows;
    double seconds = 0.0;
};

// Pi keeps Fock levels 0..dims-3 of every factor
CommutatorReport check_commutator_identities(const MeasurementModel& m, int dims = 12, std::uint64_t seed = 1);

struct PhaseSpaceBox {
    double x0 = 0.0, p0 = 0.0;
    double L = 1.0, P = 1.0;
    int nx = 9, np = 9;
};
void validate(const PhaseSpaceBox& box);

struct DivergenceGrid {
    int nx = 0, np = 0;
    double hx = 0.0, hp = 0.0;
    double pointwise = 0.0;  // max |<[e_xi, e_pi]> + i hbar (1 + div v)| over the grid
    double volume = 0.0;     // trapezoid integral of the finite-difference divergence
    double flux = 0.0;       // trapezoid boundary integral of n.v
    double flux_residual = 0.0;
};

struct DivergenceReport {
    DivergenceGrid coarse, fine;
    double pointwise_order = 0.0;
    double flux_order = 0.0;
    double max_abs_v = 0.0;
    double mean_divergence = 0.0;
    double commutator_imag = 0.0; // Im <[e_xi, e_pi]>, state independent for linear errors
    double delta_ei_x = 0.0, delta_ei_p = 0.0;
    std::vector<std::string> chain_names;
    std::vector<double> chain; // each term bounds the next from above
    bool chain_holds = false;
    std::optional<double> fock_center_residual;
    std::vector<std::string> warnings;
};

// psi is the undisplaced system state; grid points are displacements of it
DivergenceReport box_average_divergence_check(const MeasurementModel& m, const GaussianState& psi,
                                              const PhaseSpaceBox& box, bool fock_cross_check = false,
                                              const FockSettings& fs = {});

struct Relation {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    std::optional<double> margin; // empty when undefined
    std::string flag = "ok";
};

struct InequalityMargins {
    std::vector<Relation> relations;
    bool confirmation_only = false; // constrained values are lower bounds
    const Relation* find(const std::string& name) const;
    double worst_margin() const; // over defined relations
};

inline constexpr const char* kUndefinedFlag = "undefined_0_times_inf";

struct ErrorReport {
    Backend backend = Backend::gaussian;
    std::array<RmsValue, 6> delta;
    std::optional<std::array<RmsValue, 6>> delta_fock; // backend both
    int fock_working = 0;
    bool fock_converged = true;
    std::optional<RangeBox> box;
    std::optional<std::array<ConstrainedValue, 6>> constrained;
    std::array<double, 4> defects{};
    InequalityMargins margins;
};

// product relation lhs = a * b against rhs, flags 0 x inf
Relation product_relation(const std::string& name, const RmsValue& a, const RmsValue& b, double rhs);

struct PointerCheck {
    double product = 0.0; // Delta mu_X Delta mu_P of the final pointers
    double margin = 0.0;  // product - hbar
    std::optional<double> fock_product;
    std::string warning;
};
PointerCheck arthurs_kelly_pointer_check(const MeasurementModel& m, const GaussianState& psi, Backend b = Backend::gaussian,
                                         const FockSettings& fs = {});

InequalityMargins check_seven_inequalities(const MeasurementModel& m, const std::optional<RangeBox>& box,
                                           Backend b = Backend::gaussian, const FockSettings& fs = {},
                                           const OptimizerSettings& opt = {},
                                           const std::optional<GaussianState>& input = std::nullopt);

ErrorReport error_report(const MeasurementModel& m, const std::optional<RangeBox>& box, Backend b,
                         const FockSettings& fs = {}, const OptimizerSettings& opt = {},
                         const std::optional<GaussianState>& input = std::nullopt);

// |P e_Xi P| for the swap model, P onto states with n_sys + n_ptrX <= d - 2 and
// n_ptrP <= d - 3, where the truncated passive generator is exact
double swap_interior_eps_xi_norm(const MeasurementModel& m, int d);

struct VarianceIdentity {
    double lhs_gaussian = 0.0;
    std::optional<double> lhs_fock;
    double rhs = 0.0;
    double residual_gaussian = 0.0;
    std::optional<double> residual_fock;
    double truncation_loss = 0.0; // weight of the prepared states above `working` levels
};
// swap model, <e_pi^2> = (D mu_P)^2 + (D p)^2 + (<mu_P> - <p>)^2 for a Gaussian system input.
// The Fock side is skipped when the inputs lose more than 1e-12 to truncation.
VarianceIdentity appendix_variance_identity_check(const GaussianState& psi, double pointer_p_mean, double pointer_p_var,
                                                  int working = 0);

// the five per-state products that need uniform unbiasedness
inline constexpr std::array<const char*, 5> kPerStateNames = {
    "retrodictive_errors", "retro_x_disturb_p", "pred_x_disturb_p", "retro_p_disturb_x", "pred_p_disturb_x"};

struct PerStateBounds {
    bool premise = false; // all four defects < 1e-8
    int states = 0;
    std::array<double, 5> min_margin{}; // min over states of product - hbar^2/4
    std::optional<std::array<double, 5>> fock_min_margin;
};
std::array<double, 5> per_state_margins(const SystemMoments& s, const CVec& psi, double hbar);
PerStateBounds per_state_bounds(const MeasurementModel& m, int states, std::uint64_t seed, Backend b = Backend::gaussian,
                                const FockSettings& fs = {});

struct BackendAgreement {
    double max_relative = 0.0;
    double max_absolute_at_zero = 0.0; // channels whose exact moment vanishes
    int samples = 0;
    int working = 0;         // truncation the comparison was made at
    double self_change = 0.0; // Fock-only relative change against the previous truncation
    bool converged = false;
};
// coherent system inputs at the listed means. The truncation grows from
// `working` in steps of 16 until two successive Fock results differ by less
// than `self_tol` (relative), or `cap` is reached.
BackendAgreement backend_cross_validation(const MeasurementModel& m, const std::vector<std::array<double, 2>>& means,
                                          int working, int cap = 128, double self_tol = 2e-7);

} // namespace jmlab
