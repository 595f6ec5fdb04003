// One line per acceptance criterion. Exit status is the number of failures.
#include "jmlab/scenario.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <sys/wait.h>

using namespace jmlab;
namespace fs = std::filesystem;

namespace {

constexpr double hbar = 1.0;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string g(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

struct Named {
    std::string label;
    MeasurementModel model;
};

std::vector<Named> catalog() {
    const MeasurementModel balanced = arthurs_kelly(1.0, 1.0, hbar);
    return {{"ak s=1/4", arthurs_kelly(1.0, 0.25, hbar)},
            {"ak s=1", balanced},
            {"ak s=4", arthurs_kelly(1.0, 4.0, hbar)},
            {"swap", swap_rotation_model({hbar, 0.0, 0.0, 0.0})},
            {"gain 2", biased_variant(balanced, {2.0, 0.0, 1.0, 0.0})},
            {"offset", biased_variant(balanced, {1.0, 0.5, 1.0, -0.3})}};
}

bool unbiased(const MeasurementModel& m) {
    const auto d = unbiasedness_defect(m, Backend::gaussian);
    return std::all_of(d.begin(), d.end(), [](double v) { return v < 1e-8; });
}

double product(const std::array<RmsValue, 6>& d, ErrorKind a, ErrorKind b) {
    const RmsValue& u = d[index_of(a)];
    const RmsValue& v = d[index_of(b)];
    if (u.infinite || v.infinite) return std::numeric_limits<double>::infinity();
    return u.value * v.value;
}

Outcome commutator_suite() {
    double worst = 0.0;
    int smallest = -1;
    std::string where;
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& [label, m] : catalog()) {
        const CommutatorReport r = check_commutator_identities(m, 12);
        if (smallest < 0 || r.subspace_dim < smallest) smallest = r.subspace_dim;
        for (const auto& row : r.rows)
            if (row.projected >= worst) {
                worst = row.projected;
                where = label + " " + row.name;
            }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {worst < 1e-8 && secs < 60.0 && smallest > 0,
            "worst projected residual " + g(worst) + " (" + where + ") < 1e-8, dims 12^3, smallest interior subspace " +
                std::to_string(smallest) + ", " + g(secs) + " s < 60 s"};
}

Outcome predictive_relation() {
    bool ok = true;
    std::ostringstream s;
    double worst_rel = 0.0;
    for (const auto& [label, m] : catalog()) {
        const ErrorReport r = error_report(m, std::nullopt, Backend::both);
        const double pg = product(r.delta, ErrorKind::eps_xf, ErrorKind::eps_pf);
        const double pf = product(*r.delta_fock, ErrorKind::eps_xf, ErrorKind::eps_pf);
        ok = ok && pg >= hbar / 2 - 1e-6;
        double rel = 0.0;
        if (std::isinf(pg) || std::isinf(pf)) rel = (std::isinf(pg) && std::isinf(pf)) ? 0.0 : INFINITY;
        else rel = std::abs(pf - pg) / pg;
        worst_rel = std::max(worst_rel, rel);
        s << " " << label << ": " << g(pg) << (std::isinf(pg) ? "" : " vs fock " + g(pf) + " @" + std::to_string(r.fock_working))
          << ";";
    }
    ok = ok && worst_rel <= 1e-5;
    return {ok, "products >= hbar/2 - 1e-6, fock/gaussian worst relative " + g(worst_rel) + " <= 1e-5;" + s.str()};
}

Outcome retrodictive_relation() {
    bool ok = true;
    int checked = 0;
    double worst = INFINITY;
    std::string swap_flag;
    for (const auto& [label, m] : catalog()) {
        const InequalityMargins mg = check_seven_inequalities(m, std::nullopt);
        const Relation* r = mg.find("retrodictive_errors");
        if (label == "swap") swap_flag = r->flag;
        if (!unbiased(m)) continue;
        ++checked;
        const double v = r->margin.value_or(-INFINITY);
        worst = std::min(worst, v);
        ok = ok && v >= -1e-6 * hbar;
    }
    ok = ok && checked > 0 && swap_flag == kUndefinedFlag;
    return {ok, std::to_string(checked) + " unbiased models, worst margin " + g(worst) + " >= -1e-6; swap flag " + swap_flag};
}

Outcome counterexample() {
    const MeasurementModel m = swap_rotation_model({hbar, 0.0, 0.0, 0.0});
    const QuadForm exi = error_forms(m)[ErrorKind::eps_xi];
    const double gauss = exi.linear.norm() + std::abs(exi.constant);
    const double fock = swap_interior_eps_xi_norm(m, 12);

    // per-state products on random probe states
    const int probe = 6;
    const SystemMoments gm = gaussian_moments(m, probe);
    const SystemMoments fm = fock_moments(realize(m, 48), probe);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n;
    double worst_g = 0.0, worst_f = 0.0;
    for (int i = 0; i < 100; ++i) {
        CVec v(probe);
        for (int k = 0; k < probe; ++k) v(k) = cplx(n(rng), n(rng));
        v.normalize();
        auto mom = [&](const SystemMoments& s, ErrorKind k) { return v.dot(s.second(k) * v).real(); };
        worst_g = std::max(worst_g, std::abs(mom(gm, ErrorKind::eps_xi) * mom(gm, ErrorKind::eps_pi)));
        worst_f = std::max(worst_f, std::abs(mom(fm, ErrorKind::eps_xi) * mom(fm, ErrorKind::eps_pi)));
    }

    std::vector<double> growth;
    for (int d : {8, 12, 16}) {
        const SystemMoments s = fock_moments(realize(m, d), d);
        Eigen::SelfAdjointEigenSolver<CMat> es(s.second(ErrorKind::eps_pi), Eigen::EigenvaluesOnly);
        growth.push_back(std::sqrt(es.eigenvalues().maxCoeff()));
    }
    const bool mono = growth[1] > growth[0] && growth[2] > growth[1];
    const double inc = (growth[2] - growth[1]) / growth[1];
    const bool ok = gauss <= 1e-12 && fock < 1e-8 && worst_g <= 1e-12 && worst_f <= 1e-8 && mono && inc > 0.10;
    return {ok, "e_Xi gaussian norm " + g(gauss) + ", fock interior " + g(fock) + " < 1e-8; per-state products " +
                    g(worst_g) + " / " + g(worst_f) + "; Delta_ei p over dims 8,12,16 = " + g(growth[0]) + ", " +
                    g(growth[1]) + ", " + g(growth[2]) + " (increment " + g(inc) + " > 0.1)"};
}

Outcome finite_range_bound() {
    bool ok = true;
    std::ostringstream s;
    for (double P : {2.0, 4.0, 8.0}) {
        const MeasurementModel m = swap_rotation_model({hbar, 0.0, 1.0, 0.0});
        const RangeBox box{0.0, 1.0, P, P, 1.0, 1.0}; // p0 = <mu_P>
        const ConstrainedValue v = constrained_maximal_rms(ErrorKind::eps_pi, m, box, Backend::gaussian);
        ok = ok && v.feasible && v.value >= P / 2 - 1e-6;
        s << " P=" << P << ": " << g(v.value) << " >= " << P / 2 << ";";
    }
    return {ok, "constrained Delta'_ei p >= P/2 - 1e-6;" + s.str()};
}

Outcome finite_range_relations() {
    bool ok = true;
    std::ostringstream s;
    double worst = INFINITY;
    for (const auto& [label, m] : catalog()) {
        if (label != "swap" && label != "gain 2" && label != "offset") continue;
        for (double L : {4.0, 8.0}) {
            const InequalityMargins mg = check_seven_inequalities(m, RangeBox{0.0, 0.0, L, L, 1.0, 1.0});
            ok = ok && mg.confirmation_only;
            int finite = 0;
            for (const auto& r : mg.relations) {
                if (r.name.rfind("finite_", 0) != 0) continue;
                ++finite;
                if (!r.margin) {
                    ok = false;
                    s << " " << label << " L=" << L << " " << r.name << " " << r.flag << ";";
                    continue;
                }
                worst = std::min(worst, *r.margin);
                ok = ok && *r.margin >= -1e-6 * hbar;
            }
            ok = ok && finite == 5;
        }
    }
    return {ok, "swap, gain 2, offset at L=P in {4,8}: worst margin " + g(worst) + " >= -1e-6 (lower-bound confirmation)" +
                    s.str()};
}

Outcome divergence_check() {
    const GaussianState vac = single_mode_state(hbar, 0.0, 0.0, hbar / 2);
    const PhaseSpaceBox box{0.0, 0.0, 4.0, 4.0, 9, 9};
    const DivergenceReport b =
        box_average_divergence_check(biased_variant(arthurs_kelly(1.0, 1.0, hbar), {2.0, 0.0, 1.0, 0.0}), vac, box);
    const DivergenceReport u = box_average_divergence_check(arthurs_kelly(1.0, 1.0, hbar), vac, box);
    const bool ok = b.pointwise_order >= 1.8 && b.flux_order >= 1.8 && u.max_abs_v < 1e-8;
    return {ok, "gain 2 orders pointwise " + g(b.pointwise_order) + ", flux " + g(b.flux_order) +
                    " >= 1.8 (mean div " + g(b.mean_divergence) + ", fine-grid |volume - flux| " +
                    g(std::abs(b.fine.volume - b.fine.flux)) + "); unbiased max |v| " + g(u.max_abs_v) + " < 1e-8"};
}

Outcome pointer_relation() {
    const GaussianState vac = single_mode_state(hbar, 0.0, 0.0, hbar / 2);
    bool ok = true;
    double worst = INFINITY, balanced = NAN;
    for (double s : {0.25, 0.5, 1.0, 2.0, 4.0}) {
        const PointerCheck c = arthurs_kelly_pointer_check(arthurs_kelly(1.0, s, hbar), vac);
        worst = std::min(worst, c.margin);
        ok = ok && c.margin >= -1e-6 * hbar;
        if (s == 1.0) balanced = c.margin;
    }
    ok = ok && std::abs(balanced) <= 5e-2 * hbar;
    return {ok, "worst margin over s in {1/4,1/2,1,2,4} " + g(worst) + " >= -1e-6; balanced margin " + g(balanced) +
                    " within 5e-2 of saturation"};
}

Outcome backend_agreement() {
    const int dims = 12;
    const std::vector<std::array<double, 2>> means = {{0.0, 0.0}, {1.0, -0.5}, {2.0, 1.2}, {-1.5, -1.8}};
    for (const auto& mu : means)
        if ((mu[0] * mu[0] + mu[1] * mu[1]) / (2 * hbar) > dims / 4.0) return {false, "input outside the photon cap"};
    bool ok = true;
    double worst = 0.0, worst_abs = 0.0;
    std::ostringstream s;
    for (const auto& [label, m] : catalog()) {
        const BackendAgreement a = backend_cross_validation(m, means, 48);
        worst = std::max(worst, a.max_relative);
        worst_abs = std::max(worst_abs, a.max_absolute_at_zero);
        ok = ok && a.max_relative <= 1e-6 && a.max_absolute_at_zero <= 1e-6 * hbar;
        s << " " << label << " @" << a.working << ";";
    }
    return {ok, "coherent inputs with nbar <= dims/4 = 3: worst relative " + g(worst) + " <= 1e-6, exact-zero channels " +
                    g(worst_abs) + "; working truncation" + s.str()};
}

Outcome per_state_bounds_check() {
    bool ok = true;
    int models = 0;
    double worst = INFINITY;
    for (const auto& [label, m] : catalog()) {
        if (!unbiased(m)) continue;
        ++models;
        const PerStateBounds b = per_state_bounds(m, 100, 1);
        ok = ok && b.premise && b.states == 100;
        for (double v : b.min_margin) {
            worst = std::min(worst, v);
            ok = ok && v >= -1e-6 * hbar * hbar / 4;
        }
    }
    ok = ok && models > 0;
    return {ok, std::to_string(models) + " unbiased models x 100 states x 5 products: worst margin " + g(worst) +
                    " >= -2.5e-7"};
}

Outcome determinism() {
    const fs::path dir = fs::temp_directory_path() / "jmlab_acceptance_sweep";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg = dir / "sweep.ini";
    std::ofstream(cfg) << "model = biased:arthurs_kelly\n"
                          "backend = gaussian\n"
                          "starts = 8\n"
                          "[box]\nx0 = 0\np0 = 0\nL = 4\nP = 4\nsigma = 1\ntau = 1\n"
                          "[sweep]\nparameter = gain_x\nvalues = 0.5, 1, 2\n";
    auto run = [&](const std::string& out) {
        const std::string cmd = std::string(JMLAB_CLI) + " sweep " + cfg.string() + " --seed 20261017 --out " +
                                (dir / out).string() + " > /dev/null 2>&1";
        const int st = std::system(cmd.c_str());
        return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    };
    const int a = run("a"), b = run("b");
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream s;
        s << in.rdbuf();
        return s.str();
    };
    const std::string ca = slurp(dir / "a" / "sweep.csv"), cb = slurp(dir / "b" / "sweep.csv");
    const bool ok = a == 0 && b == 0 && !ca.empty() && ca == cb;
    return {ok, "two sweep runs with --seed 20261017: exit " + std::to_string(a) + "/" + std::to_string(b) + ", " +
                    std::to_string(ca.size()) + " bytes, " + (ca == cb ? "identical" : "different")};
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"commutator identity suite", commutator_suite},
        {"predictive relation", predictive_relation},
        {"retrodictive relation", retrodictive_relation},
        {"swap counter-example", counterexample},
        {"finite-range bound on e_Pi", finite_range_bound},
        {"finite-range relations", finite_range_relations},
        {"divergence check", divergence_check},
        {"pointer relation", pointer_relation},
        {"backend cross-validation", backend_agreement},
        {"uniform per-state bounds", per_state_bounds_check},
        {"sweep determinism", determinism},
    };
    int failures = 0;
    for (size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::cout << (o.pass ? "PASS" : "FAIL") << " " << i + 1 << " " << criteria[i].first << ": " << o.detail << std::endl;
    }
    std::cout << criteria.size() - failures << "/" << criteria.size() << " criteria passed" << std::endl;
    return failures;
}
