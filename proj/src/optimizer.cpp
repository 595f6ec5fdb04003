#include "jmlab/errlab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace jmlab {

namespace {

struct BoxOperators {
    CMat x, p, x2, p2;
};

BoxOperators compressed_quadratures(int n, double hbar) {
    const ModeSpace m = make_mode(n + 2, hbar);
    return {m.x_op.topLeftCorner(n, n), m.p_op.topLeftCorner(n, n), (m.x_op * m.x_op).topLeftCorner(n, n),
            (m.p_op * m.p_op).topLeftCorner(n, n)};
}

struct Point {
    double f = 0.0;
    std::array<double, 6> g{};
    double violation = 0.0;
};

class Problem {
  public:
    Problem(const CMat& a, const RangeBox& box, double hbar) : a_(a), box_(box), ops_(compressed_quadratures(int(a.rows()), hbar)) {}

    Point evaluate(const CVec& psi) const {
        Point pt;
        pt.f = psi.dot(a_ * psi).real();
        const double mx = psi.dot(ops_.x * psi).real(), mp = psi.dot(ops_.p * psi).real();
        const double vx = psi.dot(ops_.x2 * psi).real() - mx * mx;
        const double vp = psi.dot(ops_.p2 * psi).real() - mp * mp;
        pt.g = {mx - (box_.x0 + box_.L / 2), (box_.x0 - box_.L / 2) - mx,
                mp - (box_.p0 + box_.P / 2), (box_.p0 - box_.P / 2) - mp,
                vx - box_.sigma * box_.sigma, vp - box_.tau * box_.tau};
        for (double g : pt.g) pt.violation = std::max(pt.violation, g);
        return pt;
    }

    // augmented Lagrangian, inequality multipliers lam
    double penalised(const Point& pt, double w, const std::array<double, 6>& lam) const {
        double s = 0.0;
        for (int i = 0; i < 6; ++i) {
            const double t = std::max(0.0, lam[i] + w * pt.g[i]);
            s += t * t - lam[i] * lam[i];
        }
        return pt.f - s / (2.0 * w);
    }

    CVec gradient(const CVec& psi, const Point& pt, double w, const std::array<double, 6>& lam) const {
        CVec grad = a_ * psi;
        const CVec xpsi = ops_.x * psi, ppsi = ops_.p * psi;
        const double mx = psi.dot(xpsi).real(), mp = psi.dot(ppsi).real();
        auto weight = [&](int i) { return std::max(0.0, lam[i] + w * pt.g[i]); };
        grad -= (weight(0) - weight(1)) * xpsi;
        grad -= (weight(2) - weight(3)) * ppsi;
        if (weight(4) > 0) grad -= weight(4) * (ops_.x2 * psi - 2.0 * mx * xpsi);
        if (weight(5) > 0) grad -= weight(5) * (ops_.p2 * psi - 2.0 * mp * ppsi);
        return grad - psi.dot(grad) * psi;
    }

  private:
    const CMat& a_;
    RangeBox box_;
    BoxOperators ops_;
};

struct StartSpec {
    double mx, mp, var_x;
};

} // namespace

ConstrainedValue constrained_supremum(const CMat& a, const RangeBox& box, double hbar, const OptimizerSettings& opt,
                                      const std::vector<CVec>& extra_starts) {
    validate(box, hbar);
    const int n = int(a.rows());
    const Problem prob(a, box, hbar);

    // minimum-uncertainty seeds inside the spread caps
    const double shrink = std::sqrt(hbar / (2.0 * box.sigma * box.tau));
    const double sx = box.sigma * shrink, sp = box.tau * shrink;
    const double reach2 = std::max(0.0, 2.0 * hbar * n / 3.0 - (sx * sx + sp * sp));
    auto clip = [&](double x, double p) {
        // pull the mean toward the box centre until the seed is representable
        double t = 1.0;
        for (int it = 0; it < 60 && (x * x + p * p) > reach2; ++it) {
            t *= 0.9;
            x = box.x0 + t * (x - box.x0);
            p = box.p0 + t * (p - box.p0);
        }
        return std::pair{x, p};
    };
    const double inset = 1.0 - 1e-9;
    std::vector<StartSpec> specs;
    specs.push_back({box.x0, box.p0, sx * sx});
    for (double cx : {-0.5, 0.5})
        for (double cp : {-0.5, 0.5}) specs.push_back({box.x0 + cx * box.L * inset, box.p0 + cp * box.P * inset, sx * sx});
    specs.push_back({box.x0 + 0.5 * box.L * inset, box.p0, sx * sx});
    specs.push_back({box.x0 - 0.5 * box.L * inset, box.p0, sx * sx});
    specs.push_back({box.x0, box.p0 + 0.5 * box.P * inset, sx * sx});
    specs.push_back({box.x0, box.p0 - 0.5 * box.P * inset, sx * sx});
    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double vmin = hbar * hbar / (4.0 * box.tau * box.tau), vmax = box.sigma * box.sigma;
    while (int(specs.size()) < opt.starts) {
        const double x = box.x0 + (unit(rng) - 0.5) * box.L * inset;
        const double p = box.p0 + (unit(rng) - 0.5) * box.P * inset;
        const double v = vmin * std::pow(vmax / vmin, unit(rng));
        specs.push_back({x, p, v});
    }
    specs.resize(opt.starts);

    std::vector<CVec> starts;
    for (const auto& s : specs) {
        auto [x, p] = clip(s.mx, s.mp);
        starts.push_back(gaussian_pure_state(n, hbar, x, p, s.var_x));
    }
    for (const auto& e : extra_starts) {
        if (e.size() != n) throw DimensionError("extra start has the wrong size");
        starts.push_back(e.normalized());
    }

    ConstrainedValue best;
    double best_f = -std::numeric_limits<double>::infinity();
    double least_violation = std::numeric_limits<double>::infinity();
    for (int si = 0; si < int(starts.size()); ++si) {
        CVec psi = starts[si];
        Point pt = prob.evaluate(psi);
        double local_best = -std::numeric_limits<double>::infinity();
        CVec local_state;
        auto record = [&](const CVec& v, const Point& q) {
            least_violation = std::min(least_violation, q.violation);
            if (q.violation <= opt.feasibility_tolerance && q.f > local_best) {
                local_best = q.f;
                local_state = v;
            }
        };
        record(psi, pt);
        double w = 1.0;
        std::array<double, 6> lam{};
        double last_violation = pt.violation;
        for (int stage = 0; stage < 64; ++stage) {
            double step = 1.0;
            bool settled = false;
            for (int it = 0; it < opt.max_iterations; ++it) {
                const CVec g = prob.gradient(psi, pt, w, lam);
                const double gn2 = g.squaredNorm();
                if (gn2 == 0.0) break;
                const double f0 = prob.penalised(pt, w, lam);
                bool moved = false;
                for (int bt = 0; bt < 60; ++bt) {
                    CVec trial = (psi + step * g).normalized();
                    Point tp = prob.evaluate(trial);
                    const double f1 = prob.penalised(tp, w, lam);
                    if (f1 >= f0 + 1e-4 * step * gn2) {
                        const double dist = (trial - psi).norm();
                        psi = trial;
                        pt = tp;
                        record(psi, pt);
                        moved = dist > opt.step_tolerance && f1 - f0 > opt.value_tolerance * (1.0 + std::abs(f0));
                        step *= 2.0;
                        break;
                    }
                    step *= 0.5;
                }
                if (!moved) {
                    settled = true;
                    break;
                }
            }
            if (settled && pt.violation <= opt.feasibility_tolerance && stage > 0) break;
            for (int i = 0; i < 6; ++i) lam[i] = std::max(0.0, lam[i] + w * pt.g[i]);
            if (pt.violation > 0.25 * last_violation) w *= 4.0;
            last_violation = pt.violation;
        }
        if (local_best > best_f + 1e-12) {
            best_f = local_best;
            best.best_start = si;
            best.state = local_state;
        }
    }
    best.feasible = best.best_start >= 0;
    best.lower_bound = true;
    if (best.feasible) {
        best.value = std::sqrt(std::max(0.0, best_f));
        best.max_violation = std::max(0.0, prob.evaluate(best.state).violation);
    } else {
        best.value = 0.0;
        best.max_violation = least_violation;
    }
    return best;
}

} // namespace jmlab
