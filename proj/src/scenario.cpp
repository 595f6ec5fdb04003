#include "jmlab/scenario.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <thread>

namespace jmlab {

using json = nlohmann::ordered_json;

namespace {

const std::map<std::string, double>& defaults() {
    static const std::map<std::string, double> d = {
        {"hbar", 1.0},          {"coupling", 1.0},       {"pointer_squeeze", 1.0},     {"pointer_x_var", 0.0},
        {"pointer_p_mean", 0.0}, {"pointer_p_var", 0.0}, {"gain_x", 1.0},       {"offset_x", 0.0},
        {"gain_p", 1.0},        {"offset_p", 0.0},       {"input_x", 0.0},      {"input_p", 0.0},
        {"input_var_x", 0.0}};
    return d;
}

double to_double(const std::string& key, const std::string& s) {
    double v = 0.0;
    const char* b = s.data();
    const char* e = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e) throw ConfigError("key '" + key + "': not a number: '" + s + "'");
    return v;
}

long long to_int(const std::string& key, const std::string& s) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw ConfigError("key '" + key + "': not an integer: '" + s + "'");
    return v;
}

double& box_field(RangeBox& b, const std::string& k) {
    if (k == "x0") return b.x0;
    if (k == "p0") return b.p0;
    if (k == "L") return b.L;
    if (k == "P") return b.P;
    if (k == "sigma") return b.sigma;
    if (k == "tau") return b.tau;
    throw ConfigError("unknown [box] key '" + k + "'");
}

std::vector<std::string> split_values(const std::vector<std::string>& inputs) {
    std::vector<std::string> out;
    for (const auto& in : inputs) {
        std::string cur;
        for (char ch : in) {
            if (ch == ',' || ch == ' ' || ch == '\t') {
                if (!cur.empty()) out.push_back(cur);
                cur.clear();
            } else {
                cur += ch;
            }
        }
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

std::string joined(const std::vector<std::string>& inputs) {
    std::string s;
    for (const auto& i : inputs) s += (s.empty() ? "" : " ") + i;
    return s;
}

void check_settings(const ScenarioConfig& c) {
    if (c.fock.dims < 2 || c.fock.probe < 1 || c.fock.working < 2) throw ConfigError("dims must be >= 2");
    if (c.fock.dims < 4) throw ConfigError("dims must be >= 4 for the interior-projected checks");
    if (c.optimizer.starts < 1) throw ConfigError("starts must be positive");
}

} // namespace

const std::vector<std::string>& model_keys() {
    static const std::vector<std::string> k = [] {
        std::vector<std::string> v;
        for (const auto& [key, _] : defaults()) v.push_back(key);
        return v;
    }();
    return k;
}

ScenarioConfig parse_config(std::istream& in) {
    // '#' comments are accepted alongside ';'
    std::stringstream clean;
    for (std::string line; std::getline(in, line);) {
        const auto first = line.find_first_not_of(" \t");
        if (first != std::string::npos && line[first] == '#') continue;
        clean << line << '\n';
    }
    std::vector<CLI::ConfigItem> items;
    try {
        items = CLI::ConfigINI().from_config(clean);
    } catch (const CLI::Error& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }
    ScenarioConfig c;
    for (const auto& it : items) {
        if (it.name == "++" || it.name == "--") continue;
        std::string section = it.parents.empty() ? "" : it.parents.front();
        if (section == "default") section.clear();
        if (it.parents.size() > 1) throw ConfigError("nested sections are not supported: " + it.fullname());
        const std::string& k = it.name;
        const std::string v = joined(it.inputs);
        if (section.empty()) {
            if (k == "model") c.model = v;
            else if (k == "backend") {
                try {
                    c.backend = parse_backend(v);
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(e.what());
                }
            } else if (k == "out") c.out_dir = v;
            else if (k == "dims") c.fock.dims = int(to_int(k, v));
            else if (k == "probe") c.fock.probe = int(to_int(k, v));
            else if (k == "working") c.fock.working = int(to_int(k, v));
            else if (k == "working_cap") c.fock.working_cap = int(to_int(k, v));
            else if (k == "working_tol") c.fock.working_tol = to_double(k, v);
            else if (k == "starts") c.optimizer.starts = int(to_int(k, v));
            else if (k == "seed") c.optimizer.seed = std::uint64_t(to_int(k, v));
            else if (defaults().count(k)) c.params[k] = to_double(k, v);
            else throw ConfigError("unknown key '" + k + "'");
        } else if (section == "box") {
            if (!c.box) c.box = RangeBox{};
            box_field(*c.box, k) = to_double(k, v);
        } else if (section == "sweep") {
            if (k == "parameter") c.sweep_parameter = v;
            else if (k == "values") {
                for (const auto& s : split_values(it.inputs)) c.sweep_values.push_back(to_double(k, s));
            } else throw ConfigError("unknown [sweep] key '" + k + "'");
        } else {
            throw ConfigError("unknown section [" + section + "]");
        }
    }
    check_settings(c);
    if (!c.sweep_values.empty() && c.sweep_parameter.empty()) throw ConfigError("sweep values given without a parameter");
    if (!c.sweep_parameter.empty()) with_parameter(c, c.sweep_parameter, c.sweep_parameter.rfind("box.", 0) == 0 ? 1.0 : param(c, c.sweep_parameter));
    build_model(c);
    if (c.box) {
        try {
            validate(*c.box, param(c, "hbar"));
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    return c;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config '" + path + "'");
    return parse_config(in);
}

double param(const ScenarioConfig& c, const std::string& key) {
    auto it = c.params.find(key);
    if (it != c.params.end()) return it->second;
    auto d = defaults().find(key);
    if (d == defaults().end()) throw ConfigError("unknown parameter '" + key + "'");
    return d->second;
}

namespace {

MeasurementModel base_model(const ScenarioConfig& c, const std::string& name) {
    const double hb = param(c, "hbar");
    if (name == "arthurs_kelly") return arthurs_kelly(param(c, "coupling"), param(c, "pointer_squeeze"), hb);
    if (name == "swap_rotation") {
        SwapParams sp;
        sp.hbar = hb;
        sp.pointer_x_var = param(c, "pointer_x_var");
        sp.pointer_p_mean = param(c, "pointer_p_mean");
        sp.pointer_p_var = param(c, "pointer_p_var");
        return swap_rotation_model(sp);
    }
    throw ConfigError("unknown model '" + name + "'");
}

} // namespace

MeasurementModel build_model(const ScenarioConfig& c) {
    try {
        if (c.model.rfind("biased:", 0) == 0) {
            Bias b;
            b.gain_x = param(c, "gain_x");
            b.offset_x = param(c, "offset_x");
            b.gain_p = param(c, "gain_p");
            b.offset_p = param(c, "offset_p");
            return biased_variant(base_model(c, c.model.substr(7)), b);
        }
        return base_model(c, c.model);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("invalid model parameters: ") + e.what());
    }
}

GaussianState system_input(const ScenarioConfig& c) {
    const double hb = param(c, "hbar");
    const double v = param(c, "input_var_x");
    return single_mode_state(hb, param(c, "input_x"), param(c, "input_p"), v > 0 ? v : hb / 2.0);
}

ScenarioConfig with_parameter(const ScenarioConfig& c, const std::string& key, double value) {
    ScenarioConfig out = c;
    if (key.rfind("box.", 0) == 0) {
        if (!out.box) throw ConfigError("sweep over '" + key + "' needs a [box] section");
        box_field(*out.box, key.substr(4)) = value;
        return out;
    }
    if (!defaults().count(key)) throw ConfigError("cannot sweep unknown parameter '" + key + "'");
    out.params[key] = value;
    return out;
}

std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string to_csv(const Table& t) {
    std::string s;
    auto line = [&](const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) s += (i ? "," : "") + cells[i];
        s += '\n';
    };
    line(t.columns);
    for (const auto& r : t.rows) line(r);
    return s;
}

void write_file(const std::string& dir, const std::string& name, const std::string& content) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory '" + dir + "': " + ec.message());
    const fs::path p = fs::path(dir) / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write '" + p.string() + "'");
    out << content;
    if (!out) throw IoError("write failed for '" + p.string() + "'");
}

// ---------------------------------------------------------------- report

namespace {

json num(double v) {
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

std::string delta_key(ErrorKind k) { return "delta_" + short_name(k); }

const std::array<const char*, 4> kDefectNames = {"defect_xi", "defect_pi", "defect_xf", "defect_pf"};

struct PointResult {
    MeasurementModel model;
    ErrorReport report;
    PointerCheck pointer;
    std::optional<DivergenceReport> divergence;
};

PointResult evaluate_point(const ScenarioConfig& c) {
    PointResult r;
    r.model = build_model(c);
    const GaussianState in = system_input(c);
    r.report = error_report(r.model, c.box, c.backend, c.fock, c.optimizer, in);
    r.pointer = arthurs_kelly_pointer_check(r.model, in, c.backend, c.fock);
    if (c.box) {
        PhaseSpaceBox pb;
        pb.x0 = c.box->x0 - in.mean(0);
        pb.p0 = c.box->p0 - in.mean(1);
        pb.L = c.box->L;
        pb.P = c.box->P;
        r.divergence = box_average_divergence_check(r.model, in, pb, c.backend != Backend::gaussian, c.fock);
    }
    return r;
}

json relation_json(const Relation& r) {
    json j;
    j["lhs"] = num(r.lhs);
    j["rhs"] = num(r.rhs);
    j["margin"] = r.margin ? num(*r.margin) : json(nullptr);
    j["flag"] = r.flag;
    return j;
}

json point_json(const ScenarioConfig& c, const PointResult& p) {
    json j;
    j["model"] = p.model.name;
    j["backend"] = to_string(c.backend);
    j["hbar"] = num(p.model.hbar);
    json params = json::object();
    for (const auto& [k, v] : p.model.parameters) params[k] = num(v);
    j["parameters"] = params;
    const ErrorReport& r = p.report;
    for (ErrorKind k : kErrorKinds) j[delta_key(k)] = num(r.delta[index_of(k)].value);
    if (c.backend == Backend::fock || r.delta_fock) {
        json f;
        const auto& d = r.delta_fock ? *r.delta_fock : r.delta;
        for (ErrorKind k : kErrorKinds) {
            json e;
            e["value"] = num(d[index_of(k)].value);
            e["infinite"] = d[index_of(k)].infinite;
            json ref = json::array();
            for (double v : d[index_of(k)].refinement) ref.push_back(num(v));
            e["refinement"] = ref;
            f[delta_key(k)] = e;
        }
        f["working"] = r.fock_working;
        f["converged"] = r.fock_converged;
        j["fock"] = f;
    }
    const Relation* retro = r.margins.find("retrodictive_errors");
    j["retrodictive_flag"] = retro && retro->flag == kUndefinedFlag ? kUndefinedFlag : "defined";
    json def;
    for (int k = 0; k < 4; ++k) def[kDefectNames[k]] = num(r.defects[k]);
    j["defects"] = def;
    if (r.constrained) {
        json cj;
        cj["box"] = {{"x0", r.box->x0}, {"p0", r.box->p0}, {"L", r.box->L},
                     {"P", r.box->P},   {"sigma", r.box->sigma}, {"tau", r.box->tau}};
        cj["lower_bound"] = true;
        cj["semantics"] = "values are lower bounds on the finite-range suprema; a nonnegative finite-range margin "
                          "confirms the relation, a negative one is inconclusive";
        for (ErrorKind k : kErrorKinds) {
            const ConstrainedValue& v = (*r.constrained)[index_of(k)];
            cj[delta_key(k)] = {{"value", num(v.value)},
                                {"feasible", v.feasible},
                                {"max_violation", num(v.max_violation)},
                                {"best_start", v.best_start}};
        }
        j["constrained"] = cj;
    }
    json mj;
    for (const auto& rel : r.margins.relations) mj[rel.name] = relation_json(rel);
    j["margins"] = mj;
    json pc = {{"product", num(p.pointer.product)}, {"margin", num(p.pointer.margin)}};
    if (p.pointer.fock_product) pc["fock_product"] = num(*p.pointer.fock_product);
    if (!p.pointer.warning.empty()) pc["warning"] = p.pointer.warning;
    j["pointer_check"] = pc;
    if (p.divergence) {
        const DivergenceReport& d = *p.divergence;
        json dj;
        dj["max_abs_v"] = num(d.max_abs_v);
        dj["mean_divergence"] = num(d.mean_divergence);
        dj["commutator_imag"] = num(d.commutator_imag);
        dj["pointwise_residual"] = {num(d.coarse.pointwise), num(d.fine.pointwise)};
        dj["flux_residual"] = {num(d.coarse.flux_residual), num(d.fine.flux_residual)};
        dj["pointwise_order"] = num(d.pointwise_order);
        dj["flux_order"] = num(d.flux_order);
        json chain = json::array();
        for (size_t k = 0; k < d.chain.size(); ++k) chain.push_back({{"term", d.chain_names[k]}, {"value", num(d.chain[k])}});
        dj["chain"] = chain;
        dj["chain_holds"] = d.chain_holds;
        if (d.fock_center_residual) dj["fock_center_residual"] = num(*d.fock_center_residual);
        if (!d.warnings.empty()) dj["warnings"] = d.warnings;
        j["divergence"] = dj;
    }
    return j;
}

std::vector<std::string> relation_names(const PointResult& p) {
    std::vector<std::string> n;
    for (const auto& r : p.report.margins.relations) n.push_back(r.name);
    return n;
}

std::vector<std::string> csv_columns(const ScenarioConfig& c, const std::string& first,
                                     const std::vector<std::string>& relations) {
    std::vector<std::string> cols;
    cols.push_back(first);
    for (ErrorKind k : kErrorKinds) cols.push_back(delta_key(k));
    if (c.backend != Backend::gaussian)
        for (ErrorKind k : kErrorKinds) cols.push_back("fock_" + delta_key(k));
    if (c.box)
        for (ErrorKind k : kErrorKinds) cols.push_back("constrained_" + delta_key(k));
    for (const char* d : kDefectNames) cols.push_back(d);
    for (const auto& r : relations) cols.push_back("margin_" + r);
    cols.push_back("pointer_margin");
    for (const auto& r : relations) cols.push_back("flag_" + r);
    return cols;
}

std::vector<std::string> csv_row(const ScenarioConfig& c, double point, const PointResult& p) {
    std::vector<std::string> row;
    row.push_back(format_number(point));
    const ErrorReport& r = p.report;
    for (ErrorKind k : kErrorKinds) row.push_back(format_number(r.delta[index_of(k)].value));
    if (c.backend != Backend::gaussian) {
        const auto& d = r.delta_fock ? *r.delta_fock : r.delta;
        for (ErrorKind k : kErrorKinds) row.push_back(format_number(d[index_of(k)].value));
    }
    if (c.box)
        for (ErrorKind k : kErrorKinds) row.push_back(format_number((*r.constrained)[index_of(k)].value));
    for (double d : r.defects) row.push_back(format_number(d));
    for (const auto& rel : r.margins.relations)
        row.push_back(rel.margin ? format_number(*rel.margin) : std::string("nan"));
    row.push_back(format_number(p.pointer.margin));
    for (const auto& rel : r.margins.relations) row.push_back(rel.flag);
    return row;
}

void log_point(std::ostream& log, const PointResult& p) {
    const ErrorReport& r = p.report;
    log << p.model.name << ":";
    for (ErrorKind k : kErrorKinds) log << " " << delta_key(k) << "=" << format_number(r.delta[index_of(k)].value);
    if (r.delta_fock || r.backend == Backend::fock)
        log << "\n  fock working " << r.fock_working << (r.fock_converged ? "" : " (not converged)");
    log << "\n  worst margin " << format_number(r.margins.worst_margin()) << "\n";
    for (const auto& rel : r.margins.relations)
        log << "  " << rel.name << ": margin " << (rel.margin ? format_number(*rel.margin) : std::string("undefined"))
            << " [" << rel.flag << "]\n";
}

// order-preserving parallel map
template <class F>
std::vector<PointResult> parallel_points(const std::vector<ScenarioConfig>& cfgs, F f) {
    std::vector<std::optional<PointResult>> out(cfgs.size());
    std::vector<std::exception_ptr> err(cfgs.size());
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const size_t nthreads = std::min<size_t>(hw, cfgs.size());
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (size_t i; (i = next++) < cfgs.size();) {
            try {
                out[i] = f(cfgs[i]);
            } catch (...) {
                err[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (size_t t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : err)
        if (e) std::rethrow_exception(e);
    std::vector<PointResult> res;
    for (auto& o : out) res.push_back(std::move(*o));
    return res;
}

} // namespace

int run_report(const ScenarioConfig& c, std::ostream& log) {
    const PointResult p = evaluate_point(c);
    log_point(log, p);
    Table t;
    t.columns = csv_columns(c, "point", relation_names(p));
    t.rows.push_back(csv_row(c, 0.0, p));
    write_file(c.out_dir, "report.json", point_json(c, p).dump(2) + "\n");
    write_file(c.out_dir, "report.csv", to_csv(t));
    return exit_ok;
}

int run_sweep(const ScenarioConfig& c, std::ostream& log) {
    std::vector<ScenarioConfig> cfgs;
    std::vector<double> points;
    if (c.sweep_values.empty()) {
        cfgs.push_back(c);
        points.push_back(0.0);
    } else {
        for (double v : c.sweep_values) {
            cfgs.push_back(with_parameter(c, c.sweep_parameter, v));
            points.push_back(v);
        }
    }
    for (const auto& k : cfgs) build_model(k); // config errors before any work
    const auto results = parallel_points(cfgs, evaluate_point);
    Table t;
    t.columns = csv_columns(c, c.sweep_parameter.empty() ? "point" : c.sweep_parameter, relation_names(results.front()));
    json j;
    j["sweep"] = {{"parameter", c.sweep_parameter}, {"values", c.sweep_values}};
    json pts = json::array();
    for (size_t i = 0; i < results.size(); ++i) {
        log << "[" << (c.sweep_parameter.empty() ? "point" : c.sweep_parameter) << " = " << format_number(points[i])
            << "] ";
        log_point(log, results[i]);
        t.rows.push_back(csv_row(cfgs[i], points[i], results[i]));
        json pj = point_json(cfgs[i], results[i]);
        pj["sweep_value"] = num(points[i]);
        pts.push_back(pj);
    }
    j["points"] = pts;
    write_file(c.out_dir, "sweep.json", j.dump(2) + "\n");
    write_file(c.out_dir, "sweep.csv", to_csv(t));
    return exit_ok;
}

int run_verify_commutators(const ScenarioConfig& c, std::ostream& log) {
    const MeasurementModel m = build_model(c);
    const CommutatorReport r = check_commutator_identities(m, c.fock.dims, c.optimizer.seed);
    Table t;
    t.columns = {"model", "identity", "projected_residual", "raw_residual", "subspace_dim", "dims"};
    json rows = json::array();
    bool ok = true;
    for (const auto& row : r.rows) {
        const bool pass = row.projected < 1e-8;
        ok = ok && pass;
        log << (pass ? "PASS " : "FAIL ") << row.name << " (" << row.statement << "): projected "
            << format_number(row.projected) << ", raw " << format_number(row.raw) << "\n";
        t.rows.push_back({m.name, row.name, format_number(row.projected), format_number(row.raw),
                          std::to_string(r.subspace_dim), std::to_string(r.dims)});
        rows.push_back({{"identity", row.name},
                        {"statement", row.statement},
                        {"projected_residual", num(row.projected)},
                        {"raw_residual", num(row.raw)}});
    }
    json j = {{"model", m.name},
              {"dims", r.dims},
              {"subspace_dim", r.subspace_dim},
              {"subspace_leakage", num(r.leakage)},
              {"projection", "Range(Pi) & Range(U^dag Pi U), Pi keeps Fock levels 0..dims-3 of every mode"},
              {"identities", rows},
              {"seconds", num(r.seconds)}};
    log << "subspace dim " << r.subspace_dim << ", leakage " << format_number(r.leakage) << ", " << r.seconds << " s\n";
    write_file(c.out_dir, "commutators.json", j.dump(2) + "\n");
    write_file(c.out_dir, "commutators.csv", to_csv(t));
    return ok ? exit_ok : exit_numerical;
}

// ---------------------------------------------------------------- counterexample

namespace {

struct Check {
    std::string name;
    double value;
    std::string relation; // "<=" or ">="
    double threshold;
    bool pass() const { return relation == "<=" ? value <= threshold : value >= threshold; }
};

int emit_checks(const std::vector<Check>& checks, const json& extra, const std::string& stem, const ScenarioConfig& c,
                std::ostream& log) {
    Table t;
    t.columns = {"check", "value", "relation", "threshold", "pass"};
    json arr = json::array();
    bool ok = true;
    for (const auto& ch : checks) {
        ok = ok && ch.pass();
        log << (ch.pass() ? "PASS " : "FAIL ") << ch.name << ": " << format_number(ch.value) << " " << ch.relation << " "
            << format_number(ch.threshold) << "\n";
        t.rows.push_back({ch.name, format_number(ch.value), ch.relation, format_number(ch.threshold),
                          ch.pass() ? "true" : "false"});
        arr.push_back({{"check", ch.name},
                       {"value", num(ch.value)},
                       {"relation", ch.relation},
                       {"threshold", num(ch.threshold)},
                       {"pass", ch.pass()}});
    }
    json j = extra;
    j["checks"] = arr;
    j["all_pass"] = ok;
    write_file(c.out_dir, stem + ".json", j.dump(2) + "\n");
    write_file(c.out_dir, stem + ".csv", to_csv(t));
    return ok ? exit_ok : exit_numerical;
}


} // namespace

int run_counterexample(const ScenarioConfig& c, std::ostream& log) {
    const double hb = param(c, "hbar");
    std::vector<Check> checks;
    json extra;
    SwapParams sp;
    sp.hbar = hb;
    const MeasurementModel m = swap_rotation_model(sp);
    const ErrorForms forms = error_forms(m);
    const QuadForm& exi = forms[ErrorKind::eps_xi];
    checks.push_back({"gaussian_eps_xi_coefficient_norm", exi.linear.norm() + std::abs(exi.constant), "<=", 1e-12});
    checks.push_back({"fock_eps_xi_interior_norm", swap_interior_eps_xi_norm(m, c.fock.dims), "<=", 1e-8});
    checks.push_back({"gaussian_delta_ei_x", gaussian_maximal_rms(m, ErrorKind::eps_xi).value, "<=", 1e-12});
    const bool pinf = gaussian_maximal_rms(m, ErrorKind::eps_pi).infinite;
    checks.push_back({"gaussian_delta_ei_p_infinite", pinf ? 1.0 : 0.0, ">=", 1.0});

    // unconstrained Delta_ei p under truncation refinement
    std::vector<double> growth;
    for (int d : {8, 12, 16}) {
        const FockRealization f = realize(m, d);
        const SystemMoments s = fock_moments(f, d);
        Eigen::SelfAdjointEigenSolver<CMat> es(s.second(ErrorKind::eps_pi), Eigen::EigenvaluesOnly);
        growth.push_back(std::sqrt(es.eigenvalues().maxCoeff()));
        log << "  Delta_ei p at dims " << d << ": " << format_number(growth.back()) << "\n";
    }
    extra["delta_ei_p_by_dims"] = {{"8", num(growth[0])}, {"12", num(growth[1])}, {"16", num(growth[2])}};
    const double mono = std::min(growth[1] - growth[0], growth[2] - growth[1]);
    checks.push_back({"delta_ei_p_growth_min_step", mono, ">=", 0.0});
    checks.push_back({"delta_ei_p_final_relative_increment", (growth[2] - growth[1]) / growth[1], ">=", 0.10});

    // per-state retrodictive products
    {
        std::mt19937_64 rng(c.optimizer.seed);
        std::normal_distribution<double> g;
        const SystemMoments gm = gaussian_moments(m, c.fock.probe);
        const SystemMoments fm = fock_moments(realize(m, c.fock.working), c.fock.probe);
        double worst_g = 0.0, worst_f = 0.0, max_pi = 0.0;
        for (int i = 0; i < 100; ++i) {
            CVec v(c.fock.probe);
            for (int k = 0; k < v.size(); ++k) v(k) = cplx(g(rng), g(rng));
            v.normalize();
            auto mom = [&](const SystemMoments& s, ErrorKind k) { return v.dot(s.second(k) * v).real(); };
            worst_g = std::max(worst_g, std::abs(mom(gm, ErrorKind::eps_xi) * mom(gm, ErrorKind::eps_pi)));
            worst_f = std::max(worst_f, std::abs(mom(fm, ErrorKind::eps_xi) * mom(fm, ErrorKind::eps_pi)));
            max_pi = std::max(max_pi, mom(gm, ErrorKind::eps_pi));
        }
        extra["per_state_max_eps_pi_second_moment"] = num(max_pi);
        checks.push_back({"per_state_retrodictive_product_gaussian", worst_g, "<=", 1e-12});
        checks.push_back({"per_state_retrodictive_product_fock", worst_f, "<=", 1e-8});
    }

    const InequalityMargins mg = check_seven_inequalities(m, std::nullopt, Backend::gaussian);
    const Relation* retro = mg.find("retrodictive_errors");
    extra["retrodictive_flag"] = retro->flag;
    checks.push_back({"retrodictive_product_undefined", retro->flag == kUndefinedFlag ? 1.0 : 0.0, ">=", 1.0});

    // variance identity
    struct Case {
        const char* name;
        double psi_mean_p, psi_var_x, ptr_mean, ptr_var;
        double expected; // <= 0 means not pinned
    };
    const std::vector<Case> cases = {{"matched_means_vacuum", 0.0, hb / 2, 0.0, hb / 2, hb},
                                     {"stuck_needle", 1.0, 25.0 * hb, 1.0, 0.01 * hb, -1.0},
                                     {"offset_3_half_variances", 0.0, hb / 2, 3.0, hb / 2, -1.0}};
    json vj;
    for (const auto& cs : cases) {
        const GaussianState psi = single_mode_state(hb, 0.0, cs.psi_mean_p, cs.psi_var_x);
        const VarianceIdentity vi = appendix_variance_identity_check(psi, cs.ptr_mean, cs.ptr_var, c.fock.working);
        vj[cs.name] = {{"lhs_gaussian", num(vi.lhs_gaussian)},
                       {"lhs_fock", num(vi.lhs_fock.value_or(NAN))},
                       {"rhs", num(vi.rhs)},
                       {"fock_truncation_loss", num(vi.truncation_loss)}};
        checks.push_back({std::string("variance_identity_") + cs.name + "_gaussian", vi.residual_gaussian, "<=", 1e-8});
        if (vi.residual_fock)
            checks.push_back({std::string("variance_identity_") + cs.name + "_fock", *vi.residual_fock, "<=", 1e-6});
        if (cs.expected > 0)
            checks.push_back({std::string("variance_identity_") + cs.name + "_value", std::abs(vi.lhs_gaussian - cs.expected),
                              "<=", 1e-12});
        if (std::string(cs.name) == "offset_3_half_variances" && hb == 1.0)
            checks.push_back({"variance_identity_offset_3_equals_10", std::abs(vi.lhs_gaussian - 10.0), "<=", 1e-12});
        if (std::string(cs.name) == "stuck_needle")
            checks.push_back({"stuck_needle_second_moment_small", vi.lhs_gaussian, "<=", 0.03 * hb});
    }
    extra["variance_identity"] = vj;

    // finite-range bound with <mu_P> at the box centre
    json fj;
    for (double P : {2.0, 4.0, 8.0}) {
        SwapParams s2 = sp;
        s2.pointer_p_mean = 1.0;
        const MeasurementModel m2 = swap_rotation_model(s2);
        RangeBox box{0.0, 1.0, P, P, 1.0, 1.0};
        const ConstrainedValue v = constrained_maximal_rms(ErrorKind::eps_pi, m2, box, Backend::gaussian, c.optimizer);
        fj[format_number(P)] = {{"value", num(v.value)}, {"feasible", v.feasible}, {"max_violation", num(v.max_violation)}};
        checks.push_back({"finite_range_eps_pi_minus_half_P_at_P_" + format_number(P), v.value - P / 2, ">=", -1e-6});
    }
    extra["finite_range_delta_ei_p"] = fj;

    for (double L : {4.0, 8.0}) {
        SwapParams s2 = sp;
        s2.pointer_p_mean = 1.0;
        const MeasurementModel m2 = swap_rotation_model(s2);
        const RangeBox box{0.0, 1.0, L, L, 1.0, 1.0};
        const InequalityMargins fm = check_seven_inequalities(m2, box, Backend::gaussian, c.fock, c.optimizer);
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& r : fm.relations)
            if (r.name.rfind("finite_", 0) == 0 && r.margin) worst = std::min(worst, *r.margin);
        checks.push_back({"finite_range_worst_margin_L_" + format_number(L), worst, ">=", -1e-6 * hb});
    }
    extra["model"] = m.name;
    extra["semantics"] = "finite-range values are lower bounds; nonnegative margins confirm the relations";
    return emit_checks(checks, extra, "counterexample", c, log);
}

// ---------------------------------------------------------------- selftest

int run_selftest(const ScenarioConfig& c, std::ostream& log) {
    std::vector<Check> checks;
    const double hb = param(c, "hbar");
    std::mt19937_64 rng(c.optimizer.seed);
    std::normal_distribution<double> g;
    auto rvec = [&](long n) {
        CVec v(n);
        for (long i = 0; i < n; ++i) v(i) = cplx(g(rng), g(rng));
        return CVec(v.normalized());
    };

    double ccr = 0.0;
    for (int d = 2; d <= 32; ++d) {
        const ModeSpace md = make_mode(d, hb);
        const CMat r = md.x_op * md.p_op - md.p_op * md.x_op - cplx(0, hb) * CMat::Identity(d, d);
        ccr = std::max(ccr, r.topLeftCorner(d - 1, d - 1).cwiseAbs().maxCoeff());
    }
    checks.push_back({"mode_projected_ccr_residual", ccr, "<=", 1e-10});

    {
        CMat a(10, 10);
        for (int i = 0; i < 10; ++i)
            for (int j = 0; j < 10; ++j) a(i, j) = cplx(g(rng), g(rng));
        const CMat h = a + a.adjoint();
        const CMat u = evolve_unitary(h, 0.37, hb), ui = evolve_unitary(h, -0.37, hb);
        checks.push_back({"evolve_unitary_inverse", (u * ui - CMat::Identity(10, 10)).cwiseAbs().maxCoeff(), "<=", 1e-10});
        checks.push_back({"evolve_unitary_norm", std::abs((u * rvec(10)).norm() - 1.0), "<=", 1e-10});
    }

    const std::vector<MeasurementModel> catalog = {arthurs_kelly(1.0, 1.0, hb), arthurs_kelly(1.0, 0.25, hb),
                                                   swap_rotation_model({hb, 0, 0, 0}),
                                                   biased_variant(arthurs_kelly(1.0, 1.0, hb), {2.0, 0.0, 1.0, 0.0})};
    double sdef = 0.0;
    for (const auto& m : catalog) sdef = std::max(sdef, symplectic_defect(symplectic_map(m).S));
    checks.push_back({"catalog_symplectic_defect", sdef, "<=", 1e-10});

    // partial expectation against the direct tensor expectation on a small composite
    {
        const MeasurementModel& m = catalog[0];
        const FockRealization f = realize(m, 6);
        const ErrorOperators ops = error_operators(f);
        double worst = 0.0;
        for (ErrorKind k : kErrorKinds) {
            const OperatorMatrix sq = ops[k] * ops[k];
            const CMat a = partial_expectation(sq, f);
            for (int i = 0; i < 10; ++i) {
                const CVec psi = rvec(6);
                const CVec joint = f.with_apparatus(psi);
                const cplx direct = joint.dot(sq.entries * joint);
                worst = std::max(worst, std::abs(psi.dot(a * psi) - direct));
            }
        }
        checks.push_back({"partial_expectation_vs_direct", worst, "<=", 1e-10});
    }

    // backend agreement on low coherent inputs
    {
        double worst = 0.0;
        for (const auto& m : catalog) {
            const BackendAgreement a = backend_cross_validation(m, {{0.0, 0.0}, {1.0, -0.5}}, c.fock.working);
            worst = std::max({worst, a.max_relative, a.max_absolute_at_zero});
        }
        checks.push_back({"backend_second_moment_agreement", worst, "<=", 1e-6});
    }

    // unbiased per-state products
    {
        const PerStateBounds b = per_state_bounds(catalog[0], 100, c.optimizer.seed, Backend::gaussian, c.fock);
        checks.push_back({"arthurs_kelly_unbiased", b.premise ? 1.0 : 0.0, ">=", 1.0});
        checks.push_back({"arthurs_kelly_per_state_min_margin", *std::min_element(b.min_margin.begin(), b.min_margin.end()),
                          ">=", -1e-6 * hb * hb / 4.0});
    }
    json extra = {{"suite", "invariants"}};
    return emit_checks(checks, extra, "selftest", c, log);
}

} // namespace jmlab
