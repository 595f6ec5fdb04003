#pragma once

#include "jmlab/verify.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace jmlab {

enum ExitCode { exit_ok = 0, exit_config = 2, exit_numerical = 3, exit_io = 4 };

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ScenarioConfig {
    std::string model = "arthurs_kelly"; // "arthurs_kelly", "swap_rotation", "biased:<base>"
    Backend backend = Backend::both;
    std::map<std::string, double> params; // model and input parameters, see model_keys()
    FockSettings fock;
    OptimizerSettings optimizer;
    std::optional<RangeBox> box;
    std::string sweep_parameter;
    std::vector<double> sweep_values;
    std::string out_dir = ".";
};

// numeric keys accepted at top level besides dims/probe/working/seed/starts
const std::vector<std::string>& model_keys();

ScenarioConfig parse_config(std::istream& in);
ScenarioConfig load_config(const std::string& path);

// value of a numeric parameter with its default
double param(const ScenarioConfig& c, const std::string& key);
MeasurementModel build_model(const ScenarioConfig& c);
GaussianState system_input(const ScenarioConfig& c);
// copy of c with one parameter replaced; "box.<field>" addresses the range box
ScenarioConfig with_parameter(const ScenarioConfig& c, const std::string& key, double value);

// %.17g, "inf"/"-inf"/"nan" for non-finite values
std::string format_number(double v);

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};
std::string to_csv(const Table& t);
void write_file(const std::string& dir, const std::string& name, const std::string& content);

// Subcommands. Each writes its files into c.out_dir (or `out`) and returns an exit code.
int run_report(const ScenarioConfig& c, std::ostream& log);
int run_sweep(const ScenarioConfig& c, std::ostream& log);
int run_verify_commutators(const ScenarioConfig& c, std::ostream& log);
int run_counterexample(const ScenarioConfig& c, std::ostream& log);
int run_selftest(const ScenarioConfig& c, std::ostream& log);

} // namespace jmlab
