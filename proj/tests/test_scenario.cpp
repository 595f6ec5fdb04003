#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "jmlab/scenario.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace jmlab;
namespace fs = std::filesystem;

namespace {

ScenarioConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("jmlab_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(JMLAB_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

} // namespace

TEST_CASE("config sections, comments and sweep values") {
    const ScenarioConfig c = parse("# comment\n"
                                   "model = biased:arthurs_kelly\n"
                                   "backend = gaussian\n"
                                   "pointer_squeeze = 2\n"
                                   "gain_x = 2\n"
                                   "seed = 42\n"
                                   "[box]\n"
                                   "x0 = 0.5\nL = 3\nP = 4\n"
                                   "[sweep]\n"
                                   "parameter = box.L\n"
                                   "values = 1, 2 3\n");
    CHECK(c.model == "biased:arthurs_kelly");
    CHECK(c.backend == Backend::gaussian);
    CHECK(param(c, "pointer_squeeze") == 2.0);
    CHECK(param(c, "coupling") == 1.0);
    CHECK(c.optimizer.seed == 42);
    REQUIRE(c.box.has_value());
    CHECK(c.box->x0 == 0.5);
    CHECK(c.box->P == 4.0);
    CHECK(c.sweep_values == std::vector<double>{1.0, 2.0, 3.0});

    const ScenarioConfig l = with_parameter(c, "box.L", 5.0);
    CHECK(l.box->L == 5.0);
    const MeasurementModel m = build_model(with_parameter(c, "gain_x", 3.0));
    CHECK(m.parameters.back().first == "offset_p");
}

TEST_CASE("config errors") {
    CHECK_THROWS_AS(parse("colour = red\n"), ConfigError);
    CHECK_THROWS_AS(parse("coupling = fast\n"), ConfigError);
    CHECK_THROWS_AS(parse("model = pendulum\n"), ConfigError);
    CHECK_THROWS_AS(parse("[box]\nsigma = 0.1\ntau = 0.1\n"), ConfigError);
    CHECK_THROWS_AS(parse("[sweep]\nvalues = 1 2\n"), ConfigError);
    CHECK_THROWS_AS(parse("[sweep]\nparameter = nothing\nvalues = 1\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/jmlab.ini"), IoError);
}

TEST_CASE("number formatting and CSV") {
    CHECK(format_number(0.1) == "0.10000000000000001");
    CHECK(format_number(2.0) == "2");
    CHECK(format_number(INFINITY) == "inf");
    CHECK(format_number(-INFINITY) == "-inf");
    CHECK(format_number(NAN) == "nan");
    Table t{{"a", "b"}, {{"1", "2"}, {"3", "4"}}};
    CHECK(to_csv(t) == "a,b\n1,2\n3,4\n");
}

TEST_CASE("report writes JSON and CSV") {
    const fs::path dir = scratch("report");
    ScenarioConfig c = parse("model = swap_rotation\nbackend = gaussian\npointer_p_mean = 1\n");
    c.out_dir = dir.string();
    std::ostringstream log;
    CHECK(run_report(c, log) == exit_ok);
    CHECK(fs::exists(dir / "report.json"));
    std::ifstream csv(dir / "report.csv", std::ios::binary);
    std::string header;
    std::getline(csv, header);
    CHECK(header.rfind("point,delta_ei_x", 0) == 0);
    std::stringstream rest;
    rest << csv.rdbuf();
    CHECK(rest.str().find('\r') == std::string::npos);
}

TEST_CASE("CLI exit codes") {
    const fs::path dir = scratch("cli");
    CHECK(run_cli("report /nonexistent/jmlab.ini") == exit_io);
    CHECK(run_cli("report") == exit_config);
    CHECK(run_cli("selftest --dims 2") == exit_config);
    CHECK(run_cli("selftest --backend dense") == exit_config);
    CHECK(run_cli("frobnicate") == exit_config);

    const fs::path bad = dir / "bad.ini";
    std::ofstream(bad) << "model = arthurs_kelly\ncoupling = 0\n";
    CHECK(run_cli("report " + bad.string()) == exit_config);

    const fs::path good = dir / "good.ini";
    std::ofstream(good) << "model = arthurs_kelly\nbackend = gaussian\n";
    CHECK(run_cli("report --config " + good.string() + " --out " + (dir / "out").string()) == exit_ok);
    CHECK(fs::exists(dir / "out" / "report.csv"));

    // output directory blocked by a regular file
    const fs::path blocker = dir / "blocker";
    std::ofstream(blocker) << "x";
    CHECK(run_cli("report " + good.string() + " --out " + (blocker / "sub").string()) == exit_io);
}
