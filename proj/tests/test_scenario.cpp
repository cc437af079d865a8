#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "invman/error.hpp"
#include "invman/scenario.hpp"

using namespace invman;
namespace fs = std::filesystem;

namespace {

ScenarioConfig parse(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in, "t");
}

std::string config_message(const std::string& text) {
    try {
        parse(text);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::config);
        return e.what();
    }
    FAIL("config accepted");
    return "";
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path fresh_dir(const std::string& name) {
    auto d = fs::temp_directory_path() / name;
    fs::remove_all(d);
    return d;
}

// a lighter version of the demo for the end-to-end checks
ScenarioConfig light() {
    auto c = load_config(std::string(INVMAN_CONFIG_DIR) + "/poschl_teller_demo.ini");
    c.decay_samples = 500;
    c.lipschitz_samples = 100;
    c.annulus_samples = 20;
    c.verify_pairs = 3;
    c.lambda_steps = 6;
    return c;
}

int run_cli(const std::string& args) {
    std::string cmd = std::string(INVMAN_BIN) + " " + args + " > /dev/null 2>&1";
    int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST_CASE("defaults and overrides") {
    auto c = parse("[domain]\nnodes = 401\n[nonlinearity]\nkind = tanh\nscale = 0.05\n[solver]\nbackend = serial\n");
    CHECK(c.nodes == 401);
    CHECK(c.half_width == 20);
    CHECK(c.nonlinearity == "tanh");
    CHECK(c.scale == 0.05);
    CHECK(c.backend == "serial");
    CHECK_FALSE(c.lambda_min);
    auto j = config_json(c);
    CHECK(j["domain"]["nodes"] == 401);
    CHECK(j["bifurcation"]["lambda_min"].is_null());
    CHECK(j["solver"]["alpha"] == 0.5);
}

TEST_CASE("configuration errors name the field") {
    CHECK(config_message("").find("configuration is empty") != std::string::npos);
    CHECK(config_message("  \n\n").find("configuration is empty") != std::string::npos);
    CHECK(config_message("[domain]\nwidth = 3\n").find("domain.width: unknown key") != std::string::npos);
    CHECK(config_message("[domain]\nnodes = many\n").find("domain.nodes") != std::string::npos);
    CHECK(config_message("[domain]\nnodes = 3\n").find("domain.nodes") != std::string::npos);
    CHECK(config_message("[solver]\nalpha = 1.5\n").find("solver.alpha") != std::string::npos);
    CHECK(config_message("[solver]\ndt = 0.1x\n").find("solver.dt") != std::string::npos);
    CHECK(config_message("[solver]\nbackend = gpu\n").find("solver.backend") != std::string::npos);
    CHECK(config_message("[bifurcation]\neta_max = 0.001\n").find("bifurcation.eta_max") != std::string::npos);
    CHECK_THROWS_AS(load_config("/nonexistent/x.ini"), Error);
}

TEST_CASE("unknown model kinds are configuration errors at run time") {
    auto c = parse("[potential]\nkind = square\n");
    try {
        run_scenario(c, (fs::temp_directory_path() / "invman_kind_test").string());
        FAIL("expected config error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::config);
        CHECK(exit_code_for(e) == exit_config);
    }
    CHECK(exit_code_for(Error(ErrorKind::refused, "")) == exit_gate);
    CHECK(exit_code_for(Error(ErrorKind::non_convergence, "")) == exit_failure);
}

TEST_CASE("gate failure writes nothing") {
    auto c = parse("[nonlinearity]\nkind = tanh_sech\nscale = 10\n");
    auto dir = fresh_dir("invman_gate_test");
    try {
        run_scenario(c, dir.string());
        FAIL("expected refused");
    } catch (const ValueError& e) {
        CHECK(e.kind() == ErrorKind::refused);
        CHECK(e.value() > 1);
    }
    CHECK((!fs::exists(dir) || fs::is_empty(dir)));
}

TEST_CASE("full run: artifacts, labels and determinism") {
    auto c = light();
    auto a = fresh_dir("invman_run_a"), b = fresh_dir("invman_run_b");
    auto ra = run_scenario(c, a.string());
    auto rb = run_scenario(c, b.string());
    for (const char* f : {"spectrum.csv", "spectrum_modes.csv", "decay.csv", "manifold_samples.csv", "equilibria.csv",
                          "evolution.csv", "diagram.csv", "report.json"}) {
        INFO(f);
        REQUIRE(fs::exists(a / f));
        CHECK(slurp(a / f) == slurp(b / f));
    }
    CHECK_FALSE(fs::exists(a / ".staging"));
    for (const auto& s : ra.suites) {
        INFO(s.name << ": " << s.detail);
        CHECK(s.passed);
    }
    CHECK(ra.json["passed"] == true);
    // every label shows up in the diagram
    std::set<std::string> labels;
    std::ifstream in(a / "diagram.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        auto p = line.find(',');
        labels.insert(line.substr(p + 1, line.find(',', p + 1) - p - 1));
    }
    CHECK(labels == std::set<std::string>{"plus-infinity", "minus-infinity", "bounded"});
    // emit_diagram rewrites the same files
    auto e = fresh_dir("invman_emit");
    fs::create_directories(e);
    emit_diagram(ra, e.string());
    CHECK(slurp(e / "diagram.csv") == slurp(a / "diagram.csv"));
    RunReport empty;
    CHECK_THROWS_AS(emit_diagram(empty, e.string()), Error);
    for (const auto& d : {a, b, e}) fs::remove_all(d);
}

TEST_CASE("verify-only run on the linear model fails the multiplicity suites") {
    auto c = load_config(std::string(INVMAN_CONFIG_DIR) + "/linear.ini");
    c.decay_samples = 500;
    c.verify_pairs = 3;
    auto d = fresh_dir("invman_verify_linear");
    auto rep = run_scenario(c, d.string(), true);
    CHECK(fs::exists(d / "verify.json"));
    CHECK_FALSE(fs::exists(d / "report.json"));
    CHECK_FALSE(rep.all_passed());
    std::set<std::string> failed;
    for (const auto& s : rep.suites)
        if (!s.passed) failed.insert(s.name);
    CHECK(failed == std::set<std::string>{"annulus", "three_solutions", "blowup"});
    fs::remove_all(d);
}

TEST_CASE("command line exit codes") {
    const std::string cfg = INVMAN_CONFIG_DIR;
    auto d = fresh_dir("invman_cli");
    CHECK(run_cli("") == 1);
    CHECK(run_cli("--config " + cfg + "/gate_failure.ini --out " + d.string()) == 2);
    CHECK_FALSE(fs::exists(d / "report.json"));
    auto empty = fs::temp_directory_path() / "invman_empty.ini";
    { std::ofstream(empty) << "\n"; }
    CHECK(run_cli("--config " + empty.string() + " --out " + d.string()) == 1);
    CHECK(run_cli("--config " + cfg + "/poschl_teller_demo.ini --lambda-max 2.5 --out " + d.string()) == 1);
    CHECK(run_cli("--config " + cfg + "/linear.ini --verify --out " + d.string()) == 3);
    fs::remove(empty);
    fs::remove_all(d);
}
