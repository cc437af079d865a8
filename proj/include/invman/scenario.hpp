#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "invman/bifurcation.hpp"
#include "invman/error.hpp"

namespace invman {

/** Every knob of a run. Field names match the INI keys. */
struct ScenarioConfig {
    std::string name = "scenario";

    // [domain]
    double half_width = 20;
    int nodes = 201;

    // [potential]  poschl_teller | constant | double_well | tabulated
    std::string potential = "poschl_teller";
    double v_inf = 3;
    double depth = 2;
    double width = 1;
    double separation = 3;
    std::string potential_file;

    // [nonlinearity]  tanh_sech | tanh | sech_profile | constant | clamped_linear | zero | tabulated
    std::string nonlinearity = "tanh_sech";
    double scale = 0.07;
    std::optional<double> f_plus, f_minus;
    double cap = 1;
    std::string nonlinearity_file;

    // [solver]
    /** Zero picks the lowest eigenvalue. */
    double lambda_star = 0;
    double alpha = 0.5;
    double mu = 0;
    double horizon = 0;
    double dt = 0.25;
    double tol = 1e-11;
    int max_iter = 200;
    int lipschitz_samples = 400;
    int decay_samples = 4000;
    double match_tol = 1e-2;
    double cluster_tol = 1e-8;
    double beta_fraction = 0.8;
    std::string backend = "parallel";
    std::uint64_t seed = 1;

    // [bifurcation]
    /** Unbounded grid; unset ends default to lambda* - eta_max and lambda* - eta_min. */
    std::optional<double> lambda_min, lambda_max;
    int lambda_steps = 8;
    double eta_min = 0.002;
    double eta_max = 0.02;
    /** Bounded branch covers lambda* +- bounded_offset. */
    double bounded_offset = 0.05;
    int bounded_steps = 8;
    double three_solutions_offset = 0.01;
    double index_offset = 0.15;
    double field_tol = 1e-10;
    double refine_tol = 1e-10;
    double branch_tol = 1e-8;
    int annulus_samples = 50;
    int verify_pairs = 10;
    double evolve_time = 5;
    double evolve_dt = 0.01;
};

/** Parse INI text; throws Error(config) naming the offending field. */
ScenarioConfig parse_config(std::istream& in, const std::string& name = "scenario");
ScenarioConfig load_config(const std::string& path);

/** Every field with its effective value. */
nlohmann::ordered_json config_json(const ScenarioConfig& cfg);

struct SuiteResult {
    std::string name;
    bool passed = false;
    double value = 0;
    double limit = 0;
    std::string detail;
};

struct RunReport {
    nlohmann::ordered_json json;
    std::vector<BifurcationBranch> branches;
    std::vector<SuiteResult> suites;
    bool all_passed() const;
};

/** Exit codes of the runner. */
enum ExitCode { exit_ok = 0, exit_config = 1, exit_gate = 2, exit_verify = 3, exit_failure = 4 };

/** Runs the whole pipeline and writes every artifact into out_dir. Nothing is written when the run
 * stops early. verify_only skips the bifurcation artifacts and writes verify.json. */
RunReport run_scenario(const ScenarioConfig& cfg, const std::string& out_dir, bool verify_only = false);

/** diagram.csv and report.json for a finished report. */
void emit_diagram(const RunReport& report, const std::string& out_dir);

/** Maps an exception from run_scenario to an exit code. */
int exit_code_for(const Error& e);

}  // namespace invman
