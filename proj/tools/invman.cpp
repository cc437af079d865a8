// invman: runs a scenario file and writes its artifacts.
#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "invman/error.hpp"
#include "invman/scenario.hpp"

using namespace invman;

int main(int argc, char** argv) {
    CLI::App app{"Invariant manifold reduction and bifurcation from infinity near lambda*"};
    std::string config_path, out_dir = "out";
    std::optional<double> lambda_min, lambda_max;
    std::optional<int> lambda_steps;
    std::optional<std::uint64_t> seed;
    bool verify = false;
    app.add_option("--config", config_path, "scenario file (INI)")->required();
    app.add_option("--out", out_dir, "output directory");
    app.add_option("--lambda-min", lambda_min, "first lambda of the unbounded continuation grid");
    app.add_option("--lambda-max", lambda_max, "last lambda of the unbounded continuation grid");
    app.add_option("--lambda-steps", lambda_steps, "number of continuation points");
    app.add_flag("--verify", verify, "run the invariant suites only");
    app.add_option("--seed", seed, "random seed");
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : exit_config;
    }

    try {
        ScenarioConfig cfg = load_config(config_path);
        if (lambda_min) cfg.lambda_min = *lambda_min;
        if (lambda_max) cfg.lambda_max = *lambda_max;
        if (lambda_steps) cfg.lambda_steps = *lambda_steps;
        if (seed) cfg.seed = *seed;
        RunReport rep = run_scenario(cfg, out_dir, verify);

        const auto& G = rep.json["gate"];
        std::printf("lambda* = %.10g  beta = %.6g  M = %.6g\n", rep.json["spectrum"]["lambda_star"].get<double>(),
                    rep.json["split"]["beta"].get<double>(), rep.json["split"]["M"].get<double>());
        std::printf("gate: F_mu = %.6g  L_f = %.6g  product = %.6g\n", G["F_mu"].get<double>(),
                    G["L_f"].get<double>(), G["product"].get<double>());
        const auto& T = rep.json["three_solutions"];
        if (T["found"].get<bool>()) {
            std::printf("three solutions at lambda = %.10g:", T["lambda"].get<double>());
            for (const auto& s : T["solutions"]) std::printf("  |u| = %.6g", s["l2_norm"].get<double>());
            std::printf("\n");
        } else {
            std::printf("three solutions at lambda = %.10g not found: %s\n", T["lambda"].get<double>(),
                        T["error"].get<std::string>().c_str());
        }
        for (const auto& s : rep.suites)
            std::printf("[%s] %-16s %.6g (limit %.6g)  %s\n", s.passed ? "PASS" : "FAIL", s.name.c_str(), s.value,
                        s.limit, s.detail.c_str());
        std::printf("artifacts in %s\n", out_dir.c_str());
        if (verify && !rep.all_passed()) return exit_verify;
        return exit_ok;
    } catch (const ValueError& e) {
        std::cerr << "invman: " << e.what() << '\n';
        if (e.kind() == ErrorKind::refused) std::cerr << "gate product: " << e.value() << '\n';
        return exit_code_for(e);
    } catch (const Error& e) {
        std::cerr << "invman: " << e.what() << '\n';
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "invman: " << e.what() << '\n';
        return exit_failure;
    }
}
