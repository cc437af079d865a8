#include "invman/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "invman/error.hpp"
#include "invman/pde_oracle.hpp"

namespace invman {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
    throw Error(ErrorKind::config, path + ": " + what);
}

double parse_double(const std::string& path, const std::string& text) {
    std::size_t used = 0;
    double v = 0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || !std::isfinite(v)) config_error(path, "expected a number, got '" + text + "'");
    return v;
}

template <class I>
I parse_integer(const std::string& path, const std::string& text) {
    I v{};
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || end != text.data() + text.size())
        config_error(path, "expected an integer, got '" + text + "'");
    return v;
}

template <class T>
void assign(T& dst, const std::string& path, const std::string& text) {
    if constexpr (std::is_same_v<T, double>) dst = parse_double(path, text);
    else if constexpr (std::is_same_v<T, std::optional<double>>) dst = parse_double(path, text);
    else if constexpr (std::is_same_v<T, std::string>) dst = text;
    else dst = parse_integer<T>(path, text);
}

template <class T>
json to_json(const T& v) {
    if constexpr (std::is_same_v<T, std::optional<double>>) return v ? json(*v) : json(nullptr);
    else return json(v);
}

struct Field {
    std::string path;
    std::function<void(ScenarioConfig&, const std::string&)> set;
    std::function<json(const ScenarioConfig&)> get;
};

template <class T>
Field field(const std::string& path, T ScenarioConfig::*member) {
    return {path, [path, member](ScenarioConfig& c, const std::string& text) { assign(c.*member, path, text); },
            [member](const ScenarioConfig& c) { return to_json(c.*member); }};
}

const std::vector<Field>& schema() {
    using C = ScenarioConfig;
    static const std::vector<Field> fields = {
        field("domain.half_width", &C::half_width),
        field("domain.nodes", &C::nodes),
        field("potential.kind", &C::potential),
        field("potential.v_inf", &C::v_inf),
        field("potential.depth", &C::depth),
        field("potential.width", &C::width),
        field("potential.separation", &C::separation),
        field("potential.file", &C::potential_file),
        field("nonlinearity.kind", &C::nonlinearity),
        field("nonlinearity.scale", &C::scale),
        field("nonlinearity.f_plus", &C::f_plus),
        field("nonlinearity.f_minus", &C::f_minus),
        field("nonlinearity.cap", &C::cap),
        field("nonlinearity.file", &C::nonlinearity_file),
        field("solver.lambda_star", &C::lambda_star),
        field("solver.alpha", &C::alpha),
        field("solver.mu", &C::mu),
        field("solver.horizon", &C::horizon),
        field("solver.dt", &C::dt),
        field("solver.tol", &C::tol),
        field("solver.max_iter", &C::max_iter),
        field("solver.lipschitz_samples", &C::lipschitz_samples),
        field("solver.decay_samples", &C::decay_samples),
        field("solver.match_tol", &C::match_tol),
        field("solver.cluster_tol", &C::cluster_tol),
        field("solver.beta_fraction", &C::beta_fraction),
        field("solver.backend", &C::backend),
        field("solver.seed", &C::seed),
        field("bifurcation.lambda_min", &C::lambda_min),
        field("bifurcation.lambda_max", &C::lambda_max),
        field("bifurcation.lambda_steps", &C::lambda_steps),
        field("bifurcation.eta_min", &C::eta_min),
        field("bifurcation.eta_max", &C::eta_max),
        field("bifurcation.bounded_offset", &C::bounded_offset),
        field("bifurcation.bounded_steps", &C::bounded_steps),
        field("bifurcation.three_solutions_offset", &C::three_solutions_offset),
        field("bifurcation.index_offset", &C::index_offset),
        field("bifurcation.field_tol", &C::field_tol),
        field("bifurcation.refine_tol", &C::refine_tol),
        field("bifurcation.branch_tol", &C::branch_tol),
        field("bifurcation.annulus_samples", &C::annulus_samples),
        field("bifurcation.verify_pairs", &C::verify_pairs),
        field("bifurcation.evolve_time", &C::evolve_time),
        field("bifurcation.evolve_dt", &C::evolve_dt),
    };
    return fields;
}

void require(bool ok, const std::string& path, const std::string& what) {
    if (!ok) config_error(path, what);
}

void validate(const ScenarioConfig& c) {
    require(c.half_width > 0, "domain.half_width", "must be positive");
    require(c.nodes >= 7, "domain.nodes", "need at least 7 nodes");
    require(c.alpha >= 0 && c.alpha < 1, "solver.alpha", "must lie in [0, 1)");
    require(c.mu >= 0, "solver.mu", "must be >= 0");
    require(c.horizon >= 0, "solver.horizon", "must be >= 0");
    require(c.dt > 0, "solver.dt", "must be positive");
    require(c.tol > 0, "solver.tol", "must be positive");
    require(c.max_iter > 0, "solver.max_iter", "must be positive");
    require(c.lipschitz_samples > 0, "solver.lipschitz_samples", "must be positive");
    require(c.decay_samples > 0, "solver.decay_samples", "must be positive");
    require(c.match_tol > 0, "solver.match_tol", "must be positive");
    require(c.cluster_tol > 0, "solver.cluster_tol", "must be positive");
    require(c.beta_fraction > 0 && c.beta_fraction < 1, "solver.beta_fraction", "must lie in (0, 1)");
    require(c.backend == "serial" || c.backend == "parallel", "solver.backend", "expected serial or parallel");
    require(c.lambda_steps >= 2, "bifurcation.lambda_steps", "need at least 2 points");
    require(c.eta_min > 0, "bifurcation.eta_min", "must be positive");
    require(c.eta_max > c.eta_min, "bifurcation.eta_max", "must exceed eta_min");
    require(c.bounded_offset > 0, "bifurcation.bounded_offset", "must be positive");
    require(c.bounded_steps >= 2, "bifurcation.bounded_steps", "need at least 2 points");
    require(c.three_solutions_offset > 0, "bifurcation.three_solutions_offset", "must be positive");
    require(c.index_offset > 0, "bifurcation.index_offset", "must be positive");
    require(c.field_tol > 0, "bifurcation.field_tol", "must be positive");
    require(c.refine_tol > 0, "bifurcation.refine_tol", "must be positive");
    require(c.branch_tol > 0, "bifurcation.branch_tol", "must be positive");
    require(c.annulus_samples > 0, "bifurcation.annulus_samples", "must be positive");
    require(c.verify_pairs > 0, "bifurcation.verify_pairs", "must be positive");
    require(c.evolve_time > 0, "bifurcation.evolve_time", "must be positive");
    require(c.evolve_dt > 0 && c.evolve_dt < c.evolve_time, "bifurcation.evolve_dt", "must lie in (0, evolve_time)");
}

Potential make_potential(const ScenarioConfig& c) {
    if (c.potential == "poschl_teller") return poschl_teller(c.v_inf, c.depth, c.width);
    if (c.potential == "constant") return constant_potential(c.v_inf);
    if (c.potential == "double_well") return double_well(c.v_inf, c.depth, c.separation);
    if (c.potential == "tabulated") {
        require(!c.potential_file.empty(), "potential.file", "required for a tabulated potential");
        return load_potential_csv(c.potential_file);
    }
    config_error("potential.kind", "unknown potential '" + c.potential + "'");
}

Nonlinearity make_nonlinearity(const ScenarioConfig& c) {
    const std::string& k = c.nonlinearity;
    if (k == "tanh_sech") return tanh_sech(c.scale, c.f_plus.value_or(-1), c.f_minus.value_or(-1));
    if (k == "tanh") return tanh_plain(c.scale);
    if (k == "sech_profile") return sech_profile(c.scale);
    if (k == "constant") return constant_nonlinearity(c.scale);
    if (k == "clamped_linear") return clamped_linear(c.scale, c.cap);
    if (k == "zero") return zero_nonlinearity();
    if (k == "tabulated") {
        require(!c.nonlinearity_file.empty(), "nonlinearity.file", "required for a tabulated nonlinearity");
        require(c.f_plus && c.f_minus, "nonlinearity.f_plus", "tabulated tables need f_plus and f_minus");
        return load_nonlinearity_csv(c.nonlinearity_file, *c.f_plus, *c.f_minus);
    }
    config_error("nonlinearity.kind", "unknown nonlinearity '" + k + "'");
}

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = a + (b - a) * i / (n - 1);
    return v;
}

json branch_json(const BifurcationBranch& br) {
    json j;
    j["label"] = label_name(br.label);
    j["points"] = br.points.size();
    j["termination"] = br.termination;
    if (br.fit)
        j["fit"] = {{"slope", br.fit->slope}, {"intercept", br.fit->intercept}, {"r2", br.fit->r2},
                    {"C", br.fit->C}, {"points", br.fit->points}};
    else
        j["fit"] = nullptr;
    json pts = json::array();
    for (const auto& p : br.points)
        pts.push_back({{"lambda", p.lambda}, {"w", std::vector<double>(p.w.begin(), p.w.end())},
                       {"l2_norm", p.l2_norm}, {"energy_norm", p.energy_norm}, {"morse_index", p.morse_index},
                       {"residual", p.residual}, {"refined_residual", p.refined_residual}});
    j["samples"] = std::move(pts);
    return j;
}

json point_json(const BranchPoint& p) {
    return {{"w", std::vector<double>(p.w.begin(), p.w.end())},
            {"l2_norm", p.l2_norm},
            {"energy_norm", p.energy_norm},
            {"morse_index", p.morse_index},
            {"residual", p.residual},
            {"refined", p.refined},
            {"refined_residual", p.refined_residual},
            {"refine_shift", p.refine_shift}};
}

/** Removes the staging directory unless released. */
struct Staging {
    fs::path dir;
    bool keep = false;
    ~Staging() {
        if (!keep) {
            std::error_code ec;
            fs::remove_all(dir, ec);
        }
    }
    std::string file(const std::string& name) const { return (dir / name).string(); }
};

void write_json(const json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path);
    out << j.dump(2) << '\n';
}

SuiteResult suite(const std::string& name, bool passed, double value, double limit, const std::string& detail) {
    return {name, passed, value, limit, detail};
}

}  // namespace

ScenarioConfig parse_config(std::istream& in, const std::string& name) {
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) config_error("<file>", "configuration is empty");

    boost::property_tree::ptree tree;
    try {
        std::istringstream is(text);
        boost::property_tree::read_ini(is, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        config_error("<file>:" + std::to_string(e.line()), e.message());
    }

    ScenarioConfig cfg;
    cfg.name = name;
    const auto& fields = schema();
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) config_error(section, "key outside of a section");
        for (const auto& [key, value] : body) {
            std::string path = section + "." + key;
            auto it = std::find_if(fields.begin(), fields.end(), [&](const Field& f) { return f.path == path; });
            if (it == fields.end()) config_error(path, "unknown key");
            std::string v = value.get_value<std::string>();
            if (v.empty()) config_error(path, "missing value");
            it->set(cfg, v);
        }
    }
    validate(cfg);
    return cfg;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) config_error(path, "cannot open configuration file");
    return parse_config(in, fs::path(path).stem().string());
}

json config_json(const ScenarioConfig& cfg) {
    json j;
    j["name"] = cfg.name;
    for (const auto& f : schema()) {
        auto dot = f.path.find('.');
        j[f.path.substr(0, dot)][f.path.substr(dot + 1)] = f.get(cfg);
    }
    return j;
}

bool RunReport::all_passed() const {
    return std::all_of(suites.begin(), suites.end(), [](const SuiteResult& s) { return s.passed; });
}

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::config: return exit_config;
        case ErrorKind::refused: return exit_gate;
        default: return exit_failure;
    }
}

RunReport run_scenario(const ScenarioConfig& cfg, const std::string& out_dir, bool verify_only) {
    validate(cfg);
    Potential pot = make_potential(cfg);
    Nonlinearity f = make_nonlinearity(cfg);

    auto op = std::make_shared<const DiscreteOperator>(assemble_operator(build_domain(cfg.half_width, cfg.nodes), pot));
    auto spec = std::make_shared<const SpectrumData>(compute_spectrum(*op));
    if (spec->point_spectrum.empty())
        throw Error(ErrorKind::assumption_violation, "no eigenvalue below the essential threshold");
    const double target = cfg.lambda_star != 0 ? cfg.lambda_star : spec->point_spectrum.front();

    SplitOptions so;
    so.match_tol = cfg.match_tol;
    so.cluster_tol = cfg.cluster_tol;
    so.beta_fraction = cfg.beta_fraction;
    so.decay_samples = cfg.decay_samples;
    so.seed = cfg.seed;
    SpectralSplit split = spectral_split(spec, target, cfg.alpha, so);
    const double ls = split.lambda_star;
    const double window = split.beta / 4;

    ManifoldOptions mo;
    mo.mu = cfg.mu;
    mo.horizon = cfg.horizon;
    mo.dt = cfg.dt;
    mo.tol = cfg.tol;
    mo.max_iter = cfg.max_iter;
    mo.lipschitz_samples = cfg.lipschitz_samples;
    mo.backend = cfg.backend == "serial" ? kernels::Backend::serial : kernels::Backend::parallel;
    auto ctx = ManifoldContext::make(split, *op, f, mo);
    if (!ctx->gate.passes()) {
        std::ostringstream msg;
        msg << "smallness gate failed: F_mu * L_f = " << ctx->F_mu << " * " << ctx->L_f << " = " << ctx->gate.product
            << " >= 1";
        throw ValueError(ErrorKind::refused, msg.str(), ctx->gate.product);
    }

    // parameter grids, checked against the window before anything is computed
    const double lmin = cfg.lambda_min.value_or(ls - cfg.eta_max);
    const double lmax = cfg.lambda_max.value_or(ls - cfg.eta_min);
    require(lmin < lmax, "bifurcation.lambda_min", "must be below lambda_max");
    require(lmax < ls, "bifurcation.lambda_max", "must be below lambda* = " + std::to_string(ls));
    require(ls - lmin < window, "bifurcation.lambda_min", "outside the window lambda* - beta/4");
    require(cfg.bounded_offset < window, "bifurcation.bounded_offset", "must be below beta/4");
    require(cfg.index_offset < window, "bifurcation.index_offset", "must be below beta/4");
    require(cfg.three_solutions_offset < window, "bifurcation.three_solutions_offset", "must be below beta/4");
    std::vector<double> unbounded_grid = linspace(lmin, lmax, cfg.lambda_steps);
    std::vector<double> bounded_grid = linspace(ls - cfg.bounded_offset, ls + cfg.bounded_offset, cfg.bounded_steps);
    const double lam3 = ls - cfg.three_solutions_offset;

    fs::create_directories(out_dir);
    Staging stage{fs::path(out_dir) / ".staging"};
    fs::remove_all(stage.dir);
    fs::create_directories(stage.dir);

    RunReport rep;
    json& J = rep.json;
    J["scenario"] = cfg.name;
    J["config"] = config_json(cfg);
    J["config"]["effective"] = {{"lambda_star", ls}, {"lambda_min", lmin}, {"lambda_max", lmax}};
    {
        json s;
        s["lambda_star"] = ls;
        s["multiplicity"] = split.m;
        s["discrete_count"] = spec->discrete_count;
        s["v_inf"] = spec->v_inf;
        s["point_spectrum"] = spec->point_spectrum;
        J["spectrum"] = s;
    }
    std::mt19937_64 rng(cfg.seed);

    // semigroup decay
    DecayReport decay = sample_decay_bounds(split, cfg.decay_samples, cfg.seed + 1, split.M, !verify_only);
    J["split"] = {{"beta", split.beta},   {"beta1", std::isfinite(split.beta1) ? json(split.beta1) : json(nullptr)},
                  {"beta2", split.beta2}, {"M", split.M},
                  {"alpha", split.alpha}, {"shift", split.shift},
                  {"smoothing_constant", decay.smoothing_constant}};
    J["gate"] = {{"mu", ctx->mu},
                 {"F_mu", ctx->F_mu},
                 {"L_f", ctx->L_f},
                 {"product", ctx->gate.product},
                 {"passes", ctx->gate.passes()}};
    const double xb = xi_bound(f, split);
    J["manifold"] = {{"horizon", ctx->horizon},
                     {"dt", cfg.dt},
                     {"tol", cfg.tol},
                     {"tail_bound", ctx->tail_bound(ctx->horizon)},
                     {"xi_bound", xb},
                     {"g_l2", ctx->g_l2}};

    FieldFamily family(ctx, op);
    AnnulusConstants k = annulus_constants(*ctx);
    J["annulus"] = {{"m_l1", k.m_l1}, {"delta", k.delta},         {"c0", k.c0},
                    {"C1", k.C1},     {"xi_radius", k.xi_radius}, {"R0", k.R0},
                    {"R0_found", k.R0_found}, {"theta1", k.theta1}, {"bounded_cap", bounded_cap(k)}};

    BranchOptions bo;
    bo.field_tol = cfg.field_tol;
    bo.refine_tol = cfg.refine_tol;
    bo.branch_tol = cfg.branch_tol;

    // branches
    json branch_errors = json::array();
    const int m = split.m;
    Vec e1 = Vec::Zero(m);
    e1[0] = 1;
    {
        AnnulusBounds b0 = annulus_bounds(k, unbounded_grid.front(), ls);
        double seed_radius = b0.exists ? 1.5 * b0.r_lambda : 10.0;
        for (double sign : {1.0, -1.0}) {
            BranchLabel label = sign > 0 ? BranchLabel::plus_infinity : BranchLabel::minus_infinity;
            try {
                rep.branches.push_back(continue_branch(family, unbounded_grid, sign * seed_radius * e1, label, bo));
            } catch (const Error& e) {
                branch_errors.push_back({{"label", label_name(label)}, {"error", e.what()}});
            }
        }
        try {
            rep.branches.push_back(continue_branch(family, bounded_grid, Vec::Zero(m), BranchLabel::bounded, bo));
        } catch (const Error& e) {
            branch_errors.push_back({{"label", "bounded"}, {"error", e.what()}});
        }
    }
    J["branches"] = json::array();
    for (const auto& br : rep.branches) J["branches"].push_back(branch_json(br));
    J["branch_errors"] = branch_errors;

    // three solutions
    std::optional<ThreeSolutions> three;
    std::string three_error;
    try {
        three = three_solutions(family, k, lam3, bo);
    } catch (const Error& e) {
        three_error = e.what();
    }
    if (three) {
        J["three_solutions"] = {{"lambda", lam3},
                                {"found", true},
                                {"r_lambda", three->bounds.r_lambda},
                                {"R_lambda", three->bounds.R_lambda},
                                {"min_separation", three->min_separation},
                                {"solutions", {point_json(three->e1), point_json(three->e2), point_json(three->e3)}}};
    } else {
        J["three_solutions"] = {{"lambda", lam3}, {"found", false}, {"error", three_error}};
    }

    // index signature
    std::optional<std::pair<int, int>> sig;
    std::string sig_error;
    try {
        sig = index_signature(family, ls - cfg.index_offset, ls + cfg.index_offset, cfg.field_tol);
    } catch (const Error& e) {
        sig_error = e.what();
    }
    J["index_signature"] = {{"lambda_left", ls - cfg.index_offset}, {"lambda_right", ls + cfg.index_offset}};
    if (sig) {
        J["index_signature"]["left"] = sig->first;
        J["index_signature"]["right"] = sig->second;
    } else {
        J["index_signature"]["error"] = sig_error;
    }

    // verification suites
    auto& S = rep.suites;
    {
        double worst = 0;
        for (int q = split.dim1; q < split.dim1 + m; ++q) {
            Vec phi = spec->vectors.col(q);
            worst = std::max(worst, (op->apply(phi) - spec->eigenvalues[q] * phi).norm() / (1 + std::abs(ls)));
        }
        S.push_back(suite("spectrum", worst <= 1e-8, worst, 1e-8, "relative eigenpair residual of the kernel modes"));
    }
    {
        int viol = count_decay_violations(split, split.M, cfg.decay_samples, cfg.seed + 2);
        S.push_back(suite("decay", viol == 0 && split.M >= 1, viol, 0, "violations of the sampled decay bounds"));
    }
    S.push_back(suite("gate", ctx->gate.passes(), ctx->gate.product, 1, "F_mu * L_f"));

    ManifoldMap map3(ctx, lam3);
    {
        TimeGrid grid = make_time_grid(ctx->horizon, cfg.dt);
        double worst = 0;
        std::uniform_real_distribution<double> size(0.1, 10.0);
        for (int i = 0; i < cfg.verify_pairs; ++i) {
            auto a = random_trajectory(*ctx, grid, rng, size(rng));
            auto b = random_trajectory(*ctx, grid, rng, size(rng));
            worst = std::max(worst, contraction_ratio(map3, size(rng) * random_unit(m, rng), a, b));
        }
        S.push_back(suite("contraction", worst <= ctx->gate.product, worst, ctx->gate.product,
                          "largest sampled ratio ||G(a) - G(b)|| / ||a - b||"));
    }
    {
        map3.clear_cache();
        auto ev = map3.evaluate(e1);
        S.push_back(suite("fixed_point", ev.residual <= 1e-8, ev.residual, 1e-8, "final sweep residual at w = e1"));
    }
    {
        double worst = 0;
        std::uniform_real_distribution<double> size(0.0, 50.0);
        for (int i = 0; i < cfg.verify_pairs; ++i) {
            Vec w = size(rng) * random_unit(m, rng);
            worst = std::max(worst, weighted_mode_norm(ctx->weights, map3.xi_modes(w)));
        }
        S.push_back(suite("xi_bound", worst <= xb, worst, xb, "largest sampled ||xi(w)||_alpha"));
    }
    {
        Vec u0 = map3.point(2.0 * e1);
        EvolveOptions eo;
        eo.scheme = Scheme::crank_nicolson;
        eo.keep_states = true;
        eo.record_every = 1000;
        auto ev = evolve(*op, f, lam3, u0, 5.0, 1e-3, eo);
        double worst = 0;
        for (const auto& u : ev.states) worst = std::max(worst, manifold_distance(u, map3));
        S.push_back(suite("invariance", worst <= 1e-6, worst, 1e-6, "manifold distance on [0, 5] from a point on M"));
    }
    Evolution attraction;
    {
        Vec u0 = random_smooth_state(split, rng, 1.0);
        EvolveOptions eo;
        eo.scheme = Scheme::crank_nicolson;
        eo.keep_states = true;
        eo.record_every = std::max(1, int(std::lround(0.1 / cfg.evolve_dt)));
        const double T = std::max(cfg.evolve_time, 15.0);
        attraction = evolve(*op, f, lam3, u0, T, cfg.evolve_dt, eo);
        double start = manifold_distance(attraction.states.front(), map3);
        double end = manifold_distance(attraction.states.back(), map3);
        S.push_back(suite("attraction", end <= 1e-5, end, 1e-5,
                          "manifold distance after t = " + std::to_string(T) + " from a random start (initially " +
                              std::to_string(start) + ")"));
        attraction.states.clear();
    }
    {
        AnnulusBounds b = annulus_bounds(k, lam3, ls);
        double margin = b.exists ? annulus_check(*family.at(lam3), b, cfg.annulus_samples, cfg.seed + 3)
                                 : -std::numeric_limits<double>::infinity();
        S.push_back(suite("annulus", b.exists && margin >= 0, b.exists ? margin : 0.0, 0,
                          b.exists ? "smallest shell margin" : "annulus is empty at this lambda"));
    }
    {
        bool ok = three.has_value();
        double worst = 0;
        if (three) {
            for (const BranchPoint* p : {&three->e1, &three->e2, &three->e3})
                worst = std::max(worst, p->refined ? p->refined_residual : std::numeric_limits<double>::infinity());
            ok = worst <= cfg.branch_tol && three->min_separation >= three->bounds.r_lambda / 2;
        }
        S.push_back(suite("three_solutions", ok, worst, cfg.branch_tol,
                          three ? "refined residual; separation checked against r_lambda / 2" : three_error));
    }
    {
        const BifurcationBranch* bounded = nullptr;
        for (const auto& br : rep.branches)
            if (br.label == BranchLabel::bounded) bounded = &br;
        double worst = 0;
        bool ok = bounded && bounded->termination.empty() && bounded->points.size() == bounded_grid.size();
        if (bounded)
            for (const auto& p : bounded->points) worst = std::max(worst, p.l2_norm);
        ok = ok && worst <= bounded_cap(k);
        S.push_back(suite("bounded_branch", ok, worst, bounded_cap(k), "largest norm on the two-sided bounded branch"));
    }
    {
        bool ok = sig && sig->first == 0 && sig->second == m;
        S.push_back(suite("index_jump", ok, sig ? sig->second - sig->first : 0, m,
                          sig ? "right minus left Morse index" : sig_error));
    }
    {
        double worst = 0;
        for (const auto& br : rep.branches)
            for (const auto& p : br.points) worst = std::max(worst, p.residual);
        if (three)
            for (const BranchPoint* p : {&three->e1, &three->e2, &three->e3}) worst = std::max(worst, p->residual);
        const double limit = 10 * cfg.field_tol;
        S.push_back(suite("lift_consistency", worst <= limit && !rep.branches.empty(), worst, limit,
                          "largest full stationary residual of a lifted equilibrium"));
    }
    {
        int fitted = 0;
        bool ok = true;
        double worst_slope = 1;
        std::ostringstream detail;
        for (const auto& br : rep.branches) {
            if (br.label == BranchLabel::bounded || !br.fit) continue;
            ++fitted;
            bool inside = true;
            for (const auto& p : br.points) inside = inside && p.l2_norm <= dissipative_radius(p.lambda, ls, k.C1);
            ok = ok && br.fit->slope >= 0.9 && br.fit->slope <= 1.1 && br.fit->r2 >= 0.99 && br.fit->points >= 6 &&
                 inside;
            if (std::abs(br.fit->slope - 1) >= std::abs(worst_slope - 1)) worst_slope = br.fit->slope;
            detail << (fitted > 1 ? "; " : "") << label_name(br.label) << " slope " << br.fit->slope << " R^2 "
                   << br.fit->r2 << (inside ? " within" : " above") << " C1 / eta";
        }
        if (fitted == 0) detail << "no unbounded branch with a fit";
        S.push_back(suite("blowup", ok && fitted > 0, worst_slope, 1, detail.str()));
    }
    J["verification"] = json::array();
    for (const auto& s : S)
        J["verification"].push_back(
            {{"suite", s.name}, {"passed", s.passed}, {"value", s.value}, {"limit", s.limit}, {"detail", s.detail}});
    J["passed"] = rep.all_passed();

    // artifacts
    if (verify_only) {
        json v;
        v["scenario"] = cfg.name;
        v["verification"] = J["verification"];
        v["passed"] = J["passed"];
        write_json(v, stage.file("verify.json"));
    } else {
        write_spectrum_csv(*spec, stage.file("spectrum.csv"));
        write_decay_csv(decay, stage.file("decay.csv"));
        std::vector<Vec> ws;
        for (double s : linspace(-20, 20, 9)) ws.push_back(s * e1);
        write_manifold_samples_csv(map3, ws, stage.file("manifold_samples.csv"));
        if (three) {
            std::vector<EquilibriumRow> rows;
            for (const BranchPoint* p : {&three->e1, &three->e2, &three->e3})
                rows.push_back({lam3, p->w, p->residual, p->w.norm() - three->bounds.r_lambda});
            write_equilibria_csv(rows, stage.file("equilibria.csv"));
        }
        write_evolution_csv(attraction, stage.file("evolution.csv"));
        emit_diagram(rep, stage.dir.string());
    }
    for (const auto& entry : fs::directory_iterator(stage.dir))
        fs::rename(entry.path(), fs::path(out_dir) / entry.path().filename());
    return rep;
}

void emit_diagram(const RunReport& report, const std::string& out_dir) {
    if (report.branches.empty()) throw Error(ErrorKind::invalid_argument, "report has no branch to draw");
    write_diagram_csv(report.branches, (fs::path(out_dir) / "diagram.csv").string());
    write_json(report.json, (fs::path(out_dir) / "report.json").string());
}

}  // namespace invman
