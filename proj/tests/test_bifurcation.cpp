#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "invman/bifurcation.hpp"
#include "invman/error.hpp"
#include "support.hpp"

using namespace invman;
using testing::demo;

namespace {

const FieldFamily& family(double c = 0.07) {
    static std::map<double, std::unique_ptr<FieldFamily>> cache;
    auto& f = cache[c];
    if (!f) f = std::make_unique<FieldFamily>(demo(201, c).ctx, demo(201, c).op);
    return *f;
}

const AnnulusConstants& constants() {
    static AnnulusConstants k = annulus_constants(family().context());
    return k;
}

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("no error raised");
    return ErrorKind::io;
}

}  // namespace

TEST_CASE("linear model: the bounded branch is identically zero") {
    const auto& fam = family(0.0);
    const double ls = fam.lambda_star();
    std::vector<double> grid = {ls - 0.05, ls - 0.02, ls + 0.02, ls + 0.05};
    auto br = continue_branch(fam, grid, Vec::Zero(1), BranchLabel::bounded);
    REQUIRE(br.points.size() == grid.size());
    CHECK(br.termination.empty());
    CHECK_FALSE(br.fit);
    for (const auto& pt : br.points) {
        CHECK(pt.l2_norm == 0);
        CHECK(pt.residual == 0);
        CHECK(pt.morse_index == (pt.lambda < ls ? 0 : 1));
    }
    CHECK(kind_of([&] { detect_blowup(br, ls); }) == ErrorKind::insufficient_data);
}

TEST_CASE("unbounded branch against a scalar bisection at every lambda") {
    const auto& fam = family();
    const double ls = fam.lambda_star();
    std::vector<double> grid = {ls - 0.02, ls - 0.016, ls - 0.013, ls - 0.01};
    auto first = annulus_bounds(constants(), grid[0], ls);
    auto seed = radial_root(*fam.at(grid[0]), Vec::Constant(1, 1.0), first.r_lambda, first.R_lambda, 1e-10);
    auto br = continue_branch(fam, grid, seed.w, BranchLabel::plus_infinity);
    REQUIRE(br.points.size() == grid.size());
    for (const auto& pt : br.points) {
        auto F = fam.at(pt.lambda);
        auto g = [&](double s) { return (*F)(Vec::Constant(1, s))[0]; };
        auto b = annulus_bounds(constants(), pt.lambda, ls);
        double lo = b.r_lambda, hi = b.R_lambda;
        REQUIRE(g(lo) > 0);
        REQUIRE(g(hi) < 0);
        for (int i = 0; i < 70; ++i) {
            double mid = 0.5 * (lo + hi);
            (g(mid) > 0 ? lo : hi) = mid;
        }
        CHECK(pt.w[0] == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-8));
        CHECK(pt.morse_index == 0);
        CHECK(pt.refined);
        CHECK(pt.refined_residual <= 1e-8);
        CHECK(pt.residual <= 10 * 1e-8);
        CHECK(pt.energy_norm == doctest::Approx(energy_norm(fam.op(), pt.u)));
    }
    // norms grow towards lambda*
    for (std::size_t i = 1; i < br.points.size(); ++i) CHECK(br.points[i].l2_norm > br.points[i - 1].l2_norm);
    REQUIRE(br.fit);
    CHECK(br.fit->points == 4);
}

TEST_CASE("minus branch mirrors the plus branch") {
    const auto& fam = family();
    const double ls = fam.lambda_star();
    std::vector<double> grid = {ls - 0.02, ls - 0.015};
    auto b = annulus_bounds(constants(), grid[0], ls);
    auto plus = continue_branch(fam, grid, Vec::Constant(1, 1.5 * b.r_lambda), BranchLabel::plus_infinity);
    auto minus = continue_branch(fam, grid, Vec::Constant(1, -1.5 * b.r_lambda), BranchLabel::minus_infinity);
    REQUIRE(plus.points.size() == 2);
    REQUIRE(minus.points.size() == 2);
    for (int i = 0; i < 2; ++i) CHECK(minus.points[i].w[0] == doctest::Approx(-plus.points[i].w[0]).epsilon(1e-8));
}

TEST_CASE("continuation input checks") {
    const auto& fam = family();
    const double ls = fam.lambda_star();
    BranchLabel L = BranchLabel::plus_infinity;
    CHECK(kind_of([&] { continue_branch(fam, {ls - 0.02, ls - 0.01, ls - 0.015}, Vec::Constant(1, 5.0), L); }) ==
          ErrorKind::invalid_argument);
    CHECK(kind_of([&] { continue_branch(fam, {ls - 0.01, ls - 0.01}, Vec::Constant(1, 5.0), L); }) ==
          ErrorKind::invalid_argument);
    CHECK(kind_of([&] { continue_branch(fam, {ls - fam.split().beta}, Vec::Constant(1, 5.0), L); }) ==
          ErrorKind::invalid_argument);
    // no unbounded solution exists for the linear model
    const auto& lin = family(0.0);
    CHECK(kind_of([&] { continue_branch(lin, {ls - 0.02, ls - 0.01}, Vec::Constant(1, 5.0), L); }) ==
          ErrorKind::empty_branch);
}

TEST_CASE("power law fit") {
    std::vector<double> eta = {0.02, 0.01, 0.005, 0.0025, 0.001};
    std::vector<double> norms;
    for (double e : eta) norms.push_back(3 / e);
    auto fit = fit_power_law(eta, norms);
    CHECK(fit.slope == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(fit.C == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(fit.points == 5);
    norms.clear();
    for (double e : eta) norms.push_back(0.5 * std::pow(e, -1.5));
    CHECK(fit_power_law(eta, norms).slope == doctest::Approx(1.5));
    CHECK(kind_of([&] { fit_power_law({0.1, 0.2, 0.3}, {1, 2, 3}); }) == ErrorKind::insufficient_data);
}

TEST_CASE("three solutions") {
    const auto& fam = family();
    const double ls = fam.lambda_star();
    for (double eta : {0.02, 0.01}) {
        auto t = three_solutions(fam, constants(), ls - eta);
        CHECK(t.e1.w[0] > t.bounds.r_lambda);
        CHECK(t.e2.w[0] < -t.bounds.r_lambda);
        CHECK(std::abs(t.e3.w[0]) < 1e-8);
        CHECK(t.e3.l2_norm <= t.bounded_cap);
        CHECK(t.min_separation >= t.bounds.r_lambda / 2);
        for (const auto* e : {&t.e1, &t.e2, &t.e3}) CHECK(e->refined_residual <= 1e-8);
        // f is odd, so the pair is symmetric
        CHECK(t.e2.w[0] == doctest::Approx(-t.e1.w[0]).epsilon(1e-8));
    }
    CHECK(bounded_cap(constants()) == doctest::Approx(constants().R0 + constants().xi_radius));
    CHECK(kind_of([&] { three_solutions(fam, constants(), ls); }) == ErrorKind::invalid_argument);
    const auto& lin = family(0.0);
    auto k0 = annulus_constants(lin.context());
    CHECK(kind_of([&] { three_solutions(lin, k0, ls - 0.01); }) == ErrorKind::incomplete_multiplicity);
}

TEST_CASE("bounded equilibrium") {
    const auto& fam = family();
    const double ls = fam.lambda_star();
    for (double lam : {ls - 0.1, ls + 0.1}) {
        auto e = bounded_equilibrium(*fam.at(lam), 1e-10);
        REQUIRE(e);
        CHECK(std::abs(e->w[0]) < 1e-8);
    }
}

TEST_CASE("index signature") {
    for (double c : {0.0, 0.07}) {
        const auto& fam = family(c);
        const double ls = fam.lambda_star();
        auto sig = index_signature(fam, ls - 0.15, ls + 0.15);
        CHECK(sig.first == 0);
        CHECK(sig.second == 1);
        CHECK(kind_of([&] { index_signature(fam, ls + 0.1, ls + 0.1); }) == ErrorKind::invalid_argument);
        CHECK(kind_of([&] { index_signature(fam, ls + 0.1, ls + 0.15); }) == ErrorKind::invalid_argument);
    }
}

TEST_CASE("diagram csv") {
    const auto& fam = family(0.0);
    const double ls = fam.lambda_star();
    auto br = continue_branch(fam, {ls - 0.05, ls + 0.05}, Vec::Zero(1), BranchLabel::bounded);
    auto path = std::filesystem::temp_directory_path() / "invman_diagram_test.csv";
    write_diagram_csv({br}, path.string());
    std::ifstream in(path);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "lambda,branch,l2_norm,morse_index,residual");
    CHECK(row.find(",bounded,") != std::string::npos);
    std::filesystem::remove(path);
    CHECK(std::string(label_name(BranchLabel::minus_infinity)) == "minus-infinity");
}
