#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "invman/error.hpp"
#include "support.hpp"

using namespace invman;
using testing::demo;

TEST_CASE("domain spacing and interior nodes") {
    auto d = build_domain(20, 201);
    CHECK(d.spacing == doctest::Approx(0.2));
    CHECK(d.unknowns() == 199);
    CHECK(d.interior()[0] == doctest::Approx(-19.8));
    CHECK(d.interior()[198] == doctest::Approx(19.8));
    CHECK_THROWS_AS(build_domain(-1, 10), Error);
    CHECK_THROWS_AS(build_domain(1, 2), Error);
}

TEST_CASE("constant potential: exact discrete sine spectrum") {
    const double L = 5, V = 1;
    const int n = 101;
    auto op = assemble_operator(build_domain(L, n), constant_potential(V));
    auto spec = compute_spectrum(op);
    const double h = 2 * L / (n - 1);
    for (int k = 1; k <= 10; ++k) {
        double exact = V + 4 / (h * h) * std::pow(std::sin(k * M_PI / (2.0 * (n - 1))), 2);
        CHECK(spec.eigenvalues[k - 1] == doctest::Approx(exact).epsilon(1e-12));
    }
    // continuum limit 1 + (pi / 2L)^2 with an O(h^2) defect
    double cont = V + std::pow(M_PI / (2 * L), 2);
    CHECK(std::abs(spec.eigenvalues[0] - cont) < 1e-4);
    // nothing lies strictly below a constant potential's threshold
    CHECK(spec.discrete_count == 0);
}

TEST_CASE("tridiagonal eigensolver against a dense symmetric solve") {
    const auto& p = demo();
    Mat A = p.op->dense();
    Eigen::SelfAdjointEigenSolver<Mat> es(A);
    const auto& spec = *p.spec;
    REQUIRE(spec.complete());
    for (int k = 0; k < spec.count(); ++k) {
        CHECK(spec.eigenvalues[k] == doctest::Approx(es.eigenvalues()[k]).epsilon(1e-10));
    }
    for (int k = 0; k < 5; ++k) CHECK(std::abs(std::abs(spec.vectors.col(k).dot(es.eigenvectors().col(k))) - 1) < 1e-9);
}

TEST_CASE("eigenbasis is orthonormal in the discrete L2 product") {
    const auto& spec = *demo().spec;
    Mat G = spec.vectors.transpose() * spec.vectors;
    CHECK((G - Mat::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff() < 1e-11);
    Vec u = Vec::LinSpaced(spec.size(), -1, 2).array().sin();
    CHECK((spec.synthesize(spec.coefficients(u)) - u).norm() < 1e-11 * u.norm());
    // eigenfunctions carry unit discrete L2 norm
    CHECK(std::sqrt(spec.h) * spec.eigenfunction(0).norm() == doctest::Approx(1.0));
}

TEST_CASE("Poschl-Teller bound state converges at second order") {
    // V = 3 - 2 sech^2: the only bound state sits at V_inf - 1 = 2
    double err[3];
    int ns[3] = {201, 401, 801};
    for (int i = 0; i < 3; ++i) {
        auto op = assemble_operator(build_domain(20, ns[i]), poschl_teller());
        auto spec = compute_spectrum(op, 3);
        CHECK(spec.discrete_count == 1);
        err[i] = std::abs(spec.eigenvalues[0] - 2.0);
    }
    double order1 = std::log2(err[0] / err[1]);
    double order2 = std::log2(err[1] / err[2]);
    CHECK(order1 == doctest::Approx(2.0).epsilon(0.05));
    CHECK(order2 == doctest::Approx(2.0).epsilon(0.05));
    CHECK(err[2] < 1e-4);
}

TEST_CASE("non-positive potential is rejected with the node") {
    auto bad = poschl_teller(1.0, 2.0, 1.0);  // V(0) = -1
    try {
        assemble_operator(build_domain(20, 201), bad);
        FAIL("expected assumption-violation");
    } catch (const ValueError& e) {
        CHECK(e.kind() == ErrorKind::assumption_violation);
        CHECK(e.value() > 0);
        CHECK(e.value() < 200);
    }
}

TEST_CASE("potential that has not reached its tail") {
    CHECK_THROWS_AS(assemble_operator(build_domain(1, 51), poschl_teller()), Error);
}

TEST_CASE("spectral split around lambda*") {
    const auto& p = demo();
    const SpectralSplit& s = p.split;
    CHECK(s.m == 1);
    CHECK(s.dim1 == 0);
    CHECK(s.lambda_star == doctest::Approx(2.0).epsilon(1e-3));
    const Vec& lam = s.eigenvalues();
    CHECK(s.beta == doctest::Approx(0.8 * (lam[1] - lam[0])));
    CHECK(s.in_window(s.lambda_star + 0.9 * s.beta / 4));
    CHECK_FALSE(s.in_window(s.lambda_star + 1.1 * s.beta / 4));
    try {
        spectral_split(p.spec, 2.5, 0.5);
        FAIL("expected not-an-eigenvalue");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::not_an_eigenvalue);
    }
    CHECK_THROWS_AS(spectral_split(p.spec, 2.0, 1.0), Error);
}

TEST_CASE("projections partition the state") {
    const auto& p = testing::two_state();
    const SpectralSplit& s = p.split;
    CHECK(s.dim1 == 1);
    CHECK(s.m == 1);
    CHECK(s.lambda_star == doctest::Approx(6.0).epsilon(1e-3));
    CHECK(s.beta1 == doctest::Approx(3.0).epsilon(1e-3));
    Vec u = Vec::LinSpaced(s.size(), -3, 3).array().cos() + Vec::LinSpaced(s.size(), 0, 1).array();
    Vec sum = s.project(1, u) + s.project(2, u) + s.project(3, u);
    CHECK((sum - u).norm() < 1e-11 * u.norm());
    for (int i = 1; i <= 3; ++i) {
        Vec pu = s.project(i, u);
        CHECK((s.project(i, pu) - pu).norm() < 1e-11 * u.norm());
    }
    // kernel coordinates pick out the lambda* eigenfunction
    Vec phi = p.spec->eigenfunction(1);
    CHECK(s.kernel_coords(2.5 * phi)[0] == doctest::Approx(2.5));
}

TEST_CASE("a shift that leaves Lambda non-positive is rejected") {
    SplitOptions so;
    so.shift = -10;
    try {
        spectral_split(demo().spec, 2.0, 0.5, so);
        FAIL("expected invalid-shift");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::invalid_shift);
    }
}

TEST_CASE("tabulated potential reproduces the sampled curve") {
    std::vector<double> xs, vs;
    for (int i = 0; i <= 400; ++i) {
        double x = -20 + 0.1 * i;
        xs.push_back(x);
        vs.push_back(3 - 2 / std::pow(std::cosh(x), 2));
    }
    auto op = assemble_operator(build_domain(20, 201), tabulated_potential(xs, vs));
    CHECK((op.diag - demo().op->diag).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(tabulated_potential({1, 0}, {1, 1}), Error);
}

TEST_CASE("spectrum csv has one row per eigenvalue") {
    auto dir = std::filesystem::temp_directory_path() / "invman_operator_test";
    std::filesystem::create_directories(dir);
    auto path = (dir / "spectrum.csv").string();
    write_spectrum_csv(*demo().spec, path);
    std::ifstream in(path);
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == demo().spec->count() + 1);
    CHECK(std::filesystem::exists(dir / "spectrum_modes.csv"));
    std::filesystem::remove_all(dir);
}
