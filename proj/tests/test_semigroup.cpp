#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <random>

#include "invman/error.hpp"
#include "invman/semigroup.hpp"
#include "support.hpp"

using namespace invman;
using testing::demo;
using testing::two_state;

namespace {

Vec test_state(int n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    Vec u(n);
    for (int i = 0; i < n; ++i) u[i] = g(rng);
    return u;
}

// dense e^{-(A - lambda) t} u
Vec dense_flow(const DiscreteOperator& op, double lambda, double t, const Vec& u) {
    Mat B = -(op.dense() - lambda * Mat::Identity(op.size(), op.size())) * t;
    return B.exp() * u;
}

}  // namespace

TEST_CASE("kernel block scales by exp(-eta t)") {
    const SpectralSplit& s = demo().split;
    Vec phi = s.from_kernel(Vec::Constant(1, 1.0));
    for (double lam : {s.lambda_star - 0.1, s.lambda_star + 0.05}) {
        SemigroupAction act{&s, lam, 2};
        for (double t : {-2.0, 0.0, 0.7, 3.0}) {
            Vec got = semigroup_action(act, t, phi);
            double expect = std::exp(-(s.lambda_star - lam) * t);
            CHECK((got - expect * phi).norm() < 1e-12 * phi.norm());
        }
    }
}

TEST_CASE("block 3 matches the dense matrix exponential") {
    const auto& p = demo();
    const SpectralSplit& s = p.split;
    Vec u = s.project(3, test_state(s.size(), 1));
    double lam = s.lambda_star + 0.03;
    for (double t : {0.05, 0.5, 2.0}) {
        SemigroupAction act{&s, lam, 3};
        Vec got = semigroup_action(act, t, u);
        Vec ref = dense_flow(*p.op, lam, t, u);
        CHECK((got - ref).norm() < 1e-9 * u.norm());
    }
}

TEST_CASE("block 1 runs backward") {
    // a dense backward exponential amplifies roundoff in the high modes, so the oracle is the
    // single block-1 eigenpair scaled by hand
    const auto& p = two_state();
    const SpectralSplit& s = p.split;
    Vec u = s.project(1, test_state(s.size(), 2));
    double lam = s.lambda_star - 0.1;
    SemigroupAction act{&s, lam, 1};
    for (double t : {-0.3, -1.5}) {
        Vec got = semigroup_action(act, t, u);
        Vec ref = std::exp(-(s.eigenvalue(0) - lam) * t) * u;
        CHECK((got - ref).norm() < 1e-12 * ref.norm());
    }
    try {
        semigroup_action(act, 0.1, u);
        FAIL("expected invalid-argument");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::invalid_argument);
    }
    SemigroupAction fwd{&s, lam, 3};
    CHECK_THROWS_AS(semigroup_action(fwd, -0.1, u), Error);
}

TEST_CASE("semigroup property") {
    const SpectralSplit& s = demo().split;
    Vec u = test_state(s.size(), 3);
    SemigroupAction act{&s, s.lambda_star, 3};
    Vec a = semigroup_action(act, 0.4, semigroup_action(act, 0.9, u));
    Vec b = semigroup_action(act, 1.3, u);
    CHECK((a - b).norm() < 1e-12 * u.norm());
    Vec zero = semigroup_action(act, 0.0, u);
    CHECK((zero - s.project(3, u)).norm() < 1e-11 * u.norm());
}

TEST_CASE("fractional norm at one half is the energy form") {
    const auto& p = demo();
    const SpectralSplit& s = p.split;
    Vec u = test_state(s.size(), 4);
    double h = s.spectrum->h;
    Mat A = p.op->dense();
    double energy = std::sqrt(h * u.dot((A + s.shift * Mat::Identity(s.size(), s.size())) * u));
    CHECK(fractional_norm({s.shift, 0.5}, s, u) == doctest::Approx(energy).epsilon(1e-10));
    CHECK(fractional_norm({s.shift, 0.0}, s, u) == doctest::Approx(p.op->norm(u)).epsilon(1e-12));
    // alpha = 1 is the graph norm ||(A + a) u||
    double graph = p.op->norm((A + s.shift * Mat::Identity(s.size(), s.size())) * u);
    CHECK(fractional_norm({s.shift, 1.0}, s, u) == doctest::Approx(graph).epsilon(1e-10));
}

TEST_CASE("smoothing action needs block 3 and positive time") {
    const SpectralSplit& s = demo().split;
    Vec u = test_state(s.size(), 5);
    SemigroupAction act{&s, s.lambda_star, 3};
    CHECK_THROWS_AS(smoothing_action(act, 0.0, u), Error);
    SemigroupAction k{&s, s.lambda_star, 2};
    CHECK_THROWS_AS(smoothing_action(k, 1.0, u), Error);
    // the alpha-norm of the smoothed state equals the 2 alpha-norm of the flowed one
    Vec sm = smoothing_action(act, 0.5, u);
    Vec fl = semigroup_action(act, 0.5, u);
    CHECK(fractional_norm({s.shift, 0.0}, s, sm) == doctest::Approx(fractional_norm({s.shift, 0.5}, s, fl)));
}

TEST_CASE("decay constant covers every sampled bound") {
    for (const auto* p : {&demo(), &two_state()}) {
        const SpectralSplit& s = p->split;
        CHECK(s.M >= 1.0);
        CHECK(count_decay_violations(s, s.M, 2000, 77) == 0);
        // an undersized constant must be caught
        auto rep = sample_decay_bounds(s, 2000, 77, 0.5);
        CHECK(rep.violations > 0);
    }
    CHECK(demo().split.M <= 1.06);
}

TEST_CASE("decay samples are reproducible") {
    const SpectralSplit& s = demo().split;
    auto a = sample_decay_bounds(s, 300, 9, 0, true);
    auto b = sample_decay_bounds(s, 300, 9, 0, true);
    REQUIRE(a.samples.size() == b.samples.size());
    CHECK(a.max_ratio == b.max_ratio);
    for (std::size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i].ratio == b.samples[i].ratio);
    CHECK(std::string(decay_bound_name(5)) == "block3_singular");
}
