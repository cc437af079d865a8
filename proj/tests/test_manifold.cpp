#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <omp.h>

#include <cmath>
#include <random>

#include "invman/error.hpp"
#include "invman/manifold.hpp"
#include "support.hpp"

using namespace invman;
using testing::demo;
using testing::two_state;

namespace {

double alpha_norm(const ManifoldContext& ctx, const Vec& modes) { return weighted_mode_norm(ctx.weights, modes); }

}  // namespace

TEST_CASE("time grid") {
    auto g = make_time_grid(10, 0.3);
    CHECK(g.horizon() >= 10);
    CHECK(g.time(g.origin) == 0);
    CHECK(g.time(0) == doctest::Approx(-g.horizon()));
    CHECK(g.time(g.samples - 1) == doctest::Approx(g.horizon()));
    CHECK_THROWS_AS(make_time_grid(0, 0.1), Error);
}

TEST_CASE("linear problem has a flat manifold") {
    const auto& p = demo(201, 0.0);
    ManifoldMap map(p.ctx, p.split.lambda_star - 0.02);
    for (double w : {-5.0, 0.0, 0.4, 30.0}) {
        auto ev = map.evaluate(Vec::Constant(1, w));
        CHECK(ev.xi_modes.cwiseAbs().maxCoeff() == 0);
        Vec pt = map.point(Vec::Constant(1, w));
        CHECK((pt - p.split.from_kernel(Vec::Constant(1, w))).norm() < 1e-14 * (1 + std::abs(w)));
    }
}

TEST_CASE("state-independent forcing: xi solves the off-kernel resolvent equation") {
    // f = g(x) gives xi = (A - lambda)^{-1} (P1 + P3) g for every w
    for (const auto* base : {&demo(), &two_state()}) {
        auto f = sech_profile(0.3);
        ManifoldOptions mo;
        mo.lipschitz_samples = 20;
        auto p = testing::make_problem(base->op->potential, 20, base->op->size() + 2, base->split.lambda_star, f, mo);
        const SpectralSplit& s = p.split;
        double lam = s.lambda_star - 0.03;
        ManifoldMap map(p.ctx, lam);
        Vec g = bound_values(f, s.spectrum->x);
        Vec rhs = g - s.project(2, g);
        Mat A = p.op->dense() - lam * Mat::Identity(s.size(), s.size());
        Vec ref = A.partialPivLu().solve(rhs);
        for (double w : {0.0, 2.0}) {
            Vec got = map.xi(Vec::Constant(1, w));
            CHECK((got - ref).norm() < 1e-9 * ref.norm());
        }
        CHECK(s.dim1 == (base == &two_state() ? 1 : 0));
    }
}

TEST_CASE("fixed point residual and odd symmetry") {
    const auto& p = demo();
    ManifoldMap map(p.ctx, p.split.lambda_star - 0.01);
    auto ev = map.evaluate(Vec::Constant(1, 3.0));
    CHECK(ev.residual <= 1e-8);
    CHECK(ev.iterations > 1);
    // the residual log contracts at least as fast as the gate predicts, after the first sweep
    for (std::size_t i = 2; i < ev.residuals.size(); ++i)
        CHECK(ev.residuals[i] <= p.ctx->gate.product * ev.residuals[i - 1] * (1 + 1e-6) + 1e-14);
    auto neg = map.evaluate(Vec::Constant(1, -3.0));
    CHECK((neg.xi_modes + ev.xi_modes).norm() < 1e-9 * ev.xi_modes.norm());
    // warm start from the cache lands on the same point
    auto again = map.evaluate(Vec::Constant(1, 3.0));
    CHECK((again.xi_modes - ev.xi_modes).norm() < 1e-9 * ev.xi_modes.norm());
    map.clear_cache();
    auto cold = map.evaluate(Vec::Constant(1, 3.0));
    CHECK((cold.xi_modes - ev.xi_modes).norm() < 1e-9 * ev.xi_modes.norm());
    CHECK(!map.last_log().empty());
}

TEST_CASE("contraction ratio stays below the gate product") {
    const auto& p = demo();
    ManifoldMap map(p.ctx, p.split.lambda_star - 0.01);
    TimeGrid g{map.propagator().dt, map.propagator().samples, map.propagator().origin};
    std::mt19937_64 rng(99);
    for (int k = 0; k < 8; ++k) {
        auto a = random_trajectory(*p.ctx, g, rng, 1 + k);
        auto b = random_trajectory(*p.ctx, g, rng, 0.5);
        double r = contraction_ratio(map, Vec::Constant(1, 0.5 * k), a, b);
        CHECK(r <= p.ctx->gate.product);
    }
    auto a = random_trajectory(*p.ctx, g, rng, 1);
    CHECK_THROWS_AS(contraction_ratio(map, Vec::Constant(1, 0.0), a, a), Error);
}

TEST_CASE("xi stays inside its closed-form bound") {
    const auto& p = demo();
    double bound = xi_bound(p.ctx->f, p.split);
    CHECK(bound > 0);
    CHECK(xi_bound(1, 0.8, 0.0, 2.0) == doctest::Approx(2 * 2 / 0.6));
    for (double lam : {p.split.lambda_star - 0.1, p.split.lambda_star + 0.1}) {
        ManifoldMap map(p.ctx, lam);
        for (double w : {-40.0, -1.0, 0.2, 2.5, 100.0}) {
            auto ev = map.evaluate(Vec::Constant(1, w));
            CHECK(alpha_norm(*p.ctx, ev.xi_modes) <= bound);
        }
    }
}

TEST_CASE("serial and parallel sweeps agree") {
    const auto& p = demo();
    ManifoldOptions so = p.ctx->options, po = p.ctx->options;
    so.backend = kernels::Backend::serial;
    po.backend = kernels::Backend::parallel;
    auto cs = ManifoldContext::make(p.split, *p.op, p.ctx->f, so);
    auto cp = ManifoldContext::make(p.split, *p.op, p.ctx->f, po);
    double lam = p.split.lambda_star - 0.015;
    Vec a = ManifoldMap(cs, lam).xi_modes(Vec::Constant(1, 1.7));
    Vec b = ManifoldMap(cp, lam).xi_modes(Vec::Constant(1, 1.7));
    CHECK((a - b).norm() < 1e-11 * a.norm());
}

TEST_CASE("thread count does not change the manifold") {
    const auto& p = demo();
    double lam = p.split.lambda_star - 0.015;
    int before = omp_get_max_threads();
    omp_set_num_threads(1);
    Vec a = ManifoldMap(p.ctx, lam).xi_modes(Vec::Constant(1, 1.7));
    omp_set_num_threads(3);
    Vec b = ManifoldMap(p.ctx, lam).xi_modes(Vec::Constant(1, 1.7));
    omp_set_num_threads(before);
    CHECK((a - b).norm() <= 1e-13 * a.norm());
}

TEST_CASE("time step refinement is second order") {
    const auto& p = demo();
    double lam = p.split.lambda_star - 0.01;
    Vec xs[3];
    double dts[3] = {0.5, 0.25, 0.125};
    for (int i = 0; i < 3; ++i) {
        ManifoldOptions mo = p.ctx->options;
        mo.dt = dts[i];
        mo.lipschitz_override = p.ctx->L_f;
        auto ctx = ManifoldContext::make(p.split, *p.op, p.ctx->f, mo);
        xs[i] = ManifoldMap(ctx, lam).xi_modes(Vec::Constant(1, 2.0));
    }
    double e1 = (xs[0] - xs[1]).norm(), e2 = (xs[1] - xs[2]).norm();
    CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("failure modes") {
    const auto& p = demo();
    const double ls = p.split.lambda_star;
    SUBCASE("gate refused") {
        ManifoldOptions mo;
        mo.lipschitz_override = 1.0;
        auto ctx = ManifoldContext::make(p.split, *p.op, p.ctx->f, mo);
        try {
            ManifoldMap map(ctx, ls);
            FAIL("expected refused");
        } catch (const ValueError& e) {
            CHECK(e.kind() == ErrorKind::refused);
            CHECK(e.value() == doctest::Approx(ctx->F_mu));
        }
    }
    SUBCASE("horizon too short") {
        ManifoldOptions mo;
        mo.horizon = 1;
        mo.lipschitz_override = p.ctx->L_f;
        auto ctx = ManifoldContext::make(p.split, *p.op, p.ctx->f, mo);
        try {
            ManifoldMap map(ctx, ls);
            FAIL("expected horizon-too-short");
        } catch (const ValueError& e) {
            CHECK(e.kind() == ErrorKind::horizon_too_short);
            CHECK(e.value() > 1);
            CHECK(ctx->tail_bound(e.value()) <= mo.tol);
        }
    }
    SUBCASE("outside the window") {
        CHECK_THROWS_AS(ManifoldMap(p.ctx, ls + 0.3 * p.split.beta), Error);
    }
    SUBCASE("wrong kernel dimension") {
        ManifoldMap map(p.ctx, ls);
        CHECK_THROWS_AS(map.evaluate(Vec::Zero(2)), Error);
    }
    SUBCASE("non-convergence") {
        CHECK_THROWS_AS(solve_fixed_point(*p.ctx, ls, Vec::Constant(1, 1.0), 1e-15, 2), ValueError);
    }
}

TEST_CASE("fixed point solver matches the manifold map") {
    const auto& p = demo();
    double lam = p.split.lambda_star - 0.01;
    auto fp = solve_fixed_point(*p.ctx, lam, Vec::Constant(1, 1.2), 1e-11, 200);
    ManifoldMap map(p.ctx, lam);
    auto ev = map.evaluate(Vec::Constant(1, 1.2));
    Vec xi = fp.u.modes.col(fp.u.grid.origin);
    xi[0] = 0;
    CHECK((xi - ev.xi_modes).norm() < 1e-9 * xi.norm());
    // the kernel coordinate at t = 0 is w itself
    CHECK(fp.u.modes(0, fp.u.grid.origin) == doctest::Approx(1.2));
}
