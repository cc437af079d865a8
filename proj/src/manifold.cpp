#include "invman/manifold.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "invman/error.hpp"

namespace invman {

TimeGrid make_time_grid(double horizon, double step) {
    if (!(horizon > 0) || !(step > 0)) throw Error(ErrorKind::invalid_argument, "horizon and step must be positive");
    int half = std::max(1, int(std::ceil(horizon / step - 1e-9)));
    return TimeGrid{step, 2 * half + 1, half};
}

double weighted_norm(const WeightedTrajectory& u, const Vec& weights) {
    double best = 0;
    for (int j = 0; j < u.grid.samples; ++j)
        best = std::max(best, std::exp(-u.mu * std::abs(u.grid.time(j))) * weighted_mode_norm(weights, u.modes.col(j)));
    return best;
}

double weighted_distance(const WeightedTrajectory& a, const WeightedTrajectory& b, const Vec& weights) {
    double best = 0;
    for (int j = 0; j < a.grid.samples; ++j)
        best = std::max(best, std::exp(-a.mu * std::abs(a.grid.time(j))) *
                                  weighted_mode_norm(weights, a.modes.col(j) - b.modes.col(j)));
    return best;
}

std::shared_ptr<const ManifoldContext> ManifoldContext::make(const SpectralSplit& split, const DiscreteOperator& op,
                                                             const Nonlinearity& f, const ManifoldOptions& options) {
    auto ctx = std::make_shared<ManifoldContext>();
    ctx->split = split;
    ctx->f = f;
    ctx->options = options;
    const double beta = split.beta;
    ctx->mu = options.mu > 0 ? options.mu : beta / 2;
    ctx->horizon = options.horizon > 0 ? options.horizon : 40.0 / beta;
    ctx->F_mu = compute_F_mu(split.M, beta, ctx->mu, split.alpha);
    ctx->L_f = options.lipschitz_override >= 0 ? options.lipschitz_override
                                               : estimate_lipschitz(f, op, options.lipschitz_samples);
    ctx->gate = check_gate(ctx->F_mu, ctx->L_f);
    ctx->x = split.spectrum->x;
    ctx->g_l2 = bound_l2(f, ctx->x, split.spectrum->h);
    ctx->weights = split.fractional_weights();
    return ctx;
}

double ManifoldContext::tail_bound(double T) const {
    const double rate = 0.75 * split.beta;
    return split.M * g_l2 * (1 + std::pow(T, -split.alpha)) * std::exp(-rate * T) / rate;
}

double ManifoldContext::suggest_horizon(double tol) const {
    double T = horizon;
    while (tail_bound(T) > tol / 10 && T < 1e6) T *= 1.25;
    return T;
}

static void require_gate(const ManifoldContext& ctx) {
    if (!ctx.gate.passes()) {
        std::ostringstream msg;
        msg << "smallness gate failed, F_mu * L_f = " << ctx.gate.product << " >= 1";
        throw ValueError(ErrorKind::refused, msg.str(), ctx.gate.product);
    }
}

static void require_horizon(const ManifoldContext& ctx, double T) {
    double tail = ctx.tail_bound(T);
    if (tail > ctx.options.tol) {
        double T_new = ctx.suggest_horizon(ctx.options.tol);
        std::ostringstream msg;
        msg << "tail bound " << tail << " exceeds tolerance " << ctx.options.tol << " at T = " << T
            << ", try T >= " << T_new;
        throw ValueError(ErrorKind::horizon_too_short, msg.str(), T_new);
    }
}

WeightedTrajectory initial_trajectory(const ManifoldContext& ctx, const kernels::Propagator& p, const Vec& w) {
    const SpectralSplit& s = ctx.split;
    WeightedTrajectory u;
    u.grid = TimeGrid{p.dt, p.samples, p.origin};
    u.mu = ctx.mu;
    u.modes = Mat::Zero(s.size(), p.samples);
    for (int q = 0; q < s.m; ++q) {
        int k = s.dim1 + q;
        for (int j = 0; j < p.samples; ++j) u.modes(k, j) = std::exp(-p.rate[k] * u.grid.time(j)) * w[q];
    }
    return u;
}

WeightedTrajectory lyapunov_perron_apply(const ManifoldContext& ctx, const kernels::Propagator& p, const Vec& w,
                                         const WeightedTrajectory& u, kernels::Backend backend) {
    require_gate(ctx);
    if (u.modes.cols() != p.samples || u.modes.rows() != p.modes)
        throw Error(ErrorKind::invalid_argument, "trajectory does not match the time grid");
    const SpectrumData& sp = *ctx.split.spectrum;
    const double rh = std::sqrt(sp.h);
    WeightedTrajectory out;
    out.grid = u.grid;
    out.mu = u.mu;
    if (ctx.f.is_zero()) {
        Mat G = Mat::Zero(p.modes, p.samples);
        kernels::propagate(backend, p, ctx.split.kernel_modes(w), G, out.modes);
        return out;
    }
    Mat U, F, G;
    kernels::synthesize(backend, sp.vectors, 1.0 / rh, u.modes, U);
    kernels::nemitski_batch(backend, ctx.f, ctx.x, U, F);
    kernels::analyze(backend, sp.vectors, rh, F, G);
    kernels::propagate(backend, p, ctx.split.kernel_modes(w), G, out.modes);
    return out;
}

WeightedTrajectory lyapunov_perron_apply(const ManifoldContext& ctx, double lambda, const Vec& w,
                                         const WeightedTrajectory& u) {
    require_horizon(ctx, u.grid.horizon());
    auto p = kernels::make_propagator(ctx.split, lambda, u.grid.step, u.grid.samples, u.grid.origin);
    return lyapunov_perron_apply(ctx, p, w, u, ctx.options.backend);
}

static FixedPoint iterate(const ManifoldContext& ctx, const kernels::Propagator& p, const Vec& w, double tol,
                          int max_iter, WeightedTrajectory u) {
    FixedPoint fp;
    for (int it = 1; it <= max_iter; ++it) {
        WeightedTrajectory v = lyapunov_perron_apply(ctx, p, w, u, ctx.options.backend);
        double res = weighted_distance(v, u, ctx.weights);
        fp.residuals.push_back(res);
        u = std::move(v);
        if (!std::isfinite(res)) break;
        if (res <= tol * std::max(1.0, weighted_norm(u, ctx.weights))) {
            fp.u = std::move(u);
            fp.iterations = it;
            fp.residual = res;
            return fp;
        }
    }
    std::ostringstream msg;
    msg << "fixed point not reached in " << max_iter << " sweeps, last residual " << fp.residuals.back();
    throw ValueError(ErrorKind::non_convergence, msg.str(), fp.residuals.back());
}

FixedPoint solve_fixed_point(const ManifoldContext& ctx, double lambda, const Vec& w, double tol, int max_iter,
                             const WeightedTrajectory* warm) {
    require_gate(ctx);
    if (w.size() != ctx.split.m) throw Error(ErrorKind::invalid_argument, "kernel state has the wrong dimension");
    TimeGrid grid = make_time_grid(ctx.horizon, ctx.options.dt);
    require_horizon(ctx, grid.horizon());
    auto p = kernels::make_propagator(ctx.split, lambda, grid.step, grid.samples, grid.origin);
    WeightedTrajectory u0 =
        warm && warm->modes.cols() == grid.samples ? *warm : initial_trajectory(ctx, p, w);
    return iterate(ctx, p, w, tol, max_iter, std::move(u0));
}

double xi_bound(double M, double beta, double alpha, double M_f) {
    double r = 0.75 * beta;
    return M * M_f * (1 / r + std::tgamma(1 - alpha) / std::pow(r, 1 - alpha));
}

double xi_bound(const Nonlinearity& f, const SpectralSplit& split) {
    const SpectrumData& sp = *split.spectrum;
    return xi_bound(split.M, split.beta, split.alpha, bound_l2(f, sp.x, sp.h));
}

ManifoldMap::ManifoldMap(std::shared_ptr<const ManifoldContext> ctx, double lambda)
    : ctx_(std::move(ctx)), lambda_(lambda) {
    if (!ctx_->split.in_window(lambda)) {
        std::ostringstream msg;
        msg << "lambda = " << lambda << " is outside the window around lambda* = " << ctx_->split.lambda_star;
        throw Error(ErrorKind::invalid_argument, msg.str());
    }
    require_gate(*ctx_);
    TimeGrid grid = make_time_grid(ctx_->horizon, ctx_->options.dt);
    require_horizon(*ctx_, grid.horizon());
    prop_ = kernels::make_propagator(ctx_->split, lambda, grid.step, grid.samples, grid.origin);
}

ManifoldMap::Evaluation ManifoldMap::evaluate(const Vec& w, bool keep_trajectory) const {
    const SpectralSplit& s = ctx_->split;
    if (w.size() != s.m) throw Error(ErrorKind::invalid_argument, "kernel state has the wrong dimension");
    std::optional<WeightedTrajectory> warm;
    {
        std::shared_lock lock(mutex_);
        warm = cache_;
    }
    WeightedTrajectory start = warm ? std::move(*warm) : initial_trajectory(*ctx_, prop_, w);
    FixedPoint fp = iterate(*ctx_, prop_, w, ctx_->options.tol, ctx_->options.max_iter, std::move(start));

    Evaluation ev;
    ev.w = w;
    ev.xi_modes = fp.u.modes.col(prop_.origin);
    ev.xi_modes.segment(s.dim1, s.m).setZero();
    ev.iterations = fp.iterations;
    ev.residual = fp.residual;
    ev.residuals = fp.residuals;
    {
        std::unique_lock lock(mutex_);
        log_ = fp.residuals;
        cache_ = fp.u;
    }
    if (keep_trajectory) ev.trajectory = std::move(fp.u);
    return ev;
}

Vec ManifoldMap::point(const Vec& w) const {
    Vec c = xi_modes(w);
    c.segment(split().dim1, split().m) = w;
    return split().from_modes(c);
}

std::vector<double> ManifoldMap::last_log() const {
    std::shared_lock lock(mutex_);
    return log_;
}

void ManifoldMap::clear_cache() const {
    std::unique_lock lock(mutex_);
    cache_.reset();
}

WeightedTrajectory random_trajectory(const ManifoldContext& ctx, const TimeGrid& grid, std::mt19937_64& rng,
                                     double scale) {
    const SpectralSplit& s = ctx.split;
    std::uniform_real_distribution<double> freq(0.05, 1.0);
    Vec a = s.to_modes(random_smooth_state(s, rng, 1.0));
    Vec b = s.to_modes(random_smooth_state(s, rng, 1.0));
    const double om = freq(rng);
    WeightedTrajectory u;
    u.grid = grid;
    u.mu = ctx.mu;
    u.modes.resize(s.size(), grid.samples);
    for (int j = 0; j < grid.samples; ++j) {
        double t = grid.time(j);
        u.modes.col(j) = std::exp(ctx.mu * std::abs(t)) * (a + std::sin(om * t) * b);
    }
    u.modes *= scale / weighted_norm(u, ctx.weights);
    return u;
}

double contraction_ratio(const ManifoldMap& map, const Vec& w, const WeightedTrajectory& a,
                         const WeightedTrajectory& b) {
    const ManifoldContext& ctx = map.context();
    const kernels::Propagator& p = map.propagator();
    auto ga = lyapunov_perron_apply(ctx, p, w, a, ctx.options.backend);
    auto gb = lyapunov_perron_apply(ctx, p, w, b, ctx.options.backend);
    double d = weighted_distance(a, b, ctx.weights);
    if (!(d > 0)) throw Error(ErrorKind::invalid_argument, "contraction ratio needs two distinct paths");
    return weighted_distance(ga, gb, ctx.weights) / d;
}

void write_manifold_samples_csv(const ManifoldMap& map, const std::vector<Vec>& ws, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path);
    out.precision(12);
    const int m = map.split().m;
    for (int q = 0; q < m; ++q) out << "w" << q << ',';
    out << "xi_alpha_norm,xi_l2_norm,sweeps\n";
    for (const Vec& w : ws) {
        auto ev = map.evaluate(w);
        for (int q = 0; q < m; ++q) out << w[q] << ',';
        out << weighted_mode_norm(map.context().weights, ev.xi_modes) << ',' << ev.xi_modes.norm() << ','
            << ev.iterations << '\n';
    }
}

}  // namespace invman
