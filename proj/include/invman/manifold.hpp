#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <vector>

#include "invman/kernels.hpp"
#include "invman/nonlinearity.hpp"
#include "invman/operator.hpp"
#include "invman/semigroup.hpp"

namespace invman {

/** Uniform samples t_j = (j - origin) dt on [-T, T]. */
struct TimeGrid {
    double step = 0;
    int samples = 0;
    int origin = 0;
    double time(int j) const { return (j - origin) * step; }
    double horizon() const { return origin * step; }
};

TimeGrid make_time_grid(double horizon, double step);

/** A sampled path in eigen-coefficients; column j is u(t_j). */
struct WeightedTrajectory {
    TimeGrid grid;
    double mu = 0;
    Mat modes;

    Vec modes_at(int j) const { return modes.col(j); }
    Vec state(const SpectralSplit& split, int j) const { return split.from_modes(modes.col(j)); }
};

/** sup_j e^{-mu |t_j|} ||u(t_j)||_alpha with precomputed (lambda_k + a)^alpha weights. */
double weighted_norm(const WeightedTrajectory& u, const Vec& weights);
double weighted_distance(const WeightedTrajectory& a, const WeightedTrajectory& b, const Vec& weights);

struct ManifoldOptions {
    /** Zero selects beta/2. */
    double mu = 0;
    /** Zero selects 40/beta. */
    double horizon = 0;
    double dt = 0.25;
    /** Sweeps stop once ||G(u) - u|| <= tol * max(1, ||u||). */
    double tol = 1e-11;
    int max_iter = 200;
    kernels::Backend backend = kernels::Backend::parallel;
    int lipschitz_samples = 400;
    /** If positive, used instead of the sampled Lipschitz estimate. */
    double lipschitz_override = -1;
};

/** Read-only data shared by every solve: the splitting, f, the gate and the weights. */
class ManifoldContext {
  public:
    SpectralSplit split;
    Nonlinearity f;
    ManifoldOptions options;
    double mu = 0;
    double horizon = 0;
    double F_mu = 0;
    double L_f = 0;
    SmallnessGate gate;
    double g_l2 = 0;
    Vec weights;
    Vec x;

    static std::shared_ptr<const ManifoldContext> make(const SpectralSplit& split, const DiscreteOperator& op,
                                                       const Nonlinearity& f, const ManifoldOptions& options = {});
    /** Bound on the part of the integrals cut off at +-T. */
    double tail_bound(double T) const;
    /** Smallest horizon (on a 1.25x ladder) whose tail bound is below tol / 10. */
    double suggest_horizon(double tol) const;
};

WeightedTrajectory initial_trajectory(const ManifoldContext& ctx, const kernels::Propagator& p, const Vec& w);

/** One application of the integral operator G for kernel coordinates w. */
WeightedTrajectory lyapunov_perron_apply(const ManifoldContext& ctx, double lambda, const Vec& w,
                                         const WeightedTrajectory& u);
WeightedTrajectory lyapunov_perron_apply(const ManifoldContext& ctx, const kernels::Propagator& p, const Vec& w,
                                         const WeightedTrajectory& u, kernels::Backend backend);

struct FixedPoint {
    WeightedTrajectory u;
    int iterations = 0;
    double residual = 0;
    std::vector<double> residuals;
};

FixedPoint solve_fixed_point(const ManifoldContext& ctx, double lambda, const Vec& w, double tol, int max_iter,
                             const WeightedTrajectory* warm = nullptr);

/** Bound on sup ||xi(w)||_alpha from the uniform bound on f. */
double xi_bound(const Nonlinearity& f, const SpectralSplit& split);
double xi_bound(double M, double beta, double alpha, double M_f);

/** The correction map w -> xi_lambda(w) at fixed lambda, with a warm-start cache. */
class ManifoldMap {
  public:
    ManifoldMap(std::shared_ptr<const ManifoldContext> ctx, double lambda);

    struct Evaluation {
        Vec w;
        /** Modes of xi(w); the kernel block is zero. */
        Vec xi_modes;
        int iterations = 0;
        double residual = 0;
        std::vector<double> residuals;
        WeightedTrajectory trajectory;
    };

    double lambda() const { return lambda_; }
    const ManifoldContext& context() const { return *ctx_; }
    std::shared_ptr<const ManifoldContext> shared_context() const { return ctx_; }
    const SpectralSplit& split() const { return ctx_->split; }
    const kernels::Propagator& propagator() const { return prop_; }

    /** Thread-safe; concurrent callers share the cache under a reader/writer lock. */
    Evaluation evaluate(const Vec& w, bool keep_trajectory = false) const;
    Vec xi_modes(const Vec& w) const { return evaluate(w).xi_modes; }
    Vec xi(const Vec& w) const { return split().from_modes(xi_modes(w)); }
    /** w + xi(w) as a physical state. */
    Vec point(const Vec& w) const;
    std::vector<double> last_log() const;
    void clear_cache() const;

  private:
    std::shared_ptr<const ManifoldContext> ctx_;
    double lambda_;
    kernels::Propagator prop_;
    mutable std::shared_mutex mutex_;
    mutable std::optional<WeightedTrajectory> cache_;
    mutable std::vector<double> log_;
};

inline Vec xi(const ManifoldMap& map, const Vec& w) { return map.xi(w); }
inline Vec manifold_point(const ManifoldMap& map, const Vec& w) { return map.point(w); }

/** Smooth random path in X_mu with weighted norm equal to scale. */
WeightedTrajectory random_trajectory(const ManifoldContext& ctx, const TimeGrid& grid, std::mt19937_64& rng,
                                     double scale);

/** ||G(a) - G(b)|| / ||a - b|| in X_mu for kernel coordinates w. */
double contraction_ratio(const ManifoldMap& map, const Vec& w, const WeightedTrajectory& a,
                         const WeightedTrajectory& b);

void write_manifold_samples_csv(const ManifoldMap& map, const std::vector<Vec>& ws, const std::string& path);

}  // namespace invman
