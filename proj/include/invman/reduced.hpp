#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "invman/manifold.hpp"

namespace invman {

/** w -> -A^2 w + P_2 f(w + xi(w)) in kernel coordinates. */
class ReducedField {
  public:
    explicit ReducedField(std::shared_ptr<const ManifoldMap> map);

    double lambda() const { return map_->lambda(); }
    double lambda_star() const { return map_->split().lambda_star; }
    int dim() const { return map_->split().m; }
    const ManifoldMap& map() const { return *map_; }
    const ManifoldContext& context() const { return map_->context(); }

    Vec operator()(const Vec& w) const { return evaluate(w); }
    Vec evaluate(const Vec& w) const;
    /** Central differences with step 1e-6 (1 + |w|). */
    Mat jacobian(const Vec& w) const;
    /** w + xi(w) as a physical state. */
    Vec lift(const Vec& w) const { return map_->point(w); }

  private:
    std::shared_ptr<const ManifoldMap> map_;
};

/** P_2 f(u) in kernel coordinates for a full mode vector c. */
Vec kernel_forcing(const ManifoldContext& ctx, const Vec& c);

struct ReducedTrajectory {
    std::vector<double> t;
    std::vector<Vec> w;
};

/** Classical fourth-order Runge-Kutta. */
ReducedTrajectory integrate_reduced(const ReducedField& field, const Vec& w0, double T, double dt,
                                    double overflow = 1e8);

struct Equilibrium {
    Vec w;
    double residual = 0;
    int iterations = 0;
};

struct EquilibriumSearch {
    std::vector<Equilibrium> roots;
    std::vector<std::string> notes;
};

/** Newton with finite-difference Jacobian and backtracking from each guess; roots closer than
 * max(10 tol, 1e-6 (1 + |w|)) are merged. */
EquilibriumSearch find_equilibria(const ReducedField& field, const std::vector<Vec>& guesses, double tol,
                                  int max_iter = 40);

/** For m = 1: root of s -> <field(s v), v> bracketed in [lo, hi]. Throws if there is no sign change. */
Equilibrium radial_root(const ReducedField& field, const Vec& direction, double lo, double hi, double tol);

/** Number of Jacobian eigenvalues with positive real part. */
int morse_index(const ReducedField& field, const Vec& w);
int morse_index(const Mat& jacobian);

/** Lambda-independent constants behind the annulus. */
struct AnnulusConstants {
    /** min and max of ||v||_{L1} over the unit sphere of range(P_2). */
    double m_l1 = 0;
    double l1_max = 0;
    double delta = 0;
    double c0 = 0;
    double f_inf = 0;
    double C1 = 0;
    /** Radius in X of the region that xi can reach. */
    double xi_radius = 0;
    double R0 = 0;
    bool R0_found = false;
    /** Largest lambda* - lambda with a non-empty shell [R0, r_lambda]. */
    double theta1 = 0;
};

struct AnnulusOptions {
    int perturbations = 48;
    int directions = 64;
    double s_min = 1e-3;
    double s_max = 1e4;
    int grid = 241;
    std::uint64_t seed = 11;
    /** Safety factor on eta R^2 < c0 R0 / 2. */
    double safety = 0.99;
};

AnnulusConstants annulus_constants(const ManifoldContext& ctx, const AnnulusOptions& opt = {});

struct AnnulusBounds {
    double lambda = 0;
    double lambda_star = 0;
    double R0 = 0;
    double c0 = 0;
    double C1 = 0;
    /** lambda* - lambda. */
    double eta = 0;
    double r_lambda = 0;
    double R_lambda = 0;
    /** 1 for lambda >= lambda*, 2 below. */
    int regime = 1;
    bool exists = false;
    /** Upper radius used when sampling the unbounded regime. */
    double sample_cap = 0;
};

AnnulusBounds annulus_bounds(const AnnulusConstants& k, double lambda, double lambda_star, double safety = 0.99);

/** R_lambda = C1 / (lambda* - lambda). */
double dissipative_radius(double lambda, double lambda_star, double C1);

struct AnnulusSample {
    Vec w;
    double margin = 0;
};

/** Minimum over samples of 2 <field(w), w> - c0 |w| for |w| in [R0, r_lambda] (or [R0, cap]). */
double annulus_check(const ReducedField& field, const AnnulusBounds& bounds, int samples, std::uint64_t seed = 5,
                     std::vector<AnnulusSample>* record = nullptr);

struct EquilibriumRow {
    double lambda;
    Vec w;
    double residual;
    double margin;
};

void write_equilibria_csv(const std::vector<EquilibriumRow>& rows, const std::string& path);

}  // namespace invman
