#pragma once

#include <string>
#include <vector>

#include "invman/manifold.hpp"
#include "invman/nonlinearity.hpp"
#include "invman/operator.hpp"
#include "invman/tridiag.hpp"

namespace invman {

enum class Scheme {
    /** (I + dt (A - lambda)) u+ = u + dt f(u). */
    semi_implicit,
    /** Crank-Nicolson on the linear part, two-step Adams-Bashforth on f. */
    crank_nicolson,
};

/** One semi-implicit step of u_t = -(A - lambda) u + f(u). */
Vec step_parabolic(const DiscreteOperator& op, const Nonlinearity& f, double lambda, const Vec& u, double dt);

/** Factors the implicit matrix once for repeated steps of fixed size. */
class ParabolicStepper {
  public:
    ParabolicStepper(const DiscreteOperator& op, const Nonlinearity& f, double lambda, double dt,
                     Scheme scheme = Scheme::semi_implicit);
    Vec step(const Vec& u);
    void reset() { have_prev_ = false; }

  private:
    const DiscreteOperator& op_;
    const Nonlinearity& f_;
    double lambda_, dt_;
    Scheme scheme_;
    Vec x_;
    TridiagonalLU lu_;
    Vec prev_f_;
    bool have_prev_ = false;
};

/** E(u) = 1/2 <Au, u> - lambda/2 |u|^2 - int F(x, u). */
double energy(const DiscreteOperator& op, const Nonlinearity& f, double lambda, const Vec& u);
/** sqrt(<Au, u>). */
double energy_norm(const DiscreteOperator& op, const Vec& u);

struct EvolveOptions {
    Scheme scheme = Scheme::semi_implicit;
    /** Record every this many steps (the first and last states are always recorded). */
    int record_every = 1;
    bool keep_states = false;
};

struct Evolution {
    std::vector<double> times;
    std::vector<double> l2;
    std::vector<double> energy_norm;
    std::vector<double> energy;
    std::vector<Vec> states;
    Vec final_state;
    /** True if the recorded energy never increased beyond round-off. */
    bool energy_monotone = true;
};

Evolution evolve(const DiscreteOperator& op, const Nonlinearity& f, double lambda, const Vec& u0, double T,
                 double dt, const EvolveOptions& opt = {});

void write_evolution_csv(const Evolution& ev, const std::string& path);

/** (A - lambda) u - f(u). */
Vec stationary_residual(const DiscreteOperator& op, const Nonlinearity& f, double lambda, const Vec& u);

struct NewtonResult {
    Vec u;
    bool converged = false;
    bool singular = false;
    int iterations = 0;
    double residual = 0;
    std::string note;
};

/** Newton with backtracking (up to 30 halvings) on the stationary equation; the residual is the discrete L2 norm. */
NewtonResult elliptic_newton(const DiscreteOperator& op, const Nonlinearity& f, double lambda, const Vec& u0,
                             double tol, int max_iter = 50);

/** ||(P1 + P3) u - xi(P2 u)||_alpha. */
double manifold_distance(const Vec& u, const ManifoldMap& map);

}  // namespace invman
