#include "invman/pde_oracle.hpp"

#include <cmath>
#include <fstream>

#include "invman/error.hpp"
#include "invman/semigroup.hpp"

namespace invman {

static TridiagonalLU implicit_matrix(const DiscreteOperator& op, double lambda, double theta_dt) {
    const int n = op.size();
    Vec d = Vec::Ones(n) + theta_dt * (op.diag - Vec::Constant(n, lambda));
    Vec off = Vec::Constant(n - 1, theta_dt * op.off);
    return TridiagonalLU(off, d, off);
}

Vec step_parabolic(const DiscreteOperator& op, const Nonlinearity& f, double lambda, const Vec& u, double dt) {
    if (!(dt > 0)) throw Error(ErrorKind::invalid_argument, "time step must be positive");
    Vec rhs = u + dt * nemitski(f, op.domain.interior(), u);
    return implicit_matrix(op, lambda, dt).solve(rhs);
}

ParabolicStepper::ParabolicStepper(const DiscreteOperator& op, const Nonlinearity& f, double lambda, double dt,
                                   Scheme scheme)
    : op_(op), f_(f), lambda_(lambda), dt_(dt), scheme_(scheme), x_(op.domain.interior()) {
    if (!(dt > 0)) throw Error(ErrorKind::invalid_argument, "time step must be positive");
    lu_ = implicit_matrix(op, lambda, scheme == Scheme::semi_implicit ? dt : 0.5 * dt);
}

Vec ParabolicStepper::step(const Vec& u) {
    Vec fu = nemitski(f_, x_, u);
    if (scheme_ == Scheme::semi_implicit) return lu_.solve(u + dt_ * fu);
    Vec Bu = op_.apply(u) - lambda_ * u;
    Vec forcing = have_prev_ ? Vec(1.5 * fu - 0.5 * prev_f_) : fu;
    prev_f_ = fu;
    have_prev_ = true;
    return lu_.solve(u - 0.5 * dt_ * Bu + dt_ * forcing);
}

double energy_norm(const DiscreteOperator& op, const Vec& u) { return std::sqrt(std::max(0.0, op.inner(op.apply(u), u))); }

double energy(const DiscreteOperator& op, const Nonlinearity& f, double lambda, const Vec& u) {
    Vec x = op.domain.interior();
    double F = 0;
    for (int i = 0; i < u.size(); ++i) F += f.primitive_at(x[i], u[i]);
    return 0.5 * op.inner(op.apply(u), u) - 0.5 * lambda * op.inner(u, u) - op.domain.spacing * F;
}

Evolution evolve(const DiscreteOperator& op, const Nonlinearity& f, double lambda, const Vec& u0, double T,
                 double dt, const EvolveOptions& opt) {
    if (!(T >= 0) || !(dt > 0)) throw Error(ErrorKind::invalid_argument, "need T >= 0 and dt > 0");
    Evolution ev;
    auto record = [&](double t, const Vec& u) {
        ev.times.push_back(t);
        ev.l2.push_back(op.norm(u));
        ev.energy_norm.push_back(energy_norm(op, u));
        ev.energy.push_back(energy(op, f, lambda, u));
        if (opt.keep_states) ev.states.push_back(u);
        std::size_t k = ev.energy.size();
        if (k > 1 && ev.energy[k - 1] > ev.energy[k - 2] + 1e-12 * (1 + std::abs(ev.energy[k - 2])))
            ev.energy_monotone = false;
    };
    Vec u = u0;
    record(0, u);
    int steps = int(std::llround(T / dt));
    if (steps == 0) {
        ev.final_state = u;
        return ev;
    }
    double h = T / steps;
    ParabolicStepper stepper(op, f, lambda, h, opt.scheme);
    int every = std::max(1, opt.record_every);
    for (int s = 1; s <= steps; ++s) {
        u = stepper.step(u);
        if (!u.allFinite()) throw Error(ErrorKind::numeric_failure, "evolution produced non-finite values");
        if (s % every == 0 || s == steps) record(s * h, u);
    }
    ev.final_state = u;
    return ev;
}

void write_evolution_csv(const Evolution& ev, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path);
    out.precision(12);
    out << "t,l2_norm,energy_norm,energy\n";
    for (std::size_t i = 0; i < ev.times.size(); ++i)
        out << ev.times[i] << ',' << ev.l2[i] << ',' << ev.energy_norm[i] << ',' << ev.energy[i] << '\n';
}

Vec stationary_residual(const DiscreteOperator& op, const Nonlinearity& f, double lambda, const Vec& u) {
    return op.apply(u) - lambda * u - nemitski(f, op.domain.interior(), u);
}

NewtonResult elliptic_newton(const DiscreteOperator& op, const Nonlinearity& f, double lambda, const Vec& u0,
                             double tol, int max_iter) {
    if (!(tol > 0)) throw Error(ErrorKind::invalid_argument, "tolerance must be positive");
    const int n = op.size();
    Vec x = op.domain.interior();
    NewtonResult res;
    res.u = u0;
    Vec r = stationary_residual(op, f, lambda, res.u);
    res.residual = op.norm(r);
    for (int it = 0; it < max_iter; ++it) {
        if (res.residual <= tol) {
            res.converged = true;
            return res;
        }
        Vec d(n);
        for (int i = 0; i < n; ++i) d[i] = op.diag[i] - lambda - f.derivative(x[i], res.u[i]);
        Vec off = Vec::Constant(n - 1, op.off);
        Vec ev = symmetric_tridiagonal_eigenvalues(d, off);
        double smallest = ev.cwiseAbs().minCoeff(), largest = ev.cwiseAbs().maxCoeff();
        if (smallest <= 1e-11 * largest) {
            res.singular = true;
            res.note = "singular Jacobian, smallest |eigenvalue| " + std::to_string(smallest);
            return res;
        }
        Vec step = TridiagonalLU(off, d, off).solve(-r);
        double t = 1;
        Vec trial;
        Vec rt;
        double nt = 0;
        int halvings = 0;
        for (;;) {
            trial = res.u + t * step;
            rt = stationary_residual(op, f, lambda, trial);
            nt = op.norm(rt);
            if (nt <= (1 - 1e-4 * t) * res.residual || halvings == 30) break;
            t *= 0.5;
            ++halvings;
        }
        if (!(nt < res.residual)) {
            res.iterations = it + 1;
            res.note = "line search failed to reduce the residual";
            return res;
        }
        res.u = trial;
        r = rt;
        res.residual = nt;
        res.iterations = it + 1;
    }
    res.converged = res.residual <= tol;
    if (!res.converged) res.note = "iteration limit reached";
    return res;
}

double manifold_distance(const Vec& u, const ManifoldMap& map) {
    const SpectralSplit& s = map.split();
    Vec c = s.to_modes(u);
    Vec w = c.segment(s.dim1, s.m);
    Vec xi = map.xi_modes(w);
    c.segment(s.dim1, s.m).setZero();
    return weighted_mode_norm(map.context().weights, c - xi);
}

}  // namespace invman
