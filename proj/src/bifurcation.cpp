#include "invman/bifurcation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "invman/error.hpp"

namespace invman {

FieldFamily::FieldFamily(std::shared_ptr<const ManifoldContext> ctx, std::shared_ptr<const DiscreteOperator> op)
    : ctx_(std::move(ctx)), op_(std::move(op)) {
    if (!ctx_ || !op_) throw Error(ErrorKind::invalid_argument, "field family needs a context and an operator");
}

std::shared_ptr<const ReducedField> FieldFamily::at(double lambda) const {
    std::lock_guard lock(mutex_);
    auto it = fields_.find(lambda);
    if (it != fields_.end()) return it->second;
    auto field = std::make_shared<const ReducedField>(std::make_shared<const ManifoldMap>(ctx_, lambda));
    fields_.emplace(lambda, field);
    return field;
}

const char* label_name(BranchLabel l) {
    switch (l) {
        case BranchLabel::plus_infinity: return "plus-infinity";
        case BranchLabel::minus_infinity: return "minus-infinity";
        case BranchLabel::bounded: return "bounded";
    }
    return "unknown";
}

BranchPoint make_branch_point(const ReducedField& field, const DiscreteOperator& op, const Equilibrium& e,
                              const BranchOptions& opt) {
    const Nonlinearity& f = field.context().f;
    BranchPoint p;
    p.lambda = field.lambda();
    p.w = e.w;
    p.u = field.lift(e.w);
    p.l2_norm = op.norm(p.u);
    p.energy_norm = energy_norm(op, p.u);
    p.morse_index = morse_index(field, e.w);
    p.residual = op.norm(stationary_residual(op, f, p.lambda, p.u));
    p.refined_residual = p.residual;
    if (opt.refine) {
        NewtonResult nr = elliptic_newton(op, f, p.lambda, p.u, opt.refine_tol);
        if (nr.converged) {
            p.refined = true;
            p.refined_residual = nr.residual;
            p.refine_shift = op.norm(nr.u - p.u);
        }
    }
    return p;
}

BifurcationBranch continue_branch(const FieldFamily& family, const std::vector<double>& grid, const Vec& seed,
                                  BranchLabel label, const BranchOptions& opt) {
    if (grid.empty()) throw Error(ErrorKind::invalid_argument, "empty lambda grid");
    bool up = grid.size() < 2 || grid[1] > grid[0];
    for (std::size_t i = 1; i < grid.size(); ++i)
        if ((grid[i] > grid[i - 1]) != up || grid[i] == grid[i - 1])
            throw Error(ErrorKind::invalid_argument, "lambda grid is not strictly monotone");
    for (double l : grid)
        if (!family.split().in_window(l)) {
            std::ostringstream msg;
            msg << "lambda = " << l << " lies outside the admissible window";
            throw Error(ErrorKind::invalid_argument, msg.str());
        }

    BifurcationBranch br;
    br.label = label;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double lam = grid[i];
        const double ls = family.lambda_star();
        const bool unbounded = label != BranchLabel::bounded;
        const auto& pts = br.points;
        Vec guess = seed;
        if (!pts.empty()) guess = pts.back().w;
        if (unbounded && !pts.empty() && lam < ls && pts.back().lambda < ls) {
            // |w| ~ (lambda* - lambda)^-p; p from the last two points, 1 to start
            const auto& b = pts.back();
            double p = 1;
            if (pts.size() >= 2) {
                const auto& a = pts[pts.size() - 2];
                p = std::log(b.w.norm() / a.w.norm()) / std::log((ls - a.lambda) / (ls - b.lambda));
                p = std::isfinite(p) ? std::clamp(p, 0.5, 2.0) : 1.0;
            }
            guess = b.w * std::pow((ls - b.lambda) / (ls - lam), p);
        } else if (pts.size() >= 2) {
            const auto& a = pts[pts.size() - 2];
            const auto& b = pts.back();
            guess = b.w + (b.w - a.w) * ((lam - b.lambda) / (b.lambda - a.lambda));
        }
        auto field = family.at(lam);
        auto check = [&](const EquilibriumSearch& found) -> std::string {
            if (found.roots.empty()) return found.notes.empty() ? "no root" : found.notes.front();
            if (!unbounded) return {};
            const Vec& w = found.roots[0].w;
            if (!(w.dot(seed) > 0)) return "root on the wrong side of the kernel";
            if (w.norm() <= 1e-6 * seed.norm()) return "root collapsed onto the trivial solution";
            if (!pts.empty() && std::abs(lam - ls) < std::abs(pts.back().lambda - ls) && w.norm() < pts.back().w.norm())
                return "norm decreased towards lambda*";
            return {};
        };
        auto found = find_equilibria(*field, {guess}, opt.field_tol, opt.max_iter);
        std::string lost = check(found);
        if (!lost.empty() && unbounded && pts.empty() && lam < ls) {
            // a seed inside the annulus may sit before the fold of the radial profile; let the
            // reduced flow carry it out to the attractor and polish from there
            const double eta = ls - lam;
            try {
                auto tr = integrate_reduced(*field, seed, 5 / eta, 0.5 / eta);
                found = find_equilibria(*field, {tr.w.back()}, opt.field_tol, opt.max_iter);
                lost = check(found);
            } catch (const Error& e) {
                lost += std::string("; flow: ") + e.what();
            }
        }
        if (!lost.empty()) {
            std::ostringstream msg;
            msg << "Newton lost the branch at lambda = " << lam << " (" << lost << ")";
            if (i == 0) throw Error(ErrorKind::empty_branch, msg.str());
            br.termination = msg.str();
            break;
        }
        br.points.push_back(make_branch_point(*field, family.op(), found.roots[0], opt));
    }
    if (label != BranchLabel::bounded && br.points.size() >= 4) br.fit = detect_blowup(br, family.lambda_star());
    return br;
}

BlowupFit fit_power_law(const std::vector<double>& eta, const std::vector<double>& norms) {
    const std::size_t n = eta.size();
    if (n < 4 || norms.size() != n) throw Error(ErrorKind::insufficient_data, "a blow-up fit needs at least 4 points");
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(eta[i] > 0) || !(norms[i] > 0))
            throw Error(ErrorKind::invalid_argument, "blow-up fit needs lambda < lambda* and nonzero norms");
        x[i] = std::log(1 / eta[i]);
        y[i] = std::log(norms[i]);
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i] / n;
        my += y[i] / n;
    }
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0) throw Error(ErrorKind::insufficient_data, "all points share one lambda");
    BlowupFit fit;
    fit.points = int(n);
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double ss_res = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double r = y[i] - (fit.intercept + fit.slope * x[i]);
        ss_res += r * r;
    }
    fit.r2 = syy > 0 ? 1 - ss_res / syy : 1;
    fit.C = std::exp(fit.intercept);
    return fit;
}

BlowupFit detect_blowup(const BifurcationBranch& branch, double lambda_star) {
    if (branch.label == BranchLabel::bounded)
        throw Error(ErrorKind::insufficient_data, "bounded branches have no blow-up to fit");
    std::vector<double> eta, norms;
    for (const auto& p : branch.points) {
        eta.push_back(lambda_star - p.lambda);
        norms.push_back(p.l2_norm);
    }
    return fit_power_law(eta, norms);
}

std::optional<Equilibrium> bounded_equilibrium(const ReducedField& field, double tol) {
    const int m = field.dim();
    std::vector<Vec> guesses{Vec::Zero(m)};
    for (int q = 0; q < m; ++q) {
        Vec e = Vec::Zero(m);
        e[q] = 1e-2;
        guesses.push_back(e);
        guesses.push_back(-e);
    }
    auto found = find_equilibria(field, guesses, tol);
    if (found.roots.empty()) return std::nullopt;
    return *std::min_element(found.roots.begin(), found.roots.end(),
                             [](const Equilibrium& a, const Equilibrium& b) { return a.w.norm() < b.w.norm(); });
}

double bounded_cap(const AnnulusConstants& k) { return k.R0 + k.xi_radius; }

ThreeSolutions three_solutions(const FieldFamily& family, const AnnulusConstants& k, double lambda,
                               const BranchOptions& opt) {
    const double ls = family.lambda_star();
    if (!(lambda < ls)) throw Error(ErrorKind::invalid_argument, "three solutions need lambda < lambda*");
    auto field = family.at(lambda);
    const int m = field->dim();

    std::vector<std::string> found;
    std::vector<Equilibrium> roots;
    auto e3 = bounded_equilibrium(*field, opt.field_tol);
    if (e3) found.push_back("bounded equilibrium with |w| = " + std::to_string(e3->w.norm()));

    AnnulusBounds b = annulus_bounds(k, lambda, ls);
    auto incomplete = [&](const std::string& why) {
        std::ostringstream msg;
        msg << "found " << found.size() << " of 3 solutions at lambda = " << lambda << " (" << why << ")";
        for (const auto& s : found) msg << "; " << s;
        return Error(ErrorKind::incomplete_multiplicity, msg.str());
    };
    if (!(k.c0 > 0) || !k.R0_found) throw incomplete("no Landesman-Lazer forcing, the annulus is empty");
    if (!b.exists) {
        std::ostringstream msg;
        msg << "lambda* - lambda = " << b.eta << " exceeds the measured theta1 = " << k.theta1;
        throw Error(ErrorKind::invalid_argument, msg.str());
    }

    for (double sign : {1.0, -1.0}) {
        Vec dir = Vec::Zero(m);
        dir[0] = sign;
        try {
            if (m == 1) {
                roots.push_back(radial_root(*field, dir, b.r_lambda, b.R_lambda, opt.field_tol));
            } else {
                // let the flow settle inside the annulus, then polish
                auto tr = integrate_reduced(*field, 1.5 * b.r_lambda * dir, 10 / b.eta, 1.0 / b.eta);
                auto s = find_equilibria(*field, {tr.w.back()}, opt.field_tol);
                if (s.roots.empty()) throw Error(ErrorKind::non_convergence, "no root after the flow");
                roots.push_back(s.roots[0]);
            }
            found.push_back("annulus equilibrium with |w| = " + std::to_string(roots.back().w.norm()));
        } catch (const Error& e) {
            found.push_back(std::string("no equilibrium along ") + (sign > 0 ? "+" : "-") + " direction: " + e.what());
        }
    }
    if (!e3 || roots.size() < 2) throw incomplete("annulus or bounded search failed");

    ThreeSolutions ts;
    ts.bounds = b;
    ts.bounded_cap = bounded_cap(k);
    ts.e1 = make_branch_point(*field, family.op(), roots[0], opt);
    ts.e2 = make_branch_point(*field, family.op(), roots[1], opt);
    ts.e3 = make_branch_point(*field, family.op(), *e3, opt);
    const DiscreteOperator& op = family.op();
    ts.min_separation = std::min({op.norm(ts.e1.u - ts.e2.u), op.norm(ts.e1.u - ts.e3.u), op.norm(ts.e2.u - ts.e3.u)});
    if (ts.min_separation < b.r_lambda / 2) throw incomplete("solutions are not separated by r_lambda / 2");
    return ts;
}

std::pair<int, int> index_signature(const FieldFamily& family, double lambda_left, double lambda_right, double tol) {
    if (!(lambda_left < lambda_right)) throw Error(ErrorKind::invalid_argument, "need lambda_left < lambda_right");
    const double ls = family.lambda_star();
    if (!(lambda_left < ls && ls < lambda_right))
        throw Error(ErrorKind::invalid_argument, "lambda* must lie strictly between the two sides");
    int idx[2];
    double side[2] = {lambda_left, lambda_right};
    for (int i = 0; i < 2; ++i) {
        auto field = family.at(side[i]);
        auto e = bounded_equilibrium(*field, tol);
        if (!e) {
            std::ostringstream msg;
            msg << "no bounded equilibrium at lambda = " << side[i];
            throw Error(ErrorKind::side_missing, msg.str());
        }
        idx[i] = morse_index(*field, e->w);
    }
    return {idx[0], idx[1]};
}

void write_diagram_csv(const std::vector<BifurcationBranch>& branches, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path);
    out.precision(12);
    out << "lambda,branch,l2_norm,morse_index,residual\n";
    for (const auto& br : branches)
        for (const auto& p : br.points)
            out << p.lambda << ',' << label_name(br.label) << ',' << p.l2_norm << ',' << p.morse_index << ','
                << p.residual << '\n';
}

}  // namespace invman
