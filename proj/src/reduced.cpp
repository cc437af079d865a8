#include "invman/reduced.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "invman/error.hpp"

namespace invman {

ReducedField::ReducedField(std::shared_ptr<const ManifoldMap> map) : map_(std::move(map)) {
    if (!map_) throw Error(ErrorKind::invalid_argument, "no manifold map");
}

Vec kernel_forcing(const ManifoldContext& ctx, const Vec& c) {
    const SpectralSplit& s = ctx.split;
    const SpectrumData& sp = *s.spectrum;
    if (ctx.f.is_zero()) return Vec::Zero(s.m);
    Vec u = sp.synthesize(c);
    Vec fu = nemitski(ctx.f, ctx.x, u);
    return std::sqrt(sp.h) * (sp.vectors.middleCols(s.dim1, s.m).transpose() * fu);
}

Vec ReducedField::evaluate(const Vec& w) const {
    const SpectralSplit& s = map_->split();
    if (w.size() != s.m) throw Error(ErrorKind::invalid_argument, "kernel state has the wrong dimension");
    Vec c = map_->xi_modes(w);
    c.segment(s.dim1, s.m) = w;
    Vec out = kernel_forcing(context(), c);
    for (int q = 0; q < s.m; ++q) out[q] -= (s.eigenvalue(s.dim1 + q) - lambda()) * w[q];
    return out;
}

Mat ReducedField::jacobian(const Vec& w) const {
    const int m = dim();
    Mat J(m, m);
    double step = 1e-6 * (1 + w.norm());
    for (int q = 0; q < m; ++q) {
        Vec a = w, b = w;
        a[q] += step;
        b[q] -= step;
        J.col(q) = (evaluate(a) - evaluate(b)) / (2 * step);
    }
    return J;
}

ReducedTrajectory integrate_reduced(const ReducedField& field, const Vec& w0, double T, double dt,
                                    double overflow) {
    if (!(dt > 0) || !(T >= 0)) throw Error(ErrorKind::invalid_argument, "need dt > 0 and T >= 0");
    ReducedTrajectory tr;
    Vec w = w0;
    tr.t.push_back(0);
    tr.w.push_back(w);
    int steps = int(std::ceil(T / dt - 1e-12));
    double h = steps > 0 ? T / steps : 0;
    for (int k = 1; k <= steps; ++k) {
        Vec k1 = field(w);
        Vec k2 = field(w + 0.5 * h * k1);
        Vec k3 = field(w + 0.5 * h * k2);
        Vec k4 = field(w + h * k3);
        w += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        if (!w.allFinite() || w.norm() > overflow) {
            std::ostringstream msg;
            msg << "reduced state left the overflow guard at t = " << k * h;
            throw ValueError(ErrorKind::divergence_detected, msg.str(), k * h);
        }
        tr.t.push_back(k * h);
        tr.w.push_back(w);
    }
    return tr;
}

static bool newton(const ReducedField& field, Vec w, double tol, int max_iter, Equilibrium& out, std::string& note) {
    Vec F = field(w);
    double r = F.norm();
    for (int it = 0; it <= max_iter; ++it) {
        if (!std::isfinite(r)) {
            note = "non-finite field value";
            return false;
        }
        if (r <= tol) {
            out = {w, r, it};
            return true;
        }
        if (it == max_iter) break;
        Mat J = field.jacobian(w);
        Eigen::JacobiSVD<Mat> svd(J);
        const Vec& sv = svd.singularValues();
        if (sv[sv.size() - 1] <= 1e-12 * (1 + sv[0])) {
            note = "singular Jacobian";
            return false;
        }
        Vec step = J.fullPivLu().solve(-F);
        // near a fold of the radial profile the raw step can jump to the opposite branch
        const double cap = 1 + w.norm();
        if (step.norm() > cap) step *= cap / step.norm();
        double t = 1;
        Vec trial, Ft;
        double rt = 0;
        int halvings = 0;
        for (;;) {
            trial = w + t * step;
            Ft = field(trial);
            rt = Ft.norm();
            if (rt <= (1 - 1e-4 * t) * r || halvings == 30) break;
            t *= 0.5;
            ++halvings;
        }
        if (!(rt < r)) {
            note = "line search stalled";
            return false;
        }
        w = trial;
        F = Ft;
        r = rt;
    }
    note = "iteration limit";
    return false;
}

EquilibriumSearch find_equilibria(const ReducedField& field, const std::vector<Vec>& guesses, double tol,
                                  int max_iter) {
    if (guesses.empty()) throw Error(ErrorKind::invalid_argument, "need at least one guess");
    EquilibriumSearch res;
    for (std::size_t g = 0; g < guesses.size(); ++g) {
        Equilibrium e;
        std::string note;
        try {
            if (!newton(field, guesses[g], tol, max_iter, e, note)) {
                res.notes.push_back("guess " + std::to_string(g) + ": " + note);
                continue;
            }
        } catch (const Error& err) {
            res.notes.push_back("guess " + std::to_string(g) + ": " + err.what());
            continue;
        }
        bool dup = false;
        for (const auto& r : res.roots)
            if ((r.w - e.w).norm() <= std::max(10 * tol, 1e-6 * (1 + e.w.norm()))) dup = true;
        if (!dup) res.roots.push_back(e);
    }
    return res;
}

Equilibrium radial_root(const ReducedField& field, const Vec& direction, double lo, double hi, double tol) {
    Vec v = direction.normalized();
    auto g = [&](double s) { return field(s * v).dot(v); };
    double glo = g(lo), ghi = g(hi);
    if (!(glo * ghi < 0)) {
        std::ostringstream msg;
        msg << "no sign change of the radial field on [" << lo << ", " << hi << "]";
        throw Error(ErrorKind::non_convergence, msg.str());
    }
    std::uintmax_t iters = 100;
    auto stop = [&](double a, double b) { return std::abs(b - a) <= 1e-13 * (1 + std::abs(a)); };
    auto [a, b] = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi, stop, iters);
    double s = 0.5 * (a + b);
    Vec w = s * v;
    Equilibrium e{w, field(w).norm(), int(iters)};
    std::string note;
    if (e.residual > tol && !newton(field, w, tol, 20, e, note))
        throw Error(ErrorKind::non_convergence, "radial root could not be polished: " + note);
    return e;
}

int morse_index(const Mat& J) {
    Eigen::EigenSolver<Mat> es(J, false);
    double scale = 1 + J.norm();
    int count = 0;
    for (int i = 0; i < J.rows(); ++i)
        if (es.eigenvalues()[i].real() > 1e-9 * scale) ++count;
    return count;
}

int morse_index(const ReducedField& field, const Vec& w) { return morse_index(field.jacobian(w)); }

AnnulusConstants annulus_constants(const ManifoldContext& ctx, const AnnulusOptions& opt) {
    const SpectralSplit& s = ctx.split;
    const SpectrumData& sp = *s.spectrum;
    const Nonlinearity& f = ctx.f;
    AnnulusConstants k;
    std::mt19937_64 rng(opt.seed);

    // unit directions of the kernel block
    std::vector<Vec> dirs;
    if (s.m == 1) {
        dirs = {Vec::Constant(1, 1.0), Vec::Constant(1, -1.0)};
    } else {
        int count = s.m == 2 ? 720 : opt.directions * 50;
        for (int i = 0; i < count; ++i) {
            if (s.m == 2) {
                double a = M_PI * i / count;
                Vec v(2);
                v << std::cos(a), std::sin(a);
                dirs.push_back(v);
                dirs.push_back(-v);
            } else {
                dirs.push_back(random_unit(s.m, rng));
            }
        }
    }
    std::vector<Vec> phys;
    k.m_l1 = std::numeric_limits<double>::infinity();
    for (const Vec& d : dirs) {
        Vec v = s.from_kernel(d);
        double l1 = sp.h * v.cwiseAbs().sum();
        k.m_l1 = std::min(k.m_l1, l1);
        k.l1_max = std::max(k.l1_max, l1);
        phys.push_back(std::move(v));
    }
    if (s.m > 1 && phys.size() > std::size_t(opt.directions)) {
        // an evenly thinned direction set is enough for the threshold scan
        std::vector<Vec> thin;
        std::size_t stride = phys.size() / std::size_t(opt.directions);
        for (std::size_t i = 0; i < phys.size(); i += stride) thin.push_back(phys[i]);
        phys = std::move(thin);
    }

    k.delta = 0.4 * std::min(f.f_plus, f.f_minus);
    k.c0 = k.m_l1 * k.delta / 2;
    Vec g = bound_values(f, sp.x);
    k.f_inf = g.size() ? g.cwiseAbs().maxCoeff() : 0;
    k.C1 = k.f_inf * k.l1_max;
    double w_min = s.fractional_weights().minCoeff();
    k.xi_radius = xi_bound(f, s) / w_min;
    if (!(k.c0 > 0)) return k;

    // perturbations h with |h| <= xi_radius living in X^1 + X^3
    std::vector<Vec> H;
    H.push_back(Vec::Zero(sp.size()));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto off_kernel = [&](Vec h) {
        h -= s.project(2, h);
        double n = std::sqrt(sp.h) * h.norm();
        return n > 0 ? Vec(h / n) : h;
    };
    Vec gp = off_kernel(g);
    H.push_back(k.xi_radius * gp);
    H.push_back(-k.xi_radius * gp);
    for (int i = 0; i < opt.perturbations; ++i) {
        Vec h = i % 2 == 0 ? random_smooth_state(s, rng, 1.0) : random_rough_state(s, rng, 1.0);
        double r = i % 4 < 2 ? k.xi_radius : k.xi_radius * unit(rng);
        H.push_back(r * off_kernel(h));
    }

    std::vector<double> grid(opt.grid);
    for (int i = 0; i < opt.grid; ++i) grid[i] = opt.s_min * std::pow(opt.s_max / opt.s_min, double(i) / (opt.grid - 1));
    std::vector<double> worst(opt.grid, std::numeric_limits<double>::infinity());
    for (int i = 0; i < opt.grid; ++i)
        for (const Vec& h : H)
            for (const Vec& v : phys) {
                double a = 0;
                for (int j = 0; j < sp.size(); ++j) a += f.eval(sp.x[j], h[j] + grid[i] * v[j]) * v[j];
                worst[i] = std::min(worst[i], sp.h * a - k.c0);
            }
    int first = opt.grid;
    for (int i = opt.grid - 1; i >= 0 && worst[i] >= 0; --i) first = i;
    if (first < opt.grid) {
        k.R0_found = true;
        k.R0 = grid[first];
        k.theta1 = opt.safety * k.c0 / (2 * k.R0);
    }
    return k;
}

double dissipative_radius(double lambda, double lambda_star, double C1) {
    if (!(lambda < lambda_star)) throw Error(ErrorKind::invalid_argument, "the dissipative radius needs lambda < lambda*");
    if (!(C1 >= 0)) throw Error(ErrorKind::invalid_argument, "C1 must be non-negative");
    return C1 / (lambda_star - lambda);
}

AnnulusBounds annulus_bounds(const AnnulusConstants& k, double lambda, double lambda_star, double safety) {
    AnnulusBounds b;
    b.lambda = lambda;
    b.lambda_star = lambda_star;
    b.R0 = k.R0;
    b.c0 = k.c0;
    b.C1 = k.C1;
    b.eta = lambda_star - lambda;
    if (lambda >= lambda_star) {
        b.regime = 1;
        b.exists = k.R0_found;
        b.r_lambda = k.R0;
        b.R_lambda = std::numeric_limits<double>::infinity();
        b.sample_cap = 20 * k.R0;
        return b;
    }
    b.regime = 2;
    b.R_lambda = dissipative_radius(lambda, lambda_star, k.C1);
    if (!k.R0_found) return b;
    b.r_lambda = std::sqrt(safety * k.c0 * k.R0 / (2 * b.eta));
    b.exists = b.r_lambda > k.R0 && b.r_lambda <= b.R_lambda;
    b.sample_cap = b.r_lambda;
    return b;
}

double annulus_check(const ReducedField& field, const AnnulusBounds& bounds, int samples, std::uint64_t seed,
                     std::vector<AnnulusSample>* record) {
    if (samples < 1) throw Error(ErrorKind::invalid_argument, "need at least one sample");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double lo = bounds.R0, hi = bounds.regime == 1 ? bounds.sample_cap : bounds.r_lambda;
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < samples; ++i) {
        double r = lo + (hi - lo) * unit(rng);
        Vec w = r * random_unit(field.dim(), rng);
        double margin = 2 * field(w).dot(w) - bounds.c0 * w.norm();
        worst = std::min(worst, margin);
        if (record) record->push_back({w, margin});
    }
    return worst;
}

void write_equilibria_csv(const std::vector<EquilibriumRow>& rows, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path);
    out.precision(12);
    out << "lambda,s,residual,margin\n";
    for (const auto& r : rows) {
        double s = r.w.size() == 1 ? r.w[0] : r.w.norm();
        out << r.lambda << ',' << s << ',' << r.residual << ',' << r.margin << '\n';
    }
}

}  // namespace invman
