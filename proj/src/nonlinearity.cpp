#include "invman/nonlinearity.hpp"

#include <algorithm>
#include <array>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <fstream>
#include <sstream>

#include "invman/error.hpp"
#include "invman/tridiag.hpp"

namespace invman {

static double sech(double x) { return 1.0 / std::cosh(x); }

static double log_cosh(double s) {
    double a = std::abs(s);
    return a + std::log1p(std::exp(-2 * a)) - std::log(2.0);
}

double Nonlinearity::derivative(double x, double s) const {
    if (ds) return ds(x, s);
    double d = 1e-6 * (1 + std::abs(s));
    return (eval(x, s + d) - eval(x, s - d)) / (2 * d);
}

double Nonlinearity::primitive_at(double x, double s) const {
    if (primitive) return primitive(x, s);
    if (s == 0) return 0;
    // split long intervals so the fixed rule keeps its accuracy on saturating f
    int pieces = std::max(1, int(std::ceil(std::abs(s) / 2.0)));
    double sum = 0, step = s / pieces;
    for (int p = 0; p < pieces; ++p)
        sum += boost::math::quadrature::gauss<double, 15>::integrate([&](double r) { return eval(x, r); },
                                                                     p * step, (p + 1) * step);
    return sum;
}

Nonlinearity zero_nonlinearity() {
    Nonlinearity f;
    f.name = "zero";
    f.eval = [](double, double) { return 0.0; };
    f.bound = [](double) { return 0.0; };
    f.ds = [](double, double) { return 0.0; };
    f.primitive = [](double, double) { return 0.0; };
    f.odd = true;
    return f;
}

Nonlinearity constant_nonlinearity(double c) {
    Nonlinearity f;
    f.name = "constant";
    f.eval = [c](double, double) { return c; };
    f.bound = [c](double) { return std::abs(c); };
    f.ds = [](double, double) { return 0.0; };
    f.primitive = [c](double, double s) { return c * s; };
    f.f_plus = f.f_minus = c;
    f.params["scale"] = c;
    return f;
}

Nonlinearity sech_profile(double c) {
    Nonlinearity f;
    f.name = "sech_profile";
    f.eval = [c](double x, double) { return c * sech(x); };
    f.bound = [c](double x) { return std::abs(c) * sech(x); };
    f.ds = [](double, double) { return 0.0; };
    f.primitive = [c](double x, double s) { return c * sech(x) * s; };
    f.f_plus = f.f_minus = c;
    f.params["scale"] = c;
    return f;
}

Nonlinearity tanh_sech(double c, double f_plus, double f_minus) {
    Nonlinearity f;
    f.name = "tanh_sech";
    f.eval = [c](double x, double s) { return c * std::tanh(s) * sech(x); };
    f.bound = [c](double x) { return std::abs(c) * sech(x); };
    f.ds = [c](double x, double s) {
        double q = sech(s);
        return c * q * q * sech(x);
    };
    f.primitive = [c](double x, double s) { return c * sech(x) * log_cosh(s); };
    f.f_plus = f_plus < 0 ? c : f_plus;
    f.f_minus = f_minus < 0 ? c : f_minus;
    f.odd = true;
    f.params["scale"] = c;
    return f;
}

Nonlinearity tanh_plain(double c) {
    Nonlinearity f;
    f.name = "tanh";
    f.eval = [c](double, double s) { return c * std::tanh(s); };
    f.bound = [c](double) { return std::abs(c); };
    f.ds = [c](double, double s) {
        double q = sech(s);
        return c * q * q;
    };
    f.primitive = [c](double, double s) { return c * log_cosh(s); };
    f.f_plus = f.f_minus = c;
    f.odd = true;
    f.params["scale"] = c;
    return f;
}

Nonlinearity clamped_linear(double c, double cap) {
    if (!(cap > 0)) throw Error(ErrorKind::invalid_argument, "clamp level must be positive");
    Nonlinearity f;
    f.name = "clamped_linear";
    f.eval = [c, cap](double, double s) { return c * std::clamp(s, -cap, cap); };
    f.bound = [c, cap](double) { return std::abs(c) * cap; };
    f.ds = [c, cap](double, double s) { return std::abs(s) < cap ? c : 0.0; };
    f.primitive = [c, cap](double, double s) {
        double a = std::abs(s);
        return a <= cap ? 0.5 * c * s * s : c * cap * (a - 0.5 * cap);
    };
    f.f_plus = f.f_minus = c * cap;
    f.odd = true;
    f.params["scale"] = c;
    f.params["cap"] = cap;
    return f;
}

Nonlinearity tabulated_nonlinearity(std::vector<double> xs, std::vector<double> ss, std::vector<double> values,
                                    double f_plus, double f_minus) {
    const std::size_t nx = xs.size(), ns = ss.size();
    if (nx < 2 || ns < 2 || values.size() != nx * ns)
        throw Error(ErrorKind::invalid_argument, "tabulated nonlinearity needs a full rectangular table");
    auto strictly = [](const std::vector<double>& a) {
        for (std::size_t i = 1; i < a.size(); ++i)
            if (!(a[i] > a[i - 1])) return false;
        return true;
    };
    if (!strictly(xs) || !strictly(ss)) throw Error(ErrorKind::invalid_argument, "table axes must increase");

    auto locate = [](const std::vector<double>& a, double t, std::size_t& j, double& w) {
        if (t <= a.front()) {
            j = 0;
            w = 0;
        } else if (t >= a.back()) {
            j = a.size() - 2;
            w = 1;
        } else {
            j = std::size_t(std::upper_bound(a.begin(), a.end(), t) - a.begin()) - 1;
            w = (t - a[j]) / (a[j + 1] - a[j]);
        }
    };
    std::vector<double> gx(nx, 0.0);
    for (std::size_t i = 0; i < nx; ++i)
        for (std::size_t k = 0; k < ns; ++k) gx[i] = std::max(gx[i], std::abs(values[i * ns + k]));

    Nonlinearity f;
    f.name = "tabulated";
    f.eval = [=](double x, double s) {
        std::size_t i, k;
        double a, b;
        locate(xs, x, i, a);
        locate(ss, s, k, b);
        auto at = [&](std::size_t p, std::size_t q) { return values[p * ns + q]; };
        return (1 - a) * ((1 - b) * at(i, k) + b * at(i, k + 1)) + a * ((1 - b) * at(i + 1, k) + b * at(i + 1, k + 1));
    };
    f.bound = [=](double x) {
        std::size_t i;
        double a;
        locate(xs, x, i, a);
        return std::max(gx[i], gx[i + 1]);
    };
    f.f_plus = f_plus;
    f.f_minus = f_minus;
    return f;
}

Nonlinearity load_nonlinearity_csv(const std::string& path, double f_plus, double f_minus) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open nonlinearity table " + path);
    std::vector<std::array<double, 3>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double a, b, c;
        if (!(ss >> a >> b >> c)) {
            if (rows.empty()) continue;
            throw Error(ErrorKind::io, "bad row in " + path + ": " + line);
        }
        rows.push_back({a, b, c});
    }
    std::vector<double> xs, ss;
    for (auto& r : rows) {
        xs.push_back(r[0]);
        ss.push_back(r[1]);
    }
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    std::sort(ss.begin(), ss.end());
    ss.erase(std::unique(ss.begin(), ss.end()), ss.end());
    if (rows.size() != xs.size() * ss.size())
        throw Error(ErrorKind::io, path + " does not cover a full rectangular (x, s) grid");
    std::vector<double> values(rows.size());
    for (auto& r : rows) {
        auto i = std::size_t(std::lower_bound(xs.begin(), xs.end(), r[0]) - xs.begin());
        auto k = std::size_t(std::lower_bound(ss.begin(), ss.end(), r[1]) - ss.begin());
        values[i * ss.size() + k] = r[2];
    }
    return tabulated_nonlinearity(std::move(xs), std::move(ss), std::move(values), f_plus, f_minus);
}

Nonlinearity negated(const Nonlinearity& f) {
    Nonlinearity g = f;
    g.name = "negated_" + f.name;
    g.eval = [e = f.eval](double x, double s) { return -e(x, s); };
    if (f.ds) g.ds = [d = f.ds](double x, double s) { return -d(x, s); };
    if (f.primitive) g.primitive = [p = f.primitive](double x, double s) { return -p(x, s); };
    g.f_plus = f.f_minus;
    g.f_minus = f.f_plus;
    return g;
}

Vec nemitski(const Nonlinearity& f, const Vec& x, const Vec& u) {
    if (x.size() != u.size()) throw Error(ErrorKind::invalid_argument, "state does not match the grid");
    Vec out(u.size());
    for (int i = 0; i < u.size(); ++i) {
        double v = f.eval(x[i], u[i]);
        if (!std::isfinite(v))
            throw ValueError(ErrorKind::numeric_failure, "non-finite nonlinearity at node " + std::to_string(i), i);
        out[i] = v;
    }
    return out;
}

Vec bound_values(const Nonlinearity& f, const Vec& x) {
    Vec g(x.size());
    for (int i = 0; i < x.size(); ++i) g[i] = f.bound(x[i]);
    return g;
}

double bound_l2(const Nonlinearity& f, const Vec& x, double h) { return std::sqrt(h) * bound_values(f, x).norm(); }

LipschitzEstimate lipschitz_details(const Nonlinearity& f, const DiscreteOperator& op, int samples,
                                    std::uint64_t seed) {
    if (samples < 1) throw Error(ErrorKind::invalid_argument, "need at least one sample");
    const int n = op.size();
    Vec x = op.domain.interior();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // one shared set of s-pairs for all nodes, dense near zero where slopes peak
    std::vector<std::pair<double, double>> pairs(samples);
    for (auto& p : pairs) {
        double s = 60.0 * std::pow(2 * unit(rng) - 1, 3);
        double d = std::exp(std::log(1e-4) + unit(rng) * (std::log(10.0) - std::log(1e-4)));
        p = {s, s + (unit(rng) < 0.5 ? -d : d)};
    }
    LipschitzEstimate est;
    est.pointwise = Vec::Zero(n);
    for (int i = 0; i < n; ++i) {
        double l = 0;
        for (auto [s, t] : pairs) l = std::max(l, std::abs(f.eval(x[i], s) - f.eval(x[i], t)) / std::abs(s - t));
        est.pointwise[i] = l;
    }
    if (est.pointwise.maxCoeff() == 0) return est;

    // ||diag(l) A^{-1/2}||^2 is the top eigenvalue of diag(l) A^{-1} diag(l)
    Vec sub = Vec::Constant(n - 1, op.off);
    TridiagonalLU lu(sub, op.diag, sub);
    const Vec& l = est.pointwise;
    Vec v = Vec::Ones(n).normalized();
    double rq = 0;
    for (int it = 0; it < 5000; ++it) {
        Vec y = l.cwiseProduct(lu.solve(l.cwiseProduct(v)));
        double next = v.dot(y);
        double nrm = y.norm();
        if (nrm == 0) break;
        v = y / nrm;
        if (std::abs(next - rq) <= 1e-13 * next) {
            rq = next;
            break;
        }
        rq = next;
    }
    est.L_f = 1.05 * std::sqrt(rq);
    return est;
}

double compute_F_mu(double M, double beta, double mu, double alpha) {
    if (!(beta > 0)) throw Error(ErrorKind::invalid_argument, "beta must be positive");
    if (!(mu > beta / 4 && mu < 0.75 * beta))
        throw Error(ErrorKind::invalid_argument, "mu must lie strictly between beta/4 and 3 beta/4");
    if (!(alpha >= 0 && alpha < 1)) throw Error(ErrorKind::invalid_argument, "alpha must lie in [0, 1)");
    double lo = mu - beta / 4, hi = 0.75 * beta - mu;
    return M * (1 / lo + 1 / hi + std::tgamma(1 - alpha) / std::pow(hi, 1 - alpha));
}

SmallnessGate check_gate(double F_mu, double L_f) {
    if (F_mu < 0 || L_f < 0) throw Error(ErrorKind::invalid_argument, "gate inputs must be nonnegative");
    return {F_mu, L_f, F_mu * L_f};
}

double landesman_lazer_margin(const Nonlinearity& f, const SpectralSplit& split, const Vec& v, const Vec& w,
                              double s) {
    const SpectrumData& sp = *split.spectrum;
    if (v.size() != sp.size() || w.size() != sp.size())
        throw Error(ErrorKind::invalid_argument, "state does not match the grid");
    double wn = sp.coefficients(w).norm();
    if (wn > 0 && (w - split.project(2, w)).norm() * std::sqrt(sp.h) > 1e-8 * std::max(1.0, wn))
        throw Error(ErrorKind::invalid_argument, "w is not in the kernel block");
    double a = 0, b = 0;
    for (int i = 0; i < sp.size(); ++i) {
        a += f.eval(sp.x[i], v[i] + s * w[i]) * w[i];
        b += w[i] > 0 ? f.f_plus * w[i] : -f.f_minus * w[i];
    }
    // trapezoid on the full grid; the Dirichlet end values are zero
    return sp.h * (a - 0.5 * b);
}

ThresholdSearch find_margin_threshold(const Nonlinearity& f, const SpectralSplit& split, double R, double eps,
                                      int pairs, std::uint64_t seed, double s_min, double s_max, int grid) {
    if (pairs < 1 || grid < 2 || !(s_max > s_min) || !(s_min > 0))
        throw Error(ErrorKind::invalid_argument, "bad threshold search setup");
    ThresholdSearch res;
    for (int k = 0; k < grid; ++k) res.s_grid.push_back(s_min * std::pow(s_max / s_min, double(k) / (grid - 1)));

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> worst(grid, std::numeric_limits<double>::infinity());
    for (int p = 0; p < pairs; ++p) {
        double rv = R * std::sqrt(unit(rng));
        Vec v = p % 2 == 0 ? random_smooth_state(split, rng, rv) : random_rough_state(split, rng, rv);
        Vec w = split.from_kernel(random_unit(split.m, rng) * (2 * unit(rng) - 1));
        for (int k = 0; k < grid; ++k)
            worst[k] = std::min(worst[k], landesman_lazer_margin(f, split, v, w, res.s_grid[k]));
    }
    // walk down from the top of the grid while every later point still passes
    int first = grid;
    for (int k = grid - 1; k >= 0 && worst[k] >= -eps; --k) first = k;
    if (first == grid) {
        res.worst_margin = worst.back();
        return res;
    }
    res.found = true;
    res.s0 = res.s_grid[first];
    res.worst_margin = *std::min_element(worst.begin() + first, worst.end());
    return res;
}

Vec random_smooth_state(const SpectralSplit& split, std::mt19937_64& rng, double l2_norm, int modes) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const int n = split.size();
    Vec c = Vec::Zero(n);
    for (int k = 0; k < std::min(modes, n); ++k) c[k] = normal(rng) / (1.0 + 0.2 * k);
    double nrm = c.norm();
    if (nrm == 0) return Vec::Zero(n);
    return split.from_modes(c * (l2_norm / nrm));
}

Vec random_rough_state(const SpectralSplit& split, std::mt19937_64& rng, double l2_norm) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const SpectrumData& sp = *split.spectrum;
    Vec u(sp.size());
    for (int i = 0; i < u.size(); ++i) u[i] = normal(rng);
    double nrm = std::sqrt(sp.h) * u.norm();
    return u * (l2_norm / nrm);
}

Vec random_unit(int m, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec v(m);
    do {
        for (int i = 0; i < m; ++i) v[i] = normal(rng);
    } while (v.norm() == 0);
    return v.normalized();
}

}  // namespace invman
