#include "invman/operator.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "invman/error.hpp"
#include "invman/semigroup.hpp"

namespace invman {

Vec GridDomain::interior() const {
    Vec x(unknowns());
    for (int k = 0; k < unknowns(); ++k) x[k] = node(k + 1);
    return x;
}

GridDomain build_domain(double L, int n) {
    if (!(L > 0) || !std::isfinite(L)) throw Error(ErrorKind::invalid_argument, "half width must be positive");
    if (n < 3) throw Error(ErrorKind::invalid_argument, "need at least 3 nodes");
    return GridDomain{L, n, 2 * L / (n - 1)};
}

static double sech(double x) { return 1.0 / std::cosh(x); }

Potential poschl_teller(double v_inf, double depth, double width) {
    if (!(width > 0)) throw Error(ErrorKind::invalid_argument, "well width must be positive");
    return Potential{"poschl_teller",
                     [=](double x) {
                         double s = sech(x / width);
                         return v_inf - depth * s * s;
                     },
                     v_inf};
}

Potential constant_potential(double value) {
    return Potential{"constant", [=](double) { return value; }, value};
}

Potential double_well(double v_inf, double depth, double d) {
    return Potential{"double_well",
                     [=](double x) {
                         double a = sech(x - d), b = sech(x + d);
                         return v_inf - depth * (a * a + b * b);
                     },
                     v_inf};
}

Potential tabulated_potential(std::vector<double> x, std::vector<double> v) {
    if (x.size() != v.size() || x.size() < 2)
        throw Error(ErrorKind::invalid_argument, "tabulated potential needs at least two (x, V) pairs");
    if (!std::is_sorted(x.begin(), x.end()) || std::adjacent_find(x.begin(), x.end()) != x.end())
        throw Error(ErrorKind::invalid_argument, "tabulated x must be strictly increasing");
    double tail = std::max(v.front(), v.back());
    auto eval = [x = std::move(x), v = std::move(v)](double t) {
        if (t <= x.front()) return v.front();
        if (t >= x.back()) return v.back();
        auto it = std::upper_bound(x.begin(), x.end(), t);
        std::size_t j = static_cast<std::size_t>(it - x.begin());
        double s = (t - x[j - 1]) / (x[j] - x[j - 1]);
        return (1 - s) * v[j - 1] + s * v[j];
    };
    return Potential{"tabulated", eval, tail};
}

Potential load_potential_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::io, "cannot open potential table " + path);
    std::vector<double> xs, vs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double a, b;
        if (!(ss >> a >> b)) {
            if (xs.empty()) continue;  // header row
            throw Error(ErrorKind::io, "bad row in " + path + ": " + line);
        }
        xs.push_back(a);
        vs.push_back(b);
    }
    return tabulated_potential(std::move(xs), std::move(vs));
}

Vec DiscreteOperator::apply(const Vec& u) const {
    const int n = size();
    Vec out(n);
    for (int i = 0; i < n; ++i) {
        double s = diag[i] * u[i];
        if (i > 0) s += off * u[i - 1];
        if (i + 1 < n) s += off * u[i + 1];
        out[i] = s;
    }
    return out;
}

Mat DiscreteOperator::dense() const {
    const int n = size();
    Mat a = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        a(i, i) = diag[i];
        if (i + 1 < n) a(i, i + 1) = a(i + 1, i) = off;
    }
    return a;
}

DiscreteOperator assemble_operator(const GridDomain& domain, const Potential& potential) {
    if (domain.nodes < 3 || !(domain.spacing > 0)) throw Error(ErrorKind::invalid_argument, "bad grid");
    DiscreteOperator op;
    op.domain = domain;
    op.potential = potential;
    const int n = domain.unknowns();
    const double h = domain.spacing;
    op.diag.resize(n);
    op.off = -1.0 / (h * h);
    op.a1 = std::numeric_limits<double>::infinity();
    op.a2 = -op.a1;
    for (int i = 0; i < domain.nodes; ++i) {
        double v = potential.value(domain.node(i));
        if (!std::isfinite(v) || v <= 0) {
            std::ostringstream msg;
            msg << "potential must be positive, V(" << domain.node(i) << ") = " << v << " at node " << i;
            throw ValueError(ErrorKind::assumption_violation, msg.str(), i);
        }
        op.a1 = std::min(op.a1, v);
        op.a2 = std::max(op.a2, v);
        if (i > 0 && i + 1 < domain.nodes) op.diag[i - 1] = 2.0 / (h * h) + v;
    }
    for (double end : {potential.value(-domain.half_width), potential.value(domain.half_width)}) {
        if (std::abs(end - potential.v_inf) > potential.tail_tol) {
            std::ostringstream msg;
            msg << "potential has not reached its tail value " << potential.v_inf << " at the box edge (" << end
                << ")";
            throw Error(ErrorKind::assumption_violation, msg.str());
        }
    }
    return op;
}

SpectrumData compute_spectrum(const DiscreteOperator& op, int k, double cluster_tol) {
    const int n = op.size();
    if (k < 1) throw Error(ErrorKind::invalid_argument, "need k >= 1");
    k = std::min(k, n);

    Vec d = op.diag;
    Vec e = Vec::Constant(std::max(n, 1), op.off);
    Vec w(n);
    Mat z(n, k);
    std::vector<lapack_int> support(2 * static_cast<std::size_t>(k));
    lapack_int found = 0;
    lapack_int info = LAPACKE_dstevr(LAPACK_COL_MAJOR, 'V', k == n ? 'A' : 'I', n, d.data(), e.data(), 0.0,
                                     0.0, 1, k, 0.0, &found, w.data(), z.data(), n, support.data());
    if (info != 0 || found != k) {
        // report how far the partial result is from an eigen-decomposition
        double res = 0;
        for (int j = 0; j < std::min<int>(found, k); ++j)
            res = std::max(res, (op.apply(z.col(j)) - w[j] * z.col(j)).norm());
        throw ValueError(ErrorKind::numeric_failure,
                         "tridiagonal eigensolver failed (info " + std::to_string(info) + ")", res);
    }

    SpectrumData s;
    s.x = op.domain.interior();
    s.h = op.domain.spacing;
    s.v_inf = op.potential.v_inf;
    s.eigenvalues = w.head(k);
    s.vectors = std::move(z);

    // deterministic sign: even and odd modes both get a stable orientation
    Vec ramp(n);
    for (int i = 0; i < n; ++i) ramp[i] = 1.0 + double(i) / n;
    for (int j = 0; j < k; ++j)
        if (s.vectors.col(j).dot(ramp) < 0) s.vectors.col(j) *= -1.0;

    for (int j = 0; j < k; ++j) {
        double lam = s.eigenvalues[j];
        if (lam >= s.v_inf) break;
        ++s.discrete_count;
        if (!s.point_spectrum.empty() &&
            std::abs(lam - s.point_spectrum.back()) <= cluster_tol * std::max(1.0, std::abs(lam))) {
            ++s.multiplicity.back();
        } else {
            s.point_spectrum.push_back(lam);
            s.multiplicity.push_back(1);
        }
    }
    return s;
}

Vec SpectralSplit::project(int i, const Vec& u) const { return from_modes(mask_modes(i, to_modes(u))); }

Vec SpectralSplit::mask_modes(int i, const Vec& c) const {
    Vec out = Vec::Zero(c.size());
    for (int k = 0; k < c.size(); ++k)
        if (block(k) == i) out[k] = c[k];
    return out;
}

Vec SpectralSplit::kernel_modes(const Vec& w) const {
    if (w.size() != m) throw Error(ErrorKind::invalid_argument, "kernel state has the wrong dimension");
    Vec c = Vec::Zero(size());
    c.segment(dim1, m) = w;
    return c;
}

Vec SpectralSplit::from_kernel(const Vec& w) const { return from_modes(kernel_modes(w)); }

Vec SpectralSplit::fractional_weights(double a, double alpha_) const {
    const Vec& lam = eigenvalues();
    Vec out(lam.size());
    for (int k = 0; k < lam.size(); ++k) {
        double nu = lam[k] + a;
        if (!(nu > 0)) throw ValueError(ErrorKind::invalid_shift, "Lambda = A + a is not positive", nu);
        out[k] = std::pow(nu, alpha_);
    }
    return out;
}

SpectralSplit spectral_split(std::shared_ptr<const SpectrumData> spec, double lambda_star, double alpha,
                             const SplitOptions& opt) {
    if (!spec) throw Error(ErrorKind::invalid_argument, "no spectrum");
    if (!spec->complete())
        throw Error(ErrorKind::invalid_argument, "the splitting needs every eigenpair of the discrete operator");
    if (!(alpha >= 0 && alpha < 1)) throw Error(ErrorKind::invalid_argument, "alpha must lie in [0, 1)");

    // snap lambda* onto a computed point of the discrete spectrum
    int best = -1;
    for (std::size_t j = 0; j < spec->point_spectrum.size(); ++j)
        if (best < 0 || std::abs(spec->point_spectrum[j] - lambda_star) <
                            std::abs(spec->point_spectrum[best] - lambda_star))
            best = static_cast<int>(j);
    if (best < 0 || std::abs(spec->point_spectrum[best] - lambda_star) > opt.match_tol) {
        std::ostringstream msg;
        msg << lambda_star << " is not an eigenvalue below V_inf = " << spec->v_inf;
        throw Error(ErrorKind::not_an_eigenvalue, msg.str());
    }

    // recluster around the chosen value with the requested tolerance
    const Vec& lam = spec->eigenvalues;
    double center = spec->point_spectrum[best];
    double tol = opt.cluster_tol * std::max(1.0, std::abs(center));
    int first = -1, last = -1;
    for (int k = 0; k < lam.size(); ++k) {
        if (std::abs(lam[k] - center) <= tol) {
            if (first < 0) first = k;
            last = k;
        }
    }

    SpectralSplit s;
    s.spectrum = spec;
    s.dim1 = first;
    s.m = last - first + 1;
    s.lambda_star = lam.segment(first, s.m).mean();
    s.alpha = alpha;
    s.beta1 = first > 0 ? lam[first - 1] : -std::numeric_limits<double>::infinity();
    if (last + 1 >= lam.size()) throw Error(ErrorKind::invalid_argument, "no spectrum above lambda*");
    s.beta2 = lam[last + 1];
    double gap = s.beta2 - s.lambda_star;
    if (first > 0) gap = std::min(gap, s.lambda_star - s.beta1);
    s.beta = opt.beta_fraction * gap;
    s.shift = opt.shift ? *opt.shift : 1.0 + std::abs(lam[0]);
    s.fractional_weights();  // validates the shift
    s.M = estimate_decay_constant(s, opt.decay_samples, opt.seed);
    return s;
}

void write_spectrum_csv(const SpectrumData& spec, const std::string& path, int modes) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path);
    out.precision(12);
    out << "index,eigenvalue,below_threshold\n";
    for (int k = 0; k < spec.count(); ++k)
        out << k << ',' << spec.eigenvalues[k] << ',' << (spec.eigenvalues[k] < spec.v_inf ? 1 : 0) << '\n';
    std::string stem = path.size() > 4 && path.ends_with(".csv") ? path.substr(0, path.size() - 4) : path;
    std::ofstream f(stem + "_modes.csv");
    if (!f) throw Error(ErrorKind::io, "cannot write " + stem + "_modes.csv");
    f.precision(12);
    modes = std::min(modes, spec.count());
    f << "x";
    for (int k = 0; k < modes; ++k) f << ",phi" << k;
    f << '\n';
    for (int i = 0; i < spec.size(); ++i) {
        f << spec.x[i];
        for (int k = 0; k < modes; ++k) f << ',' << spec.vectors(i, k) / std::sqrt(spec.h);
        f << '\n';
    }
}

void write_operator_csv(const DiscreteOperator& op, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path);
    out.precision(12);
    out << "x,potential,diagonal,offdiagonal\n";
    Vec x = op.domain.interior();
    for (int i = 0; i < op.size(); ++i)
        out << x[i] << ',' << op.potential.value(x[i]) << ',' << op.diag[i] << ',' << op.off << '\n';
}

}  // namespace invman
