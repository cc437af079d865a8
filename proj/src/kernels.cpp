#include "invman/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>

#include "invman/error.hpp"

namespace invman::kernels {

const char* backend_name(Backend b) { return b == Backend::serial ? "serial" : "parallel"; }

double phi_a(double z) {
    if (std::abs(z) < 0.05) {
        // sum of (-1)^n (n + 1) z^n / (n + 2)!, twelve terms reach round-off at |z| = 0.05
        double s = 0, pw = 1, fact = 2;
        for (int n = 0; n < 12; ++n) {
            s += (n % 2 ? -1.0 : 1.0) * (n + 1) * pw / fact;
            pw *= z;
            fact *= n + 3;
        }
        return s;
    }
    return (1 - std::exp(-z) * (1 + z)) / (z * z);
}

double phi_1(double z) {
    if (z == 0) return 1;
    return -std::expm1(-z) / z;
}

Propagator make_propagator(const SpectralSplit& split, double lambda, double dt, int samples, int origin) {
    if (!(dt > 0) || samples < 2 || origin < 0 || origin >= samples)
        throw Error(ErrorKind::invalid_argument, "bad time grid for the propagator");
    Propagator p;
    p.modes = split.size();
    p.samples = samples;
    p.origin = origin;
    p.dt = dt;
    p.block.resize(p.modes);
    p.rate.resize(p.modes);
    for (Vec* v : {&p.decay, &p.fa, &p.fb, &p.grow, &p.ba, &p.bb}) v->setZero(p.modes);
    for (int k = 0; k < p.modes; ++k) {
        p.block[k] = split.block(k);
        double r = split.eigenvalue(k) - lambda;
        p.rate[k] = r;
        double z = r * dt;
        if (p.block[k] == 1) {
            // backward recursion for Y(t) = int_t^inf e^{-q(s-t)} g(s) ds with q = -r > 0
            double q = -z;
            double a = phi_a(q), one = phi_1(q);
            p.decay[k] = std::exp(-q);
            p.fa[k] = dt * (one - a);  // weight on g_j
            p.fb[k] = dt * a;          // weight on g_{j+1}
        } else {
            double a = phi_a(z), one = phi_1(z);
            p.decay[k] = std::exp(-z);
            p.fa[k] = dt * a;
            p.fb[k] = dt * (one - a);
            if (p.block[k] == 2) {
                double an = phi_a(-z), onen = phi_1(-z);
                p.grow[k] = std::exp(z);
                p.ba[k] = dt * (onen - an);
                p.bb[k] = dt * an;
            }
        }
    }
    return p;
}

void synthesize(Backend b, const Mat& Q, double scale, const Mat& C, Mat& out) {
    const int n = int(Q.rows()), k = int(Q.cols()), J = int(C.cols());
    if (C.rows() != k) throw Error(ErrorKind::invalid_argument, "coefficient block has the wrong height");
    out.resize(n, J);
    if (b == Backend::serial) {
        for (int j = 0; j < J; ++j)
            for (int i = 0; i < n; ++i) {
                double s = 0;
                for (int q = 0; q < k; ++q) s += Q(i, q) * C(q, j);
                out(i, j) = scale * s;
            }
        return;
    }
    const int chunk = 32;
    const int blocks = (J + chunk - 1) / chunk;
#pragma omp parallel for schedule(static)
    for (int bi = 0; bi < blocks; ++bi) {
        int j0 = bi * chunk, w = std::min(chunk, J - j0);
        out.middleCols(j0, w).noalias() = scale * (Q * C.middleCols(j0, w));
    }
}

void analyze(Backend b, const Mat& Q, double scale, const Mat& F, Mat& out) {
    const int n = int(Q.rows()), k = int(Q.cols()), J = int(F.cols());
    if (F.rows() != n) throw Error(ErrorKind::invalid_argument, "state block has the wrong height");
    out.resize(k, J);
    if (b == Backend::serial) {
        for (int j = 0; j < J; ++j)
            for (int q = 0; q < k; ++q) {
                double s = 0;
                for (int i = 0; i < n; ++i) s += Q(i, q) * F(i, j);
                out(q, j) = scale * s;
            }
        return;
    }
    const int chunk = 32;
    const int blocks = (J + chunk - 1) / chunk;
#pragma omp parallel for schedule(static)
    for (int bi = 0; bi < blocks; ++bi) {
        int j0 = bi * chunk, w = std::min(chunk, J - j0);
        out.middleCols(j0, w).noalias() = scale * (Q.transpose() * F.middleCols(j0, w));
    }
}

void nemitski_batch(Backend b, const Nonlinearity& f, const Vec& x, const Mat& U, Mat& out) {
    const int n = int(U.rows()), J = int(U.cols());
    if (x.size() != n) throw Error(ErrorKind::invalid_argument, "state block does not match the grid");
    out.resize(n, J);
    bool bad = false;
    auto column = [&](int j) {
        for (int i = 0; i < n; ++i) out(i, j) = f.eval(x[i], U(i, j));
        if (!out.col(j).allFinite()) bad = true;
    };
    if (b == Backend::serial) {
        for (int j = 0; j < J; ++j) column(j);
    } else {
#pragma omp parallel for schedule(static)
        for (int j = 0; j < J; ++j) column(j);
    }
    if (bad) throw Error(ErrorKind::numeric_failure, "non-finite nonlinearity along the trajectory");
}

static void propagate_mode(const Propagator& p, int k, double w, const Mat& G, Mat& out) {
    const int J = p.samples;
    auto g = G.row(k);
    auto y = out.row(k);
    switch (p.block[k]) {
        case 1: {
            double Y = g(J - 1) / (-p.rate[k]);
            y(J - 1) = -Y;
            for (int j = J - 2; j >= 0; --j) {
                Y = p.decay[k] * Y + p.fa[k] * g(j) + p.fb[k] * g(j + 1);
                y(j) = -Y;
            }
            break;
        }
        case 2: {
            y(p.origin) = w;
            for (int j = p.origin; j + 1 < J; ++j) y(j + 1) = p.decay[k] * y(j) + p.fa[k] * g(j) + p.fb[k] * g(j + 1);
            for (int j = p.origin - 1; j >= 0; --j)
                y(j) = p.grow[k] * y(j + 1) - (p.ba[k] * g(j) + p.bb[k] * g(j + 1));
            break;
        }
        default: {
            // the forcing before -T is frozen at its first sample
            y(0) = g(0) / p.rate[k];
            for (int j = 0; j + 1 < J; ++j) y(j + 1) = p.decay[k] * y(j) + p.fa[k] * g(j) + p.fb[k] * g(j + 1);
        }
    }
}

void propagate(Backend b, const Propagator& p, const Vec& w_modes, const Mat& G, Mat& out) {
    if (G.rows() != p.modes || G.cols() != p.samples || w_modes.size() != p.modes)
        throw Error(ErrorKind::invalid_argument, "forcing block does not match the propagator");
    out.resize(p.modes, p.samples);
    if (b == Backend::serial) {
        for (int k = 0; k < p.modes; ++k) propagate_mode(p, k, w_modes[k], G, out);
        return;
    }
#pragma omp parallel for schedule(static)
    for (int k = 0; k < p.modes; ++k) propagate_mode(p, k, w_modes[k], G, out);
}

}  // namespace invman::kernels
