#pragma once

#include <vector>

#include "invman/nonlinearity.hpp"
#include "invman/operator.hpp"

namespace invman::kernels {

/** serial is the plain-loop reference; parallel uses blocked BLAS-3 products and OpenMP over time samples. */
enum class Backend { serial, parallel };

const char* backend_name(Backend b);

/** Per-mode coefficients of the exact convolution of e^{-r_k t} with a piecewise-linear forcing. */
struct Propagator {
    int modes = 0;
    int samples = 0;
    int origin = 0;
    double dt = 0;
    std::vector<int> block;
    Vec rate;
    /** Forward step: y_{j+1} = decay y_j + fa g_j + fb g_{j+1}. */
    Vec decay, fa, fb;
    /** Backward step for the kernel block: y_j = grow y_{j+1} - (ba g_j + bb g_{j+1}). */
    Vec grow, ba, bb;
};

Propagator make_propagator(const SpectralSplit& split, double lambda, double dt, int samples, int origin);

/** (1 - e^{-z}(1 + z)) / z^2 and (1 - e^{-z}) / z, stable near z = 0. */
double phi_a(double z);
double phi_1(double z);

/** out = scale * Q * C. */
void synthesize(Backend b, const Mat& Q, double scale, const Mat& C, Mat& out);
/** out = scale * Q^T * F. */
void analyze(Backend b, const Mat& Q, double scale, const Mat& F, Mat& out);
/** out(i, j) = f(x_i, U(i, j)). */
void nemitski_batch(Backend b, const Nonlinearity& f, const Vec& x, const Mat& U, Mat& out);
/** Mode-space image of the integral operator; w_modes carries the kernel coordinates at t = 0. */
void propagate(Backend b, const Propagator& p, const Vec& w_modes, const Mat& G, Mat& out);

}  // namespace invman::kernels
