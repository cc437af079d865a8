#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "invman/operator.hpp"

namespace invman {

struct Nonlinearity {
    std::string name;
    std::function<double(double, double)> eval;
    /** Pointwise bound g(x) >= |f(x, s)|. */
    std::function<double(double)> bound;
    /** Optional partial derivative in s; finite differences are used when empty. */
    std::function<double(double, double)> ds;
    /** Optional primitive F(x, s) = int_0^s f(x, r) dr; quadrature is used when empty. */
    std::function<double(double, double)> primitive;
    double f_plus = 0;
    double f_minus = 0;
    bool odd = false;
    std::map<std::string, double> params;

    double operator()(double x, double s) const { return eval(x, s); }
    double derivative(double x, double s) const;
    double primitive_at(double x, double s) const;
    bool is_zero() const { return name == "zero"; }
};

Nonlinearity zero_nonlinearity();
/** f(x, s) = c. */
Nonlinearity constant_nonlinearity(double c);
/** f(x, s) = c sech(x), no dependence on s. */
Nonlinearity sech_profile(double c);
/** f(x, s) = c tanh(s) sech(x), declared levels f_plus = f_minus = c unless given. */
Nonlinearity tanh_sech(double c, double f_plus = -1, double f_minus = -1);
/** f(x, s) = c tanh(s). */
Nonlinearity tanh_plain(double c);
/** f(x, s) = c clamp(s, -cap, cap). */
Nonlinearity clamped_linear(double c, double cap);
/** Bilinear interpolation on a rectangular (x, s) table; values are row-major, x outer.
 * Outside the table the nearest edge value is used. */
Nonlinearity tabulated_nonlinearity(std::vector<double> xs, std::vector<double> ss, std::vector<double> values,
                                    double f_plus, double f_minus);
/** Rows x,s,f covering a full rectangular grid. */
Nonlinearity load_nonlinearity_csv(const std::string& path, double f_plus, double f_minus);
/** -f with the asymptotic levels swapped, for the dual sign hypothesis. */
Nonlinearity negated(const Nonlinearity& f);

/** Pointwise image f(x_i, u_i). */
Vec nemitski(const Nonlinearity& f, const Vec& x, const Vec& u);
Vec bound_values(const Nonlinearity& f, const Vec& x);
/** Discrete L2 norm of g. */
double bound_l2(const Nonlinearity& f, const Vec& x, double h);

struct LipschitzEstimate {
    /** Y -> X Lipschitz constant of the Nemitski map, with the 1.05 safety factor. */
    double L_f = 0;
    /** Sampled pointwise slopes l(x_i). */
    Vec pointwise;
};

LipschitzEstimate lipschitz_details(const Nonlinearity& f, const DiscreteOperator& op, int samples,
                                    std::uint64_t seed = 3);
inline double estimate_lipschitz(const Nonlinearity& f, const DiscreteOperator& op, int samples,
                                 std::uint64_t seed = 3) {
    return lipschitz_details(f, op, samples, seed).L_f;
}

double compute_F_mu(double M, double beta, double mu, double alpha);

struct SmallnessGate {
    double F_mu = 0;
    double L_f = 0;
    double product = 0;
    bool passes() const { return product < 1; }
};

SmallnessGate check_gate(double F_mu, double L_f);

/** int f(x, v + s w) w - 1/2 int (f_plus w_+ + f_minus w_-), by trapezoid quadrature.
 * w is a physical state that must lie in range(P_2). */
double landesman_lazer_margin(const Nonlinearity& f, const SpectralSplit& split, const Vec& v, const Vec& w,
                              double s);

struct ThresholdSearch {
    bool found = false;
    double s0 = 0;
    /** Smallest margin seen at grid points s >= s0. */
    double worst_margin = 0;
    std::vector<double> s_grid;
};

/** Smallest s0 on a geometric grid such that margin >= -eps for every sampled (v, w) with
 * |v| <= R, |w| <= 1 and every grid s >= s0. */
ThresholdSearch find_margin_threshold(const Nonlinearity& f, const SpectralSplit& split, double R, double eps,
                                      int pairs, std::uint64_t seed, double s_min = 1e-2, double s_max = 1e6,
                                      int grid = 41);

/** Random states used by the samplers and the tests. */
Vec random_smooth_state(const SpectralSplit& split, std::mt19937_64& rng, double l2_norm, int modes = 24);
Vec random_rough_state(const SpectralSplit& split, std::mt19937_64& rng, double l2_norm);
/** Uniform point on the unit sphere of R^m. */
Vec random_unit(int m, std::mt19937_64& rng);

}  // namespace invman
