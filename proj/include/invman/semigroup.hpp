#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "invman/operator.hpp"

namespace invman {

/** e^{-A^i t} for A_lambda = A - lambda restricted to block i. */
struct SemigroupAction {
    const SpectralSplit* split = nullptr;
    double lambda = 0;
    int block = 2;
};

/** Works on physical states. Block 1 needs t <= 0, block 3 needs t >= 0. */
Vec semigroup_action(const SemigroupAction& act, double t, const Vec& u);
/** Same, on eigen-coefficients. */
Vec semigroup_action_modes(const SemigroupAction& act, double t, const Vec& c);
/** Lambda^alpha e^{-A^3 t} P_3 u, defined for t > 0 only. */
Vec smoothing_action(const SemigroupAction& act, double t, const Vec& u);

struct FractionalScale {
    double shift = 1;
    double alpha = 0.5;
};

double fractional_norm(const FractionalScale& scale, const SpectralSplit& split, const Vec& u);
/** sqrt(sum (weight_k c_k)^2) for precomputed weights (lambda_k + a)^alpha. */
inline double weighted_mode_norm(const Vec& weights, const Vec& c) { return weights.cwiseProduct(c).norm(); }

/** One sampled ratio ||bound lhs|| / rhs for one of the six estimates. */
struct DecaySample {
    int bound = 0;
    int block = 0;
    double t = 0;
    double lambda = 0;
    double alpha = 0;
    double ratio = 0;
};

struct DecayReport {
    double max_ratio = 0;
    double M = 1.05;
    /** Largest sampled constant of the X -> X^alpha form of the smoothing bound (diagnostic only). */
    double smoothing_constant = 0;
    int violations = 0;
    std::vector<DecaySample> samples;
};

const char* decay_bound_name(int bound);

/** Samples (t, u, alpha, lambda) and the six estimates. If check_M is finite, counts
 * samples whose ratio exceeds it. */
DecayReport sample_decay_bounds(const SpectralSplit& split, int sample_count, std::uint64_t seed,
                                double check_M = 0, bool keep_samples = false);

/** Smallest M >= 1 covering every sampled bound, times 1.05. */
double estimate_decay_constant(const SpectralSplit& split, int sample_count, std::uint64_t seed = 1,
                               const std::string& csv_path = "");

int count_decay_violations(const SpectralSplit& split, double M, int sample_count, std::uint64_t seed);

void write_decay_csv(const DecayReport& report, const std::string& path);

}  // namespace invman
