#include "invman/semigroup.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "invman/error.hpp"

namespace invman {

static void check_time(int block, double t) {
    if (block < 1 || block > 3) throw Error(ErrorKind::invalid_argument, "block index must be 1, 2 or 3");
    if (block == 1 && t > 0) throw Error(ErrorKind::invalid_argument, "the block-1 semigroup runs backward only (t <= 0)");
    if (block == 3 && t < 0) throw Error(ErrorKind::invalid_argument, "the block-3 semigroup runs forward only (t >= 0)");
}

Vec semigroup_action_modes(const SemigroupAction& act, double t, const Vec& c) {
    check_time(act.block, t);
    const SpectralSplit& s = *act.split;
    Vec out = Vec::Zero(c.size());
    for (int k = 0; k < c.size(); ++k)
        if (s.block(k) == act.block) out[k] = std::exp(-(s.eigenvalue(k) - act.lambda) * t) * c[k];
    return out;
}

Vec semigroup_action(const SemigroupAction& act, double t, const Vec& u) {
    const SpectralSplit& s = *act.split;
    return s.from_modes(semigroup_action_modes(act, t, s.to_modes(u)));
}

Vec smoothing_action(const SemigroupAction& act, double t, const Vec& u) {
    if (act.block != 3 || !(t > 0))
        throw Error(ErrorKind::invalid_argument, "the smoothing form exists for block 3 and t > 0 only");
    const SpectralSplit& s = *act.split;
    Vec c = semigroup_action_modes(act, t, s.to_modes(u));
    return s.from_modes(s.fractional_weights().cwiseProduct(c));
}

double fractional_norm(const FractionalScale& scale, const SpectralSplit& split, const Vec& u) {
    if (scale.alpha == 0) return split.spectrum->coefficients(u).norm();
    Vec w = split.fractional_weights(scale.shift, scale.alpha);
    return weighted_mode_norm(w, split.to_modes(u));
}

const char* decay_bound_name(int bound) {
    static const char* names[] = {"block1_alpha", "block1_plain", "block2_alpha",
                                  "block2_plain", "block3_alpha", "block3_singular"};
    return bound >= 0 && bound < 6 ? names[bound] : "unknown";
}

DecayReport sample_decay_bounds(const SpectralSplit& split, int sample_count, std::uint64_t seed, double check_M,
                                bool keep_samples) {
    if (sample_count < 1) throw Error(ErrorKind::invalid_argument, "need at least one sample");
    const int n = split.size();
    const double beta = split.beta;
    const double horizon = 40.0 / beta;
    const Vec& lam = split.eigenvalues();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<int> blocks;
    if (split.dim1 > 0) blocks.push_back(1);
    blocks.push_back(2);
    blocks.push_back(3);

    DecayReport rep;
    Vec c(n), e(n);
    for (int s = 0; s < sample_count; ++s) {
        int block = blocks[std::min<std::size_t>(blocks.size() - 1, std::size_t(unit(rng) * blocks.size()))];
        double lambda = split.lambda_star + (unit(rng) - 0.5) * 0.5 * beta * 0.999;
        double alpha = unit(rng) * split.alpha;
        double mag = std::exp(std::log(1e-3) + unit(rng) * (std::log(horizon) - std::log(1e-3)));
        double t = block == 1 ? -mag : (block == 3 ? mag : (unit(rng) < 0.5 ? -mag : mag));
        if (s == 0) {
            block = 2;
            t = 0;
            lambda = split.lambda_star;
        }

        // random state in the block, sometimes a single eigenmode
        c.setZero();
        int lo = block == 1 ? 0 : (block == 2 ? split.dim1 : split.dim1 + split.m);
        int hi = block == 1 ? split.dim1 : (block == 2 ? split.dim1 + split.m : n);
        if (unit(rng) < 0.3) {
            int k = lo + std::min(hi - lo - 1, int(std::pow(unit(rng), 3) * (hi - lo)));
            c[k] = 1;
        } else {
            double p = 2 * unit(rng);
            for (int k = lo; k < hi; ++k) c[k] = normal(rng) * std::pow(lam[k] + split.shift, -p);
        }
        for (int k = 0; k < n; ++k) e[k] = k >= lo && k < hi ? std::exp(-(lam[k] - lambda) * t) : 0.0;

        Vec wa = split.fractional_weights(split.shift, alpha);
        Vec ec = e.cwiseProduct(c);
        double plain = ec.norm() / c.norm();
        double weighted = weighted_mode_norm(wa, ec) / weighted_mode_norm(wa, c);

        auto record = [&](int bound, double lhs, double rhs) {
            double r = lhs / rhs;
            rep.max_ratio = std::max(rep.max_ratio, r);
            if (check_M > 0 && r > check_M) ++rep.violations;
            if (keep_samples) rep.samples.push_back({bound, block, t, lambda, alpha, r});
        };
        if (block == 1) {
            double rhs = std::exp(0.75 * beta * t);
            record(0, weighted, rhs);
            record(1, plain, rhs);
        } else if (block == 2) {
            double rhs = std::exp(0.25 * beta * std::abs(t));
            record(2, weighted, rhs);
            record(3, plain, rhs);
        } else {
            record(4, weighted, std::exp(-0.75 * beta * t));
            record(5, plain, std::pow(t, -alpha) * std::exp(-0.75 * beta * t));
            double smooth = weighted_mode_norm(wa, ec) / c.norm();
            rep.smoothing_constant =
                std::max(rep.smoothing_constant, smooth / (std::pow(t, -alpha) * std::exp(-0.75 * beta * t)));
        }
    }
    rep.M = 1.05 * std::max(1.0, rep.max_ratio);
    return rep;
}

double estimate_decay_constant(const SpectralSplit& split, int sample_count, std::uint64_t seed,
                               const std::string& csv_path) {
    DecayReport rep = sample_decay_bounds(split, sample_count, seed, 0, !csv_path.empty());
    if (!csv_path.empty()) write_decay_csv(rep, csv_path);
    return rep.M;
}

int count_decay_violations(const SpectralSplit& split, double M, int sample_count, std::uint64_t seed) {
    return sample_decay_bounds(split, sample_count, seed, M).violations;
}

void write_decay_csv(const DecayReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::io, "cannot write " + path);
    out.precision(12);
    out << "bound,block,t,lambda,alpha,ratio\n";
    for (const auto& s : report.samples)
        out << decay_bound_name(s.bound) << ',' << s.block << ',' << s.t << ',' << s.lambda << ',' << s.alpha << ','
            << s.ratio << '\n';
}

}  // namespace invman
