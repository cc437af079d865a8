#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace invman {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/** Uniform grid on [-L, L]. Only the n-2 interior nodes carry unknowns,
 * the two end nodes hold the homogeneous Dirichlet values. */
struct GridDomain {
    double half_width = 0;
    int nodes = 0;
    double spacing = 0;

    double node(int i) const { return -half_width + i * spacing; }
    int unknowns() const { return nodes - 2; }
    /** Coordinates of the interior nodes. */
    Vec interior() const;
};

GridDomain build_domain(double L, int n);

struct Potential {
    std::string name;
    std::function<double(double)> value;
    /** Limit of V at the ends of the box. */
    double v_inf = 0;
    double tail_tol = 1e-6;
};

/** V(x) = v_inf - depth * sech^2(x / width). */
Potential poschl_teller(double v_inf = 3.0, double depth = 2.0, double width = 1.0);
Potential constant_potential(double value);
/** Two Poschl-Teller wells centred at +-d. */
Potential double_well(double v_inf, double depth, double d);
/** Piecewise-linear interpolation of (x, V) samples, sorted by x. */
Potential tabulated_potential(std::vector<double> x, std::vector<double> v);
Potential load_potential_csv(const std::string& path);

class DiscreteOperator {
  public:
    GridDomain domain;
    Potential potential;
    /** Diagonal of A = 2/h^2 + V(x_i); the off-diagonal is the constant -1/h^2. */
    Vec diag;
    double off = 0;
    double a1 = 0, a2 = 0;

    int size() const { return static_cast<int>(diag.size()); }
    Vec apply(const Vec& u) const;
    /** Discrete L2 inner product h * sum(u v). */
    double inner(const Vec& u, const Vec& v) const { return domain.spacing * u.dot(v); }
    double norm(const Vec& u) const { return std::sqrt(inner(u, u)); }
    Mat dense() const;
};

DiscreteOperator assemble_operator(const GridDomain& domain, const Potential& potential);

struct SpectrumData {
    Vec x;
    double h = 0;
    double v_inf = 0;
    /** The lowest k eigenvalues, ascending. */
    Vec eigenvalues;
    /** Euclidean-orthonormal eigenvectors as columns; eigenfunctions are columns / sqrt(h). */
    Mat vectors;
    /** Number of eigenvalues strictly below v_inf. */
    int discrete_count = 0;
    /** Clustered eigenvalues below v_inf and their multiplicities. */
    std::vector<double> point_spectrum;
    std::vector<int> multiplicity;

    int size() const { return static_cast<int>(x.size()); }
    int count() const { return static_cast<int>(eigenvalues.size()); }
    bool complete() const { return count() == size(); }
    Vec eigenfunction(int k) const { return vectors.col(k) / std::sqrt(h); }
    /** Coefficients of u in the L2-orthonormal eigenfunction basis. */
    Vec coefficients(const Vec& u) const { return std::sqrt(h) * (vectors.transpose() * u); }
    Vec synthesize(const Vec& c) const { return (vectors * c) / std::sqrt(h); }
};

SpectrumData compute_spectrum(const DiscreteOperator& op, int k, double cluster_tol = 1e-8);
inline SpectrumData compute_spectrum(const DiscreteOperator& op) { return compute_spectrum(op, op.size()); }

struct SplitOptions {
    /** How far the requested lambda* may sit from a computed eigenvalue. */
    double match_tol = 1e-2;
    /** Relative tolerance for grouping eigenvalues into one multiplicity cluster. */
    double cluster_tol = 1e-8;
    double beta_fraction = 0.8;
    /** Shift a of Lambda = A + a; defaults to 1 + |lambda_min|. */
    std::optional<double> shift;
    int decay_samples = 4000;
    std::uint64_t seed = 20240611;
};

class SpectralSplit {
  public:
    std::shared_ptr<const SpectrumData> spectrum;
    double lambda_star = 0;
    int m = 0;
    int dim1 = 0;
    double beta = 0;
    double beta1 = -std::numeric_limits<double>::infinity();
    double beta2 = 0;
    double M = 1;
    double alpha = 0.5;
    double shift = 1;

    int size() const { return spectrum->size(); }
    /** Block (1, 2 or 3) that eigenmode k belongs to. */
    int block(int k) const { return k < dim1 ? 1 : (k < dim1 + m ? 2 : 3); }
    double eigenvalue(int k) const { return spectrum->eigenvalues[k]; }
    const Vec& eigenvalues() const { return spectrum->eigenvalues; }

    Vec to_modes(const Vec& u) const { return spectrum->coefficients(u); }
    Vec from_modes(const Vec& c) const { return spectrum->synthesize(c); }
    /** Orthogonal projection P_i on a physical state. */
    Vec project(int i, const Vec& u) const;
    /** Zero every mode outside block i. */
    Vec mask_modes(int i, const Vec& c) const;
    /** Kernel coordinates w in R^m of P_2 u. */
    Vec kernel_coords(const Vec& u) const { return to_modes(u).segment(dim1, m); }
    /** Physical state with kernel coordinates w and nothing else. */
    Vec from_kernel(const Vec& w) const;
    Vec kernel_modes(const Vec& w) const;
    /** (lambda_k + a)^alpha for every mode. */
    Vec fractional_weights(double a, double alpha) const;
    Vec fractional_weights() const { return fractional_weights(shift, alpha); }
    /** The admissible parameter window J = (lambda* - beta/4, lambda* + beta/4). */
    bool in_window(double lambda) const { return std::abs(lambda - lambda_star) < beta / 4; }
};

SpectralSplit spectral_split(std::shared_ptr<const SpectrumData> spec, double lambda_star, double alpha,
                             const SplitOptions& opt = {});

/** Eigenvalues to path, the first few eigenfunctions to <stem>_modes.csv. */
void write_spectrum_csv(const SpectrumData& spec, const std::string& path, int modes = 4);
void write_operator_csv(const DiscreteOperator& op, const std::string& path);

}  // namespace invman
