#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "invman/pde_oracle.hpp"
#include "invman/reduced.hpp"

namespace invman {

/** Reduced fields for every lambda, built on one shared context. */
class FieldFamily {
  public:
    FieldFamily(std::shared_ptr<const ManifoldContext> ctx, std::shared_ptr<const DiscreteOperator> op);

    std::shared_ptr<const ReducedField> at(double lambda) const;
    const ManifoldContext& context() const { return *ctx_; }
    const DiscreteOperator& op() const { return *op_; }
    const SpectralSplit& split() const { return ctx_->split; }
    double lambda_star() const { return ctx_->split.lambda_star; }

  private:
    std::shared_ptr<const ManifoldContext> ctx_;
    std::shared_ptr<const DiscreteOperator> op_;
    mutable std::mutex mutex_;
    mutable std::map<double, std::shared_ptr<const ReducedField>> fields_;
};

struct BranchOptions {
    /** Residual tolerance for reduced equilibria. */
    double field_tol = 1e-10;
    /** Full stationary residual accepted for a lifted point. */
    double branch_tol = 1e-8;
    /** Tolerance handed to elliptic_newton when refining lifts. */
    double refine_tol = 1e-10;
    bool refine = true;
    int max_iter = 40;
};

struct BranchPoint {
    double lambda = 0;
    Vec w;
    Vec u;
    double l2_norm = 0;
    double energy_norm = 0;
    int morse_index = 0;
    /** Full stationary residual of the lift w + xi(w). */
    double residual = 0;
    /** Residual after elliptic Newton refinement, and the L2 distance it moved the lift. */
    double refined_residual = 0;
    double refine_shift = 0;
    bool refined = false;
};

BranchPoint make_branch_point(const ReducedField& field, const DiscreteOperator& op, const Equilibrium& e,
                              const BranchOptions& opt = {});

enum class BranchLabel { plus_infinity, minus_infinity, bounded };
const char* label_name(BranchLabel l);

struct BlowupFit {
    double slope = 0;
    double intercept = 0;
    double r2 = 0;
    /** e^intercept, the constant in |u| ~ C / (lambda* - lambda)^slope. */
    double C = 0;
    int points = 0;
};

struct BifurcationBranch {
    BranchLabel label = BranchLabel::bounded;
    std::vector<BranchPoint> points;
    std::optional<BlowupFit> fit;
    /** Why continuation stopped early, empty if the grid was covered. */
    std::string termination;
};

BifurcationBranch continue_branch(const FieldFamily& family, const std::vector<double>& grid, const Vec& seed,
                                  BranchLabel label, const BranchOptions& opt = {});

/** Least squares of log |u| against log(1 / (lambda* - lambda)). */
BlowupFit detect_blowup(const BifurcationBranch& branch, double lambda_star);
BlowupFit fit_power_law(const std::vector<double>& eta, const std::vector<double>& norms);

struct ThreeSolutions {
    BranchPoint e1, e2, e3;
    AnnulusBounds bounds;
    double bounded_cap = 0;
    double min_separation = 0;
};

/** Radius bounding the bounded branch: R0 plus the reach of xi. */
double bounded_cap(const AnnulusConstants& k);

ThreeSolutions three_solutions(const FieldFamily& family, const AnnulusConstants& k, double lambda,
                               const BranchOptions& opt = {});

/** Bounded equilibrium closest to 0, or nothing. */
std::optional<Equilibrium> bounded_equilibrium(const ReducedField& field, double tol);

/** Morse indices of the bounded equilibrium left and right of lambda*. */
std::pair<int, int> index_signature(const FieldFamily& family, double lambda_left, double lambda_right,
                                    double tol = 1e-10);

void write_diagram_csv(const std::vector<BifurcationBranch>& branches, const std::string& path);

}  // namespace invman
