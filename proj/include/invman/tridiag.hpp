#pragma once

#include <Eigen/Dense>

namespace invman {

/** LU factorization of a tridiagonal matrix, kept for repeated solves. */
class TridiagonalLU {
  public:
    TridiagonalLU() = default;
    /** sub and super have size n-1. Throws numeric-failure on an exactly singular pivot. */
    TridiagonalLU(const Eigen::VectorXd& sub, const Eigen::VectorXd& diag, const Eigen::VectorXd& super);
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const;
    void solve_in_place(Eigen::MatrixXd& rhs) const;
    int size() const { return static_cast<int>(d_.size()); }

  private:
    Eigen::VectorXd dl_, d_, du_, du2_;
    Eigen::VectorXi ipiv_;
};

/** Eigenvalues of the symmetric tridiagonal matrix (diag, off), ascending. */
Eigen::VectorXd symmetric_tridiagonal_eigenvalues(const Eigen::VectorXd& diag, const Eigen::VectorXd& off);

}  // namespace invman
