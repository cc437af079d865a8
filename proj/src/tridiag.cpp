#include "invman/tridiag.hpp"

#include <lapacke.h>

#include "invman/error.hpp"

namespace invman {

TridiagonalLU::TridiagonalLU(const Eigen::VectorXd& sub, const Eigen::VectorXd& diag,
                             const Eigen::VectorXd& super)
    : dl_(sub), d_(diag), du_(super) {
    const int n = static_cast<int>(d_.size());
    if (n < 1 || dl_.size() != n - 1 || du_.size() != n - 1)
        throw Error(ErrorKind::invalid_argument, "tridiagonal band sizes do not match");
    du2_ = Eigen::VectorXd::Zero(std::max(n - 2, 1));
    ipiv_ = Eigen::VectorXi::Zero(n);
    int info = LAPACKE_dgttrf(n, dl_.data(), d_.data(), du_.data(), du2_.data(), ipiv_.data());
    if (info != 0)
        throw ValueError(ErrorKind::numeric_failure, "tridiagonal factorization failed, zero pivot at row " +
                                                         std::to_string(info), info);
}

Eigen::VectorXd TridiagonalLU::solve(const Eigen::VectorXd& rhs) const {
    Eigen::MatrixXd b = rhs;
    solve_in_place(b);
    return b.col(0);
}

void TridiagonalLU::solve_in_place(Eigen::MatrixXd& rhs) const {
    const int n = size();
    if (rhs.rows() != n) throw Error(ErrorKind::invalid_argument, "rhs size mismatch");
    int info = LAPACKE_dgttrs(LAPACK_COL_MAJOR, 'N', n, static_cast<int>(rhs.cols()), dl_.data(), d_.data(),
                              du_.data(), du2_.data(), ipiv_.data(), rhs.data(), n);
    if (info != 0) throw ValueError(ErrorKind::numeric_failure, "tridiagonal solve failed", info);
}

Eigen::VectorXd symmetric_tridiagonal_eigenvalues(const Eigen::VectorXd& diag, const Eigen::VectorXd& off) {
    Eigen::VectorXd d = diag, e = off;
    const int n = static_cast<int>(d.size());
    if (n > 1 && e.size() != n - 1) throw Error(ErrorKind::invalid_argument, "off-diagonal size mismatch");
    int info = LAPACKE_dsterf(n, d.data(), e.data());
    if (info != 0) throw ValueError(ErrorKind::numeric_failure, "dsterf did not converge", info);
    return d;
}

}  // namespace invman
