#include "phaseopt/linear_solve.hpp"

#include "phaseopt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace phaseopt {

ShiftedLaplacianSolver::ShiftedLaplacianSolver(const Grid& grid, double tol)
    : matrix_(-grid.laplacian()), neg_laplacian_(-grid.laplacian()), tol_(tol) {
  matrix_.makeCompressed();
  diagonal_.resize(static_cast<std::size_t>(grid.cells()));
  for (int i = 0; i < grid.cells(); ++i) diagonal_[static_cast<std::size_t>(i)] = &matrix_.coeffRef(i, i);
  lu_.analyzePattern(matrix_);
}

Field ShiftedLaplacianSolver::solve(const Field& shift, const Field& rhs) {
  if (shift.size() != matrix_.rows() || rhs.size() != matrix_.rows()) {
    throw ShapeMismatch("ShiftedLaplacianSolver: operand size does not match grid");
  }
  for (int i = 0; i < shift.size(); ++i) {
    *diagonal_[static_cast<std::size_t>(i)] = neg_laplacian_.coeff(i, i) + shift[i];
  }
  lu_.factorize(matrix_);
  if (lu_.info() != Eigen::Success) throw LinearSolveFailure("sparse LU factorization failed: " + lu_.lastErrorMessage());
  Field x = lu_.solve(rhs);
  if (lu_.info() != Eigen::Success || !x.allFinite()) throw LinearSolveFailure("sparse LU back-substitution failed");

  // The matrix is symmetric, so the max column sum is its infinity norm.
  double matrix_norm = 0.0;
  for (int c = 0; c < matrix_.outerSize(); ++c) {
    double sum = 0.0;
    for (SparseMatrix::InnerIterator it(matrix_, c); it; ++it) sum += std::abs(it.value());
    matrix_norm = std::max(matrix_norm, sum);
  }
  const double scale = matrix_norm * x.lpNorm<Eigen::Infinity>() + rhs.lpNorm<Eigen::Infinity>();
  const double residual = (matrix_ * x - rhs).lpNorm<Eigen::Infinity>();
  if (residual > tol_ * scale) {
    throw LinearSolveFailure("linear residual " + format_number(residual) + " exceeds tolerance " +
                             format_number(tol_ * scale));
  }
  return x;
}

}  // namespace phaseopt
