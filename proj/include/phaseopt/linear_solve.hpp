#pragma once

#include "phaseopt/grid.hpp"

#include <Eigen/SparseLU>

#include <vector>

namespace phaseopt {

/**
 * Direct solver for (diag(shift) - L) x = rhs on a fixed grid.
 *
 * The sparsity pattern is analysed once; each solve refactorizes with the
 * new diagonal. Not thread-safe: give each concurrent solve its own instance.
 */
class ShiftedLaplacianSolver {
 public:
  explicit ShiftedLaplacianSolver(const Grid& grid, double tol = 1e-12);

  Field solve(const Field& shift, const Field& rhs);
  Field solve(double shift, const Field& rhs) { return solve(Field::Constant(rhs.size(), shift), rhs); }

 private:
  SparseMatrix matrix_;
  SparseMatrix neg_laplacian_;
  std::vector<double*> diagonal_;
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
  double tol_;
};

}  // namespace phaseopt
