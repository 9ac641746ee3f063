#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <memory>
#include <vector>

namespace phaseopt {

/// Nodal scalar field, one value per grid cell.
using Field = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

/**
 * Cell-centered uniform mesh on a box [0, L_x] (x [0, L_y]).
 *
 * Cells are stored lexicographically in (x, y) with x slowest:
 * index(i, j) = i * n_y + j. The zero-flux Laplacian is assembled once
 * and shared between copies.
 */
class Grid {
 public:
  int dim() const noexcept { return dim_; }
  int n(int axis) const { return n_.at(axis); }
  double length(int axis) const { return length_.at(axis); }
  double spacing(int axis) const { return h_.at(axis); }
  int cells() const noexcept { return n_[0] * n_[1]; }

  /// Quadrature weight of every cell (product of spacings).
  double weight() const noexcept { return h_[0] * h_[1]; }
  double measure() const noexcept { return length_[0] * length_[1]; }

  int index(int i, int j = 0) const noexcept { return i * n_[1] + j; }
  std::array<double, 2> center(int cell) const;

  const SparseMatrix& laplacian() const noexcept { return *laplacian_; }

  bool same_as(const Grid& other) const noexcept {
    return dim_ == other.dim_ && n_ == other.n_ && length_ == other.length_;
  }

 private:
  friend Grid make_grid(int dim, const std::vector<int>& n, const std::vector<double>& length);

  int dim_ = 1;
  std::array<int, 2> n_{1, 1};
  std::array<double, 2> length_{1.0, 1.0};
  std::array<double, 2> h_{1.0, 1.0};
  std::shared_ptr<const SparseMatrix> laplacian_;
};

/// Throws UnsupportedDimension for dim outside {1,2}, InvalidArgument for bad extents.
Grid make_grid(int dim, const std::vector<int>& n, const std::vector<double>& length);

/// Uniform partition of [0, T] into N steps; time(k) = k*T/N so time(N) == T.
class TimeGrid {
 public:
  TimeGrid() = default;
  TimeGrid(double final_time, int steps);

  double final_time() const noexcept { return final_time_; }
  int steps() const noexcept { return steps_; }
  double tau() const noexcept { return final_time_ / steps_; }
  double time(int level) const noexcept { return final_time_ * level / steps_; }
  int levels() const noexcept { return steps_ + 1; }

 private:
  double final_time_ = 1.0;
  int steps_ = 1;
};

/// Sequence of N+1 fields over time levels 0..N.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(int levels, int cells, double value = 0.0);
  Trajectory(int levels, const Field& value);

  int levels() const noexcept { return static_cast<int>(steps_.size()); }
  int cells() const noexcept { return steps_.empty() ? 0 : static_cast<int>(steps_.front().size()); }

  Field& operator[](int k) { return steps_[static_cast<std::size_t>(k)]; }
  const Field& operator[](int k) const { return steps_[static_cast<std::size_t>(k)]; }

  auto begin() noexcept { return steps_.begin(); }
  auto end() noexcept { return steps_.end(); }
  auto begin() const noexcept { return steps_.begin(); }
  auto end() const noexcept { return steps_.end(); }

  Trajectory& operator+=(const Trajectory& other);
  Trajectory& operator-=(const Trajectory& other);
  Trajectory& operator*=(double s);

  double min() const;
  double max() const;

 private:
  std::vector<Field> steps_;
};

Trajectory operator+(Trajectory a, const Trajectory& b);
Trajectory operator-(Trajectory a, const Trajectory& b);
Trajectory operator*(double s, Trajectory a);

/// Throws ShapeMismatch unless the shapes agree.
void require_same_shape(const Trajectory& a, const Trajectory& b, const char* what);
void require_on_grid(const Grid& grid, const Field& v, const char* what);
void require_on_grids(const Grid& grid, const TimeGrid& tgrid, const Trajectory& v, const char* what);

/// Discrete zero-flux Laplacian.
Field laplacian_apply(const Grid& grid, const Field& v);

enum class InnerKind { L2, H1 };

/// Quadrature over time levels. Trapezoid weighs the end levels by tau/2;
/// Left drops level N, Right drops level 0.
enum class TimeRule { Trapezoid, Left, Right };

std::vector<double> time_weights(const TimeGrid& tgrid, TimeRule rule);

/// Face-difference pairing sum_faces w * (a_+ - a_-)(b_+ - b_-) / h^2.
double gradient_pairing(const Grid& grid, const Field& a, const Field& b);

double inner_product(const Grid& grid, InnerKind kind, const Field& a, const Field& b);
double norm(const Grid& grid, InnerKind kind, const Field& a);

/// L2-in-time pairing of two trajectories with a spatial kind per level.
double inner_product(const Grid& grid, const TimeGrid& tgrid, const Trajectory& a, const Trajectory& b,
                     TimeRule rule = TimeRule::Trapezoid, InnerKind space = InnerKind::L2);
double norm(const Grid& grid, const TimeGrid& tgrid, const Trajectory& a, TimeRule rule = TimeRule::Trapezoid,
            InnerKind space = InnerKind::L2);

}  // namespace phaseopt
