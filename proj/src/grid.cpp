#include "phaseopt/grid.hpp"

#include "phaseopt/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace phaseopt {

namespace {

std::shared_ptr<const SparseMatrix> assemble_laplacian(const Grid& g) {
  const int nx = g.n(0);
  const int ny = g.n(1);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(g.cells()) * 5);

  const double cx = 1.0 / (g.spacing(0) * g.spacing(0));
  const double cy = g.dim() == 2 ? 1.0 / (g.spacing(1) * g.spacing(1)) : 0.0;

  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const int row = g.index(i, j);
      double diag = 0.0;
      // Missing neighbours are mirrored: the boundary face carries no flux.
      if (i > 0) {
        triplets.emplace_back(row, g.index(i - 1, j), cx);
        diag -= cx;
      }
      if (i + 1 < nx) {
        triplets.emplace_back(row, g.index(i + 1, j), cx);
        diag -= cx;
      }
      if (g.dim() == 2) {
        if (j > 0) {
          triplets.emplace_back(row, g.index(i, j - 1), cy);
          diag -= cy;
        }
        if (j + 1 < ny) {
          triplets.emplace_back(row, g.index(i, j + 1), cy);
          diag -= cy;
        }
      }
      triplets.emplace_back(row, row, diag);
    }
  }
  auto m = std::make_shared<SparseMatrix>(g.cells(), g.cells());
  m->setFromTriplets(triplets.begin(), triplets.end());
  m->makeCompressed();
  return m;
}

}  // namespace

Grid make_grid(int dim, const std::vector<int>& n, const std::vector<double>& length) {
  if (dim != 1 && dim != 2) {
    throw UnsupportedDimension("dimension " + std::to_string(dim) + " is not supported (dim must be 1 or 2)");
  }
  if (static_cast<int>(n.size()) != dim || static_cast<int>(length.size()) != dim) {
    throw InvalidArgument("make_grid: need one cell count and one length per axis");
  }
  Grid g;
  g.dim_ = dim;
  for (int a = 0; a < dim; ++a) {
    if (n[a] < 1) throw InvalidArgument("make_grid: cell count must be positive on axis " + std::to_string(a));
    if (!(length[a] > 0.0) || !std::isfinite(length[a])) {
      throw InvalidArgument("make_grid: length must be positive on axis " + std::to_string(a));
    }
    g.n_[a] = n[a];
    g.length_[a] = length[a];
    g.h_[a] = length[a] / n[a];
  }
  g.laplacian_ = assemble_laplacian(g);
  return g;
}

std::array<double, 2> Grid::center(int cell) const {
  const int i = cell / n_[1];
  const int j = cell % n_[1];
  return {(i + 0.5) * h_[0], dim_ == 2 ? (j + 0.5) * h_[1] : 0.0};
}

TimeGrid::TimeGrid(double final_time, int steps) : final_time_(final_time), steps_(steps) {
  if (!(final_time > 0.0) || !std::isfinite(final_time)) throw InvalidArgument("final time T must be positive");
  if (steps < 1) throw InvalidArgument("number of time steps N must be at least 1");
}

Trajectory::Trajectory(int levels, int cells, double value)
    : steps_(static_cast<std::size_t>(levels), Field::Constant(cells, value)) {}

Trajectory::Trajectory(int levels, const Field& value) : steps_(static_cast<std::size_t>(levels), value) {}

Trajectory& Trajectory::operator+=(const Trajectory& other) {
  require_same_shape(*this, other, "Trajectory +=");
  for (std::size_t k = 0; k < steps_.size(); ++k) steps_[k] += other.steps_[k];
  return *this;
}

Trajectory& Trajectory::operator-=(const Trajectory& other) {
  require_same_shape(*this, other, "Trajectory -=");
  for (std::size_t k = 0; k < steps_.size(); ++k) steps_[k] -= other.steps_[k];
  return *this;
}

Trajectory& Trajectory::operator*=(double s) {
  for (auto& f : steps_) f *= s;
  return *this;
}

double Trajectory::min() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& f : steps_) m = std::min(m, f.minCoeff());
  return m;
}

double Trajectory::max() const {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& f : steps_) m = std::max(m, f.maxCoeff());
  return m;
}

Trajectory operator+(Trajectory a, const Trajectory& b) { return a += b; }
Trajectory operator-(Trajectory a, const Trajectory& b) { return a -= b; }
Trajectory operator*(double s, Trajectory a) { return a *= s; }

void require_same_shape(const Trajectory& a, const Trajectory& b, const char* what) {
  if (a.levels() != b.levels() || a.cells() != b.cells()) {
    throw ShapeMismatch(std::string(what) + ": trajectories differ in shape (" + std::to_string(a.levels()) + "x" +
                        std::to_string(a.cells()) + " vs " + std::to_string(b.levels()) + "x" +
                        std::to_string(b.cells()) + ")");
  }
}

void require_on_grid(const Grid& grid, const Field& v, const char* what) {
  if (v.size() != grid.cells()) {
    throw ShapeMismatch(std::string(what) + ": field has " + std::to_string(v.size()) + " entries, grid has " +
                        std::to_string(grid.cells()) + " cells");
  }
}

void require_on_grids(const Grid& grid, const TimeGrid& tgrid, const Trajectory& v, const char* what) {
  if (v.levels() != tgrid.levels() || v.cells() != grid.cells()) {
    throw ShapeMismatch(std::string(what) + ": trajectory is " + std::to_string(v.levels()) + "x" +
                        std::to_string(v.cells()) + ", expected " + std::to_string(tgrid.levels()) + "x" +
                        std::to_string(grid.cells()));
  }
}

Field laplacian_apply(const Grid& grid, const Field& v) {
  require_on_grid(grid, v, "laplacian_apply");
  return grid.laplacian() * v;
}

std::vector<double> time_weights(const TimeGrid& tgrid, TimeRule rule) {
  const int n = tgrid.steps();
  std::vector<double> w(static_cast<std::size_t>(n) + 1, tgrid.tau());
  switch (rule) {
    case TimeRule::Trapezoid:
      w.front() *= 0.5;
      w.back() *= 0.5;
      break;
    case TimeRule::Left:
      w.back() = 0.0;
      break;
    case TimeRule::Right:
      w.front() = 0.0;
      break;
  }
  return w;
}

double gradient_pairing(const Grid& grid, const Field& a, const Field& b) {
  require_on_grid(grid, a, "gradient_pairing");
  require_on_grid(grid, b, "gradient_pairing");
  const int nx = grid.n(0);
  const int ny = grid.n(1);
  double sx = 0.0;
  double sy = 0.0;
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) {
      const int c = grid.index(i, j);
      if (i + 1 < nx) {
        const int e = grid.index(i + 1, j);
        sx += (a[e] - a[c]) * (b[e] - b[c]);
      }
      if (grid.dim() == 2 && j + 1 < ny) {
        const int e = grid.index(i, j + 1);
        sy += (a[e] - a[c]) * (b[e] - b[c]);
      }
    }
  }
  const double hx = grid.spacing(0);
  const double hy = grid.spacing(1);
  return grid.weight() * (sx / (hx * hx) + (grid.dim() == 2 ? sy / (hy * hy) : 0.0));
}

double inner_product(const Grid& grid, InnerKind kind, const Field& a, const Field& b) {
  require_on_grid(grid, a, "inner_product");
  require_on_grid(grid, b, "inner_product");
  double s = grid.weight() * a.dot(b);
  if (kind == InnerKind::H1) s += gradient_pairing(grid, a, b);
  return s;
}

double norm(const Grid& grid, InnerKind kind, const Field& a) {
  return std::sqrt(std::max(0.0, inner_product(grid, kind, a, a)));
}

double inner_product(const Grid& grid, const TimeGrid& tgrid, const Trajectory& a, const Trajectory& b, TimeRule rule,
                     InnerKind space) {
  require_on_grids(grid, tgrid, a, "inner_product");
  require_on_grids(grid, tgrid, b, "inner_product");
  const auto w = time_weights(tgrid, rule);
  double s = 0.0;
  for (int k = 0; k < a.levels(); ++k) {
    if (w[static_cast<std::size_t>(k)] != 0.0) s += w[static_cast<std::size_t>(k)] * inner_product(grid, space, a[k], b[k]);
  }
  return s;
}

double norm(const Grid& grid, const TimeGrid& tgrid, const Trajectory& a, TimeRule rule, InnerKind space) {
  return std::sqrt(std::max(0.0, inner_product(grid, tgrid, a, a, rule, space)));
}

}  // namespace phaseopt
