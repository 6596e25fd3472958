#include "bsvie/fields.hpp"

#include "bsvie/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>
#include <string>

namespace bsvie {

CellPoly CellPoly::constant(double value, Index anchor) {
  CellPoly c;
  c.anchor = anchor;
  c.coeffs = Eigen::VectorXd::Constant(1, value);
  return c;
}

Eigen::ArrayXd CellPoly::evaluate(const Eigen::Ref<const Eigen::VectorXd>& state) const {
  const Index k = coeffs.size();
  if (k == 1) return Eigen::ArrayXd::Constant(state.size(), coeffs[0]);
  const Eigen::ArrayXd x = (state.array() - center) / scale;
  Eigen::ArrayXd acc = Eigen::ArrayXd::Constant(state.size(), coeffs[k - 1]);
  for (Index d = k - 2; d >= 0; --d) acc = acc * x + coeffs[d];
  return acc;
}

double CellPoly::evaluate(double state) const {
  const Index k = coeffs.size();
  if (k == 1) return coeffs[0];
  const double x = (state - center) / scale;
  double acc = coeffs[k - 1];
  for (Index d = k - 2; d >= 0; --d) acc = acc * x + coeffs[d];
  return acc;
}

SurfaceField::SurfaceField(TimeGrid grid, std::shared_ptr<const Eigen::MatrixXd> state,
                           Region region, Extension extension)
    : grid_(std::move(grid)), state_(std::move(state)), region_(region), extension_(extension) {
  if (!state_ || state_->cols() != grid_.steps() + 1) {
    throw ShapeError("surface: state must have one column per grid node");
  }
  const auto n = static_cast<std::size_t>(size());
  cells_.resize(n * n);
}

std::size_t SurfaceField::offset(Index i, Index j) const {
  if (i < 0 || j < 0 || i >= size() || j >= size()) {
    throw ShapeError("surface: cell (" + std::to_string(i) + "," + std::to_string(j) +
                     ") outside the grid");
  }
  return static_cast<std::size_t>(i * size() + j);
}

const CellPoly& SurfaceField::cell(Index i, Index j) const {
  const CellPoly& c = cells_[offset(i, j)];
  if (!c.defined()) {
    throw ShapeError("surface: cell (" + std::to_string(i) + "," + std::to_string(j) +
                     ") is not defined");
  }
  return c;
}

Eigen::ArrayXd SurfaceField::values(Index i, Index j) const {
  const CellPoly& c = cell(i, j);
  return c.evaluate(state_->col(c.anchor));
}

double SurfaceField::value(Index path, Index i, Index j) const {
  const CellPoly& c = cell(i, j);
  return c.evaluate((*state_)(path, c.anchor));
}

SurfaceField SurfaceField::scaled(double alpha) const {
  SurfaceField out = *this;
  for (auto& c : out.cells_) {
    if (c.defined()) c.coeffs *= alpha;
  }
  return out;
}

namespace {

bool selected(CellSet set, Index i, Index j) {
  switch (set) {
    case CellSet::upper: return i <= j;
    case CellSet::lower: return i > j;
    case CellSet::diagonal: return i == j;
    case CellSet::full: return true;
  }
  return false;
}

void require_same_shape(const TimeGrid& a, Index pa, const TimeGrid& b, Index pb) {
  if (!(a == b) || pa != pb) throw ShapeError("fields do not share grid and path count");
}

// Sample means of |cell|^2 computed from the power moments of the anchor
// state, so a cell costs O(degree^2) instead of O(M).
class CellMoments {
 public:
  explicit CellMoments(const Eigen::MatrixXd& state) : state_(state) {}

  double square_mean(const CellPoly& c) { return quadratic(c, c.coeffs); }

  double distance_sq(const CellPoly& a, const CellPoly& b) {
    if (a.anchor == b.anchor && a.center == b.center && a.scale == b.scale) {
      const Index k = std::max(a.coeffs.size(), b.coeffs.size());
      Eigen::VectorXd d = Eigen::VectorXd::Zero(k);
      d.head(a.coeffs.size()) += a.coeffs;
      d.head(b.coeffs.size()) -= b.coeffs;
      return quadratic(a, d);
    }
    const auto col_a = state_.col(a.anchor);
    const auto col_b = state_.col(b.anchor);
    return (a.evaluate(col_a) - b.evaluate(col_b)).square().mean();
  }

 private:
  double quadratic(const CellPoly& c, const Eigen::VectorXd& coeffs) {
    const Index k = coeffs.size();
    if (k == 1) return coeffs[0] * coeffs[0];
    const std::vector<double>& m = moments(c, 2 * k - 1);
    double acc = 0.0;
    for (Index a = 0; a < k; ++a)
      for (Index b = 0; b < k; ++b) acc += coeffs[a] * coeffs[b] * m[static_cast<std::size_t>(a + b)];
    return std::max(acc, 0.0);
  }

  const std::vector<double>& moments(const CellPoly& c, Index count) {
    auto& m = cache_[{c.anchor, c.center, c.scale}];
    if (static_cast<Index>(m.size()) < count) {
      const Eigen::ArrayXd x = (state_.col(c.anchor).array() - c.center) / c.scale;
      Eigen::ArrayXd p = Eigen::ArrayXd::Ones(x.size());
      m.assign(static_cast<std::size_t>(count), 0.0);
      for (Index d = 0; d < count; ++d) {
        m[static_cast<std::size_t>(d)] = p.mean();
        p *= x;
      }
    }
    return m;
  }

  const Eigen::MatrixXd& state_;
  std::map<std::tuple<Index, double, double>, std::vector<double>> cache_;
};

}  // namespace

double y_l2(const AdaptedField& y) {
  const Index n = y.grid.steps();
  if (y.values.cols() != n + 1) throw ShapeError("adapted field: wrong node count");
  const double m = static_cast<double>(y.paths());
  double acc = 0.0;
  for (Index i = 0; i < n; ++i) acc += y.values.col(i).squaredNorm() / m;
  return acc * y.grid.dt();
}

double z_l2(const SurfaceField& z, CellSet cells) {
  const Index n = z.grid().steps();
  CellMoments moments(*z.state());
  double acc = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (selected(cells, i, j)) acc += moments.square_mean(z.cell(i, j));
    }
  }
  const double dt = z.grid().dt();
  return acc * dt * dt;
}

double z_l2_rectangle(const SurfaceField& z, Index row_begin, Index row_end, Index col_begin,
                      Index col_end) {
  CellMoments moments(*z.state());
  double acc = 0.0;
  if (row_begin <= col_begin) {
    for (Index i = row_begin; i < row_end; ++i)
      for (Index j = col_begin; j < col_end; ++j) acc += moments.square_mean(z.cell(i, j));
  } else {
    for (Index j = col_begin; j < col_end; ++j)
      for (Index i = row_begin; i < row_end; ++i) acc += moments.square_mean(z.cell(i, j));
  }
  const double dt = z.grid().dt();
  return acc * dt * dt;
}

NormReport star_h2_norm(const AdaptedField& y, const SurfaceField& z) {
  require_same_shape(y.grid, y.paths(), z.grid(), z.paths());
  NormReport r;
  r.y_l2 = y_l2(y);
  r.z_upper = z_l2(z, CellSet::upper);
  r.z_diagonal = z_l2(z, CellSet::diagonal);
  r.z_upper_doubled = 2.0 * r.z_upper - r.z_diagonal;
  if (z.region() == Region::full) {
    r.z_l2 = r.z_upper + z_l2(z, CellSet::lower);
    r.region = NormReport::ZRegion::full_square;
  } else {
    r.z_l2 = r.z_upper_doubled;
    r.region = NormReport::ZRegion::upper_doubled;
  }
  r.total = std::sqrt(r.y_l2 + r.z_l2);
  return r;
}

double s2_norm(const AdaptedField& y, const SurfaceField& z) {
  require_same_shape(y.grid, y.paths(), z.grid(), z.paths());
  return std::sqrt(y_l2(y) + z_l2(z, CellSet::upper));
}

double y_distance_sq(const AdaptedField& a, const AdaptedField& b) {
  require_same_shape(a.grid, a.paths(), b.grid, b.paths());
  return y_l2(AdaptedField{a.grid, a.values - b.values});
}

double z_distance_sq(const SurfaceField& a, const SurfaceField& b, CellSet cells) {
  require_same_shape(a.grid(), a.paths(), b.grid(), b.paths());
  const Index n = a.grid().steps();
  CellMoments moments(*a.state());
  double acc = 0.0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (selected(cells, i, j)) acc += moments.distance_sq(a.cell(i, j), b.cell(i, j));
    }
  }
  const double dt = a.grid().dt();
  return acc * dt * dt;
}

}  // namespace bsvie
