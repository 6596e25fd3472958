#pragma once

#include "bsvie/grid.hpp"

#include <Eigen/Core>

#include <memory>
#include <vector>

namespace bsvie {

/// Y(t_i) for every path, stored M x (N+1). Values at node i are produced
/// from path information up to t_i only.
struct AdaptedField {
  TimeGrid grid;
  Eigen::MatrixXd values;

  Index paths() const noexcept { return values.rows(); }
  AdaptedField scaled(double alpha) const { return {grid, alpha * values}; }
};

/// One cell of a Z-surface: a polynomial in the standardized Brownian state
/// at node `anchor`,  Z = sum_k coeffs[k] * ((W(t_anchor) - center) / scale)^k.
///
/// Storing the polynomial rather than per-path values keeps an N^2 surface at
/// O(N^2 * degree) memory and makes the measurability of every cell explicit:
/// the value depends on the path only through W(t_anchor).
struct CellPoly {
  Index anchor = 0;
  double center = 0.0;
  double scale = 1.0;
  Eigen::VectorXd coeffs;

  bool defined() const noexcept { return coeffs.size() > 0; }
  static CellPoly constant(double value, Index anchor = 0);

  Eigen::ArrayXd evaluate(const Eigen::Ref<const Eigen::VectorXd>& state) const;
  double evaluate(double state) const;
};

enum class Region { upper, full };
enum class Extension { none, symmetric, martingale };

/// Z(t_i, t_j) on the (N+1) x (N+1) node square. `upper` fields define cells
/// with i <= j; `full` fields additionally carry the lower triangle produced
/// by an extension rule.
class SurfaceField {
 public:
  SurfaceField() = default;
  SurfaceField(TimeGrid grid, std::shared_ptr<const Eigen::MatrixXd> state,
               Region region = Region::upper, Extension extension = Extension::none);

  const TimeGrid& grid() const noexcept { return grid_; }
  Index paths() const noexcept { return state_ ? state_->rows() : 0; }
  Index size() const noexcept { return grid_.steps() + 1; }
  Region region() const noexcept { return region_; }
  Extension extension() const noexcept { return extension_; }
  void set_region(Region r) noexcept { region_ = r; }
  void set_extension(Extension e) noexcept { extension_ = e; }
  const std::shared_ptr<const Eigen::MatrixXd>& state() const noexcept { return state_; }

  bool defined(Index i, Index j) const { return cells_[offset(i, j)].defined(); }
  const CellPoly& cell(Index i, Index j) const;
  void set_cell(Index i, Index j, CellPoly poly) { cells_[offset(i, j)] = std::move(poly); }

  /// Per-path values of cell (i, j). Throws if the cell is undefined.
  Eigen::ArrayXd values(Index i, Index j) const;
  double value(Index path, Index i, Index j) const;

  /// Multiplies every defined cell by alpha.
  SurfaceField scaled(double alpha) const;

 private:
  std::size_t offset(Index i, Index j) const;

  TimeGrid grid_;
  std::shared_ptr<const Eigen::MatrixXd> state_;
  Region region_ = Region::upper;
  Extension extension_ = Extension::none;
  std::vector<CellPoly> cells_;
};

/// Cells of the quadrature square [0, N) x [0, N) selected by a norm.
enum class CellSet { upper, lower, diagonal, full };

/// Grid-quadrature estimate of E int |Y|^2 dt + E int int |Z|^2 ds dt.
struct NormReport {
  enum class ZRegion { full_square, upper_doubled };

  double y_l2 = 0.0;
  double z_l2 = 0.0;
  double total = 0.0;
  ZRegion region = ZRegion::full_square;
  double z_upper = 0.0;          // cells i <= j
  double z_diagonal = 0.0;       // cells i == j
  double z_upper_doubled = 0.0;  // 2 * upper - diagonal
};

double y_l2(const AdaptedField& y);
/// E sum_{cells} |Z|^2 dt^2 over the selected cells.
double z_l2(const SurfaceField& z, CellSet cells);
/// Same, over the rows [row_begin, row_end) x cols [col_begin, col_end). The
/// range with the smaller start is the outer loop, so for a surface with
/// Z(i,j) == Z(j,i) the two orientations of a rectangle add identical terms in
/// identical order.
double z_l2_rectangle(const SurfaceField& z, Index row_begin, Index row_end, Index col_begin,
                      Index col_end);

NormReport star_h2_norm(const AdaptedField& y, const SurfaceField& z);
/// sqrt(E int|Y|^2 + E int int_{t<=s} |Z|^2), the norm on the symmetric subspace.
double s2_norm(const AdaptedField& y, const SurfaceField& z);

double y_distance_sq(const AdaptedField& a, const AdaptedField& b);
double z_distance_sq(const SurfaceField& a, const SurfaceField& b, CellSet cells);

}  // namespace bsvie
