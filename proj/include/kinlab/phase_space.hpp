#pragma once

#include <array>
#include <memory>
#include <vector>

#include <Eigen/Dense>

namespace kinlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
/// (cell, velocity-node) storage; one contiguous row per cell.
using CellNodeArray = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kTolQuad = 1e-10;

enum class GridKind { GaussHermiteTensor, UniformTruncated };

/**
 * Quadrature nodes and weights in velocity space.
 *
 * Weights integrate against dv, i.e. sum_k w_k g(v_k) approximates the
 * integral of g over R^d.  Gauss-Hermite grids are exact for
 * polynomial * Gaussian integrands whose Gaussian matches the grid's
 * center and thermal speed.
 */
class VelocityGrid
{
 public:
  VelocityGrid(Mat nodes, Vec weights, GridKind kind);

  /// Tensor Gauss-Hermite grid, nodes = center + thermal_speed * xi.
  static VelocityGrid gauss_hermite(int dim, int n_per_axis, const Vec& center, double thermal_speed);
  /// Tensor trapezoidal grid on [-half_width, half_width]^dim (endpoints included).
  static VelocityGrid uniform(int dim, int n_per_axis, double half_width);
  /// Uniform grid covering sqrt(R*T_max) * n_sigma * safety.
  static VelocityGrid uniform_for_temperature(int dim, int n_per_axis, double R, double T_max,
                                              double safety = 1.2, double n_sigma = 6.0);

  int dim() const { return static_cast<int>(nodes_.cols()); }
  int size() const { return static_cast<int>(nodes_.rows()); }
  /// size() x dim() node coordinates.
  const Mat& nodes() const { return nodes_; }
  const Vec& weights() const { return weights_; }
  GridKind kind() const { return kind_; }
  /// Largest |v_i| over nodes and components.
  double max_speed() const;

  VelocityGrid shifted(const Vec& shift) const;

 private:
  Mat nodes_;
  Vec weights_;
  GridKind kind_;
};

using VelocityGridPtr = std::shared_ptr<const VelocityGrid>;

/// One-dimensional probabilists' Gauss-Hermite rule (weight exp(-x^2/2)).
void gauss_hermite_rule(int n, Vec& nodes, Vec& weights);

/// Periodic one-dimensional box, aligned with velocity component `axis`.
class SpatialGrid
{
 public:
  SpatialGrid(int n_cells, double length, int axis = 0);

  int dim_x() const { return 1; }
  int n_cells() const { return n_cells_; }
  double length() const { return length_; }
  int axis() const { return axis_; }
  double dx() const { return length_ / n_cells_; }
  const Vec& cell_centers() const { return centers_; }

 private:
  int n_cells_;
  double length_;
  int axis_;
  Vec centers_;
};

/// Local state (rho, u, T) at one point.
struct CellState
{
  double rho = 1.0;
  Vec u;
  double T = 1.0;
  double R = 1.0;

  int dim() const { return static_cast<int>(u.size()); }
  void validate(int cell = -1) const;
};

/// Macroscopic fields on a spatial grid.
struct MacroFields
{
  Vec rho;
  Mat u;  ///< n_cells x d
  Vec T;
  double R = 1.0;

  MacroFields() = default;
  MacroFields(Vec rho_, Mat u_, Vec T_, double R_);

  static MacroFields uniform(int n_cells, const CellState& state);

  int n_cells() const { return static_cast<int>(rho.size()); }
  int dim() const { return static_cast<int>(u.cols()); }
  CellState cell(int i) const;
  void set_cell(int i, const CellState& s);
  /// Throws DomainError naming the first offending cell.
  void validate() const;
};

/// Velocity layout of a distribution: a single shared grid or one grid per cell.
using VelocityLayout = std::vector<VelocityGridPtr>;

/// Per-cell Gauss-Hermite grids centered at u(x) and scaled by sqrt(R T(x)).
VelocityLayout local_hermite_layout(const MacroFields& fields, int n_per_axis);

/// f(x, v) sampled on (cell, node).
class DistField
{
 public:
  DistField(SpatialGrid sgrid, VelocityGridPtr shared, CellNodeArray values);
  DistField(SpatialGrid sgrid, VelocityLayout layout, CellNodeArray values);

  const SpatialGrid& sgrid() const { return sgrid_; }
  const VelocityLayout& layout() const { return layout_; }
  bool shared_grid() const { return layout_.size() == 1; }
  const VelocityGrid& vgrid(int cell) const { return *layout_[shared_grid() ? 0 : cell]; }
  const VelocityGridPtr& vgrid_ptr(int cell) const { return layout_[shared_grid() ? 0 : cell]; }

  int n_cells() const { return sgrid_.n_cells(); }
  int n_nodes() const { return static_cast<int>(values_.cols()); }
  int dim() const { return layout_.front()->dim(); }

  CellNodeArray& values() { return values_; }
  const CellNodeArray& values() const { return values_; }

  /// Same grids, new values.
  DistField with_values(CellNodeArray values) const;
  bool all_finite() const;

 private:
  SpatialGrid sgrid_;
  VelocityLayout layout_;
  CellNodeArray values_;
};

struct PressureTensor
{
  std::vector<Mat> P;    ///< per cell d x d
  Vec p;                 ///< tr(P)/d
  std::vector<Mat> tau;  ///< P - p I
};

/// Maxwellian values at every node of `grid`.
Vec maxwellian_values(const CellState& state, const VelocityGrid& grid);

/**
 * Maxwellian exp(a + b.v + c|v|^2) whose discrete moments on `grid` equal
 * (rho, rho u, sum w |v|^2 f) of the requested state to round-off.  Starts
 * from the analytic Maxwellian and Newton-corrects (a, b, c).
 */
Vec conservative_maxwellian(const CellState& state, const VelocityGrid& grid);

/// Discrete moments (rho, rho u, sum w |v|^2 f) of a single-cell vector.
Vec invariant_moments(const Eigen::Ref<const Vec>& f, const VelocityGrid& grid);

/// (rho, u, T) of one cell's distribution; throws DegenerateMomentError.
CellState cell_moments(const Eigen::Ref<const Vec>& f, const VelocityGrid& grid, double R, int cell = -1);

DistField maxwellian(const MacroFields& fields, const SpatialGrid& sgrid, VelocityGridPtr vgrid);
DistField maxwellian(const MacroFields& fields, const SpatialGrid& sgrid, const VelocityLayout& layout);

MacroFields moments(const DistField& f, double R);

PressureTensor pressure_tensor(const DistField& f, const MacroFields& fields);

/// Centered second moment of a single cell: sum w (v-u)_i (v-u)_j f.
Mat centered_second_moment(const Eigen::Ref<const Vec>& f, const VelocityGrid& grid, const Vec& u);

struct GaussianMomentReport
{
  double second_moment_error = 0.0;
  double fourth_moment_error = 0.0;
  Mat second;                  ///< computed int C_i C_j M
  std::vector<double> fourth;  ///< computed int C_i C_j C_k C_l M, index ((i*d+j)*d+k)*d+l
  int dim = 0;

  double fourth_at(int i, int j, int k, int l) const
  {
    return fourth[((i * dim + j) * dim + k) * dim + l];
  }
};

/// Compare the Maxwellian's centered 2nd/4th moments with the delta-tensor formulas.
GaussianMomentReport gaussian_moment_check(const VelocityGrid& grid, const CellState& state);

}  // namespace kinlab
