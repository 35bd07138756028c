#pragma once

#include <vector>

#include "kinlab/phase_space.hpp"

namespace kinlab {

inline constexpr double kTolNull = 1e-10;
inline constexpr double kTolResid = 1e-10;
inline constexpr double kTolSolv = 1e-8;

struct BgkConfig
{
  double tau = 1.0;  ///< relaxation time
  void validate() const;
};

/// (1/tau)(M[f] - f) cell-wise, with the discrete-conservative equilibrium.
DistField bgk_apply(const DistField& f, const BgkConfig& cfg);

/**
 * Discrete analogue of L^2_v(M^{-1} dv): <g, h> = sum_k w_k g_k h_k / M_k.
 *
 * The map g -> sqrt(w/M) g is an isometry onto Euclidean R^n; operators are
 * stored in those "isometric" coordinates, where self-adjointness is plain
 * matrix symmetry.
 */
class WeightedSpace
{
 public:
  WeightedSpace(Vec weights, Vec maxwellian_ref, VelocityGridPtr grid = nullptr);
  /// Euclidean space of dimension n (unit weights and reference).
  static WeightedSpace euclidean(int n);

  int size() const { return static_cast<int>(weights_.size()); }
  const Vec& weights() const { return weights_; }
  const Vec& maxwellian_ref() const { return mref_; }
  const VelocityGridPtr& grid() const { return grid_; }

  double inner(const Vec& g, const Vec& h) const;
  double norm(const Vec& g) const;
  /// Nodal -> isometric coordinates.
  Vec to_iso(const Vec& g) const { return scale_.cwiseProduct(g); }
  Vec from_iso(const Vec& g) const { return g.cwiseQuotient(scale_); }
  const Vec& iso_scale() const { return scale_; }

 private:
  Vec weights_;
  Vec mref_;
  Vec scale_;
  VelocityGridPtr grid_;
};

/**
 * Dense linearized collision operator with nullspace, projector, gap and
 * pseudoinverse.  Immutable after assembly.
 */
class LinearizedOp
{
 public:
  /// Linearized BGK at the given state: L g = (Pi g - g) / tau.
  static LinearizedOp bgk(const CellState& state, VelocityGridPtr grid, const BgkConfig& cfg);

  /**
   * Operator given as a symmetric negative-semidefinite matrix in isometric
   * coordinates of `space`.  The nullspace is spanned by eigenvectors whose
   * eigenvalue magnitude is below null_tol * spectral radius.
   */
  static LinearizedOp synthetic(const Mat& iso_matrix, WeightedSpace space, double null_tol = 1e-10);
  static LinearizedOp synthetic(const Mat& iso_matrix, double null_tol = 1e-10);

  const WeightedSpace& space() const { return space_; }
  int size() const { return space_.size(); }
  int nullspace_dim() const { return static_cast<int>(null_nodal_.cols()); }
  /// Nodal nullspace basis, orthonormal in the weighted inner product.
  const Mat& nullspace_basis() const { return null_nodal_; }
  /// Same basis in isometric coordinates (Euclidean-orthonormal columns).
  const Mat& nullspace_iso() const { return null_iso_; }
  const Mat& iso_matrix() const { return iso_; }
  /// Nodal matrix of L.
  Mat nodal_matrix() const;
  /// Nodal matrix of the pseudoinverse on the complement.
  Mat nodal_pseudoinverse() const;
  const Mat& iso_pseudoinverse() const { return iso_pinv_; }

  Vec apply(const Vec& g) const;
  /// Smallest eigenvalue of -L on the complement of the nullspace.
  double gap() const { return gap_; }
  /// Operator norm of the assembled pseudoinverse.
  double c_inv() const { return c_inv_; }
  /// Eigenvalues of -L restricted to the complement, ascending.
  const Vec& complement_spectrum() const { return complement_eigs_; }

 private:
  LinearizedOp(WeightedSpace space, Mat iso, Mat null_iso);

  WeightedSpace space_;
  Mat iso_;
  Mat null_iso_;
  Mat null_nodal_;
  Mat iso_pinv_;
  Vec complement_eigs_;
  double gap_ = 0.0;
  double c_inv_ = 0.0;
};

/// Weighted-orthogonal projection onto the nullspace.
Vec project_null(const Vec& g, const LinearizedOp& op);

/// Running maximum of ||L^{-1} h|| / ||h|| over observed applications.
struct InverseGainTracker
{
  double max_gain = 0.0;
  long applications = 0;
  void record(double gain);
};

/**
 * g perpendicular to the nullspace with L g = h - P h.  Requires
 * ||P h|| <= kTolSolv ||h||; throws SolvabilityError otherwise.
 */
Vec pseudoinverse_apply(const Vec& h, const LinearizedOp& op, InverseGainTracker* tracker = nullptr);

struct SpectrumReport
{
  Vec eigenvalues;           ///< eigenvalues of L, ascending
  int nullspace_dim = 0;
  Vec nullspace_residuals;   ///< ||L b|| for each nullspace basis vector
  double lambda0 = 0.0;
  double c_inv = 0.0;
  double eigen_residual = 0.0;  ///< max ||A x - lambda x|| over computed eigenpairs
};

SpectrumReport spectral_gap(const LinearizedOp& op);

struct ContinuityReport
{
  std::vector<double> params;
  std::vector<double> differences;  ///< ||Linv(s_{i+1}) - Linv(s_i)|| in the reference weighted norm
  std::vector<double> quotients;    ///< differences / |s_{i+1} - s_i|
  double max_quotient = 0.0;
  bool bounded = true;
};

/**
 * Sample L^{-1} along a path of states on a shared grid.  Operator norms are
 * measured in the weighted space of path.front().
 */
ContinuityReport pseudoinverse_continuity_scan(const std::vector<CellState>& path,
                                               const std::vector<double>& params, VelocityGridPtr grid,
                                               const BgkConfig& cfg);

/// Linear interpolation of two states at n >= 2 points; params in [0, 1].
std::vector<CellState> interpolate_states(const CellState& a, const CellState& b, int n,
                                          std::vector<double>* params = nullptr);

struct HFunctional
{
  double H = 0.0;
  long excluded = 0;  ///< nodes with f <= 0 skipped
};

/// H = sum_cells sum_k w_k f log f dx.
HFunctional h_functional(const DistField& f);

}  // namespace kinlab
