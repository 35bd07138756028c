#pragma once

#include <optional>
#include <vector>

#include "kinlab/collision.hpp"
#include "kinlab/periodic_derivative.hpp"
#include "kinlab/phase_space.hpp"

namespace kinlab {

/// (d_t^(0) + v . grad_x) M on the grids, with cached gradients.
struct StreamingTerm
{
  DistField values;
  MacroFields fields;
  /// Gradients along the spatial axis.
  Vec grad_rho;
  Mat grad_u;  ///< n_cells x d, d u_j / d x_axis
  Vec grad_T;
  bool euler_substituted = true;

  /// Full velocity-gradient tensor G(i, j) = d_i u_j at one cell.
  Mat velocity_gradient(int cell) const;
};

/**
 * Streaming term of the local Maxwellian.
 *
 * With Euler substitution the time derivatives of (rho, u, T) are eliminated
 * through the compressible Euler equations, giving
 *   M [ (|C|^2/(2RT) - (d+2)/2) C . grad ln T + (C C - |C|^2 I / d) : grad u / (RT) ],
 * C = v - u(x).  Without it only v . grad_x M is returned.
 */
StreamingTerm streaming_term(const MacroFields& fields, const SpatialGrid& sgrid, const VelocityLayout& layout,
                             DerivativeScheme scheme = DerivativeScheme::Spectral, bool euler_substitution = true);

struct SolvabilityReport
{
  Mat residuals;             ///< n_cells x (d+2): |int st phi| / int |st phi|
  Vec max_per_invariant;     ///< mass, momentum_1..d, energy
  double max_residual = 0.0;
  bool pass = true;
};

SolvabilityReport solvability_check(const StreamingTerm& st, double tol = kTolSolv);

struct StrainRate
{
  std::vector<Mat> S;  ///< trace-free symmetric part of grad u
  Vec divu;
};

StrainRate strain_rate(const MacroFields& fields, const SpatialGrid& sgrid,
                       DerivativeScheme scheme = DerivativeScheme::Spectral);

struct FirstCorrection
{
  DistField f1;
  std::vector<Mat> tau1;  ///< int C_i C_j f1 dv per cell
  Vec mu;                 ///< rho tau R T per cell
  double max_inverse_gain = 0.0;
};

/// Linearized BGK operators at every cell of the layout.
std::vector<LinearizedOp> build_cell_operators(const MacroFields& fields, const VelocityLayout& layout,
                                               const BgkConfig& cfg);

/**
 * f1 = L_x^{-1}(st) per cell through the dense pseudoinverse (for BGK this is
 * -tau st).  Refuses with SolvabilityError when the gate fails.
 */
FirstCorrection first_correction(const StreamingTerm& st, const std::vector<LinearizedOp>& ops, const BgkConfig& cfg);

/// BGK closed form f1 = -tau st, no operator assembly.
FirstCorrection first_correction_bgk(const StreamingTerm& st, const BgkConfig& cfg);

/// Deviatoric moment int C_i C_j g dv of each cell.
std::vector<Mat> stress_moment(const DistField& g, const MacroFields& fields);

enum class FieldProfile { Uniform, Shear, DensityWave, TemperatureWave, Dilatation, Mixed };

/// Smooth single-mode periodic fields used by the constitutive checks and the solver.
MacroFields manufactured_fields(FieldProfile profile, const SpatialGrid& sgrid, int d, double amplitude,
                                const CellState& base);

struct ConstitutiveOptions
{
  int hermite_nodes = 8;
  DerivativeScheme scheme = DerivativeScheme::Spectral;
  std::vector<double> eps_probe{1e-1, 1e-2, 1e-3};
  double tolerance = 1e-6;
};

struct ConstitutiveReport
{
  double max_rel_err = 0.0;
  Mat per_component_err;  ///< d x d, max over cells, same normalization
  double stress_scale = 0.0;  ///< max |2 mu S|
  Vec mu;
  std::vector<Mat> S;
  std::vector<Mat> tau1;
  std::vector<Mat> expected;  ///< -2 mu S
  double f1_norm = 0.0;       ///< max over cells of the weighted norm
  double tau1_norm = 0.0;     ///< max |tau1_ij|
  double max_inverse_gain = 0.0;
  std::vector<double> decomposition_eps;
  std::vector<double> decomposition_residual;  ///< max |P - p I - eps tau1| for M + eps f1
  SolvabilityReport solvability;
  bool pass = false;
};

/// End-to-end check of tau1 = -2 mu S with mu = rho tau R T.  Requires d >= 2.
ConstitutiveReport constitutive_verify(const MacroFields& fields, const SpatialGrid& sgrid, const BgkConfig& cfg,
                                       const ConstitutiveOptions& opts = {});

}  // namespace kinlab
