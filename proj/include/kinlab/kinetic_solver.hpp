#pragma once

#include <functional>
#include <vector>

#include "kinlab/chapman_enskog.hpp"
#include "kinlab/collision.hpp"
#include "kinlab/phase_space.hpp"

namespace kinlab {

enum class TimeScheme { ImexBdf1, StrangSplit };
enum class Advection { Upwind1, Weno5 };

/// Rescaled BGK: d_t f + v . grad_x f = (M[f] - f) / (eps tau).
struct SolverConfig
{
  double eps = 0.1;
  BgkConfig bgk;
  double t_final = 0.1;
  double cfl = 0.5;
  TimeScheme scheme = TimeScheme::ImexBdf1;
  Advection advection = Advection::Upwind1;
  /// If > 0, also cap dt at relax_resolution * eps * tau.
  double relax_resolution = 0.0;

  void validate() const;
};

/// Largest stable step cfl * dx / v_max.
double cfl_step(const DistField& f, const SolverConfig& cfg);
/// Step actually used by evolve(): CFL and relaxation caps, shrunk to land on t_final.
double choose_step(const DistField& f, const SolverConfig& cfg, int* n_steps = nullptr);

/**
 * One step of size dt; requires a shared velocity grid.  `t` is only used to
 * time-stamp a BlowUpError.
 */
DistField step(const DistField& f, const SolverConfig& cfg, double dt, double t = 0.0);

using SnapshotObserver = std::function<void(int step_index, double t, const DistField& f)>;

/// Integrates to cfg.t_final; the observer sees the initial state and every step.
DistField evolve(const DistField& f0, const SolverConfig& cfg, const SnapshotObserver& observer = {});

/// Totals of (mass, momentum_1..d, energy) over the periodic box.
Vec conserved_totals(const DistField& f);

/// Cell-wise discrete-conservative Maxwellian with the given moments.
DistField conservative_maxwellian_field(const MacroFields& fields, const SpatialGrid& sgrid, VelocityGridPtr grid);

/// Well-prepared data M[fields] + eps f1[fields] on a shared grid.
DistField well_prepared_state(const MacroFields& fields, const SpatialGrid& sgrid, VelocityGridPtr grid, double eps,
                              const BgkConfig& bgk, DerivativeScheme scheme = DerivativeScheme::Spectral);

struct SplitNorms
{
  double total = 0.0;
  double par = 0.0;   ///< projection onto the local nullspace
  double perp = 0.0;
};

/**
 * R = f - M[fields] - eps f1 split cell-wise into nullspace and complement
 * parts; norms in discrete L2_x L2_v(M^{-1}) with the local Maxwellian weight.
 */
SplitNorms split_diagnostics(const DistField& f, const MacroFields& fields, const FirstCorrection& fc, double eps);

/// Remainder of f against its own Chapman-Enskog truncation.
SplitNorms remainder_norms(const DistField& f, double eps, const BgkConfig& bgk, double R,
                           DerivativeScheme scheme = DerivativeScheme::Spectral);

struct ScanOptions
{
  std::vector<double> eps_list;
  SolverConfig solver;  ///< eps ignored
  int velocity_nodes = 32;
  double safety = 1.2;
  double n_sigma = 6.0;
  bool well_prepared = true;
  /// Number of equally spaced samples of the remainder over (0, t_final], plus t = 0.
  int samples = 8;
  int threads = 1;
  DerivativeScheme scheme = DerivativeScheme::Spectral;
  /// Called every `snapshot_stride` steps per member when both are set; must be thread-safe.
  int snapshot_stride = 0;
  std::function<void(int member, int step_index, double t, const DistField& f)> on_snapshot;
};

struct RemainderScan
{
  std::vector<double> eps_list;
  std::vector<double> norms;  ///< sup over sampled times
  std::vector<double> norms_par;
  std::vector<double> norms_perp;
  std::vector<long> steps;
  double slope = 0.0;
  double intercept = 0.0;
  double slope_ci = 0.0;  ///< rms residual of the log-log fit
};

struct LineFit
{
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
};

/// Ordinary least squares of log(y) on log(x).
LineFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y);

/// Requires >= 3 strictly decreasing epsilons.
RemainderScan remainder_scan(const MacroFields& base_fields, const SpatialGrid& sgrid, const ScanOptions& opts);

/// Closed-form H of a Maxwellian field: sum_cells rho [log(rho / (2 pi R T)^{d/2}) - d/2] dx.
double gaussian_entropy(const MacroFields& fields, double dx);

struct EntropySeries
{
  std::vector<double> times;
  std::vector<double> H;
  double max_increase = 0.0;  ///< largest H_{n+1} - H_n
  long excluded = 0;
  bool monotone = true;       ///< no increase beyond the threshold
};

EntropySeries entropy_monitor(const std::vector<double>& times, const std::vector<DistField>& trajectory,
                              double threshold = 1e-10);

/// Evolve and record H at every step.
EntropySeries entropy_run(const DistField& f0, const SolverConfig& cfg, double threshold = 1e-10);

}  // namespace kinlab
