#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kinlab/kinetic_solver.hpp"

namespace kinlab {

using Complex = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

enum class BaseProfile { Couette, Quiescent, Custom };

/// Plane channel y in [-1, 1], no-slip walls, perturbations ~ exp(i (kx x + kz z)).
struct ShearProblem
{
  BaseProfile profile = BaseProfile::Couette;
  double Re = 1000.0;
  double kx = 0.0;
  double kz = 2.0;
  int ny = 48;  ///< basis functions per component
  /// Tabulated U(y) for BaseProfile::Custom (interpolated by a cubic spline).
  std::vector<double> custom_y;
  std::vector<double> custom_U;

  void validate() const;
};

/**
 * Velocity-vorticity (v, eta) Galerkin discretization.
 *
 * v is expanded in clamped Legendre combinations (v = Dv = 0 at the walls)
 * and eta in Dirichlet ones, so the state x = (q_v, q_eta) evolves by
 * x' = L x and E = 1/2 x^H Q x equals 1/2 int |u'|^2 dy per wavelength.
 */
struct ShearOperator
{
  ShearProblem problem;
  int nv = 0;
  int neta = 0;
  double k2 = 0.0;
  CMat L;
  CMat Q;
  CMat F;  ///< upper factor, Q = F^H F

  // quadrature and basis tables used for reconstruction and the budget
  Vec yq, wq;
  Vec U, dU, d2U;
  Mat phi, dphi, d2phi;
  Mat psi, dpsi;
};

ShearOperator build_shear_operator(const ShearProblem& prob);

/// Base flow and its first two derivatives at the given points.
void base_flow(const ShearProblem& prob, const Vec& y, Vec& U, Vec& dU, Vec& d2U);

/// Gauss-Legendre rule on [-1, 1].
void gauss_legendre_rule(int n, Vec& nodes, Vec& weights);

struct VelocityProfile
{
  Vec y;
  CVec u, v, w, eta;
};

/// Perturbation velocity (u, v, w) and wall-normal vorticity at arbitrary y.
VelocityProfile reconstruct_velocity(const ShearOperator& op, const CVec& x, const Vec& y);

struct GrowthEnvelope
{
  std::vector<double> times;
  std::vector<double> G;
  double G_max = 1.0;
  double t_opt = 0.0;
  CVec optimal_seed;  ///< state coordinates, unit energy norm
  double abscissa = 0.0;  ///< largest real part of the spectrum
  std::string method;     ///< "diagonalization" or "scaling-squaring"
};

/// Time evolution e^{Lt} in energy-orthonormal coordinates.
class Propagator
{
 public:
  Propagator(const CMat& L, const CMat& Q);
  /// F e^{Lt} F^{-1}.
  CMat energy_propagator(double t) const;
  /// e^{Lt} x in state coordinates.
  CVec evolve(const CVec& x, double t) const;
  double gain(double t) const;
  const CVec& eigenvalues() const { return lambda_; }
  double abscissa() const;
  bool diagonalized() const { return diag_; }
  const CMat& F() const { return F_; }

 private:
  CMat F_, Finv_, B_;
  CMat V_, Vinv_;
  CVec lambda_;
  bool diag_ = false;
};

/// 0 plus n-1 log-spaced points up to 2 Re t_ref.
std::vector<double> default_t_grid(double Re, int n = 60, double t_ref = 1.0);

/**
 * G(t) = max_x E(t)/E(0) on t_grid (must contain 0), then a golden-section
 * refinement around the best sample when `refine` is set.
 */
GrowthEnvelope growth_envelope(const CMat& L, const CMat& Q, const std::vector<double>& t_grid, bool refine = true);
GrowthEnvelope growth_envelope(const ShearOperator& op, std::vector<double> t_grid = {}, bool refine = true);

struct EnergyBudget
{
  double energy = 0.0;
  double dEdt = 0.0;  ///< Re(x^H Q L x)
  double production = 0.0;  ///< -int Re(u^* v) U'
  double dissipation = 0.0; ///< nu int |grad u'|^2
  double residual = 0.0;    ///< |dEdt - (production - dissipation)|
};

EnergyBudget energy_budget(const ShearOperator& op, const CVec& x);

struct BudgetTrajectory
{
  std::vector<double> times;
  std::vector<EnergyBudget> budgets;
  double max_rel_residual = 0.0;     ///< residual / max(|production|, dissipation)
  double max_fd_rel_residual = 0.0;  ///< same with dE/dt from central differences of E(t)
};

BudgetTrajectory budget_along_trajectory(const ShearOperator& op, const CVec& x0, const std::vector<double>& times);

struct SeedThreshold
{
  double a0 = 0.0;
  double a_nl = 0.0;
  double G_max = 1.0;
  double amplified = 0.0;       ///< sqrt(G_max) a0
  double required_factor = 0.0; ///< a_nl / a0
  double required_G = 0.0;      ///< (a_nl / a0)^2
  bool met = false;
};

SeedThreshold seed_threshold(double G_max, double a0, double a_nl);
SeedThreshold seed_threshold(const GrowthEnvelope& env, double a0, double a_nl);

/**
 * One convention for a kinetic seed amplitude: the velocity scale
 * eps |tau1| / (rho sqrt(R T)) of the first-order stress.  Not unique.
 */
double stress_seed_amplitude(double eps, double tau1_max, double rho, double RT);

struct ReSweep
{
  std::vector<double> Re;
  std::vector<double> G_max;
  std::vector<double> t_opt;
  double slope = 0.0;
  double intercept = 0.0;
  double fit_residual = 0.0;
};

ReSweep re_sweep(const ShearProblem& base, const std::vector<double>& Re_list, int threads = 1);

// Macroscopic energy balance of the kinetic solution

struct EnergyBalanceOptions
{
  int d = 2;
  int n_cells = 64;
  double length = 1.0;
  int velocity_nodes = 24;
  double shear = 0.1;  ///< amplitude of u_x(y)
  double eps = 0.01;
  BgkConfig bgk;
  double t_final = 0.05;
  double cfl = 0.5;
  double relax_resolution = 0.1;
  TimeScheme scheme = TimeScheme::StrangSplit;
  Advection advection = Advection::Weno5;
};

struct EnergyBalanceReport
{
  std::vector<double> times;
  std::vector<double> kinetic_energy;   ///< int 1/2 rho |u|^2
  std::vector<double> dKdt;             ///< central differences (interior samples)
  std::vector<double> stress_work;      ///< int tau_ij d_i u_j from moments
  std::vector<double> pressure_work;    ///< int p div u
  std::vector<double> constitutive;     ///< -2 eps int mu |S|^2
  double residual_kinetic = 0.0;        ///< max |dKdt - (stress + pressure work)| / max dissipation
  double residual_constitutive = 0.0;   ///< max |dKdt - (constitutive + pressure work)| / max dissipation
  double max_dissipation = 0.0;
  bool pass = false;
};

/// Balance along a stored trajectory of a solver with relaxation time eps * tau.
EnergyBalanceReport macroscopic_energy_balance(const std::vector<double>& times,
                                               const std::vector<DistField>& trajectory, double eps,
                                               const BgkConfig& bgk, double R = 1.0, double tolerance = 0.05);

/// Runs the solver on a sinusoidal shear layer and checks the balance.
EnergyBalanceReport shear_energy_balance(const EnergyBalanceOptions& opts, double tolerance = 0.05);

}  // namespace kinlab
