#include "kinlab/kinetic_solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "kinlab/errors.hpp"

namespace kinlab {

namespace {

using Column = Eigen::Matrix<double, Eigen::Dynamic, 1>;

/// -(dF/dx) for d_t q + v d_x q = 0 on a periodic column.
void advection_rhs(const Column& q, double v, double dx, Advection scheme, Column& out)
{
  const int n = static_cast<int>(q.size());
  auto at = [&](int i) { return q((i % n + n) % n); };
  Column flux(n);  // flux(i) sits at the face i + 1/2
  for (int i = 0; i < n; ++i) {
    if (scheme == Advection::Upwind1) {
      flux(i) = v * (v >= 0.0 ? at(i) : at(i + 1));
    } else if (v >= 0.0) {
      flux(i) = v * (2.0 * at(i - 2) - 13.0 * at(i - 1) + 47.0 * at(i) + 27.0 * at(i + 1) - 3.0 * at(i + 2)) / 60.0;
    } else {
      flux(i) = v * (2.0 * at(i + 3) - 13.0 * at(i + 2) + 47.0 * at(i + 1) + 27.0 * at(i) - 3.0 * at(i - 1)) / 60.0;
    }
  }
  for (int i = 0; i < n; ++i) out(i) = -(flux(i) - flux((i - 1 + n) % n)) / dx;
}

void advect(CellNodeArray& vals, const VelocityGrid& grid, int axis, double dx, double dt, Advection scheme)
{
  const int n = static_cast<int>(vals.rows());
  Column q(n), k(n), q1(n), q2(n);
  for (int node = 0; node < vals.cols(); ++node) {
    const double v = grid.nodes()(node, axis);
    if (v == 0.0) continue;
    q = vals.col(node);
    if (scheme == Advection::Upwind1) {
      advection_rhs(q, v, dx, scheme, k);
      vals.col(node) = q + dt * k;
      continue;
    }
    // SSP-RK3
    advection_rhs(q, v, dx, scheme, k);
    q1 = q + dt * k;
    advection_rhs(q1, v, dx, scheme, k);
    q2 = 0.75 * q + 0.25 * (q1 + dt * k);
    advection_rhs(q2, v, dx, scheme, k);
    vals.col(node) = q / 3.0 + (2.0 / 3.0) * (q2 + dt * k);
  }
}

/// Relax every cell toward its conservative Maxwellian; `blend(f, M)` gives the new row.
template <class Blend>
void relax(CellNodeArray& vals, const VelocityGrid& grid, Blend blend)
{
  for (int c = 0; c < vals.rows(); ++c) {
    const Vec fc = vals.row(c).transpose();
    const CellState s = cell_moments(fc, grid, 1.0, c);
    const Vec M = conservative_maxwellian(s, grid);
    vals.row(c) = blend(fc, M).transpose();
  }
}

/// Weighted orthonormal basis of the local invariants in isometric coordinates.
Mat local_invariant_basis(const CellState& s, const VelocityGrid& g, const Vec& M)
{
  const int d = g.dim();
  const int n = g.size();
  const double rt = s.R * s.T;
  Mat B(n, d + 2);
  for (int k = 0; k < n; ++k) {
    const Vec C = g.nodes().row(k).transpose() - s.u;
    B(k, 0) = 1.0;
    for (int i = 0; i < d; ++i) B(k, 1 + i) = C(i) / std::sqrt(rt);
    B(k, d + 1) = C.squaredNorm() / rt - d;
  }
  B = g.weights().cwiseProduct(M).cwiseSqrt().asDiagonal() * B;
  Eigen::HouseholderQR<Mat> qr(B);
  Mat Q = qr.householderQ() * Mat::Identity(n, d + 2);
  // one more orthogonalization pass against round-off
  Eigen::HouseholderQR<Mat> qr2(Q);
  return qr2.householderQ() * Mat::Identity(n, d + 2);
}

}  // namespace

void SolverConfig::validate() const
{
  if (!(eps > 0.0) || !std::isfinite(eps)) throw DomainError("eps must be positive");
  bgk.validate();
  if (!(t_final > 0.0) || !std::isfinite(t_final)) throw DomainError("t_final must be positive");
  if (!(cfl > 0.0 && cfl < 1.0)) throw DomainError("cfl must lie in (0, 1)");
  if (relax_resolution < 0.0 || !std::isfinite(relax_resolution)) throw DomainError("relax_resolution must be >= 0");
}

double cfl_step(const DistField& f, const SolverConfig& cfg)
{
  if (!f.shared_grid()) throw DomainError("the kinetic solver needs a shared velocity grid");
  const double vmax = f.vgrid(0).nodes().col(f.sgrid().axis()).cwiseAbs().maxCoeff();
  if (!(vmax > 0.0)) return cfg.t_final;
  return cfg.cfl * f.sgrid().dx() / vmax;
}

double choose_step(const DistField& f, const SolverConfig& cfg, int* n_steps)
{
  cfg.validate();
  double dt = cfl_step(f, cfg);
  if (cfg.relax_resolution > 0.0) dt = std::min(dt, cfg.relax_resolution * cfg.eps * cfg.bgk.tau);
  const int n = std::max(1, static_cast<int>(std::ceil(cfg.t_final / dt - 1e-9)));
  if (n_steps) *n_steps = n;
  return cfg.t_final / n;
}

DistField step(const DistField& f, const SolverConfig& cfg, double dt, double t)
{
  cfg.validate();
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  if (!f.all_finite()) throw BlowUpError(t);
  const double limit = cfl_step(f, cfg);
  if (dt > limit * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "time step " << dt << " violates the CFL limit " << limit;
    throw DomainError(os.str());
  }
  const VelocityGrid& grid = f.vgrid(0);
  const int axis = f.sgrid().axis();
  const double dx = f.sgrid().dx();
  const double relax_time = cfg.eps * cfg.bgk.tau;
  CellNodeArray vals = f.values();

  if (cfg.scheme == TimeScheme::ImexBdf1) {
    advect(vals, grid, axis, dx, dt, cfg.advection);
    const double theta = dt / relax_time;
    relax(vals, grid, [theta](const Vec& fs, const Vec& M) { return Vec((fs + theta * M) / (1.0 + theta)); });
  } else {
    const double decay = std::exp(-0.5 * dt / relax_time);
    auto half = [decay](const Vec& fs, const Vec& M) { return Vec(M + (fs - M) * decay); };
    relax(vals, grid, half);
    advect(vals, grid, axis, dx, dt, cfg.advection);
    relax(vals, grid, half);
  }
  if (!vals.allFinite()) throw BlowUpError(t + dt);
  return f.with_values(std::move(vals));
}

DistField evolve(const DistField& f0, const SolverConfig& cfg, const SnapshotObserver& observer)
{
  int n = 0;
  const double dt = choose_step(f0, cfg, &n);
  DistField f = f0;
  if (observer) observer(0, 0.0, f);
  for (int i = 0; i < n; ++i) {
    f = step(f, cfg, dt, i * dt);
    if (observer) observer(i + 1, (i + 1) * dt, f);
  }
  return f;
}

Vec conserved_totals(const DistField& f)
{
  const int d = f.dim();
  Vec tot = Vec::Zero(d + 2);
  for (int c = 0; c < f.n_cells(); ++c) {
    Vec m = invariant_moments(f.values().row(c).transpose(), f.vgrid(c));
    m(d + 1) *= 0.5;
    tot += m;
  }
  return tot * f.sgrid().dx();
}

DistField conservative_maxwellian_field(const MacroFields& fields, const SpatialGrid& sgrid, VelocityGridPtr grid)
{
  if (fields.n_cells() != sgrid.n_cells()) throw DomainError("fields and spatial grid differ in size");
  CellNodeArray vals(fields.n_cells(), grid->size());
  for (int c = 0; c < fields.n_cells(); ++c) vals.row(c) = conservative_maxwellian(fields.cell(c), *grid).transpose();
  return DistField(sgrid, std::move(grid), std::move(vals));
}

DistField well_prepared_state(const MacroFields& fields, const SpatialGrid& sgrid, VelocityGridPtr grid, double eps,
                              const BgkConfig& bgk, DerivativeScheme scheme)
{
  DistField M = conservative_maxwellian_field(fields, sgrid, grid);
  const StreamingTerm st = streaming_term(fields, sgrid, VelocityLayout{grid}, scheme, true);
  const FirstCorrection fc = first_correction_bgk(st, bgk);
  return M.with_values(M.values() + eps * fc.f1.values());
}

SplitNorms split_diagnostics(const DistField& f, const MacroFields& fields, const FirstCorrection& fc, double eps)
{
  if (fc.f1.n_cells() != f.n_cells() || fc.f1.n_nodes() != f.n_nodes())
    throw DomainError("split_diagnostics: inconsistent grids");
  SplitNorms out;
  double tot2 = 0.0, par2 = 0.0, perp2 = 0.0;
  for (int c = 0; c < f.n_cells(); ++c) {
    const VelocityGrid& g = f.vgrid(c);
    const CellState s = fields.cell(c);
    const Vec M = conservative_maxwellian(s, g);
    const Vec R = f.values().row(c).transpose() - M - eps * fc.f1.values().row(c).transpose();
    const Vec Ri = g.weights().cwiseQuotient(M).cwiseSqrt().cwiseProduct(R);
    const Mat Q = local_invariant_basis(s, g, M);
    const Vec par = Q * (Q.transpose() * Ri);
    tot2 += Ri.squaredNorm();
    par2 += par.squaredNorm();
    perp2 += (Ri - par).squaredNorm();
  }
  const double dx = f.sgrid().dx();
  out.total = std::sqrt(tot2 * dx);
  out.par = std::sqrt(par2 * dx);
  out.perp = std::sqrt(perp2 * dx);
  return out;
}

SplitNorms remainder_norms(const DistField& f, double eps, const BgkConfig& bgk, double R, DerivativeScheme scheme)
{
  const MacroFields fields = moments(f, R);
  const StreamingTerm st = streaming_term(fields, f.sgrid(), f.layout(), scheme, true);
  const FirstCorrection fc = first_correction_bgk(st, bgk);
  return split_diagnostics(f, fields, fc, eps);
}

LineFit loglog_fit(const std::vector<double>& x, const std::vector<double>& y)
{
  if (x.size() != y.size() || x.size() < 2) throw DomainError("log-log fit needs >= 2 matching points");
  const int n = static_cast<int>(x.size());
  Mat A(n, 2);
  Vec b(n);
  for (int i = 0; i < n; ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("log-log fit needs positive data");
    A(i, 0) = std::log(x[i]);
    A(i, 1) = 1.0;
    b(i) = std::log(y[i]);
  }
  const Vec c = A.colPivHouseholderQr().solve(b);
  LineFit fit;
  fit.slope = c(0);
  fit.intercept = c(1);
  fit.residual = std::sqrt((A * c - b).squaredNorm() / n);
  return fit;
}

RemainderScan remainder_scan(const MacroFields& base_fields, const SpatialGrid& sgrid, const ScanOptions& opts)
{
  const auto& eps = opts.eps_list;
  if (eps.size() < 3) throw DomainError("need ≥ 3 epsilons for a slope");
  for (std::size_t i = 0; i + 1 < eps.size(); ++i)
    if (!(eps[i + 1] < eps[i])) throw DomainError("eps_list must be strictly decreasing");
  for (double e : eps)
    if (!(e > 0.0 && e < 1.0)) throw DomainError("eps values must lie in (0, 1)");
  if (opts.samples < 1) throw DomainError("need at least one remainder sample");
  base_fields.validate();
  opts.solver.bgk.validate();

  const int d = base_fields.dim();
  const double R = base_fields.R;
  const double T_max = base_fields.T.maxCoeff();
  auto grid = std::make_shared<const VelocityGrid>(
      VelocityGrid::uniform_for_temperature(d, opts.velocity_nodes, R, T_max, opts.safety, opts.n_sigma));

  const int m = static_cast<int>(eps.size());
  RemainderScan out;
  out.eps_list = eps;
  out.norms.assign(m, 0.0);
  out.norms_par.assign(m, 0.0);
  out.norms_perp.assign(m, 0.0);
  out.steps.assign(m, 0);

  auto run_member = [&](int i) {
    SolverConfig cfg = opts.solver;
    cfg.eps = eps[i];
    const DistField f0 = opts.well_prepared
                             ? well_prepared_state(base_fields, sgrid, grid, cfg.eps, cfg.bgk, opts.scheme)
                             : conservative_maxwellian_field(base_fields, sgrid, grid);
    int n_steps = 0;
    choose_step(f0, cfg, &n_steps);
    // sample at step indices spread over the run, including t = 0
    std::vector<int> at;
    for (int s = 0; s <= opts.samples; ++s) at.push_back(static_cast<int>(std::lround(double(s) * n_steps / opts.samples)));
    SplitNorms worst;
    evolve(f0, cfg, [&](int k, double t, const DistField& f) {
      if (opts.on_snapshot && opts.snapshot_stride > 0 && k % opts.snapshot_stride == 0) opts.on_snapshot(i, k, t, f);
      if (std::find(at.begin(), at.end(), k) == at.end()) return;
      const SplitNorms r = remainder_norms(f, cfg.eps, cfg.bgk, R, opts.scheme);
      worst.total = std::max(worst.total, r.total);
      worst.par = std::max(worst.par, r.par);
      worst.perp = std::max(worst.perp, r.perp);
    });
    out.norms[i] = worst.total;
    out.norms_par[i] = worst.par;
    out.norms_perp[i] = worst.perp;
    out.steps[i] = n_steps;
  };

  const int n_threads = std::max(1, std::min(opts.threads, m));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int i = next++; i < m; i = next++) {
      try {
        run_member(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  const LineFit fit = loglog_fit(out.eps_list, out.norms);
  out.slope = fit.slope;
  out.intercept = fit.intercept;
  out.slope_ci = fit.residual;
  return out;
}

double gaussian_entropy(const MacroFields& fields, double dx)
{
  const int d = fields.dim();
  double H = 0.0;
  for (int c = 0; c < fields.n_cells(); ++c) {
    const double rho = fields.rho(c);
    const double rt = fields.R * fields.T(c);
    H += rho * (std::log(rho / std::pow(2.0 * std::numbers::pi * rt, 0.5 * d)) - 0.5 * d);
  }
  return H * dx;
}

EntropySeries entropy_monitor(const std::vector<double>& times, const std::vector<DistField>& trajectory,
                              double threshold)
{
  if (times.size() != trajectory.size()) throw DomainError("entropy_monitor: times and snapshots differ in length");
  EntropySeries out;
  out.times = times;
  for (const auto& f : trajectory) {
    const HFunctional h = h_functional(f);
    out.H.push_back(h.H);
    out.excluded += h.excluded;
  }
  for (std::size_t i = 1; i < out.H.size(); ++i) {
    const double inc = out.H[i] - out.H[i - 1];
    out.max_increase = std::max(out.max_increase, inc);
    if (inc > threshold) out.monotone = false;
  }
  return out;
}

EntropySeries entropy_run(const DistField& f0, const SolverConfig& cfg, double threshold)
{
  EntropySeries out;
  evolve(f0, cfg, [&](int, double t, const DistField& f) {
    const HFunctional h = h_functional(f);
    out.times.push_back(t);
    out.H.push_back(h.H);
    out.excluded += h.excluded;
  });
  for (std::size_t i = 1; i < out.H.size(); ++i) {
    const double inc = out.H[i] - out.H[i - 1];
    out.max_increase = std::max(out.max_increase, inc);
    if (inc > threshold) out.monotone = false;
  }
  return out;
}

}  // namespace kinlab
