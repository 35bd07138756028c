#include "kinlab/transient_growth.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include <unsupported/Eigen/MatrixFunctions>
#include <unsupported/Eigen/Splines>

#include "kinlab/errors.hpp"
#include "kinlab/periodic_derivative.hpp"

namespace kinlab {

namespace {

constexpr double kMaxExponent = 700.0;
constexpr double kMaxEigenvectorCondition = 1e8;
const Complex kI(0.0, 1.0);

/// Legendre polynomials and their first two derivatives, columns 0..nmax.
void legendre_table(int nmax, const Vec& x, Mat& P, Mat& dP, Mat& d2P)
{
  const int m = static_cast<int>(x.size());
  P = Mat::Zero(m, nmax + 1);
  dP = Mat::Zero(m, nmax + 1);
  d2P = Mat::Zero(m, nmax + 1);
  P.col(0).setOnes();
  if (nmax == 0) return;
  P.col(1) = x;
  dP.col(1).setOnes();
  for (int n = 1; n < nmax; ++n) {
    P.col(n + 1) = ((2.0 * n + 1.0) * x.cwiseProduct(P.col(n)) - n * P.col(n - 1)) / (n + 1.0);
    dP.col(n + 1) = dP.col(n - 1) + (2.0 * n + 1.0) * P.col(n);
    d2P.col(n + 1) = d2P.col(n - 1) + (2.0 * n + 1.0) * dP.col(n);
  }
}

/// Clamped (v) and Dirichlet (eta) bases on the points y.
void basis_tables(int ny, const Vec& y, Mat& phi, Mat& dphi, Mat& d2phi, Mat& psi, Mat& dpsi)
{
  Mat P, dP, d2P;
  legendre_table(ny + 3, y, P, dP, d2P);
  const int m = static_cast<int>(y.size());
  phi.resize(m, ny);
  dphi.resize(m, ny);
  d2phi.resize(m, ny);
  psi.resize(m, ny);
  dpsi.resize(m, ny);
  for (int k = 0; k < ny; ++k) {
    const double a = -2.0 * (2.0 * k + 5.0) / (2.0 * k + 7.0);
    const double b = (2.0 * k + 3.0) / (2.0 * k + 7.0);
    phi.col(k) = P.col(k) + a * P.col(k + 2) + b * P.col(k + 4);
    dphi.col(k) = dP.col(k) + a * dP.col(k + 2) + b * dP.col(k + 4);
    d2phi.col(k) = d2P.col(k) + a * d2P.col(k + 2) + b * d2P.col(k + 4);
    psi.col(k) = P.col(k) - P.col(k + 2);
    dpsi.col(k) = dP.col(k) - dP.col(k + 2);
  }
}

double largest_singular_value(const CMat& A)
{
  Eigen::JacobiSVD<CMat> svd(A);
  return svd.singularValues()(0);
}

}  // namespace

void ShearProblem::validate() const
{
  if (!(Re > 0.0) || !std::isfinite(Re)) throw DomainError("Reynolds number must be positive");
  if (ny < 16) throw DomainError("wall-normal resolution ny must be >= 16");
  if (!std::isfinite(kx) || !std::isfinite(kz)) throw DomainError("wavenumbers must be finite");
  if (kx == 0.0 && kz == 0.0) throw DomainError("kx = kz = 0 is the mean-flow mode and is excluded");
  if (profile == BaseProfile::Custom) {
    if (custom_y.size() != custom_U.size() || custom_y.size() < 4)
      throw DomainError("custom profile needs >= 4 matching (y, U) samples");
    for (std::size_t i = 0; i + 1 < custom_y.size(); ++i)
      if (!(custom_y[i + 1] > custom_y[i])) throw DomainError("custom profile y must be strictly increasing");
    if (custom_y.front() > -1.0 || custom_y.back() < 1.0)
      throw DomainError("custom profile must cover y in [-1, 1]");
    for (double u : custom_U)
      if (!std::isfinite(u)) throw DomainError("custom profile values must be finite");
  }
}

void gauss_legendre_rule(int n, Vec& nodes, Vec& weights)
{
  if (n < 1) throw DomainError("Gauss-Legendre rule needs n >= 1");
  Vec diag = Vec::Zero(n);
  Vec sub(std::max(n - 1, 0));
  for (int k = 1; k < n; ++k) sub(k - 1) = k / std::sqrt(4.0 * k * k - 1.0);
  Eigen::SelfAdjointEigenSolver<Mat> eig;
  eig.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  nodes = eig.eigenvalues();
  weights.resize(n);
  for (int i = 0; i < n; ++i) {
    double x = nodes(i);
    double dp = 1.0;
    for (int it = 0; it < 3; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 1; k < n; ++k) {
        const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
      }
      const double pn = n == 1 ? x : p1;
      const double pm = n == 1 ? 1.0 : p0;
      dp = n * (x * pn - pm) / (x * x - 1.0);
      x -= pn / dp;
    }
    nodes(i) = x;
    weights(i) = 2.0 / ((1.0 - x * x) * dp * dp);
  }
}

void base_flow(const ShearProblem& prob, const Vec& y, Vec& U, Vec& dU, Vec& d2U)
{
  const int m = static_cast<int>(y.size());
  U = Vec::Zero(m);
  dU = Vec::Zero(m);
  d2U = Vec::Zero(m);
  switch (prob.profile) {
    case BaseProfile::Couette:
      U = y;
      dU.setOnes();
      break;
    case BaseProfile::Quiescent: break;
    case BaseProfile::Custom: {
      using Spline1 = Eigen::Spline<double, 1>;
      const int n = static_cast<int>(prob.custom_y.size());
      const double y0 = prob.custom_y.front(), span = prob.custom_y.back() - y0;
      Eigen::RowVectorXd knots(n), pts(n);
      for (int i = 0; i < n; ++i) {
        knots(i) = (prob.custom_y[i] - y0) / span;
        pts(i) = prob.custom_U[i];
      }
      const Spline1 s = Eigen::SplineFitting<Spline1>::Interpolate(pts, 3, knots);
      for (int i = 0; i < m; ++i) {
        const auto der = s.derivatives((y(i) - y0) / span, 2);
        U(i) = der(0, 0);
        dU(i) = der(0, 1) / span;
        d2U(i) = der(0, 2) / (span * span);
      }
      break;
    }
  }
}

ShearOperator build_shear_operator(const ShearProblem& prob)
{
  prob.validate();
  ShearOperator op;
  op.problem = prob;
  const int ny = prob.ny;
  op.nv = op.neta = ny;
  op.k2 = prob.kx * prob.kx + prob.kz * prob.kz;
  gauss_legendre_rule(ny + 8, op.yq, op.wq);
  base_flow(prob, op.yq, op.U, op.dU, op.d2U);
  basis_tables(ny, op.yq, op.phi, op.dphi, op.d2phi, op.psi, op.dpsi);

  const double k2 = op.k2, nu = 1.0 / prob.Re;
  const auto W = op.wq.asDiagonal();
  const Mat lap = op.d2phi - k2 * op.phi;
  const Mat Mv = op.dphi.transpose() * W * op.dphi + k2 * op.phi.transpose() * W * op.phi;
  const Mat Meta = op.psi.transpose() * W * op.psi;
  const Mat UlapV = op.phi.transpose() * W * op.U.asDiagonal() * lap;
  const Mat U2V = op.phi.transpose() * W * op.d2U.asDiagonal() * op.phi;
  const Mat visc_v = lap.transpose() * W * lap;
  const Mat Ueta = op.psi.transpose() * W * op.U.asDiagonal() * op.psi;
  const Mat visc_eta = op.dpsi.transpose() * W * op.dpsi + k2 * Meta;
  const Mat coup = op.psi.transpose() * W * op.dU.asDiagonal() * op.phi;

  const CMat Kv = kI * prob.kx * UlapV.cast<Complex>() - kI * prob.kx * U2V.cast<Complex>() - nu * visc_v.cast<Complex>();
  const CMat Keta = -kI * prob.kx * Ueta.cast<Complex>() - nu * visc_eta.cast<Complex>();
  const CMat Cpl = -kI * prob.kz * coup.cast<Complex>();

  Eigen::LLT<Mat> llt_v(Mv), llt_eta(Meta);
  if (llt_v.info() != Eigen::Success || llt_eta.info() != Eigen::Success)
    throw NumericalError("shear operator: singular mass matrix");
  const int n = 2 * ny;
  op.L = CMat::Zero(n, n);
  op.L.topLeftCorner(ny, ny) = llt_v.solve(Mat::Identity(ny, ny)).cast<Complex>() * Kv;
  const CMat Meta_inv = llt_eta.solve(Mat::Identity(ny, ny)).cast<Complex>();
  op.L.bottomLeftCorner(ny, ny) = Meta_inv * Cpl;
  op.L.bottomRightCorner(ny, ny) = Meta_inv * Keta;

  Mat Q = Mat::Zero(n, n);
  Q.topLeftCorner(ny, ny) = Mv / k2;
  Q.bottomRightCorner(ny, ny) = Meta / k2;
  Q = (0.5 * (Q + Q.transpose())).eval();
  Eigen::LLT<Mat> lq(Q);
  if (lq.info() != Eigen::Success) throw NumericalError("shear operator: energy weight is not positive definite");
  op.Q = Q.cast<Complex>();
  op.F = Mat(lq.matrixU()).cast<Complex>();
  if (!op.L.allFinite()) throw NumericalError("shear operator: non-finite entries");
  return op;
}

VelocityProfile reconstruct_velocity(const ShearOperator& op, const CVec& x, const Vec& y)
{
  if (x.size() != op.nv + op.neta) throw DomainError("state size does not match the operator");
  Mat phi, dphi, d2phi, psi, dpsi;
  basis_tables(op.problem.ny, y, phi, dphi, d2phi, psi, dpsi);
  const CVec q = x.head(op.nv), p = x.tail(op.neta);
  VelocityProfile out;
  out.y = y;
  out.v = phi.cast<Complex>() * q;
  const CVec Dv = dphi.cast<Complex>() * q;
  out.eta = psi.cast<Complex>() * p;
  const double kx = op.problem.kx, kz = op.problem.kz;
  out.u = (kI * kx * Dv - kI * kz * out.eta) / op.k2;
  out.w = (kI * kz * Dv + kI * kx * out.eta) / op.k2;
  return out;
}

Propagator::Propagator(const CMat& L, const CMat& Q)
{
  if (L.rows() != L.cols() || Q.rows() != L.rows() || Q.cols() != L.cols())
    throw DomainError("propagator: operator and weight shapes differ");
  const CMat Qh = 0.5 * (Q + Q.adjoint());
  Eigen::LLT<CMat> llt(Qh);
  if (llt.info() != Eigen::Success) throw NumericalError("energy weight is not positive definite");
  F_ = llt.matrixU();
  const int n = static_cast<int>(L.rows());
  Finv_ = F_.triangularView<Eigen::Upper>().solve(CMat::Identity(n, n));
  B_ = F_ * L * Finv_;
  Eigen::ComplexEigenSolver<CMat> es(B_);
  if (es.info() != Eigen::Success) throw NumericalError("propagator: eigensolver failed");
  lambda_ = es.eigenvalues();
  V_ = es.eigenvectors();
  Eigen::JacobiSVD<CMat> svd(V_);
  const auto& sv = svd.singularValues();
  const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  diag_ = cond < kMaxEigenvectorCondition;
  if (diag_) Vinv_ = V_.partialPivLu().inverse();
}

double Propagator::abscissa() const { return lambda_.real().maxCoeff(); }

CMat Propagator::energy_propagator(double t) const
{
  if (t < 0.0) throw DomainError("propagator: negative time");
  const int n = static_cast<int>(B_.rows());
  if (t == 0.0) return CMat::Identity(n, n);
  if (abscissa() * t > kMaxExponent) {
    std::ostringstream os;
    os << "matrix exponential overflows at t = " << t << " (abscissa " << abscissa() << "); shrink the time grid";
    throw RangeError(os.str());
  }
  CMat E;
  if (diag_) {
    const CVec ex = (lambda_ * t).array().exp().matrix();
    E = V_ * ex.asDiagonal() * Vinv_;
  } else {
    E = (B_ * t).exp();
  }
  if (!E.allFinite()) throw RangeError("matrix exponential produced non-finite entries; shrink the time grid");
  return E;
}

CVec Propagator::evolve(const CVec& x, double t) const { return Finv_ * (energy_propagator(t) * (F_ * x)); }

double Propagator::gain(double t) const
{
  const double s = largest_singular_value(energy_propagator(t));
  return s * s;
}

std::vector<double> default_t_grid(double Re, int n, double t_ref)
{
  if (n < 2) throw DomainError("time grid needs at least two points");
  std::vector<double> t{0.0};
  const double lo = std::log(0.1 * t_ref), hi = std::log(2.0 * Re * t_ref);
  for (int i = 0; i < n - 1; ++i) t.push_back(std::exp(lo + (hi - lo) * i / std::max(n - 2, 1)));
  return t;
}

GrowthEnvelope growth_envelope(const CMat& L, const CMat& Q, const std::vector<double>& t_grid, bool refine)
{
  std::vector<double> t = t_grid;
  std::sort(t.begin(), t.end());
  if (t.empty() || t.front() != 0.0) throw DomainError("t_grid must include t = 0");
  for (double s : t)
    if (!std::isfinite(s)) throw DomainError("t_grid must be finite");
  const Propagator prop(L, Q);
  GrowthEnvelope env;
  env.method = prop.diagonalized() ? "diagonalization" : "scaling-squaring";
  env.abscissa = prop.abscissa();
  for (double s : t) {
    env.times.push_back(s);
    env.G.push_back(prop.gain(s));
  }
  auto best = std::max_element(env.G.begin(), env.G.end());
  std::size_t ib = static_cast<std::size_t>(best - env.G.begin());
  env.G_max = *best;
  env.t_opt = env.times[ib];

  if (refine && ib > 0 && ib + 1 < env.times.size()) {
    // golden-section search for the maximum on the bracketing interval
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = env.times[ib - 1], b = env.times[ib + 1];
    double c = b - gr * (b - a), d = a + gr * (b - a);
    double gc = prop.gain(c), gd = prop.gain(d);
    for (int it = 0; it < 60 && (b - a) > 1e-10 * std::max(1.0, b); ++it) {
      if (gc > gd) {
        b = d;
        d = c;
        gd = gc;
        c = b - gr * (b - a);
        gc = prop.gain(c);
      } else {
        a = c;
        c = d;
        gc = gd;
        d = a + gr * (b - a);
        gd = prop.gain(d);
      }
    }
    const double tr = gc > gd ? c : d;
    const double gmax = std::max(gc, gd);
    if (gmax > env.G_max) {
      auto pos = std::lower_bound(env.times.begin(), env.times.end(), tr);
      const auto idx = pos - env.times.begin();
      env.times.insert(pos, tr);
      env.G.insert(env.G.begin() + idx, gmax);
      env.G_max = gmax;
      env.t_opt = tr;
    }
  }

  Eigen::JacobiSVD<CMat> svd(prop.energy_propagator(env.t_opt), Eigen::ComputeFullV);
  const CVec w = svd.matrixV().col(0);
  env.optimal_seed = prop.F().triangularView<Eigen::Upper>().solve(w);
  return env;
}

GrowthEnvelope growth_envelope(const ShearOperator& op, std::vector<double> t_grid, bool refine)
{
  if (t_grid.empty()) t_grid = default_t_grid(op.problem.Re);
  return growth_envelope(op.L, op.Q, t_grid, refine);
}

EnergyBudget energy_budget(const ShearOperator& op, const CVec& x)
{
  if (x.size() != op.nv + op.neta) throw DomainError("state size does not match the operator");
  const CVec q = x.head(op.nv), p = x.tail(op.neta);
  const double kx = op.problem.kx, kz = op.problem.kz, k2 = op.k2, nu = 1.0 / op.problem.Re;
  const CVec v = op.phi.cast<Complex>() * q;
  const CVec Dv = op.dphi.cast<Complex>() * q;
  const CVec D2v = op.d2phi.cast<Complex>() * q;
  const CVec eta = op.psi.cast<Complex>() * p;
  const CVec Deta = op.dpsi.cast<Complex>() * p;
  const CVec u = (kI * kx * Dv - kI * kz * eta) / k2;
  const CVec w = (kI * kz * Dv + kI * kx * eta) / k2;
  const CVec Du = (kI * kx * D2v - kI * kz * Deta) / k2;
  const CVec Dw = (kI * kz * D2v + kI * kx * Deta) / k2;

  EnergyBudget b;
  b.energy = 0.5 * (x.adjoint() * op.Q * x)(0).real();
  b.dEdt = (x.adjoint() * op.Q * (op.L * x))(0).real();
  for (int g = 0; g < op.yq.size(); ++g) {
    const double wg = op.wq(g);
    b.production -= wg * (std::conj(u(g)) * v(g)).real() * op.dU(g);
    const double grad2 = std::norm(Du(g)) + std::norm(Dv(g)) + std::norm(Dw(g)) +
                         k2 * (std::norm(u(g)) + std::norm(v(g)) + std::norm(w(g)));
    b.dissipation += wg * nu * grad2;
  }
  b.residual = std::abs(b.dEdt - (b.production - b.dissipation));
  return b;
}

BudgetTrajectory budget_along_trajectory(const ShearOperator& op, const CVec& x0, const std::vector<double>& times)
{
  const Propagator prop(op.L, op.Q);
  auto energy = [&](double t) {
    const CVec x = prop.evolve(x0, t);
    return 0.5 * (x.adjoint() * op.Q * x)(0).real();
  };
  BudgetTrajectory out;
  out.times = times;
  for (double t : times) {
    const EnergyBudget b = energy_budget(op, prop.evolve(x0, t));
    const double scale = std::max(std::abs(b.production), b.dissipation);
    const double rel = scale > 0.0 ? b.residual / scale : b.residual;
    out.max_rel_residual = std::max(out.max_rel_residual, rel);

    const double h = 1e-4 * std::max(1.0, t);
    const double dEdt_fd = t >= h ? (energy(t + h) - energy(t - h)) / (2.0 * h)
                                  : (-3.0 * energy(t) + 4.0 * energy(t + h) - energy(t + 2.0 * h)) / (2.0 * h);
    const double fd_res = std::abs(dEdt_fd - (b.production - b.dissipation));
    out.max_fd_rel_residual = std::max(out.max_fd_rel_residual, scale > 0.0 ? fd_res / scale : fd_res);
    out.budgets.push_back(b);
  }
  return out;
}

SeedThreshold seed_threshold(double G_max, double a0, double a_nl)
{
  if (!(a0 > 0.0) || !(a_nl > 0.0)) throw DomainError("seed amplitudes a0 and a_nl must be positive");
  if (!(G_max >= 0.0) || !std::isfinite(G_max)) throw DomainError("G_max must be finite and non-negative");
  SeedThreshold s;
  s.a0 = a0;
  s.a_nl = a_nl;
  s.G_max = G_max;
  s.amplified = std::sqrt(G_max) * a0;
  s.required_factor = a_nl / a0;
  s.required_G = s.required_factor * s.required_factor;
  s.met = G_max >= s.required_G * (1.0 - 1e-12);
  return s;
}

SeedThreshold seed_threshold(const GrowthEnvelope& env, double a0, double a_nl)
{
  return seed_threshold(env.G_max, a0, a_nl);
}

double stress_seed_amplitude(double eps, double tau1_max, double rho, double RT)
{
  if (!(rho > 0.0) || !(RT > 0.0)) throw DomainError("stress seed amplitude needs rho, RT > 0");
  return eps * std::abs(tau1_max) / (rho * std::sqrt(RT));
}

ReSweep re_sweep(const ShearProblem& base, const std::vector<double>& Re_list, int threads)
{
  if (Re_list.size() < 2) throw DomainError("Re sweep needs at least two Reynolds numbers");
  const int m = static_cast<int>(Re_list.size());
  ReSweep out;
  out.Re = Re_list;
  out.G_max.assign(m, 0.0);
  out.t_opt.assign(m, 0.0);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex mtx;
  auto worker = [&] {
    for (int i = next++; i < m; i = next++) {
      try {
        ShearProblem p = base;
        p.Re = Re_list[i];
        const GrowthEnvelope env = growth_envelope(build_shear_operator(p));
        out.G_max[i] = env.G_max;
        out.t_opt[i] = env.t_opt;
      } catch (...) {
        std::lock_guard<std::mutex> lock(mtx);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int t = 1; t < std::max(1, std::min(threads, m)); ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
  const LineFit fit = loglog_fit(out.Re, out.G_max);
  out.slope = fit.slope;
  out.intercept = fit.intercept;
  out.fit_residual = fit.residual;
  return out;
}

EnergyBalanceReport macroscopic_energy_balance(const std::vector<double>& times,
                                               const std::vector<DistField>& trajectory, double eps,
                                               const BgkConfig& bgk, double R, double tolerance)
{
  if (times.size() != trajectory.size() || times.size() < 3)
    throw DomainError("energy balance needs >= 3 snapshots with matching times");
  bgk.validate();
  EnergyBalanceReport rep;
  rep.times = times;
  const SpatialGrid& sg = trajectory.front().sgrid();
  const int a = sg.axis();
  const double dx = sg.dx();
  const PeriodicDerivative D(sg.n_cells(), sg.length());
  for (const DistField& f : trajectory) {
    const MacroFields fields = moments(f, R);
    const PressureTensor pt = pressure_tensor(f, fields);
    const StrainRate sr = strain_rate(fields, sg);
    const int d = fields.dim();
    Mat grad_u(fields.n_cells(), d);
    for (int j = 0; j < d; ++j) grad_u.col(j) = D.apply(fields.u.col(j));
    double K = 0.0, sw = 0.0, pw = 0.0, cw = 0.0;
    for (int c = 0; c < fields.n_cells(); ++c) {
      K += 0.5 * fields.rho(c) * fields.u.row(c).squaredNorm();
      sw += pt.tau[c].row(a).dot(grad_u.row(c));
      pw += pt.p(c) * grad_u(c, a);
      const double mu = fields.rho(c) * bgk.tau * R * fields.T(c);
      cw -= 2.0 * eps * mu * sr.S[c].squaredNorm();
    }
    rep.kinetic_energy.push_back(K * dx);
    rep.stress_work.push_back(sw * dx);
    rep.pressure_work.push_back(pw * dx);
    rep.constitutive.push_back(cw * dx);
    rep.max_dissipation = std::max(rep.max_dissipation, std::abs(cw * dx));
  }
  const std::size_t n = times.size();
  rep.dKdt.assign(n, 0.0);
  double worst_k = 0.0, worst_c = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    rep.dKdt[i] = (rep.kinetic_energy[i + 1] - rep.kinetic_energy[i - 1]) / (times[i + 1] - times[i - 1]);
    worst_k = std::max(worst_k, std::abs(rep.dKdt[i] - rep.stress_work[i] - rep.pressure_work[i]));
    worst_c = std::max(worst_c, std::abs(rep.dKdt[i] - rep.constitutive[i] - rep.pressure_work[i]));
  }
  const double scale = rep.max_dissipation > 0.0 ? rep.max_dissipation : 1.0;
  rep.residual_kinetic = worst_k / scale;
  rep.residual_constitutive = worst_c / scale;
  rep.pass = rep.residual_kinetic <= tolerance && rep.residual_constitutive <= tolerance;
  return rep;
}

EnergyBalanceReport shear_energy_balance(const EnergyBalanceOptions& opts, double tolerance)
{
  if (opts.d < 2) throw DomainError("shear energy balance requires d >= 2");
  const SpatialGrid sg(opts.n_cells, opts.length, 1);
  const CellState base{1.0, Vec::Zero(opts.d), 1.0, 1.0};
  const MacroFields fields = manufactured_fields(FieldProfile::Shear, sg, opts.d, opts.shear, base);
  auto grid = std::make_shared<const VelocityGrid>(
      VelocityGrid::uniform_for_temperature(opts.d, opts.velocity_nodes, base.R, fields.T.maxCoeff()));
  const DistField f0 = well_prepared_state(fields, sg, grid, opts.eps, opts.bgk);
  SolverConfig cfg;
  cfg.eps = opts.eps;
  cfg.bgk = opts.bgk;
  cfg.t_final = opts.t_final;
  cfg.cfl = opts.cfl;
  cfg.scheme = opts.scheme;
  cfg.advection = opts.advection;
  cfg.relax_resolution = opts.relax_resolution;
  std::vector<double> times;
  std::vector<DistField> traj;
  evolve(f0, cfg, [&](int, double t, const DistField& f) {
    times.push_back(t);
    traj.push_back(f);
  });
  return macroscopic_energy_balance(times, traj, opts.eps, opts.bgk, base.R, tolerance);
}

}  // namespace kinlab
