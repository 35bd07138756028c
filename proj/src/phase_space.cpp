#include "kinlab/phase_space.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "kinlab/errors.hpp"

namespace kinlab {

namespace {

constexpr double kPi = 3.14159265358979323846;

Mat tensor_nodes(const Vec& axis_nodes, int dim)
{
  const int n = static_cast<int>(axis_nodes.size());
  int total = 1;
  for (int i = 0; i < dim; ++i) total *= n;
  Mat nodes(total, dim);
  for (int k = 0; k < total; ++k) {
    int rem = k;
    // last component varies fastest
    for (int c = dim - 1; c >= 0; --c) {
      nodes(k, c) = axis_nodes(rem % n);
      rem /= n;
    }
  }
  return nodes;
}

Vec tensor_weights(const Vec& axis_weights, int dim)
{
  const int n = static_cast<int>(axis_weights.size());
  int total = 1;
  for (int i = 0; i < dim; ++i) total *= n;
  Vec w(total);
  for (int k = 0; k < total; ++k) {
    int rem = k;
    double prod = 1.0;
    for (int c = dim - 1; c >= 0; --c) {
      prod *= axis_weights(rem % n);
      rem /= n;
    }
    w(k) = prod;
  }
  return w;
}

void check_distinct(const Mat& nodes)
{
  std::vector<int> order(nodes.rows());
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](int a, int b) {
    for (int c = 0; c < nodes.cols(); ++c) {
      if (nodes(a, c) != nodes(b, c)) return nodes(a, c) < nodes(b, c);
    }
    return false;
  };
  std::sort(order.begin(), order.end(), less);
  for (std::size_t k = 1; k < order.size(); ++k) {
    if ((nodes.row(order[k]) - nodes.row(order[k - 1])).cwiseAbs().maxCoeff() == 0.0)
      throw DomainError("velocity grid has duplicate nodes");
  }
}

}  // namespace

void gauss_hermite_rule(int n, Vec& nodes, Vec& weights)
{
  if (n < 1) throw DomainError("Gauss-Hermite rule needs at least one node");
  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite polynomials
  Vec diag = Vec::Zero(n);
  Vec off(std::max(n - 1, 1));
  for (int k = 1; k < n; ++k) off(k - 1) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Mat> eig;
  if (n == 1) {
    nodes = Vec::Zero(1);
    weights = Vec::Constant(1, std::sqrt(2.0 * kPi));
    return;
  }
  eig.computeFromTridiagonal(diag, off.head(n - 1), Eigen::ComputeEigenvectors);
  if (eig.info() != Eigen::Success) throw NumericalError("Gauss-Hermite eigensolver failed");
  nodes = eig.eigenvalues();
  weights.resize(n);
  for (int k = 0; k < n; ++k) {
    const double v0 = eig.eigenvectors()(0, k);
    weights(k) = std::sqrt(2.0 * kPi) * v0 * v0;
  }
  // symmetrize: the rule is exactly symmetric about 0
  for (int k = 0; k < n / 2; ++k) {
    const double x = 0.5 * (nodes(n - 1 - k) - nodes(k));
    const double w = 0.5 * (weights(k) + weights(n - 1 - k));
    nodes(k) = -x;
    nodes(n - 1 - k) = x;
    weights(k) = weights(n - 1 - k) = w;
  }
  if (n % 2 == 1) nodes(n / 2) = 0.0;
}

VelocityGrid::VelocityGrid(Mat nodes, Vec weights, GridKind kind)
    : nodes_(std::move(nodes))
    , weights_(std::move(weights))
    , kind_(kind)
{
  if (nodes_.cols() < 1 || nodes_.cols() > 3) throw DomainError("velocity dimension must be 1, 2 or 3");
  if (nodes_.rows() != weights_.size() || nodes_.rows() == 0)
    throw DomainError("velocity grid: node/weight count mismatch");
  if (!(weights_.array() > 0.0).all()) throw DomainError("velocity grid weights must be positive");
  if (!nodes_.allFinite()) throw DomainError("velocity grid nodes must be finite");
  check_distinct(nodes_);
}

VelocityGrid VelocityGrid::gauss_hermite(int dim, int n_per_axis, const Vec& center, double thermal_speed)
{
  if (center.size() != dim) throw DomainError("Gauss-Hermite center has wrong dimension");
  if (!(thermal_speed > 0.0)) throw DomainError("Gauss-Hermite thermal speed must be positive");
  Vec xi, omega;
  gauss_hermite_rule(n_per_axis, xi, omega);
  // weights against dv: omega * exp(xi^2/2) * s
  Vec w1(n_per_axis);
  for (int k = 0; k < n_per_axis; ++k) w1(k) = omega(k) * std::exp(0.5 * xi(k) * xi(k)) * thermal_speed;
  Mat nodes = tensor_nodes(xi * thermal_speed, dim);
  nodes.rowwise() += center.transpose();
  return VelocityGrid(std::move(nodes), tensor_weights(w1, dim), GridKind::GaussHermiteTensor);
}

VelocityGrid VelocityGrid::uniform(int dim, int n_per_axis, double half_width)
{
  if (n_per_axis < 2) throw DomainError("uniform velocity grid needs at least 2 nodes per axis");
  if (!(half_width > 0.0)) throw DomainError("uniform velocity grid half width must be positive");
  const double h = 2.0 * half_width / (n_per_axis - 1);
  Vec x(n_per_axis), w1 = Vec::Constant(n_per_axis, h);
  for (int k = 0; k < n_per_axis; ++k) x(k) = -half_width + k * h;
  w1(0) *= 0.5;
  w1(n_per_axis - 1) *= 0.5;
  return VelocityGrid(tensor_nodes(x, dim), tensor_weights(w1, dim), GridKind::UniformTruncated);
}

VelocityGrid VelocityGrid::uniform_for_temperature(int dim, int n_per_axis, double R, double T_max,
                                                   double safety, double n_sigma)
{
  if (!(R > 0.0) || !(T_max > 0.0)) throw DomainError("uniform grid scaling needs R, T_max > 0");
  return uniform(dim, n_per_axis, n_sigma * safety * std::sqrt(R * T_max));
}

double VelocityGrid::max_speed() const { return nodes_.cwiseAbs().maxCoeff(); }

VelocityGrid VelocityGrid::shifted(const Vec& shift) const
{
  Mat nodes = nodes_;
  nodes.rowwise() += shift.transpose();
  return VelocityGrid(std::move(nodes), weights_, kind_);
}

SpatialGrid::SpatialGrid(int n_cells, double length, int axis)
    : n_cells_(n_cells)
    , length_(length)
    , axis_(axis)
{
  if (n_cells < 1) throw DomainError("spatial grid needs at least one cell");
  if (!(length > 0.0)) throw DomainError("spatial grid length must be positive");
  if (axis < 0 || axis > 2) throw DomainError("spatial axis must be 0, 1 or 2");
  centers_.resize(n_cells);
  for (int i = 0; i < n_cells; ++i) centers_(i) = (i + 0.5) * dx();
}

void CellState::validate(int cell) const
{
  auto where = [cell] { return cell >= 0 ? " at cell " + std::to_string(cell) : std::string(); };
  if (!(rho > 0.0) || !std::isfinite(rho)) throw DomainError("non-positive density" + where());
  if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("non-positive temperature" + where());
  if (!(R > 0.0)) throw DomainError("gas constant must be positive");
  if (!u.allFinite()) throw DomainError("non-finite velocity" + where());
}

MacroFields::MacroFields(Vec rho_, Mat u_, Vec T_, double R_)
    : rho(std::move(rho_))
    , u(std::move(u_))
    , T(std::move(T_))
    , R(R_)
{
  if (rho.size() != u.rows() || rho.size() != T.size()) throw DomainError("macro fields: size mismatch");
}

MacroFields MacroFields::uniform(int n_cells, const CellState& state)
{
  Mat u(n_cells, state.dim());
  u.rowwise() = state.u.transpose();
  return MacroFields(Vec::Constant(n_cells, state.rho), std::move(u), Vec::Constant(n_cells, state.T), state.R);
}

CellState MacroFields::cell(int i) const
{
  return CellState{rho(i), u.row(i).transpose(), T(i), R};
}

void MacroFields::set_cell(int i, const CellState& s)
{
  rho(i) = s.rho;
  u.row(i) = s.u.transpose();
  T(i) = s.T;
}

void MacroFields::validate() const
{
  if (!(R > 0.0)) throw DomainError("gas constant must be positive");
  for (int i = 0; i < n_cells(); ++i) cell(i).validate(i);
}

VelocityLayout local_hermite_layout(const MacroFields& fields, int n_per_axis)
{
  fields.validate();
  VelocityLayout layout;
  layout.reserve(fields.n_cells());
  for (int i = 0; i < fields.n_cells(); ++i) {
    layout.push_back(std::make_shared<const VelocityGrid>(VelocityGrid::gauss_hermite(
        fields.dim(), n_per_axis, fields.u.row(i).transpose(), std::sqrt(fields.R * fields.T(i)))));
  }
  return layout;
}

DistField::DistField(SpatialGrid sgrid, VelocityGridPtr shared, CellNodeArray values)
    : DistField(std::move(sgrid), VelocityLayout{std::move(shared)}, std::move(values))
{
}

DistField::DistField(SpatialGrid sgrid, VelocityLayout layout, CellNodeArray values)
    : sgrid_(std::move(sgrid))
    , layout_(std::move(layout))
    , values_(std::move(values))
{
  if (layout_.empty() || !layout_.front()) throw DomainError("distribution needs a velocity grid");
  if (layout_.size() != 1 && static_cast<int>(layout_.size()) != sgrid_.n_cells())
    throw DomainError("velocity layout must be shared or one grid per cell");
  const int n = layout_.front()->size();
  for (const auto& g : layout_) {
    if (!g || g->size() != n || g->dim() != layout_.front()->dim())
      throw DomainError("per-cell velocity grids must share size and dimension");
  }
  if (values_.rows() != sgrid_.n_cells() || values_.cols() != n)
    throw DomainError("distribution values have wrong shape");
}

DistField DistField::with_values(CellNodeArray values) const { return DistField(sgrid_, layout_, std::move(values)); }

bool DistField::all_finite() const { return values_.allFinite(); }

Vec maxwellian_values(const CellState& state, const VelocityGrid& grid)
{
  state.validate();
  if (state.dim() != grid.dim()) throw DomainError("state and grid dimension differ");
  const double rt = state.R * state.T;
  const double prefactor = state.rho / std::pow(2.0 * kPi * rt, 0.5 * grid.dim());
  Vec m(grid.size());
  for (int k = 0; k < grid.size(); ++k) {
    const double c2 = (grid.nodes().row(k).transpose() - state.u).squaredNorm();
    m(k) = prefactor * std::exp(-c2 / (2.0 * rt));
  }
  return m;
}

Vec invariant_moments(const Eigen::Ref<const Vec>& f, const VelocityGrid& grid)
{
  const int d = grid.dim();
  Vec m = Vec::Zero(d + 2);
  for (int k = 0; k < grid.size(); ++k) {
    const double wf = grid.weights()(k) * f(k);
    m(0) += wf;
    for (int i = 0; i < d; ++i) m(1 + i) += wf * grid.nodes()(k, i);
    m(d + 1) += wf * grid.nodes().row(k).squaredNorm();
  }
  return m;
}

Vec conservative_maxwellian(const CellState& state, const VelocityGrid& grid)
{
  state.validate();
  const int d = grid.dim();
  const int n = grid.size();
  const double rt = state.R * state.T;
  Vec target(d + 2);
  target(0) = state.rho;
  target.segment(1, d) = state.rho * state.u;
  target(d + 1) = state.rho * state.u.squaredNorm() + d * state.rho * rt;

  // basis phi = (1, v, |v|^2) evaluated per node
  Mat phi(n, d + 2);
  phi.col(0).setOnes();
  phi.middleCols(1, d) = grid.nodes();
  phi.col(d + 1) = grid.nodes().rowwise().squaredNorm();

  Vec theta(d + 2);
  theta(0) = std::log(state.rho) - 0.5 * d * std::log(2.0 * kPi * rt) - state.u.squaredNorm() / (2.0 * rt);
  theta.segment(1, d) = state.u / rt;
  theta(d + 1) = -1.0 / (2.0 * rt);

  Vec scale = target.cwiseAbs();
  scale(0) = state.rho;
  for (int i = 0; i < d; ++i) scale(1 + i) = state.rho * std::sqrt(rt + state.u.squaredNorm());
  scale(d + 1) = target(d + 1);

  auto evaluate = [&](const Vec& th, Vec& f) {
    f = (phi * th).array().exp().matrix();
    Vec m = phi.transpose() * grid.weights().cwiseProduct(f);
    return Vec(m - target);
  };

  Vec f;
  Vec r = evaluate(theta, f);
  for (int it = 0; it < 50; ++it) {
    const double rnorm = r.cwiseQuotient(scale).cwiseAbs().maxCoeff();
    if (rnorm <= 1e-15) return f;
    Mat J = phi.transpose() * grid.weights().cwiseProduct(f).asDiagonal() * phi;
    Eigen::LDLT<Mat> ldlt(J);
    if (ldlt.info() != Eigen::Success) throw NumericalError("conservative Maxwellian: singular moment Jacobian");
    Vec step = ldlt.solve(r);
    double lambda = 1.0;
    Vec f_trial;
    Vec r_trial;
    for (int ls = 0; ls < 30; ++ls) {
      r_trial = evaluate(theta - lambda * step, f_trial);
      if (r_trial.cwiseQuotient(scale).cwiseAbs().maxCoeff() < rnorm || ls == 29) break;
      lambda *= 0.5;
    }
    const double new_norm = r_trial.cwiseQuotient(scale).cwiseAbs().maxCoeff();
    if (!(new_norm < rnorm)) {
      // stagnated at round-off level
      if (rnorm <= 1e-13) return f;
      throw NumericalError("conservative Maxwellian: Newton iteration stagnated");
    }
    theta -= lambda * step;
    f = f_trial;
    r = r_trial;
  }
  if (r.cwiseQuotient(scale).cwiseAbs().maxCoeff() <= 1e-13) return f;
  throw NumericalError("conservative Maxwellian: Newton iteration did not converge");
}

CellState cell_moments(const Eigen::Ref<const Vec>& f, const VelocityGrid& grid, double R, int cell)
{
  const int d = grid.dim();
  const Vec m = invariant_moments(f, grid);
  CellState s;
  s.R = R;
  s.rho = m(0);
  if (!(s.rho > 0.0) || !std::isfinite(s.rho)) throw DegenerateMomentError(cell, s.rho, 0.0);
  s.u = m.segment(1, d) / s.rho;
  s.T = (m(d + 1) - s.rho * s.u.squaredNorm()) / (d * s.rho * R);
  if (!(s.T > 0.0) || !std::isfinite(s.T) || !s.u.allFinite()) throw DegenerateMomentError(cell, s.rho, s.T);
  return s;
}

DistField maxwellian(const MacroFields& fields, const SpatialGrid& sgrid, VelocityGridPtr vgrid)
{
  return maxwellian(fields, sgrid, VelocityLayout{std::move(vgrid)});
}

DistField maxwellian(const MacroFields& fields, const SpatialGrid& sgrid, const VelocityLayout& layout)
{
  if (fields.n_cells() != sgrid.n_cells()) throw DomainError("fields and spatial grid differ in size");
  fields.validate();
  const int n = layout.front()->size();
  CellNodeArray values(fields.n_cells(), n);
  for (int i = 0; i < fields.n_cells(); ++i) {
    const VelocityGrid& g = *layout[layout.size() == 1 ? 0 : i];
    values.row(i) = maxwellian_values(fields.cell(i), g).transpose();
  }
  return DistField(sgrid, layout, std::move(values));
}

MacroFields moments(const DistField& f, double R)
{
  if (!f.all_finite()) throw DomainError("moments: distribution has non-finite values");
  const int nc = f.n_cells();
  const int d = f.dim();
  MacroFields out(Vec(nc), Mat(nc, d), Vec(nc), R);
  for (int i = 0; i < nc; ++i) out.set_cell(i, cell_moments(f.values().row(i).transpose(), f.vgrid(i), R, i));
  return out;
}

Mat centered_second_moment(const Eigen::Ref<const Vec>& f, const VelocityGrid& grid, const Vec& u)
{
  const int d = grid.dim();
  Mat P = Mat::Zero(d, d);
  for (int k = 0; k < grid.size(); ++k) {
    const Vec c = grid.nodes().row(k).transpose() - u;
    P.noalias() += grid.weights()(k) * f(k) * (c * c.transpose());
  }
  return P;
}

PressureTensor pressure_tensor(const DistField& f, const MacroFields& fields)
{
  if (fields.n_cells() != f.n_cells()) throw DomainError("pressure_tensor: size mismatch");
  const int d = f.dim();
  PressureTensor out;
  out.p.resize(f.n_cells());
  for (int i = 0; i < f.n_cells(); ++i) {
    Mat P = centered_second_moment(f.values().row(i).transpose(), f.vgrid(i), fields.u.row(i).transpose());
    P = (0.5 * (P + P.transpose())).eval();
    const double p = P.trace() / d;
    Mat tau = P - p * Mat::Identity(d, d);
    out.P.push_back(std::move(P));
    out.p(i) = p;
    out.tau.push_back(std::move(tau));
  }
  return out;
}

GaussianMomentReport gaussian_moment_check(const VelocityGrid& grid, const CellState& state)
{
  const int d = grid.dim();
  const Vec M = maxwellian_values(state, grid);
  const double rt = state.R * state.T;
  GaussianMomentReport rep;
  rep.dim = d;
  rep.second = Mat::Zero(d, d);
  rep.fourth.assign(d * d * d * d, 0.0);
  for (int k = 0; k < grid.size(); ++k) {
    const Vec c = grid.nodes().row(k).transpose() - state.u;
    const double wm = grid.weights()(k) * M(k);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        rep.second(i, j) += wm * c(i) * c(j);
        for (int a = 0; a < d; ++a)
          for (int b = 0; b < d; ++b) rep.fourth[((i * d + j) * d + a) * d + b] += wm * c(i) * c(j) * c(a) * c(b);
      }
  }
  auto delta = [](int a, int b) { return a == b ? 1.0 : 0.0; };
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      rep.second_moment_error =
          std::max(rep.second_moment_error, std::abs(rep.second(i, j) - state.rho * rt * delta(i, j)));
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) {
          const double exact = state.rho * rt * rt *
                               (delta(i, j) * delta(a, b) + delta(i, a) * delta(j, b) + delta(i, b) * delta(j, a));
          rep.fourth_moment_error = std::max(rep.fourth_moment_error, std::abs(rep.fourth_at(i, j, a, b) - exact));
        }
    }
  return rep;
}

}  // namespace kinlab
