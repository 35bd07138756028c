#include "kinlab/collision.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "kinlab/errors.hpp"

namespace kinlab {

namespace {

constexpr double kMaxGramCondition = 1e12;

/// Modified Gram-Schmidt on the columns, run twice.
Mat orthonormalize(Mat A)
{
  for (int pass = 0; pass < 2; ++pass) {
    for (int j = 0; j < A.cols(); ++j) {
      for (int i = 0; i < j; ++i) A.col(j) -= A.col(i).dot(A.col(j)) * A.col(i);
      const double nrm = A.col(j).norm();
      if (!(nrm > 0.0)) throw NumericalError("Gram-Schmidt: dependent invariant vectors");
      A.col(j) /= nrm;
    }
  }
  return A;
}

}  // namespace

void BgkConfig::validate() const
{
  if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("BGK relaxation time must be positive");
}

DistField bgk_apply(const DistField& f, const BgkConfig& cfg)
{
  cfg.validate();
  CellNodeArray out(f.n_cells(), f.n_nodes());
  for (int c = 0; c < f.n_cells(); ++c) {
    const Vec fc = f.values().row(c).transpose();
    // only the product R*T enters the equilibrium, so R = 1 is exact here
    const CellState s = cell_moments(fc, f.vgrid(c), 1.0, c);
    const Vec M = conservative_maxwellian(s, f.vgrid(c));
    out.row(c) = ((M - fc) / cfg.tau).transpose();
  }
  return f.with_values(std::move(out));
}

WeightedSpace::WeightedSpace(Vec weights, Vec maxwellian_ref, VelocityGridPtr grid)
    : weights_(std::move(weights))
    , mref_(std::move(maxwellian_ref))
    , grid_(std::move(grid))
{
  if (weights_.size() != mref_.size() || weights_.size() == 0) throw DomainError("weighted space: size mismatch");
  if (!(weights_.array() > 0.0).all()) throw DomainError("weighted space: weights must be positive");
  if (!(mref_.array() > 0.0).all())
    throw DomainError("weighted space: reference Maxwellian must be positive at every node");
  scale_ = weights_.cwiseQuotient(mref_).cwiseSqrt();
}

WeightedSpace WeightedSpace::euclidean(int n) { return WeightedSpace(Vec::Ones(n), Vec::Ones(n)); }

double WeightedSpace::inner(const Vec& g, const Vec& h) const { return to_iso(g).dot(to_iso(h)); }

double WeightedSpace::norm(const Vec& g) const { return to_iso(g).norm(); }

LinearizedOp::LinearizedOp(WeightedSpace space, Mat iso, Mat null_iso)
    : space_(std::move(space))
    , iso_(std::move(iso))
    , null_iso_(std::move(null_iso))
{
  const int n = size();
  const int m = static_cast<int>(null_iso_.cols());
  null_nodal_.resize(n, m);
  for (int j = 0; j < m; ++j) null_nodal_.col(j) = space_.from_iso(null_iso_.col(j));

  if (m >= n) throw DomainError("nullspace fills the whole space; no complement to invert on");
  Eigen::HouseholderQR<Mat> qr(null_iso_);
  const Mat Qfull = qr.householderQ() * Mat::Identity(n, n);
  const Mat C = Qfull.rightCols(n - m);
  Mat K = -(C.transpose() * iso_ * C);
  K = (0.5 * (K + K.transpose())).eval();
  Eigen::SelfAdjointEigenSolver<Mat> eig(K);
  if (eig.info() != Eigen::Success) throw NumericalError("eigensolver failed on the complement block");
  complement_eigs_ = eig.eigenvalues();
  gap_ = complement_eigs_.minCoeff();
  if (!(gap_ > 0.0)) {
    std::ostringstream os;
    os << "operator is not coercive on the nullspace complement (smallest eigenvalue of -L = " << gap_ << ")";
    throw NumericalError(os.str());
  }
  const Mat& V = eig.eigenvectors();
  const Mat Kinv = V * complement_eigs_.cwiseInverse().asDiagonal() * V.transpose();
  iso_pinv_ = -(C * Kinv * C.transpose());
  c_inv_ = 1.0 / gap_;
}

LinearizedOp LinearizedOp::bgk(const CellState& state, VelocityGridPtr grid, const BgkConfig& cfg)
{
  cfg.validate();
  state.validate();
  if (!grid) throw DomainError("linearized operator needs a velocity grid");
  const int d = grid->dim();
  const int n = grid->size();
  if (state.dim() != d) throw DomainError("state and grid dimension differ");
  const Vec M = maxwellian_values(state, *grid);
  WeightedSpace space(grid->weights(), M, grid);

  // Invariants (deviation convention): M, C_i M, (|C|^2/RT - d) M, in isometric coordinates.
  const double rt = state.R * state.T;
  const Vec root_wm = grid->weights().cwiseProduct(M).cwiseSqrt();
  Mat inv(n, d + 2);
  for (int k = 0; k < n; ++k) {
    const Vec c = grid->nodes().row(k).transpose() - state.u;
    inv(k, 0) = 1.0;
    for (int i = 0; i < d; ++i) inv(k, 1 + i) = c(i) / std::sqrt(rt);
    inv(k, d + 1) = c.squaredNorm() / rt - d;
  }
  inv = root_wm.asDiagonal() * inv;

  Mat normalized = inv;
  for (int j = 0; j < normalized.cols(); ++j) {
    const double nrm = normalized.col(j).norm();
    if (!(nrm > 0.0)) throw IllConditionedBasisError(std::numeric_limits<double>::infinity());
    normalized.col(j) /= nrm;
  }
  const Mat gram = normalized.transpose() * normalized;
  Eigen::SelfAdjointEigenSolver<Mat> geig(gram, Eigen::EigenvaluesOnly);
  const double gmin = geig.eigenvalues().minCoeff();
  const double cond = gmin > 0.0 ? geig.eigenvalues().maxCoeff() / gmin : std::numeric_limits<double>::infinity();
  if (!(cond < kMaxGramCondition)) throw IllConditionedBasisError(cond);

  Mat Q = orthonormalize(inv);
  Mat A = (Q * Q.transpose() - Mat::Identity(n, n)) / cfg.tau;
  A = (0.5 * (A + A.transpose())).eval();
  return LinearizedOp(std::move(space), std::move(A), std::move(Q));
}

LinearizedOp LinearizedOp::synthetic(const Mat& iso_matrix, WeightedSpace space, double null_tol)
{
  const int n = space.size();
  if (iso_matrix.rows() != n || iso_matrix.cols() != n) throw DomainError("synthetic operator: shape mismatch");
  if (!iso_matrix.allFinite()) throw DomainError("synthetic operator: non-finite entries");
  const double scale = std::max(iso_matrix.cwiseAbs().maxCoeff(), 1e-300);
  if ((iso_matrix - iso_matrix.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw DomainError("synthetic operator must be symmetric");
  const Mat A = 0.5 * (iso_matrix + iso_matrix.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> eig(A);
  if (eig.info() != Eigen::Success) throw NumericalError("synthetic operator: eigensolver failed");
  const double radius = eig.eigenvalues().cwiseAbs().maxCoeff();
  const double thresh = null_tol * std::max(radius, 1.0);
  std::vector<int> null_idx;
  for (int k = 0; k < n; ++k) {
    const double lam = eig.eigenvalues()(k);
    if (lam > thresh) throw DomainError("synthetic operator must be negative semidefinite");
    if (std::abs(lam) <= thresh) null_idx.push_back(k);
  }
  Mat null_iso(n, static_cast<int>(null_idx.size()));
  for (std::size_t j = 0; j < null_idx.size(); ++j) null_iso.col(j) = eig.eigenvectors().col(null_idx[j]);
  return LinearizedOp(std::move(space), A, std::move(null_iso));
}

LinearizedOp LinearizedOp::synthetic(const Mat& iso_matrix, double null_tol)
{
  return synthetic(iso_matrix, WeightedSpace::euclidean(static_cast<int>(iso_matrix.rows())), null_tol);
}

Mat LinearizedOp::nodal_matrix() const
{
  const Vec& s = space_.iso_scale();
  return s.cwiseInverse().asDiagonal() * iso_ * s.asDiagonal();
}

Mat LinearizedOp::nodal_pseudoinverse() const
{
  const Vec& s = space_.iso_scale();
  return s.cwiseInverse().asDiagonal() * iso_pinv_ * s.asDiagonal();
}

Vec LinearizedOp::apply(const Vec& g) const
{
  if (g.size() != size()) throw DomainError("apply: vector size mismatch");
  return space_.from_iso(iso_ * space_.to_iso(g));
}

Vec project_null(const Vec& g, const LinearizedOp& op)
{
  if (g.size() != op.size()) throw DomainError("project_null: vector size mismatch");
  const Mat& Q = op.nullspace_iso();
  const Vec gi = op.space().to_iso(g);
  return op.space().from_iso(Q * (Q.transpose() * gi));
}

void InverseGainTracker::record(double gain)
{
  max_gain = std::max(max_gain, gain);
  ++applications;
}

Vec pseudoinverse_apply(const Vec& h, const LinearizedOp& op, InverseGainTracker* tracker)
{
  if (h.size() != op.size()) throw DomainError("pseudoinverse_apply: vector size mismatch");
  const Vec hi = op.space().to_iso(h);
  const double hnorm = hi.norm();
  if (hnorm == 0.0) return Vec::Zero(h.size());
  const Vec p = op.nullspace_iso().transpose() * hi;
  const double ratio = p.norm() / hnorm;
  if (!(ratio <= kTolSolv)) {
    std::ostringstream os;
    os << "right-hand side violates the solvability condition: ||P h|| / ||h|| = " << ratio;
    throw SolvabilityError(ratio, os.str());
  }
  const Vec gi = op.iso_pseudoinverse() * hi;
  const Vec target = hi - op.nullspace_iso() * p;
  const double resid = (op.iso_matrix() * gi - target).norm();
  if (!(resid <= kTolResid * hnorm)) {
    std::ostringstream os;
    os << "pseudoinverse residual too large: " << resid / hnorm;
    throw NumericalError(os.str());
  }
  if (tracker) tracker->record(gi.norm() / hnorm);
  return op.space().from_iso(gi);
}

SpectrumReport spectral_gap(const LinearizedOp& op)
{
  Eigen::SelfAdjointEigenSolver<Mat> eig(op.iso_matrix());
  if (eig.info() != Eigen::Success) throw NumericalError("spectral_gap: eigensolver did not converge");
  SpectrumReport rep;
  rep.eigenvalues = eig.eigenvalues();
  for (int k = 0; k < rep.eigenvalues.size(); ++k) {
    const double r = (op.iso_matrix() * eig.eigenvectors().col(k) - rep.eigenvalues(k) * eig.eigenvectors().col(k)).norm();
    rep.eigen_residual = std::max(rep.eigen_residual, r);
  }
  const double scale = std::max(1.0, rep.eigenvalues.cwiseAbs().maxCoeff());
  if (!(rep.eigen_residual <= 1e-8 * scale)) {
    std::ostringstream os;
    os << "spectral_gap: eigenpair residual " << rep.eigen_residual << " too large";
    throw NumericalError(os.str());
  }
  rep.nullspace_dim = op.nullspace_dim();
  rep.nullspace_residuals.resize(op.nullspace_dim());
  for (int j = 0; j < op.nullspace_dim(); ++j)
    rep.nullspace_residuals(j) = (op.iso_matrix() * op.nullspace_iso().col(j)).norm();
  rep.lambda0 = op.gap();
  rep.c_inv = op.c_inv();
  return rep;
}

std::vector<CellState> interpolate_states(const CellState& a, const CellState& b, int n, std::vector<double>* params)
{
  if (n < 2) throw DomainError("state path needs at least two points");
  if (a.dim() != b.dim()) throw DomainError("state path endpoints differ in dimension");
  std::vector<CellState> path;
  if (params) params->clear();
  for (int i = 0; i < n; ++i) {
    const double s = static_cast<double>(i) / (n - 1);
    path.push_back(CellState{(1 - s) * a.rho + s * b.rho, (1 - s) * a.u + s * b.u, (1 - s) * a.T + s * b.T, a.R});
    if (params) params->push_back(s);
  }
  return path;
}

ContinuityReport pseudoinverse_continuity_scan(const std::vector<CellState>& path, const std::vector<double>& params,
                                               VelocityGridPtr grid, const BgkConfig& cfg)
{
  if (path.size() < 2 || path.size() != params.size())
    throw DomainError("continuity scan needs >= 2 states with matching parameters");
  for (std::size_t i = 0; i < path.size(); ++i) path[i].validate(static_cast<int>(i));
  std::vector<Mat> pinv;
  Vec ref_scale;
  for (const auto& s : path) {
    const LinearizedOp op = LinearizedOp::bgk(s, grid, cfg);
    if (ref_scale.size() == 0) ref_scale = op.space().iso_scale();
    pinv.push_back(op.nodal_pseudoinverse());
  }
  ContinuityReport rep;
  rep.params = params;
  for (std::size_t i = 0; i + 1 < pinv.size(); ++i) {
    const Mat diff = ref_scale.asDiagonal() * (pinv[i + 1] - pinv[i]) * ref_scale.cwiseInverse().asDiagonal();
    Eigen::JacobiSVD<Mat> svd(diff);
    const double nrm = svd.singularValues().size() ? svd.singularValues()(0) : 0.0;
    const double ds = std::abs(params[i + 1] - params[i]);
    rep.differences.push_back(nrm);
    const double q = ds > 0.0 ? nrm / ds : (nrm == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    rep.quotients.push_back(q);
    rep.max_quotient = std::max(rep.max_quotient, q);
  }
  rep.bounded = std::isfinite(rep.max_quotient);
  return rep;
}

HFunctional h_functional(const DistField& f)
{
  HFunctional out;
  const double dx = f.sgrid().dx();
  for (int c = 0; c < f.n_cells(); ++c) {
    const VelocityGrid& g = f.vgrid(c);
    double cell_sum = 0.0;
    for (int k = 0; k < f.n_nodes(); ++k) {
      const double v = f.values()(c, k);
      if (v > 0.0)
        cell_sum += g.weights()(k) * v * std::log(v);
      else
        ++out.excluded;
    }
    out.H += cell_sum * dx;
  }
  return out;
}

}  // namespace kinlab
