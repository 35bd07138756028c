#include "kinlab/chapman_enskog.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "kinlab/errors.hpp"

namespace kinlab {

namespace {

void check_layout(const MacroFields& fields, const SpatialGrid& sgrid, const VelocityLayout& layout)
{
  if (fields.n_cells() != sgrid.n_cells()) throw DomainError("fields and spatial grid differ in cell count");
  if (layout.empty() || (layout.size() != 1 && static_cast<int>(layout.size()) != sgrid.n_cells()))
    throw DomainError("velocity layout must hold one grid or one per cell");
  if (sgrid.axis() >= fields.dim()) throw DomainError("spatial axis exceeds velocity dimension");
  for (const auto& g : layout)
    if (!g || g->dim() != fields.dim()) throw DomainError("velocity grid dimension differs from fields");
}

/// v_a d_a M / M, the transport term before any time derivative is added.
double transport_poly(const Vec& C, double va, const CellState& s, double grad_rho, const Vec& grad_u, double dlnT)
{
  const double rt = s.R * s.T;
  const int d = static_cast<int>(C.size());
  return va * (grad_rho / s.rho + (C.squaredNorm() / (2.0 * rt) - 0.5 * d) * dlnT + C.dot(grad_u) / rt);
}

Mat deviatoric(Mat A)
{
  A = (0.5 * (A + A.transpose())).eval();
  const double tr = A.trace() / static_cast<double>(A.rows());
  A.diagonal().array() -= tr;
  return A;
}

}  // namespace

Mat StreamingTerm::velocity_gradient(int cell) const
{
  const int d = fields.dim();
  Mat G = Mat::Zero(d, d);
  G.row(values.sgrid().axis()) = grad_u.row(cell);
  return G;
}

StreamingTerm streaming_term(const MacroFields& fields, const SpatialGrid& sgrid, const VelocityLayout& layout,
                             DerivativeScheme scheme, bool euler_substitution)
{
  fields.validate();
  check_layout(fields, sgrid, layout);
  const int n = sgrid.n_cells();
  const int d = fields.dim();
  const int a = sgrid.axis();
  const PeriodicDerivative D(n, sgrid.length(), scheme);

  Vec grad_rho = D.apply(fields.rho);
  Vec grad_T = D.apply(fields.T);
  Mat grad_u(n, d);
  for (int j = 0; j < d; ++j) grad_u.col(j) = D.apply(fields.u.col(j));

  const int n_nodes = layout.front()->size();
  CellNodeArray vals(n, n_nodes);
  for (int c = 0; c < n; ++c) {
    const VelocityGrid& g = *layout[layout.size() == 1 ? 0 : c];
    if (g.size() != n_nodes) throw DomainError("per-cell velocity grids must share a node count");
    const CellState s = fields.cell(c);
    const double rt = s.R * s.T;
    const Vec M = maxwellian_values(s, g);
    const double dlnT = grad_T(c) / s.T;
    for (int k = 0; k < n_nodes; ++k) {
      const Vec C = g.nodes().row(k).transpose() - s.u;
      const double c2 = C.squaredNorm();
      double poly;
      if (euler_substitution) {
        // G only has row a, so (C C - |C|^2 I/d) : G = C_a (C . du/dx_a) - |C|^2 du_a/dx_a / d
        const double strain = C(a) * C.dot(grad_u.row(c).transpose()) - c2 * grad_u(c, a) / d;
        poly = (c2 / (2.0 * rt) - 0.5 * (d + 2)) * C(a) * dlnT + strain / rt;
      } else {
        poly = transport_poly(C, g.nodes()(k, a), s, grad_rho(c), grad_u.row(c).transpose(), dlnT);
      }
      vals(c, k) = poly * M(k);
    }
  }
  DistField df(sgrid, layout, std::move(vals));
  return StreamingTerm{std::move(df), fields, std::move(grad_rho), std::move(grad_u), std::move(grad_T),
                       euler_substitution};
}

SolvabilityReport solvability_check(const StreamingTerm& st, double tol)
{
  const DistField& f = st.values;
  const int d = f.dim();
  SolvabilityReport rep;
  rep.residuals = Mat::Zero(f.n_cells(), d + 2);
  rep.max_per_invariant = Vec::Zero(d + 2);
  for (int c = 0; c < f.n_cells(); ++c) {
    const VelocityGrid& g = f.vgrid(c);
    const CellState s = st.fields.cell(c);
    const double rt = s.R * s.T;
    // The scale is the larger of |st phi| and |v . grad M phi|: where the exact streaming term vanishes
    // (dilatation in d = 1) st is pure cancellation noise and only the transport term sets its size.
    const Vec M = maxwellian_values(s, g);
    const Vec gu = st.grad_u.row(c).transpose();
    const double dlnT = st.grad_T(c) / s.T;
    const int a = f.sgrid().axis();
    Vec num = Vec::Zero(d + 2), den = Vec::Zero(d + 2), ref = Vec::Zero(d + 2);
    Vec phi(d + 2);
    for (int k = 0; k < f.n_nodes(); ++k) {
      const Vec C = g.nodes().row(k).transpose() - s.u;
      phi(0) = 1.0;
      for (int i = 0; i < d; ++i) phi(1 + i) = C(i) / std::sqrt(rt);
      phi(d + 1) = C.squaredNorm() / rt;
      const double wf = g.weights()(k) * f.values()(c, k);
      const double wt = g.weights()(k) * M(k) * transport_poly(C, g.nodes()(k, a), s, st.grad_rho(c), gu, dlnT);
      num += wf * phi;
      den += std::abs(wf) * phi.cwiseAbs();
      ref += std::abs(wt) * phi.cwiseAbs();
    }
    den = den.cwiseMax(ref);
    for (int j = 0; j < d + 2; ++j) {
      const double r = den(j) > 0.0 ? std::abs(num(j)) / den(j) : 0.0;
      rep.residuals(c, j) = r;
      rep.max_per_invariant(j) = std::max(rep.max_per_invariant(j), r);
    }
  }
  rep.max_residual = rep.max_per_invariant.size() ? rep.max_per_invariant.maxCoeff() : 0.0;
  rep.pass = rep.max_residual <= tol;
  return rep;
}

StrainRate strain_rate(const MacroFields& fields, const SpatialGrid& sgrid, DerivativeScheme scheme)
{
  if (fields.n_cells() != sgrid.n_cells()) throw DomainError("fields and spatial grid differ in cell count");
  const int n = sgrid.n_cells();
  const int d = fields.dim();
  const int a = sgrid.axis();
  const PeriodicDerivative D(n, sgrid.length(), scheme);
  Mat grad_u(n, d);
  for (int j = 0; j < d; ++j) grad_u.col(j) = D.apply(fields.u.col(j));

  StrainRate out;
  out.divu = grad_u.col(a);
  for (int c = 0; c < n; ++c) {
    Mat G = Mat::Zero(d, d);
    G.row(a) = grad_u.row(c);
    out.S.push_back(deviatoric(G));
  }
  return out;
}

std::vector<Mat> stress_moment(const DistField& g, const MacroFields& fields)
{
  std::vector<Mat> out;
  out.reserve(g.n_cells());
  for (int c = 0; c < g.n_cells(); ++c) {
    const Vec gc = g.values().row(c).transpose();
    out.push_back(deviatoric(centered_second_moment(gc, g.vgrid(c), fields.u.row(c).transpose())));
  }
  return out;
}

std::vector<LinearizedOp> build_cell_operators(const MacroFields& fields, const VelocityLayout& layout,
                                               const BgkConfig& cfg)
{
  std::vector<LinearizedOp> ops;
  ops.reserve(fields.n_cells());
  for (int c = 0; c < fields.n_cells(); ++c)
    ops.push_back(LinearizedOp::bgk(fields.cell(c), layout[layout.size() == 1 ? 0 : c], cfg));
  return ops;
}

FirstCorrection first_correction(const StreamingTerm& st, const std::vector<LinearizedOp>& ops, const BgkConfig& cfg)
{
  cfg.validate();
  const DistField& s = st.values;
  if (static_cast<int>(ops.size()) != s.n_cells()) throw DomainError("need one linearized operator per cell");
  const SolvabilityReport gate = solvability_check(st);
  if (!gate.pass) {
    std::ostringstream os;
    Eigen::Index worst = 0;
    gate.residuals.rowwise().maxCoeff().maxCoeff(&worst);
    os << "streaming term fails the solvability gate: residual " << gate.max_residual << " at cell " << worst;
    throw SolvabilityError(gate.max_residual, os.str());
  }
  CellNodeArray f1(s.n_cells(), s.n_nodes());
  InverseGainTracker tracker;
  for (int c = 0; c < s.n_cells(); ++c) {
    const Vec h = s.values().row(c).transpose();
    f1.row(c) = pseudoinverse_apply(h, ops[c], &tracker).transpose();
  }
  FirstCorrection out{s.with_values(std::move(f1)), {}, Vec(s.n_cells()), tracker.max_gain};
  out.tau1 = stress_moment(out.f1, st.fields);
  for (int c = 0; c < s.n_cells(); ++c) out.mu(c) = st.fields.rho(c) * cfg.tau * st.fields.R * st.fields.T(c);
  return out;
}

FirstCorrection first_correction_bgk(const StreamingTerm& st, const BgkConfig& cfg)
{
  cfg.validate();
  const DistField& s = st.values;
  FirstCorrection out{s.with_values(-cfg.tau * s.values()), {}, Vec(s.n_cells()), s.values().size() ? cfg.tau : 0.0};
  out.tau1 = stress_moment(out.f1, st.fields);
  for (int c = 0; c < s.n_cells(); ++c) out.mu(c) = st.fields.rho(c) * cfg.tau * st.fields.R * st.fields.T(c);
  return out;
}

MacroFields manufactured_fields(FieldProfile profile, const SpatialGrid& sgrid, int d, double amplitude,
                                const CellState& base)
{
  if (d < 1 || d > 3) throw DomainError("velocity dimension must be 1, 2 or 3");
  if (sgrid.axis() >= d) throw DomainError("spatial axis exceeds velocity dimension");
  const int n = sgrid.n_cells();
  const int a = sgrid.axis();
  const int t = (a + 1) % d;  // a transverse component when d >= 2
  Vec u0 = base.u.size() == d ? base.u : Vec::Zero(d);
  MacroFields f = MacroFields::uniform(n, CellState{base.rho, u0, base.T, base.R});
  const double k = 2.0 * std::numbers::pi / sgrid.length();
  for (int c = 0; c < n; ++c) {
    const double x = sgrid.cell_centers()(c);
    const double s = std::sin(k * x), co = std::cos(k * x);
    switch (profile) {
      case FieldProfile::Uniform: break;
      case FieldProfile::Shear:
        if (d < 2) throw DomainError("shear profile requires d >= 2");
        f.u(c, t) += amplitude * s;
        break;
      case FieldProfile::DensityWave: f.rho(c) *= 1.0 + amplitude * s; break;
      case FieldProfile::TemperatureWave: f.T(c) *= 1.0 + amplitude * s; break;
      case FieldProfile::Dilatation: f.u(c, a) += amplitude * s; break;
      case FieldProfile::Mixed:
        f.rho(c) *= 1.0 + amplitude * s;
        f.u(c, a) += amplitude * co;
        f.T(c) *= 1.0 + 0.5 * amplitude * co;
        if (d >= 2) f.u(c, t) += amplitude * s;
        break;
    }
  }
  f.validate();
  return f;
}

ConstitutiveReport constitutive_verify(const MacroFields& fields, const SpatialGrid& sgrid, const BgkConfig& cfg,
                                       const ConstitutiveOptions& opts)
{
  const int d = fields.dim();
  if (d < 2) throw DomainError("deviatoric check requires d ≥ 2");
  if (opts.hermite_nodes < 4) throw DomainError("constitutive check needs at least 4 Hermite nodes per axis");
  cfg.validate();
  fields.validate();

  const VelocityLayout layout = local_hermite_layout(fields, opts.hermite_nodes);
  const StreamingTerm st = streaming_term(fields, sgrid, layout, opts.scheme, true);
  ConstitutiveReport rep;
  rep.solvability = solvability_check(st);
  const std::vector<LinearizedOp> ops = build_cell_operators(fields, layout, cfg);
  const FirstCorrection fc = first_correction(st, ops, cfg);
  const StrainRate sr = strain_rate(fields, sgrid, opts.scheme);

  const int n = fields.n_cells();
  rep.mu = fc.mu;
  rep.S = sr.S;
  rep.tau1 = fc.tau1;
  rep.max_inverse_gain = fc.max_inverse_gain;
  for (int c = 0; c < n; ++c) {
    rep.expected.push_back(-2.0 * fc.mu(c) * sr.S[c]);
    rep.stress_scale = std::max(rep.stress_scale, rep.expected.back().cwiseAbs().maxCoeff());
    rep.tau1_norm = std::max(rep.tau1_norm, fc.tau1[c].cwiseAbs().maxCoeff());
    const Vec f1c = fc.f1.values().row(c).transpose();
    rep.f1_norm = std::max(rep.f1_norm, ops[c].space().norm(f1c));
  }
  const double norm = rep.stress_scale > 0.0 ? rep.stress_scale : 1.0;
  rep.per_component_err = Mat::Zero(d, d);
  for (int c = 0; c < n; ++c)
    rep.per_component_err = rep.per_component_err.cwiseMax((fc.tau1[c] - rep.expected[c]).cwiseAbs() / norm);
  rep.max_rel_err = rep.per_component_err.maxCoeff();

  // P - p I - eps tau1 for the truncated distribution M + eps f1
  for (double eps : opts.eps_probe) {
    double worst = 0.0;
    for (int c = 0; c < n; ++c) {
      const VelocityGrid& g = *layout[c];
      const CellState s = fields.cell(c);
      const Vec fc_eps = maxwellian_values(s, g) + eps * fc.f1.values().row(c).transpose();
      const Mat P = centered_second_moment(fc_eps, g, s.u);
      const double p = P.trace() / d;
      const Mat resid = P - p * Mat::Identity(d, d) - eps * fc.tau1[c];
      worst = std::max(worst, resid.cwiseAbs().maxCoeff());
    }
    rep.decomposition_eps.push_back(eps);
    rep.decomposition_residual.push_back(worst);
  }
  rep.pass = rep.solvability.pass && rep.max_rel_err <= opts.tolerance;
  return rep;
}

}  // namespace kinlab
