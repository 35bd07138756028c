#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "kinlab/chapman_enskog.hpp"
#include "kinlab/errors.hpp"
#include "kinlab/periodic_derivative.hpp"
#include "support.hpp"

using namespace kinlab;
using namespace kinlab::testing;

namespace {

CellState base_state(int d)
{
  CellState s;
  s.u = Vec::Zero(d);
  return s;
}

/// Explicit compressible Euler right-hand side along the spatial axis.
MacroFields euler_rate(const MacroFields& m, const SpatialGrid& sg)
{
  const int a = sg.axis();
  const int d = m.dim();
  const PeriodicDerivative D(sg.n_cells(), sg.length());
  const Vec ua = m.u.col(a);
  const Vec p = m.R * m.rho.cwiseProduct(m.T);
  MacroFields r = m;
  r.rho = -D.apply(m.rho.cwiseProduct(ua));
  const Vec dp = D.apply(p);
  for (int j = 0; j < d; ++j) r.u.col(j) = -ua.cwiseProduct(D.apply(m.u.col(j)));
  r.u.col(a) -= dp.cwiseQuotient(m.rho);
  r.T = -ua.cwiseProduct(D.apply(m.T)) - (2.0 / d) * m.T.cwiseProduct(D.apply(ua));
  return r;
}

MacroFields axpy(const MacroFields& m, double h, const MacroFields& r)
{
  MacroFields out = m;
  out.rho += h * r.rho;
  out.u += h * r.u;
  out.T += h * r.T;
  return out;
}

double max_weighted_norm(const DistField& g, const std::vector<LinearizedOp>& ops)
{
  double m = 0.0;
  for (int c = 0; c < g.n_cells(); ++c) m = std::max(m, ops[c].space().norm(g.values().row(c).transpose()));
  return m;
}

}  // namespace

TEST_CASE("closed-form streaming term matches a time-difference Euler oracle")
{
  for (int d : {1, 2, 3}) {
    const SpatialGrid sg(32, 1.0, 0);
    const MacroFields m = manufactured_fields(FieldProfile::Mixed, sg, d, 0.1, base_state(d));
    // shared grid so that the x-derivative of M can be taken node by node
    const VelocityLayout layout{hermite_grid(base_state(d), d == 3 ? 6 : 10)};
    const StreamingTerm st = streaming_term(m, sg, layout);

    const double h = 1e-5;
    const MacroFields rate = euler_rate(m, sg);
    const DistField Mp = maxwellian(axpy(m, h, rate), sg, layout);
    const DistField Mm = maxwellian(axpy(m, -h, rate), sg, layout);
    const DistField M0 = maxwellian(m, sg, layout);
    const PeriodicDerivative D(sg.n_cells(), sg.length());
    const VelocityGrid& g = *layout.front();
    CellNodeArray oracle = (Mp.values() - Mm.values()) / (2.0 * h);
    for (int k = 0; k < g.size(); ++k) oracle.col(k) += g.nodes()(k, 0) * D.apply(M0.values().col(k));
    const double scale = st.values.values().cwiseAbs().maxCoeff();
    CHECK(scale > 1e-3);
    CHECK((oracle - st.values.values()).cwiseAbs().maxCoeff() < 1e-7 * scale);
  }
}

TEST_CASE("solvability gate")
{
  const SpatialGrid sg(32, 1.0, 0);
  const MacroFields m = manufactured_fields(FieldProfile::Mixed, sg, 2, 0.1, base_state(2));
  const VelocityLayout layout = local_hermite_layout(m, 8);

  const SolvabilityReport ok = solvability_check(streaming_term(m, sg, layout));
  CHECK(ok.pass);
  CHECK(ok.max_residual < kTolSolv);

  const StreamingTerm raw = streaming_term(m, sg, layout, DerivativeScheme::Spectral, false);
  const SolvabilityReport bad = solvability_check(raw);
  CHECK_FALSE(bad.pass);
  CHECK(bad.max_per_invariant(0) > 1e-2);      // mass
  CHECK(bad.max_per_invariant(3) > 1e-2);      // energy
  CHECK_THROWS_AS(first_correction(raw, build_cell_operators(m, layout, BgkConfig{}), BgkConfig{}), SolvabilityError);

  const MacroFields u = manufactured_fields(FieldProfile::Uniform, sg, 2, 0.1, base_state(2));
  const StreamingTerm su = streaming_term(u, sg, local_hermite_layout(u, 8));
  CHECK(su.values.values().cwiseAbs().maxCoeff() == 0.0);
  CHECK(solvability_check(su).max_residual == 0.0);

  // in d = 1 a pure dilatation has no deviatoric part, so st is cancellation noise only
  const MacroFields dil = manufactured_fields(FieldProfile::Dilatation, sg, 1, 0.1, base_state(1));
  const VelocityLayout l1 = local_hermite_layout(dil, 8);
  const StreamingTerm sd = streaming_term(dil, sg, l1);
  CHECK(sd.values.values().cwiseAbs().maxCoeff() < 1e-14);
  CHECK(solvability_check(sd).pass);
  CHECK_FALSE(solvability_check(streaming_term(dil, sg, l1, DerivativeScheme::Spectral, false)).pass);
}

TEST_CASE("uniform fields give f1 = 0 and tau1 = 0")
{
  for (int d : {2, 3}) {
    CellState b = base_state(d);
    b.rho = 1.4;
    b.T = 0.9;
    b.u(0) = 0.3;
    const SpatialGrid sg(8, 1.0, 0);
    const MacroFields m = manufactured_fields(FieldProfile::Uniform, sg, d, 0.0, b);
    const VelocityLayout layout = local_hermite_layout(m, d == 3 ? 6 : 8);
    const FirstCorrection fc =
        first_correction(streaming_term(m, sg, layout), build_cell_operators(m, layout, BgkConfig{}), BgkConfig{});
    CHECK(fc.f1.values().cwiseAbs().maxCoeff() < 1e-12);
    for (const Mat& t : fc.tau1) CHECK(t.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("shear layer obeys the viscous constitutive law")
{
  for (double tau : {0.5, 1.0, 2.0}) {
    const SpatialGrid sg(32, 1.0, 1);
    CellState b = base_state(2);
    b.rho = 1.3;
    b.T = 0.8;
    const MacroFields m = manufactured_fields(FieldProfile::Shear, sg, 2, 0.1, b);
    const ConstitutiveReport r = constitutive_verify(m, sg, BgkConfig{tau});
    CHECK(r.pass);
    CHECK(r.max_rel_err <= 1e-6);
    CHECK(r.solvability.pass);
    for (int c = 0; c < m.n_cells(); ++c) CHECK(std::abs(r.mu(c) - b.rho * tau * b.T) < 1e-14);
    // M + eps f1 reproduces P = p I + eps tau1 up to O(eps^2)
    for (double res : r.decomposition_residual) CHECK(res < 1e-10);
  }
}

TEST_CASE("dilatation and temperature gradients")
{
  const SpatialGrid sg(32, 1.0, 0);
  SUBCASE("dilatation keeps S trace-free and the law holds")
  {
    const MacroFields m = manufactured_fields(FieldProfile::Dilatation, sg, 2, 0.1, base_state(2));
    const StrainRate S = strain_rate(m, sg);
    for (const Mat& s : S.S) CHECK(std::abs(s.trace()) < 1e-14);
    CHECK(S.divu.cwiseAbs().maxCoeff() > 0.1);
    const ConstitutiveReport r = constitutive_verify(m, sg, BgkConfig{});
    CHECK(r.max_rel_err <= 1e-6);
  }
  SUBCASE("temperature wave produces no deviatoric stress")
  {
    const MacroFields m = manufactured_fields(FieldProfile::TemperatureWave, sg, 2, 0.1, base_state(2));
    const VelocityLayout layout = local_hermite_layout(m, 8);
    const FirstCorrection fc = first_correction_bgk(streaming_term(m, sg, layout), BgkConfig{});
    CHECK(fc.f1.values().cwiseAbs().maxCoeff() > 1e-3);  // heat flux carrier
    for (const Mat& t : fc.tau1) CHECK(t.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("first correction is unique, orthogonal and linear")
{
  const SpatialGrid sg(16, 1.0, 0);
  const MacroFields m = manufactured_fields(FieldProfile::Mixed, sg, 2, 0.1, base_state(2));
  const VelocityLayout layout = local_hermite_layout(m, 8);
  const BgkConfig cfg{0.8};
  const auto ops = build_cell_operators(m, layout, cfg);
  const StreamingTerm st = streaming_term(m, sg, layout);
  const FirstCorrection dense = first_correction(st, ops, cfg);
  const FirstCorrection closed = first_correction_bgk(st, cfg);
  for (int c = 0; c < m.n_cells(); ++c) {
    const Vec a = dense.f1.values().row(c).transpose();
    const Vec b = closed.f1.values().row(c).transpose();
    CHECK(ops[c].space().norm(a - b) <= 1e-10 * std::max(1.0, ops[c].space().norm(a)));
    CHECK(ops[c].space().norm(project_null(a, ops[c])) <= kTolSolv * ops[c].space().norm(a));
    const Mat& t = dense.tau1[c];
    CHECK((t - t.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(std::abs(t.trace()) < 1e-12);
  }
  CHECK(std::abs(dense.max_inverse_gain - cfg.tau) < 1e-10);

  // linearity of st -> tau1 using a second admissible source
  const MacroFields m2 = manufactured_fields(FieldProfile::Shear, sg, 2, 0.07, base_state(2));
  StreamingTerm st2 = streaming_term(m2, sg, layout);
  st2.fields = m;  // same cells and grids, different admissible source
  const double a = 0.7, b = -1.9;
  StreamingTerm comb = st;
  comb.values = st.values.with_values(a * st.values.values() + b * st2.values.values());
  const auto t1 = first_correction_bgk(st, cfg).tau1;
  const auto t2 = first_correction_bgk(st2, cfg).tau1;
  const auto t12 = first_correction_bgk(comb, cfg).tau1;
  for (int c = 0; c < m.n_cells(); ++c) CHECK((t12[c] - a * t1[c] - b * t2[c]).cwiseAbs().maxCoeff() < 1e-10);

  // necessity: a vanishing first correction has vanishing stress
  const DistField zero = dense.f1.with_values(CellNodeArray::Zero(m.n_cells(), dense.f1.n_nodes()));
  for (const Mat& t : stress_moment(zero, m)) CHECK(t.cwiseAbs().maxCoeff() == 0.0);
  CHECK(max_weighted_norm(dense.f1, ops) > 0.0);
}

TEST_CASE("fourth-order differences converge at their order")
{
  ConstitutiveOptions opts;
  opts.scheme = DerivativeScheme::Central4;
  double prev = 0.0;
  for (int n : {16, 32}) {
    const SpatialGrid sg(n, 1.0, 1);
    const MacroFields m = manufactured_fields(FieldProfile::Shear, sg, 2, 0.1, base_state(2));
    // error of S against the analytic derivative of a sin(2 pi y)
    const StrainRate S = strain_rate(m, sg, DerivativeScheme::Central4);
    double err = 0.0;
    for (int c = 0; c < n; ++c)
      err = std::max(err, std::abs(S.S[c](0, 1) - 0.5 * 0.1 * 2 * M_PI * std::cos(2 * M_PI * sg.cell_centers()(c))));
    const ConstitutiveReport r = constitutive_verify(m, sg, BgkConfig{}, opts);
    CHECK(r.max_rel_err <= 1e-6);  // the law holds for the discrete S
    if (prev > 0.0) CHECK(std::log2(prev / err) == doctest::Approx(4.0).epsilon(0.05));
    prev = err;
  }
}

TEST_CASE("deviatoric check rejects d = 1")
{
  const SpatialGrid sg(8, 1.0, 0);
  const MacroFields m = manufactured_fields(FieldProfile::DensityWave, sg, 1, 0.1, base_state(1));
  CHECK_THROWS_AS(constitutive_verify(m, sg, BgkConfig{}), DomainError);
}
