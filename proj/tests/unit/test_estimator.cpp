#include "stabocp/adaptive_driver.hpp"
#include "stabocp/estimator.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

using namespace stabocp;

namespace {

ProblemData with(double nu, double kappa) {
  ProblemData d;
  d.nu = nu;
  d.kappa = kappa;
  return d;
}

}  // namespace

TEST(Estimator, OscillationWeight) {
  EXPECT_NEAR(c_osc(with(1e-3, 1), 0.1), 1.0, 0);
  EXPECT_GT(0.1 / (std::numbers::pi * std::sqrt(1e-3)), 1.0);
  const ProblemData stiff = with(1e-3, 1e4);  // 1/sqrt(kappa) = 0.01
  EXPECT_NEAR(c_osc(stiff, 1e-4), 1e-4 / (std::numbers::pi * std::sqrt(1e-3)), 1e-17);
  const double h = std::numbers::pi * std::sqrt(1e-3);
  EXPECT_NEAR(c_osc(with(1e-3, 1), h), 1.0, 1e-15);
}

TEST(Estimator, RobustWeightSwitchesBranch) {
  const ProblemData d = with(1e-4, 4);  // threshold h = sqrt(nu/kappa) = 0.005
  EXPECT_NEAR(hbar(d, 0.004), 0.004 / 1e-2, 1e-15);
  EXPECT_NEAR(hbar(d, 0.006), 0.5, 0);
  EXPECT_NEAR(hbar(d, 0.005), 0.5, 1e-15);
}

TEST(Estimator, LocalIndicatorTerms) {
  const ProblemData d = with(1e-3, 1);
  EXPECT_EQ(eta_rho_K(d, 0.1, 0, 0, 1, 0), 0.0);
  EXPECT_NEAR(eta_rho_K(d, 0.1, 0, std::sqrt(1e-3), 1, 0), 1.0, 1e-15);
  // GLS constant residual r: |S_K(1)| = tau kappa r |K| gives tau sqrt(kappa) r sqrt(|K|)
  const ProblemData g = with(1e-3, 2.0);
  const double tau = 0.05, r = 0.3, area = 0.02;
  EXPECT_NEAR(eta_rho_K(g, area, tau * 2.0 * r * area, 0, 1, 0), tau * std::sqrt(2.0) * r * std::sqrt(area), 1e-16);
  EXPECT_NEAR(eta_rho_K(d, 0.1, 0, 0, 0.5, 0.2), 0.1, 1e-16);
}

TEST(Estimator, ReliabilityConstants) {
  const ReliabilityConstants c = reliability_constants(1, 1);
  EXPECT_DOUBLE_EQ(c.state, 62);
  EXPECT_DOUBLE_EQ(c.adjoint, 30);
  EXPECT_DOUBLE_EQ(c.control, 70);
  const auto u = upsilon_local(c, {1.0, 0.0}, {0.0, 0.0}, {0.0, 0.0});
  EXPECT_NEAR(u[0], std::sqrt(62.0), 1e-14);
  EXPECT_EQ(u[1], 0.0);
  EXPECT_EQ(upsilon_local(c, {0.0}, {0.0}, {0.0})[0], 0.0);
}

TEST(Estimator, MarkingRule) {
  EXPECT_EQ(mark({std::sqrt(3.0), 1.0}), std::vector<int>{0});
  EXPECT_EQ(mark({0.3, 0.3, 0.3, 0.3}), (std::vector<int>{0, 1, 2, 3}));
  EXPECT_TRUE(mark({0.0, 0.0, 0.0}).empty());
  EXPECT_EQ(mark({0.1, 0.5, 0.2}).size(), 1u);  // the maximum always qualifies
  EXPECT_THROW(mark({1.0}, 0.0), InvalidInput);
}

TEST(Estimator, ControlIndicatorTrivialCases) {
  const Mesh m = build_rectangle_mesh(1, 1);
  ProblemData d = with(1e-3, 1);
  d.lower = -1;
  d.upper = -0.1;
  // p = -0.5 clamps to the upper bound -0.1, so the gap is 0.6
  const P1Field p(m, Eigen::VectorXd::Constant(m.num_vertices(), -0.5), BoundaryMode::Free);
  EXPECT_NEAR(eta_ct_K(m, d, P0Field(m, 0.5), p, 0), 0.6 * std::sqrt(m.area(0)), 1e-14);
  const P1Field q(m, Eigen::VectorXd::Constant(m.num_vertices(), 0.45), BoundaryMode::Free);
  EXPECT_NEAR(eta_ct_K(m, d, P0Field(m, -0.45), q, 0), 0.0, 1e-15);
  const P1Field big(m, Eigen::VectorXd::Constant(m.num_vertices(), 3.0), BoundaryMode::Free);
  EXPECT_EQ(eta_ct_K(m, d, P0Field(m, -1.0), big, 0), 0.0);
}

// Linear adjoint crossing both kinks inside the element against exact
// polygon clipping. The integrand is only Lipschitz across the kinks, so the
// degree-19 rule is accurate to about 1e-3 there; without a kink it is exact.
TEST(Estimator, ControlIndicatorAgainstKinkOracle) {
  const Mesh m({Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)}, {{0, 1, 2}});
  ProblemData d = with(1e-3, 1);
  d.lower = -1;
  d.upper = -0.1;
  d.theta = 1;
  for (const auto& pv : std::vector<std::array<double, 3>>{{1.5, -0.2, 0.4}, {0.05, 0.6, 1.8}, {-0.3, 2.0, 0.5}}) {
    Eigen::VectorXd v(3);
    v << pv[0], pv[1], pv[2];
    const P1Field p(m, v, BoundaryMode::Free);
    for (double u : {-0.9, -0.4, -0.1}) {
      const double q = eta_ct_K(m, d, P0Field(m, u), p, 0);
      const double exact = oracle::clamped_gap_norm(m, 0, u, pv, d.theta, d.lower, d.upper);
      EXPECT_NEAR(q, exact, 3e-3 * exact);
    }
  }
}

TEST(Estimator, ControlIndicatorExactWithoutKink) {
  const Mesh m({Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)}, {{0, 1, 2}});
  ProblemData d = with(1e-3, 1);
  d.lower = -1;
  d.upper = -0.1;
  d.theta = 2;
  const std::array<double, 3> pv{0.3, 1.1, 1.7};  // -p/theta stays inside [-1, -0.1]
  Eigen::VectorXd v(3);
  v << pv[0], pv[1], pv[2];
  const P1Field p(m, v, BoundaryMode::Free);
  const double exact = oracle::clamped_gap_norm(m, 0, -0.2, pv, d.theta, d.lower, d.upper);
  EXPECT_NEAR(eta_ct_K(m, d, P0Field(m, -0.2), p, 0), exact, 1e-13);
}

TEST(Estimator, RobustPathRejectsOtherSchemes) {
  const Mesh m = build_rectangle_mesh(3, 3);
  for (Scheme s : {Scheme::GLS, Scheme::ES}) {
    const ProblemSetup ps = example1_problem(Scheme::SUPG, s);
    const Discretization disc = discretize(m, ps.data);
    const OcpSolution sol = solve_ocp(m, ps.data, disc);
    EXPECT_THROW(estimate(m, ps.data, disc, sol, EstimatorMode::Robust), InvalidInput);
    EXPECT_NO_THROW(estimate(m, ps.data, disc, sol, EstimatorMode::Computable));
  }
  EXPECT_EQ(estimator_mode_from_string("both"), EstimatorMode::Both);
  EXPECT_EQ(to_string(EstimatorMode::Robust), "robust");
  EXPECT_THROW(estimator_mode_from_string("exact"), InvalidInput);
}

TEST(Estimator, CipThetaVanishesForConstantVelocity) {
  const Mesh m = build_rectangle_mesh(4, 4);
  const ProblemSetup ps = example1_problem(Scheme::CIP, Scheme::CIP);
  const Discretization disc = discretize(m, ps.data);
  const OcpSolution sol = solve_ocp(m, ps.data, disc);
  const Estimate e = estimate(m, ps.data, disc, sol, EstimatorMode::Both);
  for (int k = 0; k < m.num_elements(); ++k) {
    EXPECT_EQ(e.indicators.theta_y[k], 0.0);
    EXPECT_EQ(e.indicators.theta_p[k], 0.0);
  }
}

TEST(Estimator, CipThetaPositiveForRotatingVelocity) {
  const Mesh m = build_rectangle_mesh(4, 4);
  StudyConfig c;
  c.kind = "custom";
  c.nu = 1e-2;
  c.velocity_name = "rotating";
  c.source = "1";
  c.desired_state = "x*y";
  c.state_scheme = c.adjoint_scheme = Scheme::CIP;
  c.mode = EstimatorMode::Both;
  const ProblemSetup ps = make_problem(c);
  const Discretization disc = discretize(m, ps.data);
  const OcpSolution sol = solve_ocp(m, ps.data, disc);
  const Estimate e = estimate(m, ps.data, disc, sol, EstimatorMode::Both);
  double sum = 0;
  for (double t : e.indicators.theta_y) sum += t;
  EXPECT_GT(sum, 0.0);
}

TEST(Estimator, LinearFieldHasNoJumpPart) {
  // Free-boundary linear state on a mesh; the robust indicator with zero
  // interior residual reduces to its edge part, which must vanish.
  const Mesh m = build_rectangle_mesh(3, 3);
  ProblemData d = with(1e-2, 1);
  d.velocity = VelocityField::constant(Vec2::Zero());
  d.state_scheme = d.adjoint_scheme = Scheme::SUPG;
  Eigen::VectorXd v(m.num_vertices());
  for (int i = 0; i < v.size(); ++i) v[i] = 0.5 + m.vertex(i).x() + 2 * m.vertex(i).y();
  const P1Field y(m, v, BoundaryMode::Free);
  const P1Field p(m, Eigen::VectorXd::Zero(m.num_vertices()));
  const P0Field u(m, 0.0);
  std::vector<ElementResidual> res(m.num_elements());  // zero interior residuals
  const RobustSide r = robust_indicators(m, d, {&y, &p, &u}, Side::State, res);
  for (double e : r.indicator) EXPECT_LT(e, 1e-14);
}

TEST(Estimator, GlobalsAreRootSumSquares) {
  Mesh m = build_rectangle_mesh(4, 4);
  m = refine(m, std::vector<int>{3, 7});
  const ProblemSetup ps = example1_problem(Scheme::SUPG, Scheme::CIP);
  const Discretization disc = discretize(m, ps.data);
  const OcpSolution sol = solve_ocp(m, ps.data, disc);
  const Estimate e = estimate(m, ps.data, disc, sol, EstimatorMode::Both);
  const IndicatorField& f = e.indicators;
  auto rss = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  EXPECT_NEAR(f.eta_st_global, rss(f.eta_st), 1e-12 * f.eta_st_global);
  EXPECT_NEAR(f.eta_ad_global, rss(f.eta_ad), 1e-12 * f.eta_ad_global);
  EXPECT_NEAR(f.eta_ct_global, rss(f.eta_ct), 1e-12 * std::max(f.eta_ct_global, 1e-300));
  EXPECT_NEAR(f.upsilon_global, rss(f.upsilon), 1e-12 * f.upsilon_global);
  EXPECT_NEAR(f.e_st_global, rss(f.e_st), 1e-12 * f.e_st_global);
  for (const auto* v : {&f.eta_st, &f.eta_ad, &f.eta_ct, &f.upsilon, &f.e_st, &f.e_ad, &f.theta_y, &f.hbar})
    for (double x : *v) EXPECT_GE(x, 0.0);
  for (int k = 0; k < m.num_elements(); ++k) {
    const double u2 = 62 * f.eta_st[k] * f.eta_st[k] + 30 * f.eta_ad[k] * f.eta_ad[k] + 70 * f.eta_ct[k] * f.eta_ct[k];
    EXPECT_NEAR(f.upsilon[k], std::sqrt(u2), 1e-12 * f.upsilon[k]);
  }
  std::ostringstream csv;
  write_indicator_csv(csv, f);
  const std::string text = csv.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), m.num_elements() + 1);
}

// Standalone state equation with a known solution: the computable bound holds.
TEST(Estimator, SingleEquationBound) {
  StudyConfig c;
  c.kind = "custom";
  c.nu = 1e-2;
  c.velocity_constant = Vec2(1, 0.5);
  c.exact_state = "sin(pi*x)*y*(1-y)";
  c.exact_adjoint = "0";
  c.lower = -10;
  c.upper = 10;
  for (Scheme s : {Scheme::SUPG, Scheme::GLS, Scheme::CIP, Scheme::ES}) {
    c.state_scheme = s;
    const ProblemSetup ps = make_problem(c);
    Mesh m = build_rectangle_mesh(4, 4);
    for (int level = 0; level < 2; ++level) {
      const auto forms = element_forms(m, ps.data, Side::State);
      const P0Field u(m, 0.0);
      const P1Field y = solve_state(m, forms, u);
      double eta = 0;
      state_equation_indicators(m, ps.data, forms, y, u, &eta);
      const double err = energy_error(m, ps.data, ps.exact->state, ps.exact->state_gradient, y);
      EXPECT_GE(eta, err) << to_string(s);
      m = refine_uniform(m);
    }
  }
}
