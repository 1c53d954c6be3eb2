#include "stabocp/femspace.hpp"
#include "stabocp/ocp_solver.hpp"
#include "stabocp/quadrature.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace stabocp;

namespace {

const Mesh& unit_triangle() {
  static const Mesh m({Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)}, {{0, 1, 2}});
  return m;
}

ProblemData cdr(double nu, Vec2 b, double kappa) {
  ProblemData d;
  d.nu = nu;
  d.kappa = kappa;
  d.velocity = VelocityField::constant(b);
  return d;
}

}  // namespace

TEST(Femspace, BoundaryCoefficientsArePinned) {
  const Mesh m = build_rectangle_mesh(2, 2);
  const P1Field f(m, Eigen::VectorXd::Ones(m.num_vertices()));
  for (int v = 0; v < m.num_vertices(); ++v) EXPECT_EQ(f[v], m.is_boundary_vertex(v) ? 0.0 : 1.0);
  const P1Field g(m, Eigen::VectorXd::Ones(m.num_vertices()), BoundaryMode::Free);
  for (int v = 0; v < m.num_vertices(); ++v) EXPECT_EQ(g[v], 1.0);
}

TEST(Femspace, ProjectionOfLinearIsIdentity) {
  const Mesh m({Vec2(0.1, 0.2), Vec2(0.9, 0.3), Vec2(0.4, 1.1)}, {{0, 1, 2}});
  auto f = [](const Vec2& x) { return 2 - 3 * x.x() + 0.5 * x.y(); };
  const LinearOnElement p = project_P1(m, 0, f, 4);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p.nodal[i], f(m.vertex(i)), 1e-12);
  const LinearOnElement c = project_P1(m, 0, [](const Vec2&) { return 3.25; }, 2);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(c.nodal[i], 3.25, 1e-12);
}

// Normal-equations oracle on a quadrature point cloud: minimise the weighted
// squared misfit of x^2 over linear polynomials a + b x + c y.
TEST(Femspace, ProjectionOfQuadraticMatchesLeastSquares) {
  const Mesh& m = unit_triangle();
  const LinearOnElement p = project_P1(m, 0, [](const Vec2& x) { return x.x() * x.x(); }, 8);
  const QuadratureRule& rule = triangle_rule(8);
  Eigen::Matrix3d n = Eigen::Matrix3d::Zero();
  Eigen::Vector3d r = Eigen::Vector3d::Zero();
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const Vec2 x = m.point(0, rule.points[q]);
    const Eigen::Vector3d phi(1, x.x(), x.y());
    n += rule.weights[q] * phi * phi.transpose();
    r += rule.weights[q] * phi * x.x() * x.x();
  }
  const Eigen::Vector3d c = n.ldlt().solve(r);
  for (int i = 0; i < 3; ++i) {
    const Vec2 x = m.vertex(i);
    EXPECT_NEAR(p.nodal[i], c[0] + c[1] * x.x() + c[2] * x.y(), 1e-13);
  }
}

TEST(Femspace, ProjectionIsIdempotentAndLinear) {
  const Mesh m({Vec2(0, 0), Vec2(1, 0.2), Vec2(0.3, 0.8)}, {{0, 1, 2}});
  auto f = [](const Vec2& x) { return std::sin(3 * x.x()) * std::exp(x.y()); };
  auto g = [](const Vec2& x) { return x.x() * x.y() * x.y(); };
  const LinearOnElement pf = project_P1(m, 0, f, 19);
  const LinearOnElement pg = project_P1(m, 0, g, 19);
  auto as_fn = [&](const LinearOnElement& l) {
    return [&m, l](const Vec2& x) {
      const Eigen::Vector2d d = x - m.vertex(0);
      Eigen::Matrix2d j;
      j.col(0) = m.vertex(1) - m.vertex(0);
      j.col(1) = m.vertex(2) - m.vertex(0);
      const Eigen::Vector2d s = j.inverse() * d;
      return l({1 - s[0] - s[1], s[0], s[1]});
    };
  };
  const LinearOnElement ppf = project_P1(m, 0, as_fn(pf), 4);
  const LinearOnElement pcomb = project_P1(m, 0, [&](const Vec2& x) { return 2 * f(x) - 3 * g(x); }, 19);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(ppf.nodal[i], pf.nodal[i], 1e-12);
    EXPECT_NEAR(pcomb.nodal[i], 2 * pf.nodal[i] - 3 * pg.nodal[i], 1e-12);
  }
}

TEST(Femspace, StiffnessRowsSumToZero) {
  const Mesh m = build_rectangle_mesh(3, 2);
  const Eigen::MatrixXd a(assemble_B(m, cdr(1, Vec2::Zero(), 0), false));
  for (int i = 0; i < a.rows(); ++i) EXPECT_NEAR(a.row(i).sum(), 0.0, 1e-13);
  // after elimination an interior row sum is minus its removed boundary couplings
  const Eigen::MatrixXd e(assemble_B(m, cdr(1, Vec2::Zero(), 0), true));
  for (int i = 0; i < a.rows(); ++i) {
    if (m.is_boundary_vertex(i)) continue;
    double removed = 0;
    for (int j = 0; j < a.cols(); ++j)
      if (m.is_boundary_vertex(j)) removed += a(i, j);
    EXPECT_NEAR(e.row(i).sum(), -removed, 1e-13);
  }
}

TEST(Femspace, SymmetricWithoutConvection) {
  const Mesh m = build_rectangle_mesh(3, 3);
  const Eigen::MatrixXd a(assemble_B(m, cdr(0.3, Vec2::Zero(), 2), true));
  EXPECT_LT((a - a.transpose()).cwiseAbs().maxCoeff(), 1e-13);
  const Eigen::MatrixXd s(assemble_Bstar(m, cdr(0.3, Vec2::Zero(), 2), true));
  EXPECT_LT((a - s).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Femspace, AdjointIsTransposeAndBothAreCoercive) {
  const Mesh m = refine(build_rectangle_mesh(3, 3), std::vector<int>{0, 4, 7});
  const ProblemData d = cdr(1e-2, Vec2(0.7, -0.4), 1.3);
  const Eigen::MatrixXd a(assemble_B(m, d, true)), s(assemble_Bstar(m, d, true));
  EXPECT_LT((s - a.transpose()).cwiseAbs().maxCoeff(), 1e-13 * a.cwiseAbs().maxCoeff());
  const SparseMatrix e = assemble_energy(m, d, true);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int t = 0; t < 10; ++t) {
    Eigen::VectorXd x(m.num_vertices());
    for (int v = 0; v < m.num_vertices(); ++v) x[v] = m.is_boundary_vertex(v) ? 0 : u(rng);
    const double n2 = x.dot(e * x);
    EXPECT_NEAR(x.dot(a * x), n2, 1e-12 * n2);
    EXPECT_NEAR(x.dot(s * x), n2, 1e-12 * n2);
    const P1Field f(m, x);
    EXPECT_NEAR(energy_norm(m, d, f), std::sqrt(n2), 1e-12 * std::sqrt(n2));
  }
}

TEST(Femspace, EnergyNormExamples) {
  const Mesh m = build_rectangle_mesh(2, 2);
  ProblemData d = cdr(0.7, Vec2::Zero(), 4);
  EXPECT_EQ(energy_norm(m, d, P1Field(m)), 0.0);
  const P1Field one(m, Eigen::VectorXd::Ones(m.num_vertices()), BoundaryMode::Free);
  EXPECT_NEAR(energy_norm(m, d, one), 2.0, 1e-14);
  // single hat at the centre against quadrature of nu |grad|^2 + kappa v^2
  Eigen::VectorXd h = Eigen::VectorXd::Zero(m.num_vertices());
  int c = -1;
  for (int v = 0; v < m.num_vertices(); ++v)
    if (!m.is_boundary_vertex(v)) c = v;
  h[c] = 1;
  const P1Field hat(m, h);
  double sum = 0;
  for (int k = 0; k < m.num_elements(); ++k) {
    const Vec2 g = hat.gradient(k);
    sum += integrate_element(triangle_rule(2), m, k, [&](const Vec2& x) {
      // value of the hat at x from the element's barycentric gradients
      const int loc = m.local_index(k, c);
      if (loc < 0) return d.nu * g.squaredNorm();
      const double val = 1 + m.grad_lambda(k, loc).dot(x - m.vertex(c));
      return d.nu * g.squaredNorm() + d.kappa * val * val;
    });
  }
  EXPECT_NEAR(energy_norm(m, d, hat), std::sqrt(sum), 1e-14);
}

TEST(Femspace, TripleNorm) {
  EXPECT_EQ(triple_error_norm(0, 0, 0), 0.0);
  EXPECT_EQ(triple_error_norm(0, 0.25, 0), 0.25);
  EXPECT_NEAR(triple_error_norm(3, 4, 12), 13.0, 1e-15);
}

TEST(Femspace, SolenoidalCheck) {
  const Mesh m = build_rectangle_mesh(2, 2);
  ProblemData d;
  d.velocity.value = [](const Vec2& x) { return Vec2(x.x(), 0); };
  d.velocity.jacobian = [](const Vec2&) { return (Mat2() << 1, 0, 0, 0).finished(); };
  EXPECT_THROW(d.check_solenoidal(m), InvalidInput);
  d.velocity.value = [](const Vec2& x) { return Vec2(x.y(), -x.x()); };
  d.velocity.jacobian = [](const Vec2&) { return (Mat2() << 0, 1, -1, 0).finished(); };
  EXPECT_NO_THROW(d.check_solenoidal(m));
  d.nu = -1;
  EXPECT_THROW(d.validate(), InvalidInput);
}

// Smooth manufactured solution, pure diffusion-reaction: L2 rate 2, energy rate 1.
TEST(Femspace, UniformRefinementRates) {
  const double pi = std::numbers::pi;
  ProblemData d = cdr(1, Vec2::Zero(), 1);
  d.source = [pi](const Vec2& x) { return (2 * pi * pi + 1) * std::sin(pi * x.x()) * std::sin(pi * x.y()); };
  auto exact = [pi](const Vec2& x) { return std::sin(pi * x.x()) * std::sin(pi * x.y()); };
  auto grad = [pi](const Vec2& x) {
    return Vec2(pi * std::cos(pi * x.x()) * std::sin(pi * x.y()), pi * std::sin(pi * x.x()) * std::cos(pi * x.y()));
  };
  Mesh m = build_rectangle_mesh(4, 4);
  std::vector<double> l2, en;
  for (int level = 0; level < 3; ++level) {
    const auto forms = element_forms(m, d, Side::State);
    const P1Field y = solve_state(m, forms, P0Field(m, 0.0));
    l2.push_back(l2_error(m, exact, y));
    en.push_back(energy_error(m, d, exact, grad, y));
    m = refine_uniform(m);
  }
  EXPECT_NEAR(std::log2(l2[1] / l2[2]), 2.0, 0.1);
  EXPECT_NEAR(std::log2(en[1] / en[2]), 1.0, 0.1);
}
