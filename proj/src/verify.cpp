#include "stabocp/verify.hpp"

#include "stabocp/adaptive_driver.hpp"
#include "stabocp/ocp_solver.hpp"
#include "stabocp/quadrature.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>
#include <sstream>

namespace stabocp {

namespace {

std::string fmt(const char* f, double a, double b = 0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

double factorial(int n) {
  double r = 1;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

PropertyResult clamp_cases() {
  PropertyResult r{"projection clamp cases", true, ""};
  const double cases[][2] = {{-0.5, -0.5}, {-2, -1}, {0, -0.1}, {-1, -1}, {-0.1, -0.1}};
  for (const auto& c : cases)
    if (project_control(c[0], -1, -0.1) != c[1]) {
      r.passed = false;
      r.detail = fmt("clamp(%g) gave the wrong value (expected %g)", c[0], c[1]);
      return r;
    }
  try {
    project_control(0, 1, 1);
    r.passed = false;
    r.detail = "equal bounds were accepted";
  } catch (const InvalidInput&) {
  }
  if (r.passed) r.detail = "5 cases, degenerate bounds rejected";
  return r;
}

Mesh random_mesh(std::mt19937_64& rng, int rounds) {
  Mesh m = build_rectangle_mesh(3, 3);
  std::bernoulli_distribution pick(0.3);
  for (int i = 0; i < rounds; ++i) {
    std::vector<int> marked;
    for (int k = 0; k < m.num_elements(); ++k)
      if (pick(rng)) marked.push_back(k);
    m = refine(m, marked);
  }
  return m;
}

PropertyResult lipschitz(std::mt19937_64& rng) {
  PropertyResult r{"projection Lipschitz bound", true, ""};
  const Mesh mesh = random_mesh(rng, 3);
  std::uniform_real_distribution<double> u(-3, 2);
  const double lo = -1, hi = -0.1;
  const QuadratureRule& rule = triangle_rule(19);
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd a(mesh.num_vertices()), b(mesh.num_vertices());
    for (int v = 0; v < mesh.num_vertices(); ++v) {
      a[v] = u(rng);
      b[v] = u(rng);
    }
    const P1Field wa(mesh, a, BoundaryMode::Free), wb(mesh, b, BoundaryMode::Free);
    const P0Field ma = project_field_mean(wa, 1.0, lo, hi), mb = project_field_mean(wb, 1.0, lo, hi);
    for (int k = 0; k < mesh.num_elements(); ++k) {
      double lhs = 0;
      for (std::size_t q = 0; q < rule.size(); ++q) {
        const double d = project_control(-wa.value(k, rule.points[q]), lo, hi) -
                         project_control(-wb.value(k, rule.points[q]), lo, hi);
        lhs += 2 * mesh.area(k) * rule.weights[q] * d * d;
      }
      const auto la = wa.local(k), lb = wb.local(k);
      const double rhs = p1_norm2(mesh.area(k), {la[0] - lb[0], la[1] - lb[1], la[2] - lb[2]});
      worst = std::max(worst, std::sqrt(lhs) / std::max(std::sqrt(rhs), 1e-300));
      // element-mean variant: |clamp(m1) - clamp(m2)| <= |m1 - m2|
      if (std::abs(ma[k] - mb[k]) > std::abs(wa.mean(k) - wb.mean(k)) * (1 + 1e-14)) r.passed = false;
    }
  }
  if (worst > 1 + 1e-12) r.passed = false;
  r.detail = fmt("worst ratio %.6f over 20 random field pairs", worst);
  return r;
}

PropertyResult quadrature_exactness(std::mt19937_64& rng) {
  PropertyResult r{"quadrature exactness", true, ""};
  std::uniform_real_distribution<double> u(-1, 1);
  double worst = 0;
  for (int n = 0; n <= kMaxQuadratureDegree; ++n) {
    // random polynomial of total degree n in the reference coordinates
    const QuadratureRule& rule = triangle_rule(n);
    double exact = 0, scale = 0, approx = 0;
    std::vector<std::array<double, 3>> terms;
    for (int p = 0; p <= n; ++p)
      for (int q = 0; p + q <= n; ++q) {
        const double c = u(rng);
        const double mono = factorial(p) * factorial(q) / factorial(p + q + 2);
        exact += c * mono;
        scale += std::abs(c) * mono;
        terms.push_back({c, double(p), double(q)});
      }
    for (std::size_t i = 0; i < rule.size(); ++i) {
      const double x = rule.points[i][1], y = rule.points[i][2];
      double val = 0;
      for (const auto& t : terms) val += t[0] * std::pow(x, t[1]) * std::pow(y, t[2]);
      approx += rule.weights[i] * val;
    }
    worst = std::max(worst, std::abs(approx - exact) / scale);

    const IntervalRule& line = interval_rule(n);
    double lexact = 0, lscale = 0, lapprox = 0;
    std::vector<double> coef(n + 1);
    for (int p = 0; p <= n; ++p) {
      coef[p] = u(rng);
      lexact += coef[p] / (p + 1);
      lscale += std::abs(coef[p]) / (p + 1);
    }
    for (std::size_t i = 0; i < line.size(); ++i) {
      double val = 0;
      for (int p = n; p >= 0; --p) val = val * line.points[i] + coef[p];
      lapprox += line.weights[i] * val;
    }
    worst = std::max(worst, std::abs(lapprox - lexact) / lscale);
  }
  // physical element: x^2 y^2 over the unit right triangle is 1/180
  const Mesh tri({Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)}, {{0, 1, 2}});
  const double v = integrate_element(triangle_rule(4), tri, 0, [](const Vec2& x) {
    return x.x() * x.x() * x.y() * x.y();
  });
  worst = std::max(worst, std::abs(v - 1.0 / 180) * 180);
  r.passed = worst <= 1e-12;
  r.detail = fmt("degrees 0..%g, worst relative error %.3e", kMaxQuadratureDegree, worst);
  return r;
}

PropertyResult mesh_conformity(std::mt19937_64& rng) {
  PropertyResult r{"mesh conformity under random refinement", true, ""};
  Mesh m = build_rectangle_mesh(3, 3);
  std::bernoulli_distribution pick(0.25);
  try {
    for (int round = 0; round < 10; ++round) {
      std::vector<int> marked;
      for (int k = 0; k < m.num_elements(); ++k)
        if (pick(rng)) marked.push_back(k);
      Mesh next = refine(m, marked);
      check_mesh(next);
      if (std::abs(next.total_area() - 1.0) > 1e-12) throw NumericalError("total area drifted");
      for (int k = 0; k < next.num_elements(); ++k) {
        const int parent = next.parent(k);
        const int cuts = next.generation(k) - m.generation(parent);
        const double expect = m.area(parent) / std::ldexp(1.0, cuts);
        if (std::abs(next.area(k) - expect) > 1e-12 * expect)
          throw NumericalError("child area is not a power-of-two fraction of its parent");
      }
      std::vector<char> cut(m.num_elements(), 0);
      for (int c = 0; c < next.num_elements(); ++c)
        if (next.generation(c) > m.generation(next.parent(c))) cut[next.parent(c)] = 1;
      for (int k : marked)
        if (!cut[k]) throw NumericalError("a marked element was not bisected");
      for (int e = 0; e < next.num_edges(); ++e) {
        const Edge& ed = next.edge(e);
        if (ed.boundary()) continue;
        const Vec2 s = next.normal(ed.elements[0], ed.local[0]) + next.normal(ed.elements[1], ed.local[1]);
        if (s.norm() > 1e-12) throw NumericalError("interior edge normals are not opposite");
      }
      m = std::move(next);
    }
    r.detail = std::to_string(m.num_elements()) + " elements after 10 rounds";
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = e.what();
  }
  return r;
}

ProblemData operator_data(const std::string& velocity, double nu, double kappa) {
  ProblemData d;
  d.nu = nu;
  d.kappa = kappa;
  d.velocity = velocity_from_registry(velocity);
  return d;
}

double max_abs(const SparseMatrix& a) {
  double m = 0;
  for (int j = 0; j < a.outerSize(); ++j)
    for (SparseMatrix::InnerIterator it(a, j); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

PropertyResult transpose_identity(std::mt19937_64& rng) {
  PropertyResult r{"B* equals the transpose of B", true, ""};
  const Mesh mesh = random_mesh(rng, 4);
  double worst = 0;
  for (const char* vel : {"example1", "rotating"}) {
    const ProblemData d = operator_data(vel, 1e-2, 1.5);
    const SparseMatrix b = assemble_B(mesh, d), bs = assemble_Bstar(mesh, d);
    const SparseMatrix diff = SparseMatrix(bs - SparseMatrix(b.transpose()));
    worst = std::max(worst, max_abs(diff) / max_abs(b));
  }
  r.passed = worst <= 1e-13;
  r.detail = fmt("max entry difference %.3e relative", worst);
  return r;
}

PropertyResult coercivity(std::mt19937_64& rng) {
  PropertyResult r{"coercivity B(v,v) = |||v|||^2", true, ""};
  const Mesh mesh = random_mesh(rng, 4);
  std::uniform_real_distribution<double> u(-1, 1);
  double worst = 0;
  for (const char* vel : {"example1", "rotating"}) {
    const ProblemData d = operator_data(vel, 1e-3, 2.0);
    const SparseMatrix b = assemble_B(mesh, d, false), bs = assemble_Bstar(mesh, d, false);
    const SparseMatrix e = assemble_energy(mesh, d, false);
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::VectorXd x(mesh.num_vertices());
      for (int v = 0; v < mesh.num_vertices(); ++v) x[v] = mesh.is_boundary_vertex(v) ? 0.0 : u(rng);
      const double norm2 = x.dot(e * x);
      worst = std::max(worst, std::abs(x.dot(b * x) - norm2) / norm2);
      worst = std::max(worst, std::abs(x.dot(bs * x) - norm2) / norm2);
    }
  }
  r.passed = worst <= 1e-12;
  r.detail = fmt("worst relative gap %.3e over 20 random fields", worst);
  return r;
}

}  // namespace

std::vector<PropertyResult> run_property_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<PropertyResult> out;
  auto guarded = [&](auto&& fn) {
    try {
      out.push_back(fn());
    } catch (const std::exception& e) {
      out.push_back({"(property raised)", false, e.what()});
    }
  };
  guarded([] { return clamp_cases(); });
  guarded([&] { return lipschitz(rng); });
  guarded([&] { return quadrature_exactness(rng); });
  guarded([&] { return mesh_conformity(rng); });
  guarded([&] { return transpose_identity(rng); });
  guarded([&] { return coercivity(rng); });
  return out;
}

bool print_property_report(std::ostream& out, const std::vector<PropertyResult>& results) {
  bool ok = true;
  for (const auto& r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    ok = ok && r.passed;
  }
  return ok;
}

}  // namespace stabocp
