#include "stabocp/quadrature.hpp"

#include <cmath>
#include <numbers>

namespace stabocp {

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1, p1 = 0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1) * z * p1 - j * p2) / (j + 1);
      }
      dp = n * (z * p0 - p1) / (z * z - 1);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    nodes[i] = -z;
    nodes[n - 1 - i] = z;
    weights[i] = weights[n - 1 - i] = 2 / ((1 - z * z) * dp * dp);
  }
}

namespace {

struct RuleTables {
  std::vector<QuadratureRule> tri;
  std::vector<IntervalRule> line;
  RuleTables() {
    for (int d = 0; d <= kMaxQuadratureDegree; ++d) {
      std::vector<double> xu, wu, xv, wv;
      const int nu = (d + 3) / 2;  // ceil((d+2)/2)
      const int nv = (d + 2) / 2;  // ceil((d+1)/2)
      gauss_legendre(nu, xu, wu);
      gauss_legendre(nv, xv, wv);
      QuadratureRule r;
      r.degree = d;
      for (int i = 0; i < nu; ++i) {
        const double u = 0.5 * (xu[i] + 1);
        for (int j = 0; j < nv; ++j) {
          const double v = 0.5 * (xv[j] + 1);
          const double x = u, y = v * (1 - u);
          r.points.push_back({1 - x - y, x, y});
          r.weights.push_back(0.25 * wu[i] * wv[j] * (1 - u));
        }
      }
      tri.push_back(std::move(r));

      IntervalRule l;
      l.degree = d;
      gauss_legendre(nv, xv, wv);
      for (int j = 0; j < nv; ++j) {
        l.points.push_back(0.5 * (xv[j] + 1));
        l.weights.push_back(0.5 * wv[j]);
      }
      line.push_back(std::move(l));
    }
  }
};

const RuleTables& tables() {
  static const RuleTables t;
  return t;
}

void check_degree(int degree) {
  if (degree < 0 || degree > kMaxQuadratureDegree)
    throw InvalidInput("quadrature degree " + std::to_string(degree) + " not supported");
}

}  // namespace

const QuadratureRule& triangle_rule(int degree) {
  check_degree(degree);
  return tables().tri[degree];
}

const IntervalRule& interval_rule(int degree) {
  check_degree(degree);
  return tables().line[degree];
}

double integrate_element(const QuadratureRule& rule, const Mesh& mesh, int k, const ScalarFn& f) {
  if (k < 0 || k >= mesh.num_elements()) throw InvalidInput("element index out of range");
  double s = 0;
  for (std::size_t q = 0; q < rule.size(); ++q) s += rule.weights[q] * f(mesh.point(k, rule.points[q]));
  return 2 * mesh.area(k) * s;
}

double integrate_edge(const IntervalRule& rule, const Mesh& mesh, int e, const ScalarFn& f) {
  if (e < 0 || e >= mesh.num_edges()) throw InvalidInput("edge index out of range");
  const auto& ed = mesh.edge(e);
  const Vec2& a = mesh.vertex(ed.vertices[0]);
  const Vec2& b = mesh.vertex(ed.vertices[1]);
  double s = 0;
  for (std::size_t q = 0; q < rule.size(); ++q) s += rule.weights[q] * f((1 - rule.points[q]) * a + rule.points[q] * b);
  return mesh.edge_length(e) * s;
}

}  // namespace stabocp
