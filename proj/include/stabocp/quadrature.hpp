#pragma once

#include "stabocp/mesh.hpp"

#include <array>
#include <vector>

namespace stabocp {

/// Quadrature on the reference triangle (points in barycentric coordinates,
/// weights summing to 1/2) or on [0, 1] (points as the parameter t of the
/// segment, weights summing to 1).
struct QuadratureRule {
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
  int degree = 0;
  std::size_t size() const { return weights.size(); }
};

struct IntervalRule {
  std::vector<double> points;
  std::vector<double> weights;
  int degree = 0;
  std::size_t size() const { return weights.size(); }
};

inline constexpr int kMaxQuadratureDegree = 40;

/// Collapsed Gauss-Legendre rule exact for total degree <= `degree`.
const QuadratureRule& triangle_rule(int degree);
/// Gauss-Legendre rule on [0, 1] exact for degree <= `degree`.
const IntervalRule& interval_rule(int degree);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

/// Integral of f over element k using `rule`.
double integrate_element(const QuadratureRule& rule, const Mesh& mesh, int k, const ScalarFn& f);

/// Integral of f over edge e using `rule`; f receives the physical point.
double integrate_edge(const IntervalRule& rule, const Mesh& mesh, int e, const ScalarFn& f);

}  // namespace stabocp
