#pragma once

#include "stabocp/stabilization.hpp"

#include <array>
#include <vector>

namespace stabocp {

/// Linear polynomial on an edge of element k, stored by its values at the two
/// endpoints in the element's local order: local edge j runs from local
/// vertex (j+1)%3 to (j+2)%3.
using EdgeLinear = std::array<double, 2>;

/// One-sided conormal flux nu grad(xi)|_K . n_K on local edge j.
double conormal_flux(const Mesh& mesh, const ProblemData& data, const P1Field& xi, int k, int j);

/// <J>_{e,K}: half the difference of the one-sided fluxes on an interior edge,
/// the one-sided flux on a boundary edge (constant along the edge).
EdgeLinear averaged_flux(const Mesh& mesh, const ProblemData& data, const P1Field& xi, int k, int j);

/// Equilibrated boundary fluxes g_{e,K} for all (element, local edge) pairs.
struct FluxSet {
  Side side = Side::State;
  std::vector<EdgeLinear> g;      // index 3k + j
  std::vector<double> xi;         // patch unknowns, index 3k + local vertex
  double max_compatibility = 0;   // worst relative |sum_K Delta_K(lambda_i)| over interior vertices
  double max_consistency = 0;     // worst |g_{e,K} + g_{e,K'}|
  double max_equilibration = 0;   // worst relative first-order equilibration defect

  const EdgeLinear& flux(int k, int j) const { return g[3 * k + j]; }
};

/// Delta_K(lambda_i) for the three local vertices of every element.
std::vector<Eigen::Vector3d> residual_moments(const Mesh& mesh, const ProblemData& data,
                                              const std::vector<ElementForms>& forms, Side side,
                                              const OcpFields& fields);

/// Solves the patch system of vertex v. Returns xi_{K,v} for K in patch(v)
/// order. Interior vertices pin the lowest-indexed element to 0 after checking
/// that the right-hand side sums to zero (relative to `scale`).
std::vector<double> patch_solve(const Mesh& mesh, int v, std::span<const double> delta, double scale,
                                double* compatibility = nullptr);

/// Full flux construction for one side of the optimality system, followed by
/// the consistency and first-order equilibration checks (stored in the set).
FluxSet build_fluxes(const Mesh& mesh, const ProblemData& data, const std::vector<ElementForms>& forms, Side side,
                     const OcpFields& fields);

/// g on one edge from its two moments mu = ((g, lambda_a), (g, lambda_b)).
EdgeLinear flux_from_moments(double length, double mu_a, double mu_b);

/// Moments (g, lambda_a)_e and (g, lambda_b)_e of an edge-linear function.
std::array<double, 2> edge_moments(double length, const EdgeLinear& g);

}  // namespace stabocp
