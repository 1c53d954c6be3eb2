#pragma once

#include "stabocp/equilibration.hpp"

#include <array>
#include <vector>

namespace stabocp {

/// Residual data of one element: interior residual R_K (P1), edge residuals
/// R_{e,K} = g_{e,K} - nu grad(xi).n (edge-linear, local edge order) and the
/// L2 norm of the data oscillation.
struct ElementResidual {
  LinearOnElement interior;
  std::array<EdgeLinear, 3> edge{};
  double oscillation = 0;
  double magnitude = 0;  // L2(K) size of the terms cancelling in R_K + div sigma, for relative checks
};

ElementResidual element_residual(const Mesh& mesh, const ProblemData& data, const OcpFields& fields,
                                 const FluxSet& fluxes, int k, Side side);

/// [P2]^2 field on one element in the barycentric monomial basis
/// {l0^2, l1^2, l2^2, l0 l1, l1 l2, l2 l0}: coefficients 0..5 for the first
/// component, 6..11 for the second.
struct ElementSigma {
  Eigen::Matrix<double, 12, 1> coeffs = Eigen::Matrix<double, 12, 1>::Zero();
  double norm = 0;
};

/// Gram matrix of the 12 basis fields on element k.
Eigen::Matrix<double, 12, 12> sigma_gram(const Mesh& mesh, int k);

/// Constraint rows: div at the three vertices (scaled by h_K) and the normal
/// component at the endpoints and midpoint of each local edge.
void sigma_constraints(const Mesh& mesh, int k, const LinearOnElement& div_data,
                       const std::array<EdgeLinear, 3>& normal_data, Eigen::Matrix<double, 12, 12>& c,
                       Eigen::Matrix<double, 12, 1>& d);

/// Least-L2-norm sigma in [P2(K)]^2 with -div sigma = div_data and
/// sigma.n = normal_data on every edge. Throws NumericalError when the data
/// violate the compatibility condition beyond 1e-10 (relative).
ElementSigma recover_sigma(const Mesh& mesh, int k, const LinearOnElement& div_data,
                           const std::array<EdgeLinear, 3>& normal_data);

/// Residuals of the recovered field: max(||div sigma + p_K||, max_e ||sigma.n - p_e||) relative to the data size.
double sigma_constraint_residual(const Mesh& mesh, int k, const ElementSigma& s, const LinearOnElement& div_data,
                                 const std::array<EdgeLinear, 3>& normal_data);

/// Data of the local Neumann problem built from the element residual:
/// p_K = R_K - mean(R_K) - (1/|K|) sum_e (R_e, 1)_e and p_e = R_e.
LinearOnElement sigma_interior_data(const Mesh& mesh, int k, const ElementResidual& r);

/// Per-element sigma, residuals and diagnostics for one side.
struct SigmaField {
  Side side = Side::State;
  std::vector<ElementSigma> sigma;
  std::vector<ElementResidual> residual;
  std::vector<double> identity_defect;  // | ||R_K + div sigma||  -  |S_K(1)|/sqrt|K| |
  double max_constraint_residual = 0;
  double max_identity_defect = 0;  // relative
  double max_stability_ratio = 0;
};

SigmaField recover_all(const Mesh& mesh, const ProblemData& data, const std::vector<ElementForms>& forms,
                       const OcpFields& fields, const FluxSet& fluxes, Side side);

/// Divergence of sigma as vertex values on element k.
LinearOnElement sigma_divergence(const Mesh& mesh, int k, const ElementSigma& s);

}  // namespace stabocp
