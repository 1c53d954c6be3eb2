#pragma once

#include "stabocp/femspace.hpp"

#include <array>
#include <vector>

namespace stabocp {

/// max |b| over the quadrature points of element k.
double velocity_sup(const ProblemData& data, const Mesh& mesh, int k);
double peclet(const ProblemData& data, const Mesh& mesh, int k);

/// Peclet-switched element parameter for SUPG/GLS (same value on both sides).
double tau_state(const ProblemData& data, const Mesh& mesh, int k);
double tau_adjoint(const ProblemData& data, const Mesh& mesh, int k);
/// Edge parameter: h_e^2/12 for CIP, 1/24 for ES, 0 otherwise.
double tau_edge(Scheme scheme, const Mesh& mesh, int e);

/// Robust (R-norm) estimation is defined for SUPG and CIP only. Throws
/// InvalidInput for other schemes and NumericalError if a parameter bound
/// (||b|| tau_K <= h_K/2, tau_e <= h_e^2/12) fails.
void check_robust_admissible(const ProblemData& data, const Mesh& mesh, Scheme scheme);

/// Solution fields of the optimality system seen by the local forms.
struct OcpFields {
  const P1Field* state = nullptr;
  const P1Field* adjoint = nullptr;
  const P0Field* control = nullptr;
};

/// Element contributions of the stabilized state (or adjoint) equation, tested
/// with the three hats of the element (row m = test hat, column n = trial hat).
/// T denotes the stabilization test operator (b.grad v for SUPG, plus kappa v
/// for GLS; with -b on the adjoint side) and tau its element parameter.
struct ElementForms {
  Eigen::Matrix3d galerkin = Eigen::Matrix3d::Zero();  // B_K or B*_K
  Eigen::Matrix3d stab = Eigen::Matrix3d::Zero();      // bilinear part of S_K, trial on K
  std::array<Eigen::Matrix3d, 3> stab_neighbor{Eigen::Matrix3d::Zero(), Eigen::Matrix3d::Zero(),
                                               Eigen::Matrix3d::Zero()};  // trial on the element across edge j
  Eigen::Vector3d source = Eigen::Vector3d::Zero();       // (g, lambda_m + tau T lambda_m)
  Eigen::Vector3d source_stab = Eigen::Vector3d::Zero();  // (g, tau T lambda_m)
  Eigen::Vector3d constant = Eigen::Vector3d::Zero();     // (1, lambda_m + tau T lambda_m)
  Eigen::Vector3d constant_stab = Eigen::Vector3d::Zero();
  Eigen::Matrix3d mass = Eigen::Matrix3d::Zero();  // (lambda_n, lambda_m + tau T lambda_m)
  Eigen::Matrix3d mass_stab = Eigen::Matrix3d::Zero();
  double tau = 0;
};

/// Forms for every element. g is the source f on the state side and the
/// desired state on the adjoint side. Throws if CIP/ES is requested on a mesh
/// without interior edges.
std::vector<ElementForms> element_forms(const Mesh& mesh, const ProblemData& data, Side side);

/// Values B_K(xi, lambda_m) + S_K(xi, q; lambda_m) - (q, lambda_m)_K for the
/// three hats of K (B*, S* and q = y - y_d on the adjoint side).
Eigen::Vector3d local_residual(const Mesh& mesh, const ElementForms& forms, int k, Side side, const OcpFields& fields);

enum class TestFunction { One, Hat0, Hat1, Hat2 };

/// S_K(xi, q; v) for v = 1 or one of the local hats. S_K(.;1) is exactly 0 for
/// SUPG, CIP and ES; for GLS it equals tau kappa (L xi - q, 1)_K.
double stab_eval(const Mesh& mesh, const ProblemData& data, const std::vector<ElementForms>& forms, int k, Side side,
                 const OcpFields& fields, TestFunction test);

/// Global stabilization matrix and the data-dependent right-hand side
/// tau (q, T lambda_m) for the given coupling fields (control on the state
/// side, state on the adjoint side). Boundary rows are left unconstrained.
struct StabContribution {
  SparseMatrix matrix;
  Eigen::VectorXd rhs;
};
StabContribution stab_matrix_contrib(const Mesh& mesh, const ProblemData& data, Side side, const OcpFields& fields);

}  // namespace stabocp
