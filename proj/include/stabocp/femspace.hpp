#pragma once

#include "stabocp/linsys.hpp"
#include "stabocp/mesh.hpp"
#include "stabocp/problem.hpp"

#include <array>
#include <span>

namespace stabocp {

enum class BoundaryMode { Homogeneous, Free };

/// Continuous piecewise linear function, one coefficient per vertex. In
/// Homogeneous mode (the default) boundary coefficients are pinned to 0.
/// The mesh must outlive the field.
class P1Field {
 public:
  P1Field() = default;
  explicit P1Field(const Mesh& mesh);
  P1Field(const Mesh& mesh, Eigen::VectorXd values, BoundaryMode mode = BoundaryMode::Homogeneous);

  const Mesh& mesh() const { return *mesh_; }
  const Eigen::VectorXd& values() const { return values_; }
  double operator[](int v) const { return values_[v]; }
  std::array<double, 3> local(int k) const;
  Vec2 gradient(int k) const;
  double value(int k, const std::array<double, 3>& bary) const;
  double mean(int k) const;

 private:
  const Mesh* mesh_ = nullptr;
  Eigen::VectorXd values_;
};

/// Piecewise constant function, one value per element.
class P0Field {
 public:
  P0Field() = default;
  explicit P0Field(const Mesh& mesh, double value = 0.0);
  P0Field(const Mesh& mesh, Eigen::VectorXd values);

  const Mesh& mesh() const { return *mesh_; }
  const Eigen::VectorXd& values() const { return values_; }
  double operator[](int k) const { return values_[k]; }

 private:
  const Mesh* mesh_ = nullptr;
  Eigen::VectorXd values_;
};

/// Linear polynomial on one element, stored by its vertex values.
struct LinearOnElement {
  std::array<double, 3> nodal{};
  double operator()(const std::array<double, 3>& bary) const {
    return nodal[0] * bary[0] + nodal[1] * bary[1] + nodal[2] * bary[2];
  }
  double mean() const { return (nodal[0] + nodal[1] + nodal[2]) / 3.0; }
};

/// Local P1 mass matrix |K|/12 (1 + delta_ij).
Eigen::Matrix3d local_mass(const Mesh& mesh, int k);
/// Local stiffness |K| grad(lambda_i).grad(lambda_j).
Eigen::Matrix3d local_stiffness(const Mesh& mesh, int k);
/// Squared L2(K) norm of a linear function given by vertex values.
double p1_norm2(double area, const std::array<double, 3>& nodal);

/// Moments (f, lambda_i)_K with a degree-`degree` rule.
Eigen::Vector3d load_moments(const Mesh& mesh, int k, const ScalarFn& f, int degree);
/// The linear polynomial whose moments against the hats equal `moments`.
LinearOnElement from_moments(const Mesh& mesh, int k, const Eigen::Vector3d& moments);
/// L2(K) projection onto P1(K).
LinearOnElement project_P1(const Mesh& mesh, int k, const ScalarFn& f, int degree);

/// Matrix of B(w, v) = nu (grad w, grad v) + (b.grad w + kappa w, v); row = test vertex.
SparseMatrix assemble_B(const Mesh& mesh, const ProblemData& data, bool eliminate = true);
/// Matrix of B*(w, v) = nu (grad w, grad v) + (kappa w - b.grad w, v).
SparseMatrix assemble_Bstar(const Mesh& mesh, const ProblemData& data, bool eliminate = true);
/// Matrix of nu (grad w, grad v) + kappa (w, v), the energy inner product.
SparseMatrix assemble_energy(const Mesh& mesh, const ProblemData& data, bool eliminate = true);
SparseMatrix assemble_mass(const Mesh& mesh, bool eliminate = true);
/// Load vector (f, lambda_i) with boundary rows zeroed.
Eigen::VectorXd assemble_load(const Mesh& mesh, const ScalarFn& f, int degree);

std::vector<char> boundary_mask(const Mesh& mesh);

/// (nu ||grad v||^2 + kappa ||v||^2)^(1/2) over the whole mesh or one element.
double energy_norm(const Mesh& mesh, const ProblemData& data, const P1Field& v);
double energy_norm(const Mesh& mesh, const ProblemData& data, const P1Field& v, int k);
/// Energy norm of (exact - v) evaluated with a degree-`degree` rule.
double energy_error(const Mesh& mesh, const ProblemData& data, const ScalarFn& exact,
                    const std::function<Vec2(const Vec2&)>& exact_gradient, const P1Field& v, int degree = 19);
double l2_error(const Mesh& mesh, const ScalarFn& exact, const P1Field& v, int degree = 19);
double l2_error(const Mesh& mesh, const ScalarFn& exact, const P0Field& v, int degree = 19);

struct ErrorNorms {
  double state = 0, adjoint = 0, control = 0, total = 0;
};

/// (|||e_y|||^2 + |||e_p|||^2 + ||e_u||^2)^(1/2).
double triple_error_norm(double ey, double ep, double eu);
ErrorNorms error_norms(const Mesh& mesh, const ProblemData& data, const ExactSolution& exact, const P1Field& y,
                       const P1Field& p, const P0Field& u, int degree = 19);

/// VTK data blocks: P1 fields go to point data, P0 fields to cell data.
VtkField vtk_field(const std::string& name, const P1Field& f);
VtkField vtk_field(const std::string& name, const P0Field& f);

}  // namespace stabocp
