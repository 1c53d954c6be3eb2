#include "stabocp/femspace.hpp"

#include "stabocp/quadrature.hpp"

#include <cmath>

namespace stabocp {

P1Field::P1Field(const Mesh& mesh) : mesh_(&mesh), values_(Eigen::VectorXd::Zero(mesh.num_vertices())) {}

P1Field::P1Field(const Mesh& mesh, Eigen::VectorXd values, BoundaryMode mode)
    : mesh_(&mesh), values_(std::move(values)) {
  if (values_.size() != mesh.num_vertices()) throw InvalidInput("P1Field: wrong number of coefficients");
  if (mode == BoundaryMode::Homogeneous)
    for (int v = 0; v < mesh.num_vertices(); ++v)
      if (mesh.is_boundary_vertex(v)) values_[v] = 0.0;
}

std::array<double, 3> P1Field::local(int k) const {
  const auto& el = mesh_->element(k);
  return {values_[el[0]], values_[el[1]], values_[el[2]]};
}

Vec2 P1Field::gradient(int k) const {
  const auto& el = mesh_->element(k);
  return values_[el[0]] * mesh_->grad_lambda(k, 0) + values_[el[1]] * mesh_->grad_lambda(k, 1) +
         values_[el[2]] * mesh_->grad_lambda(k, 2);
}

double P1Field::value(int k, const std::array<double, 3>& bary) const {
  const auto l = local(k);
  return l[0] * bary[0] + l[1] * bary[1] + l[2] * bary[2];
}

double P1Field::mean(int k) const {
  const auto l = local(k);
  return (l[0] + l[1] + l[2]) / 3.0;
}

P0Field::P0Field(const Mesh& mesh, double value)
    : mesh_(&mesh), values_(Eigen::VectorXd::Constant(mesh.num_elements(), value)) {}

P0Field::P0Field(const Mesh& mesh, Eigen::VectorXd values) : mesh_(&mesh), values_(std::move(values)) {
  if (values_.size() != mesh.num_elements()) throw InvalidInput("P0Field: wrong number of values");
}

Eigen::Matrix3d local_mass(const Mesh& mesh, int k) {
  Eigen::Matrix3d m = Eigen::Matrix3d::Constant(1.0);
  m.diagonal().setConstant(2.0);
  return mesh.area(k) / 12.0 * m;
}

Eigen::Matrix3d local_stiffness(const Mesh& mesh, int k) {
  Eigen::Matrix3d s;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s(i, j) = mesh.area(k) * mesh.grad_lambda(k, i).dot(mesh.grad_lambda(k, j));
  return s;
}

double p1_norm2(double area, const std::array<double, 3>& v) {
  const double s = v[0] + v[1] + v[2];
  return area / 12.0 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + s * s);
}

Eigen::Vector3d load_moments(const Mesh& mesh, int k, const ScalarFn& f, int degree) {
  const auto& rule = triangle_rule(degree);
  Eigen::Vector3d m = Eigen::Vector3d::Zero();
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const auto& b = rule.points[q];
    const double fw = rule.weights[q] * f(mesh.point(k, b));
    m += fw * Eigen::Vector3d(b[0], b[1], b[2]);
  }
  return 2 * mesh.area(k) * m;
}

LinearOnElement from_moments(const Mesh& mesh, int k, const Eigen::Vector3d& moments) {
  const double area = mesh.area(k);
  if (!(area > 0)) throw NumericalError("singular local mass matrix");
  // Inverse of |K|/12 (I + 11^T) is 3/|K| (4I - 11^T).
  const double s = moments.sum();
  LinearOnElement p;
  for (int i = 0; i < 3; ++i) p.nodal[i] = 3.0 / area * (4 * moments[i] - s);
  return p;
}

LinearOnElement project_P1(const Mesh& mesh, int k, const ScalarFn& f, int degree) {
  return from_moments(mesh, k, load_moments(mesh, k, f, degree));
}

std::vector<char> boundary_mask(const Mesh& mesh) {
  std::vector<char> m(mesh.num_vertices());
  for (int v = 0; v < mesh.num_vertices(); ++v) m[v] = mesh.is_boundary_vertex(v) ? 1 : 0;
  return m;
}

namespace {

// sign = +1 for B, -1 for B*, 0 for the symmetric energy form.
SparseMatrix assemble_cdr(const Mesh& mesh, const ProblemData& data, double sign, bool eliminate) {
  const auto& rule = triangle_rule(data.quad_degree);
  std::vector<Eigen::Matrix3d> blocks(mesh.num_elements());
  parallel_for(mesh.num_elements(), [&](std::size_t kk) {
    const int k = static_cast<int>(kk);
    Eigen::Matrix3d a = data.nu * local_stiffness(mesh, k) + data.kappa * local_mass(mesh, k);
    if (sign != 0) {
      Eigen::Matrix3d c = Eigen::Matrix3d::Zero();
      for (std::size_t q = 0; q < rule.size(); ++q) {
        const auto& bc = rule.points[q];
        const Vec2 b = data.velocity.value(mesh.point(k, bc));
        for (int n = 0; n < 3; ++n) {
          const double bg = rule.weights[q] * b.dot(mesh.grad_lambda(k, n));
          for (int m = 0; m < 3; ++m) c(m, n) += bg * bc[m];
        }
      }
      a += sign * 2 * mesh.area(k) * c;
    }
    blocks[kk] = a;
  });
  SparseSystem sys(mesh.num_vertices());
  sys.reserve(9 * blocks.size());
  for (int k = 0; k < mesh.num_elements(); ++k) {
    const auto& el = mesh.element(k);
    for (int m = 0; m < 3; ++m)
      for (int n = 0; n < 3; ++n) sys.add(el[m], el[n], blocks[k](m, n));
  }
  SparseMatrix a = sys.matrix();
  if (eliminate) {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(a.rows());
    eliminate_dirichlet(a, rhs, boundary_mask(mesh));
  }
  return a;
}

}  // namespace

SparseMatrix assemble_B(const Mesh& mesh, const ProblemData& data, bool eliminate) {
  return assemble_cdr(mesh, data, 1.0, eliminate);
}

SparseMatrix assemble_Bstar(const Mesh& mesh, const ProblemData& data, bool eliminate) {
  return assemble_cdr(mesh, data, -1.0, eliminate);
}

SparseMatrix assemble_energy(const Mesh& mesh, const ProblemData& data, bool eliminate) {
  return assemble_cdr(mesh, data, 0.0, eliminate);
}

SparseMatrix assemble_mass(const Mesh& mesh, bool eliminate) {
  SparseSystem sys(mesh.num_vertices());
  for (int k = 0; k < mesh.num_elements(); ++k) {
    const auto& el = mesh.element(k);
    const Eigen::Matrix3d m = local_mass(mesh, k);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) sys.add(el[i], el[j], m(i, j));
  }
  SparseMatrix a = sys.matrix();
  if (eliminate) {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(a.rows());
    eliminate_dirichlet(a, rhs, boundary_mask(mesh));
  }
  return a;
}

Eigen::VectorXd assemble_load(const Mesh& mesh, const ScalarFn& f, int degree) {
  std::vector<Eigen::Vector3d> loc(mesh.num_elements());
  parallel_for(mesh.num_elements(), [&](std::size_t k) { loc[k] = load_moments(mesh, static_cast<int>(k), f, degree); });
  Eigen::VectorXd b = Eigen::VectorXd::Zero(mesh.num_vertices());
  for (int k = 0; k < mesh.num_elements(); ++k)
    for (int i = 0; i < 3; ++i) b[mesh.element(k)[i]] += loc[k][i];
  for (int v = 0; v < mesh.num_vertices(); ++v)
    if (mesh.is_boundary_vertex(v)) b[v] = 0;
  return b;
}

double energy_norm(const Mesh& mesh, const ProblemData& data, const P1Field& v, int k) {
  const double g = v.gradient(k).squaredNorm() * mesh.area(k);
  return std::sqrt(data.nu * g + data.kappa * p1_norm2(mesh.area(k), v.local(k)));
}

double energy_norm(const Mesh& mesh, const ProblemData& data, const P1Field& v) {
  std::vector<double> e(mesh.num_elements());
  for (int k = 0; k < mesh.num_elements(); ++k) e[k] = energy_norm(mesh, data, v, k);
  return root_sum_squares(e);
}

double energy_error(const Mesh& mesh, const ProblemData& data, const ScalarFn& exact,
                    const std::function<Vec2(const Vec2&)>& exact_gradient, const P1Field& v, int degree) {
  const auto& rule = triangle_rule(degree);
  std::vector<double> loc(mesh.num_elements());
  parallel_for(mesh.num_elements(), [&](std::size_t kk) {
    const int k = static_cast<int>(kk);
    const Vec2 gv = v.gradient(k);
    double s = 0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto& b = rule.points[q];
      const Vec2 x = mesh.point(k, b);
      const double e = exact(x) - v.value(k, b);
      s += rule.weights[q] * (data.nu * (exact_gradient(x) - gv).squaredNorm() + data.kappa * e * e);
    }
    loc[kk] = 2 * mesh.area(k) * s;
  });
  return std::sqrt(pairwise_sum(loc));
}

double l2_error(const Mesh& mesh, const ScalarFn& exact, const P1Field& v, int degree) {
  const auto& rule = triangle_rule(degree);
  std::vector<double> loc(mesh.num_elements());
  parallel_for(mesh.num_elements(), [&](std::size_t kk) {
    const int k = static_cast<int>(kk);
    double s = 0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double e = exact(mesh.point(k, rule.points[q])) - v.value(k, rule.points[q]);
      s += rule.weights[q] * e * e;
    }
    loc[kk] = 2 * mesh.area(k) * s;
  });
  return std::sqrt(pairwise_sum(loc));
}

double l2_error(const Mesh& mesh, const ScalarFn& exact, const P0Field& v, int degree) {
  const auto& rule = triangle_rule(degree);
  std::vector<double> loc(mesh.num_elements());
  parallel_for(mesh.num_elements(), [&](std::size_t kk) {
    const int k = static_cast<int>(kk);
    double s = 0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const double e = exact(mesh.point(k, rule.points[q])) - v[k];
      s += rule.weights[q] * e * e;
    }
    loc[kk] = 2 * mesh.area(k) * s;
  });
  return std::sqrt(pairwise_sum(loc));
}

double triple_error_norm(double ey, double ep, double eu) { return std::sqrt(ey * ey + ep * ep + eu * eu); }

ErrorNorms error_norms(const Mesh& mesh, const ProblemData& data, const ExactSolution& exact, const P1Field& y,
                       const P1Field& p, const P0Field& u, int degree) {
  ErrorNorms e;
  e.state = energy_error(mesh, data, exact.state, exact.state_gradient, y, degree);
  e.adjoint = energy_error(mesh, data, exact.adjoint, exact.adjoint_gradient, p, degree);
  e.control = l2_error(mesh, exact.control, u, degree);
  e.total = triple_error_norm(e.state, e.adjoint, e.control);
  return e;
}

VtkField vtk_field(const std::string& name, const P1Field& f) {
  return {name, std::vector<double>(f.values().begin(), f.values().end())};
}

VtkField vtk_field(const std::string& name, const P0Field& f) {
  return {name, std::vector<double>(f.values().begin(), f.values().end())};
}

}  // namespace stabocp
