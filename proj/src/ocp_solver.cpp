#include "stabocp/ocp_solver.hpp"

#include <cmath>
#include <string>
#include <unordered_set>

namespace stabocp {

double project_control(double w, double lower, double upper) {
  if (!(lower < upper)) throw InvalidInput("projection requires lower < upper");
  return std::min(upper, std::max(lower, w));
}

P1Field project_field_pointwise(const P1Field& p, double theta, double lower, double upper) {
  Eigen::VectorXd v(p.values().size());
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = project_control(-p.values()[i] / theta, lower, upper);
  return P1Field(p.mesh(), std::move(v), BoundaryMode::Free);
}

P0Field project_field_mean(const P1Field& p, double theta, double lower, double upper) {
  const Mesh& mesh = p.mesh();
  Eigen::VectorXd v(mesh.num_elements());
  for (int k = 0; k < mesh.num_elements(); ++k) v[k] = project_control(-p.mean(k) / theta, lower, upper);
  return P0Field(mesh, std::move(v));
}

Discretization discretize(const Mesh& mesh, const ProblemData& data) {
  data.validate();
  return {element_forms(mesh, data, Side::State), element_forms(mesh, data, Side::Adjoint)};
}

namespace {

Activity classify(double w, double lower, double upper) {
  if (w < lower) return Activity::Lower;
  if (w > upper) return Activity::Upper;
  return Activity::Inactive;
}

std::string key_of(const std::vector<Activity>& a) {
  std::string s(a.size(), '0');
  for (std::size_t i = 0; i < a.size(); ++i) s[i] = static_cast<char>('1' + static_cast<int>(a[i]));
  return s;
}

// Sum of local residual vectors into vertex numbering, boundary rows dropped.
Eigen::VectorXd global_residual(const Mesh& mesh, const std::vector<ElementForms>& forms, Side side,
                                const OcpFields& fields, Eigen::VectorXd* scale) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(mesh.num_vertices());
  if (scale) *scale = Eigen::VectorXd::Zero(mesh.num_vertices());
  for (int k = 0; k < mesh.num_elements(); ++k) {
    const Eigen::Vector3d loc = local_residual(mesh, forms[k], k, side, fields);
    for (int m = 0; m < 3; ++m) {
      const int v = mesh.element(k)[m];
      if (mesh.is_boundary_vertex(v)) continue;
      r[v] += loc[m];
      if (scale) (*scale)[v] += std::abs(forms[k].source[m]) + std::abs(forms[k].galerkin.row(m).sum());
    }
  }
  return r;
}

}  // namespace

OcpSolution solve_ocp(const Mesh& mesh, const ProblemData& data, const Discretization& disc, const P0Field* init,
                      const OcpOptions& opts) {
  data.validate();
  const int nv = mesh.num_vertices();
  const int ne = mesh.num_elements();
  const std::vector<char> bnd = boundary_mask(mesh);

  // Control-independent part of the coupled (state, adjoint) system.
  std::vector<Triplet> base;
  base.reserve(static_cast<std::size_t>(ne) * 40);
  Eigen::VectorXd rhs0 = Eigen::VectorXd::Zero(2 * nv);
  for (int v = 0; v < nv; ++v)
    if (bnd[v]) {
      base.emplace_back(v, v, 1.0);
      base.emplace_back(nv + v, nv + v, 1.0);
    }
  for (int k = 0; k < ne; ++k) {
    const auto& el = mesh.element(k);
    const ElementForms& S = disc.state[k];
    const ElementForms& A = disc.adjoint[k];
    const Eigen::Matrix3d sk = S.galerkin + S.stab;
    const Eigen::Matrix3d ak = A.galerkin + A.stab;
    for (int m = 0; m < 3; ++m) {
      const int r = el[m];
      if (bnd[r]) continue;
      rhs0[r] += S.source[m];
      rhs0[nv + r] -= A.source[m];
      for (int n = 0; n < 3; ++n) {
        const int c = el[n];
        if (bnd[c]) continue;
        base.emplace_back(r, c, sk(m, n));
        base.emplace_back(nv + r, nv + c, ak(m, n));
        base.emplace_back(nv + r, c, -A.mass(m, n));
      }
      for (int j = 0; j < 3; ++j) {
        const int kn = mesh.neighbor(k, j);
        if (kn < 0) continue;
        const auto& en = mesh.element(kn);
        for (int n = 0; n < 3; ++n) {
          const int c = en[n];
          if (bnd[c]) continue;
          if (S.stab_neighbor[j](m, n) != 0) base.emplace_back(r, c, S.stab_neighbor[j](m, n));
          if (A.stab_neighbor[j](m, n) != 0) base.emplace_back(nv + r, nv + c, A.stab_neighbor[j](m, n));
        }
      }
    }
  }
  SparseMatrix base_matrix(2 * nv, 2 * nv);
  base_matrix.setFromTriplets(base.begin(), base.end());
  base.clear();
  base.shrink_to_fit();

  std::vector<Activity> active(ne, Activity::Inactive);
  if (init) {
    if (init->values().size() != ne) throw InvalidInput("initial control has wrong size");
    for (int k = 0; k < ne; ++k) {
      const double u = (*init)[k];
      active[k] = u <= data.lower ? Activity::Lower : u >= data.upper ? Activity::Upper : Activity::Inactive;
    }
  }

  std::unordered_set<std::string> seen;
  Eigen::VectorXd x;
  int iter = 0;
  int last_delta = -1;
  for (;;) {
    if (iter >= opts.max_iters)
      throw NumericalError("active set iteration did not converge in " + std::to_string(opts.max_iters) +
                           " iterations (last change: " + std::to_string(last_delta) + " elements)");
    if (!seen.insert(key_of(active)).second)
      throw NumericalError("active set iteration cycled after " + std::to_string(iter) + " iterations");
    ++iter;

    std::vector<Triplet> coupling;
    coupling.reserve(static_cast<std::size_t>(ne) * 9);
    Eigen::VectorXd rhs = rhs0;
    const double inv = 1.0 / (3.0 * data.theta);
    for (int k = 0; k < ne; ++k) {
      const auto& el = mesh.element(k);
      const ElementForms& S = disc.state[k];
      for (int m = 0; m < 3; ++m) {
        const int r = el[m];
        if (bnd[r]) continue;
        if (active[k] == Activity::Inactive) {
          // u_K = -(p_0 + p_1 + p_2) / (3 theta) moved to the left-hand side.
          for (int n = 0; n < 3; ++n)
            if (!bnd[el[n]]) coupling.emplace_back(r, nv + el[n], S.constant[m] * inv);
        } else {
          rhs[r] += S.constant[m] * (active[k] == Activity::Lower ? data.lower : data.upper);
        }
      }
    }
    SparseMatrix c(2 * nv, 2 * nv);
    c.setFromTriplets(coupling.begin(), coupling.end());
    const SparseMatrix system = base_matrix + c;
    x = solve(system, rhs, opts.linear);

    std::vector<Activity> next(ne);
    int delta = 0;
    for (int k = 0; k < ne; ++k) {
      const auto& el = mesh.element(k);
      const double mean = (x[nv + el[0]] + x[nv + el[1]] + x[nv + el[2]]) / 3.0;
      next[k] = classify(-mean / data.theta, data.lower, data.upper);
      delta += next[k] != active[k];
    }
    last_delta = delta;
    if (delta == 0) break;
    active.swap(next);
  }

  OcpSolution sol;
  sol.state = P1Field(mesh, x.head(nv));
  sol.adjoint = P1Field(mesh, x.tail(nv));
  Eigen::VectorXd u(ne);
  for (int k = 0; k < ne; ++k) {
    switch (active[k]) {
      case Activity::Lower: u[k] = data.lower; break;
      case Activity::Upper: u[k] = data.upper; break;
      case Activity::Inactive: u[k] = -sol.adjoint.mean(k) / data.theta; break;
    }
  }
  sol.control = P0Field(mesh, std::move(u));
  sol.iterations = iter;
  sol.active = std::move(active);

  for (int k = 0; k < ne; ++k) {
    const double want = project_control(-sol.adjoint.mean(k) / data.theta, data.lower, data.upper);
    if (std::abs(sol.control[k] - want) > 1e-10 * (1 + std::abs(want)))
      throw NumericalError("discrete variational inequality violated on element " + std::to_string(k));
  }
  const OcpFields fields{&sol.state, &sol.adjoint, &sol.control};
  Eigen::VectorXd scale;
  const Eigen::VectorXd rs = global_residual(mesh, disc.state, Side::State, fields, &scale);
  sol.state_residual = rs.norm() / std::max(scale.norm(), 1e-300);
  const Eigen::VectorXd ra = global_residual(mesh, disc.adjoint, Side::Adjoint, fields, &scale);
  sol.adjoint_residual = ra.norm() / std::max(scale.norm(), 1e-300);
  return sol;
}

OcpSolution solve_ocp(const Mesh& mesh, const ProblemData& data, const P0Field* init, const OcpOptions& opts) {
  return solve_ocp(mesh, data, discretize(mesh, data), init, opts);
}

P1Field solve_state(const Mesh& mesh, const std::vector<ElementForms>& forms, const P0Field& control,
                    const SolveOptions& linear) {
  const int nv = mesh.num_vertices();
  const std::vector<char> bnd = boundary_mask(mesh);
  SparseSystem sys(nv);
  for (int v = 0; v < nv; ++v)
    if (bnd[v]) sys.add(v, v, 1.0);
  for (int k = 0; k < mesh.num_elements(); ++k) {
    const auto& el = mesh.element(k);
    const ElementForms& F = forms[k];
    const Eigen::Matrix3d a = F.galerkin + F.stab;
    for (int m = 0; m < 3; ++m) {
      const int r = el[m];
      if (bnd[r]) continue;
      sys.add_rhs(r, F.source[m] + F.constant[m] * control[k]);
      for (int n = 0; n < 3; ++n)
        if (!bnd[el[n]]) sys.add(r, el[n], a(m, n));
      for (int j = 0; j < 3; ++j) {
        const int kn = mesh.neighbor(k, j);
        if (kn < 0) continue;
        for (int n = 0; n < 3; ++n) {
          const int c = mesh.element(kn)[n];
          if (!bnd[c] && F.stab_neighbor[j](m, n) != 0) sys.add(r, c, F.stab_neighbor[j](m, n));
        }
      }
    }
  }
  return P1Field(mesh, solve(sys.matrix(), sys.rhs(), linear));
}

}  // namespace stabocp
