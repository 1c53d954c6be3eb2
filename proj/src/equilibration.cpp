#include "stabocp/equilibration.hpp"

#include <Eigen/LU>

#include <cmath>

namespace stabocp {

double conormal_flux(const Mesh& mesh, const ProblemData& data, const P1Field& xi, int k, int j) {
  return data.nu * xi.gradient(k).dot(mesh.normal(k, j));
}

EdgeLinear averaged_flux(const Mesh& mesh, const ProblemData& data, const P1Field& xi, int k, int j) {
  const double own = conormal_flux(mesh, data, xi, k, j);
  const int kn = mesh.neighbor(k, j);
  if (kn < 0) return {own, own};
  const Edge& ed = mesh.edge(mesh.element_edges(k)[j]);
  const int jj = ed.elements[0] == kn ? ed.local[0] : ed.local[1];
  const double avg = 0.5 * (own - conormal_flux(mesh, data, xi, kn, jj));
  return {avg, avg};
}

EdgeLinear flux_from_moments(double length, double mu_a, double mu_b) {
  // g = (2/|e|) sum_j mu_j (3 lambda_j - 1), evaluated at the endpoints.
  return {2.0 / length * (2 * mu_a - mu_b), 2.0 / length * (2 * mu_b - mu_a)};
}

std::array<double, 2> edge_moments(double length, const EdgeLinear& g) {
  return {length / 6.0 * (2 * g[0] + g[1]), length / 6.0 * (g[0] + 2 * g[1])};
}

namespace {

struct Moments {
  std::vector<Eigen::Vector3d> delta;
  std::vector<Eigen::Vector3d> magnitude;  // size of the terms entering delta, for relative checks
  std::vector<Eigen::Vector3d> residual;   // B_K + S_K - (q, .) on the hats
  std::vector<std::array<double, 3>> jbar;  // <J> per local edge
};

Moments compute_moments(const Mesh& mesh, const ProblemData& data, const std::vector<ElementForms>& forms, Side side,
                        const OcpFields& fields) {
  const P1Field& xi = side == Side::State ? *fields.state : *fields.adjoint;
  Moments M;
  const auto ne = static_cast<std::size_t>(mesh.num_elements());
  M.delta.resize(ne);
  M.magnitude.resize(ne);
  M.residual.resize(ne);
  M.jbar.resize(ne);
  parallel_for(ne, [&](std::size_t kk) {
    const int k = static_cast<int>(kk);
    const ElementForms& F = forms[kk];
    const Eigen::Vector3d r = local_residual(mesh, F, k, side, fields);
    const auto l = xi.local(k);
    const Eigen::Vector3d xv(l[0], l[1], l[2]);
    Eigen::Vector3d mag = ((F.galerkin + F.stab) * xv).cwiseAbs() + F.source.cwiseAbs();
    if (side == Side::State && fields.control) mag += (F.constant * (*fields.control)[k]).cwiseAbs();
    if (side == Side::Adjoint) {
      const auto y = fields.state->local(k);
      mag += (F.mass * Eigen::Vector3d(y[0], y[1], y[2])).cwiseAbs();
    }
    Eigen::Vector3d d = r;
    for (int j = 0; j < 3; ++j) {
      const double jb = averaged_flux(mesh, data, xi, k, j)[0];
      M.jbar[kk][j] = jb;
      const double mom = 0.5 * jb * mesh.edge_length(mesh.element_edges(k)[j]);
      for (int a : {(j + 1) % 3, (j + 2) % 3}) {
        d[a] -= mom;
        mag[a] += std::abs(mom);
      }
    }
    M.delta[kk] = d;
    M.magnitude[kk] = mag;
    M.residual[kk] = r;
  });
  return M;
}

}  // namespace

std::vector<Eigen::Vector3d> residual_moments(const Mesh& mesh, const ProblemData& data,
                                              const std::vector<ElementForms>& forms, Side side,
                                              const OcpFields& fields) {
  return compute_moments(mesh, data, forms, side, fields).delta;
}

std::vector<double> patch_solve(const Mesh& mesh, int v, std::span<const double> delta, double scale,
                                double* compatibility) {
  const auto fan = mesh.vertex_elements(v);
  const int n = static_cast<int>(fan.size());
  if (static_cast<int>(delta.size()) != n) throw InvalidInput("patch_solve: delta has wrong size");
  auto pos = [&](int k) {
    for (int i = 0; i < n; ++i)
      if (fan[i] == k) return i;
    return -1;
  };
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int p = 0; p < n; ++p) {
    const int k = fan[p];
    const int loc = mesh.local_index(k, v);
    for (int j : {(loc + 1) % 3, (loc + 2) % 3}) {
      const int kn = mesh.neighbor(k, j);
      if (kn < 0) {
        a(p, p) += 1.0;
      } else {
        a(p, p) += 0.5;
        a(p, pos(kn)) -= 0.5;
      }
    }
  }
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) b[i] = delta[i];
  std::vector<double> xi(n, 0.0);

  if (mesh.is_boundary_vertex(v)) {
    const Eigen::VectorXd s = a.partialPivLu().solve(b);
    for (int i = 0; i < n; ++i) xi[i] = s[i];
    if (compatibility) *compatibility = 0;
    return xi;
  }

  double sum = 0;
  for (double d : delta) sum += d;
  const double rel = std::abs(sum) / std::max(scale, 1e-300);
  if (compatibility) *compatibility = rel;
  if (rel > 1e-10)
    throw NumericalError("patch of interior vertex " + std::to_string(v) +
                         " violates compatibility: relative sum " + std::to_string(rel));
  int pin = 0;
  for (int i = 1; i < n; ++i)
    if (fan[i] < fan[pin]) pin = i;
  Eigen::MatrixXd r(n - 1, n - 1);
  Eigen::VectorXd rb(n - 1);
  for (int i = 0, ri = 0; i < n; ++i) {
    if (i == pin) continue;
    rb[ri] = b[i];
    for (int j = 0, rj = 0; j < n; ++j) {
      if (j == pin) continue;
      r(ri, rj++) = a(i, j);
    }
    ++ri;
  }
  const Eigen::VectorXd s = r.partialPivLu().solve(rb);
  for (int i = 0, ri = 0; i < n; ++i)
    if (i != pin) xi[i] = s[ri++];
  return xi;
}

FluxSet build_fluxes(const Mesh& mesh, const ProblemData& data, const std::vector<ElementForms>& forms, Side side,
                     const OcpFields& fields) {
  if ((side == Side::State && !fields.state) || (side == Side::Adjoint && (!fields.adjoint || !fields.state)))
    throw InvalidInput("build_fluxes: missing solution fields");
  const Moments M = compute_moments(mesh, data, forms, side, fields);
  const int ne = mesh.num_elements();

  FluxSet fs;
  fs.side = side;
  fs.xi.assign(3 * static_cast<std::size_t>(ne), 0.0);
  std::vector<double> compat(mesh.num_vertices(), 0.0);
  parallel_for(mesh.num_vertices(), [&](std::size_t vv) {
    const int v = static_cast<int>(vv);
    const auto fan = mesh.vertex_elements(v);
    std::vector<double> d(fan.size());
    double scale = 0;
    for (std::size_t i = 0; i < fan.size(); ++i) {
      const int li = mesh.local_index(fan[i], v);
      d[i] = M.delta[fan[i]][li];
      scale += M.magnitude[fan[i]][li];
    }
    const std::vector<double> xi = patch_solve(mesh, v, d, scale, &compat[vv]);
    for (std::size_t i = 0; i < fan.size(); ++i) fs.xi[3 * fan[i] + mesh.local_index(fan[i], v)] = xi[i];
  });
  for (double c : compat) fs.max_compatibility = std::max(fs.max_compatibility, c);

  fs.g.assign(3 * static_cast<std::size_t>(ne), EdgeLinear{0, 0});
  parallel_for(ne, [&](std::size_t kk) {
    const int k = static_cast<int>(kk);
    for (int j = 0; j < 3; ++j) {
      const int e = mesh.element_edges(k)[j];
      const double len = mesh.edge_length(e);
      const double jmom = 0.5 * M.jbar[kk][j] * len;
      const int kn = mesh.neighbor(k, j);
      double mu[2];
      for (int s = 0; s < 2; ++s) {
        const int a = (j + 1 + s) % 3;
        const double own = fs.xi[3 * kk + a];
        if (kn < 0) {
          mu[s] = own + jmom;
        } else {
          const double other = fs.xi[3 * kn + mesh.local_index(kn, mesh.element(k)[a])];
          mu[s] = 0.5 * (own - other) + jmom;
        }
      }
      fs.g[3 * kk + j] = flux_from_moments(len, mu[0], mu[1]);
    }
  });

  // Consistency across interior edges and first-order equilibration per element.
  for (int e = 0; e < mesh.num_edges(); ++e) {
    const Edge& ed = mesh.edge(e);
    if (ed.boundary()) continue;
    const int k0 = ed.elements[0], k1 = ed.elements[1];
    const EdgeLinear& g0 = fs.flux(k0, ed.local[0]);
    const EdgeLinear& g1 = fs.flux(k1, ed.local[1]);
    // endpoint order differs between the two owners
    const int a0 = mesh.element(k0)[(ed.local[0] + 1) % 3];
    const int a1 = mesh.element(k1)[(ed.local[1] + 1) % 3];
    const double d0 = a0 == a1 ? g0[0] + g1[0] : g0[0] + g1[1];
    const double d1 = a0 == a1 ? g0[1] + g1[1] : g0[1] + g1[0];
    fs.max_consistency = std::max({fs.max_consistency, std::abs(d0), std::abs(d1)});
  }
  std::vector<double> eq(ne, 0.0);
  parallel_for(ne, [&](std::size_t kk) {
    const int k = static_cast<int>(kk);
    Eigen::Vector3d defect = -M.residual[kk];
    for (int j = 0; j < 3; ++j) {
      const auto mom = edge_moments(mesh.edge_length(mesh.element_edges(k)[j]), fs.g[3 * kk + j]);
      defect[(j + 1) % 3] += mom[0];
      defect[(j + 2) % 3] += mom[1];
    }
    double worst = 0;
    for (int m = 0; m < 3; ++m) worst = std::max(worst, std::abs(defect[m]) / std::max(M.magnitude[kk][m], 1e-300));
    // The constant test function is the sum of the three hats.
    worst = std::max(worst, std::abs(defect.sum()) / std::max(M.magnitude[kk].sum(), 1e-300));
    eq[kk] = worst;
  });
  for (double x : eq) fs.max_equilibration = std::max(fs.max_equilibration, x);
  return fs;
}

}  // namespace stabocp
