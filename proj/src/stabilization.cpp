#include "stabocp/stabilization.hpp"

#include "stabocp/quadrature.hpp"

#include <cmath>

namespace stabocp {

double velocity_sup(const ProblemData& data, const Mesh& mesh, int k) {
  const auto& rule = triangle_rule(data.quad_degree);
  double m = 0;
  for (const auto& b : rule.points) m = std::max(m, data.velocity.value(mesh.point(k, b)).norm());
  return m;
}

double peclet(const ProblemData& data, const Mesh& mesh, int k) {
  return velocity_sup(data, mesh, k) * mesh.diameter(k) / (2 * data.nu);
}

namespace {

double tau_from(double bsup, double h, double nu) {
  const double pe = bsup * h / (2 * nu);
  if (bsup > 0 && pe > 1) return h / (2 * bsup);
  return h * h / (12 * nu);
}

bool is_residual_scheme(Scheme s) { return s == Scheme::SUPG || s == Scheme::GLS; }
bool is_edge_scheme(Scheme s) { return s == Scheme::CIP || s == Scheme::ES; }

}  // namespace

double tau_state(const ProblemData& data, const Mesh& mesh, int k) {
  return tau_from(velocity_sup(data, mesh, k), mesh.diameter(k), data.nu);
}

double tau_adjoint(const ProblemData& data, const Mesh& mesh, int k) { return tau_state(data, mesh, k); }

double tau_edge(Scheme scheme, const Mesh& mesh, int e) {
  if (scheme == Scheme::CIP) return mesh.edge_length(e) * mesh.edge_length(e) / 12.0;
  if (scheme == Scheme::ES) return 1.0 / 24.0;
  return 0.0;
}

void check_robust_admissible(const ProblemData& data, const Mesh& mesh, Scheme scheme) {
  if (scheme != Scheme::SUPG && scheme != Scheme::CIP)
    throw InvalidInput("robust estimation supports SUPG and CIP only; got " + to_string(scheme));
  if (scheme == Scheme::SUPG) {
    for (int k = 0; k < mesh.num_elements(); ++k) {
      const double lhs = velocity_sup(data, mesh, k) * tau_state(data, mesh, k);
      if (lhs > 0.5 * mesh.diameter(k) * (1 + 1e-12))
        throw NumericalError("SUPG parameter violates ||b|| tau_K <= h_K/2 on element " + std::to_string(k));
    }
  } else if (scheme == Scheme::CIP) {
    for (int e = 0; e < mesh.num_edges(); ++e) {
      const double h = mesh.edge_length(e);
      if (tau_edge(scheme, mesh, e) > h * h / 12.0 * (1 + 1e-12))
        throw NumericalError("CIP parameter violates tau_e <= h_e^2/12 on edge " + std::to_string(e));
    }
  }
}

std::vector<ElementForms> element_forms(const Mesh& mesh, const ProblemData& data, Side side) {
  const Scheme scheme = data.scheme(side);
  if (is_edge_scheme(scheme)) {
    bool interior = false;
    for (int e = 0; e < mesh.num_edges() && !interior; ++e) interior = !mesh.edge(e).boundary();
    if (!interior) throw InvalidInput(to_string(scheme) + " stabilization needs a mesh with interior edges");
  }
  const double s = side == Side::State ? 1.0 : -1.0;
  const ScalarFn& g = side == Side::State ? data.source : data.desired_state;
  const auto& rule = triangle_rule(data.quad_degree);
  const auto& line = interval_rule(data.quad_degree);

  std::vector<ElementForms> forms(mesh.num_elements());
  parallel_for(forms.size(), [&](std::size_t kk) {
    const int k = static_cast<int>(kk);
    ElementForms& F = forms[kk];
    const double area = mesh.area(k);
    const double tau = is_residual_scheme(scheme) ? tau_state(data, mesh, k) : 0.0;
    const bool gls = scheme == Scheme::GLS;
    F.tau = tau;

    Eigen::Matrix3d conv = Eigen::Matrix3d::Zero();
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto& bc = rule.points[q];
      const Vec2 x = mesh.point(k, bc);
      const Vec2 b = data.velocity.value(x);
      const double w = 2 * area * rule.weights[q];
      const double gx = g(x);
      double bg[3], test[3], trial[3];
      for (int i = 0; i < 3; ++i) {
        bg[i] = b.dot(mesh.grad_lambda(k, i));
        test[i] = tau * (s * bg[i] + (gls ? data.kappa * bc[i] : 0.0));
        trial[i] = s * bg[i] + data.kappa * bc[i];
      }
      for (int m = 0; m < 3; ++m) {
        F.source[m] += w * gx * (bc[m] + test[m]);
        F.source_stab[m] += w * gx * test[m];
        F.constant[m] += w * (bc[m] + test[m]);
        F.constant_stab[m] += w * test[m];
        for (int n = 0; n < 3; ++n) {
          conv(m, n) += w * bg[n] * bc[m];
          F.stab(m, n) += w * trial[n] * test[m];
          F.mass(m, n) += w * bc[n] * (bc[m] + test[m]);
          F.mass_stab(m, n) += w * bc[n] * test[m];
        }
      }
    }
    F.galerkin = data.nu * local_stiffness(mesh, k) + data.kappa * local_mass(mesh, k) + s * conv;

    if (!is_edge_scheme(scheme)) return;
    const auto& el = mesh.element(k);
    for (int j = 0; j < 3; ++j) {
      const int kn = mesh.neighbor(k, j);
      if (kn < 0) continue;
      const int e = mesh.element_edges(k)[j];
      const double len = mesh.edge_length(e);
      const double te = tau_edge(scheme, mesh, e);
      Eigen::Matrix3d self = Eigen::Matrix3d::Zero(), other = Eigen::Matrix3d::Zero();
      if (scheme == Scheme::CIP) {
        const Vec2& a = mesh.vertex(el[(j + 1) % 3]);
        const Vec2& c = mesh.vertex(el[(j + 2) % 3]);
        for (std::size_t q = 0; q < line.size(); ++q) {
          const double t = line.points[q];
          const Vec2 b = data.velocity.value((1 - t) * a + t * c);
          const double w = te * len * line.weights[q];
          for (int m = 0; m < 3; ++m) {
            const double bm = b.dot(mesh.grad_lambda(k, m));
            for (int n = 0; n < 3; ++n) {
              self(m, n) += w * bm * b.dot(mesh.grad_lambda(k, n));
              other(m, n) -= w * bm * b.dot(mesh.grad_lambda(kn, n));
            }
          }
        }
      } else {
        const Vec2& nrm = mesh.normal(k, j);
        const double hk = mesh.diameter(k), hn = mesh.diameter(kn);
        const double w = te * (hk * hk + hn * hn) * len;
        for (int m = 0; m < 3; ++m) {
          const double dm = mesh.grad_lambda(k, m).dot(nrm);
          for (int n = 0; n < 3; ++n) {
            self(m, n) += w * dm * mesh.grad_lambda(k, n).dot(nrm);
            other(m, n) -= w * dm * mesh.grad_lambda(kn, n).dot(nrm);
          }
        }
      }
      F.stab += self;
      F.stab_neighbor[j] = other;
    }
  });
  return forms;
}

namespace {

Eigen::Vector3d local_values(const P1Field& f, int k) {
  const auto l = f.local(k);
  return {l[0], l[1], l[2]};
}

const P1Field& primary(Side side, const OcpFields& fields) {
  const P1Field* p = side == Side::State ? fields.state : fields.adjoint;
  if (!p) throw InvalidInput("missing solution field for the requested side");
  return *p;
}

// Bilinear part of S_K applied to the primary field.
Eigen::Vector3d stab_bilinear(const Mesh& mesh, const ElementForms& F, int k, const P1Field& xi) {
  Eigen::Vector3d r = F.stab * local_values(xi, k);
  for (int j = 0; j < 3; ++j) {
    const int kn = mesh.neighbor(k, j);
    if (kn >= 0 && !F.stab_neighbor[j].isZero(0)) r += F.stab_neighbor[j] * local_values(xi, kn);
  }
  return r;
}

}  // namespace

Eigen::Vector3d local_residual(const Mesh& mesh, const ElementForms& F, int k, Side side, const OcpFields& fields) {
  const P1Field& xi = primary(side, fields);
  Eigen::Vector3d r = F.galerkin * local_values(xi, k) + stab_bilinear(mesh, F, k, xi);
  if (side == Side::State) {
    const double u = fields.control ? (*fields.control)[k] : 0.0;
    r -= F.source + F.constant * u;
  } else {
    if (!fields.state) throw InvalidInput("adjoint residual needs the state field");
    r -= F.mass * local_values(*fields.state, k);
    r += F.source;
  }
  return r;
}

double stab_eval(const Mesh& mesh, const ProblemData& data, const std::vector<ElementForms>& forms, int k, Side side,
                 const OcpFields& fields, TestFunction test) {
  const Scheme scheme = data.scheme(side);
  const ElementForms& F = forms[k];
  const P1Field& xi = primary(side, fields);
  if (test == TestFunction::One) {
    // The test function has zero gradient, so only the kappa part of GLS survives.
    if (scheme != Scheme::GLS) return 0.0;
    const double s = side == Side::State ? 1.0 : -1.0;
    const auto& rule = triangle_rule(data.quad_degree);
    const Vec2 grad = xi.gradient(k);
    double acc = 0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const auto& bc = rule.points[q];
      const Vec2 x = mesh.point(k, bc);
      double qv;
      if (side == Side::State)
        qv = data.source(x) + (fields.control ? (*fields.control)[k] : 0.0);
      else
        qv = fields.state->value(k, bc) - data.desired_state(x);
      acc += rule.weights[q] * (s * data.velocity.value(x).dot(grad) + data.kappa * xi.value(k, bc) - qv);
    }
    return F.tau * data.kappa * 2 * mesh.area(k) * acc;
  }
  const int m = static_cast<int>(test) - 1;
  double v = stab_bilinear(mesh, F, k, xi)[m];
  if (side == Side::State) {
    const double u = fields.control ? (*fields.control)[k] : 0.0;
    v -= F.source_stab[m] + F.constant_stab[m] * u;
  } else {
    v -= F.mass_stab.row(m).dot(local_values(*fields.state, k));
    v += F.source_stab[m];
  }
  return v;
}

StabContribution stab_matrix_contrib(const Mesh& mesh, const ProblemData& data, Side side, const OcpFields& fields) {
  const auto forms = element_forms(mesh, data, side);
  SparseSystem sys(mesh.num_vertices());
  for (int k = 0; k < mesh.num_elements(); ++k) {
    const auto& el = mesh.element(k);
    const ElementForms& F = forms[k];
    for (int m = 0; m < 3; ++m) {
      for (int n = 0; n < 3; ++n) sys.add(el[m], el[n], F.stab(m, n));
      for (int j = 0; j < 3; ++j) {
        const int kn = mesh.neighbor(k, j);
        if (kn < 0) continue;
        for (int n = 0; n < 3; ++n)
          if (F.stab_neighbor[j](m, n) != 0) sys.add(el[m], mesh.element(kn)[n], F.stab_neighbor[j](m, n));
      }
      double rhs;
      if (side == Side::State) {
        const double u = fields.control ? (*fields.control)[k] : 0.0;
        rhs = F.source_stab[m] + F.constant_stab[m] * u;
      } else {
        const auto y = fields.state ? fields.state->local(k) : std::array<double, 3>{0, 0, 0};
        rhs = F.mass_stab.row(m).dot(Eigen::Vector3d(y[0], y[1], y[2])) - F.source_stab[m];
      }
      sys.add_rhs(el[m], rhs);
    }
  }
  return {sys.matrix(), sys.rhs()};
}

}  // namespace stabocp
