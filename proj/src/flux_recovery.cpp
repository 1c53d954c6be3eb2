#include "stabocp/flux_recovery.hpp"

#include "stabocp/quadrature.hpp"

#include <Eigen/LU>

#include <cmath>

namespace stabocp {

namespace {

using Vec12 = Eigen::Matrix<double, 12, 1>;
using Mat12 = Eigen::Matrix<double, 12, 12>;

// Barycentric exponents of the six P2 monomials.
constexpr int kPairs[6][2] = {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {1, 2}, {2, 0}};

double monomial(int k, const std::array<double, 3>& l) { return l[kPairs[k][0]] * l[kPairs[k][1]]; }

Vec2 monomial_gradient(const Mesh& mesh, int el, int k, const std::array<double, 3>& l) {
  const int a = kPairs[k][0], b = kPairs[k][1];
  return l[b] * mesh.grad_lambda(el, a) + l[a] * mesh.grad_lambda(el, b);
}

double factorial(int n) {
  double f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// int_K prod lambda^alpha / |K| for |alpha| = 4.
const Eigen::Matrix<double, 6, 6>& reference_gram() {
  static const Eigen::Matrix<double, 6, 6> g = [] {
    Eigen::Matrix<double, 6, 6> m;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j) {
        int e[3] = {0, 0, 0};
        ++e[kPairs[i][0]];
        ++e[kPairs[i][1]];
        ++e[kPairs[j][0]];
        ++e[kPairs[j][1]];
        m(i, j) = 2 * factorial(e[0]) * factorial(e[1]) * factorial(e[2]) / factorial(6);
      }
    return m;
  }();
  return g;
}

std::array<double, 3> vertex_bary(int i) {
  std::array<double, 3> l{0, 0, 0};
  l[i] = 1;
  return l;
}

double edge_linear_norm2(double len, const EdgeLinear& g) {
  return len / 3.0 * (g[0] * g[0] + g[0] * g[1] + g[1] * g[1]);
}

// Squared L2 norm over an edge of the quadratic with endpoint values a, b and midpoint value m.
double edge_quadratic_norm2(double len, double a, double b, double m) {
  const auto& rule = interval_rule(4);
  double s = 0;
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const double t = rule.points[q];
    const double v = a * (1 - t) * (1 - 2 * t) + b * t * (2 * t - 1) + 4 * m * t * (1 - t);
    s += rule.weights[q] * v * v;
  }
  return len * s;
}

Vec12 kernel_vector(const Mesh& mesh, int k) {
  // curl of the cubic bubble l0 l1 l2: divergence free with zero normal trace.
  Vec12 n = Vec12::Zero();
  const int slot[3] = {4, 5, 3};  // l1 l2, l2 l0, l0 l1 pair with grad l0, grad l1, grad l2
  for (int i = 0; i < 3; ++i) {
    n[slot[i]] = mesh.grad_lambda(k, i).y();
    n[6 + slot[i]] = -mesh.grad_lambda(k, i).x();
  }
  return n;
}

}  // namespace

Mat12 sigma_gram(const Mesh& mesh, int k) {
  Mat12 g = Mat12::Zero();
  g.topLeftCorner<6, 6>() = mesh.area(k) * reference_gram();
  g.bottomRightCorner<6, 6>() = mesh.area(k) * reference_gram();
  return g;
}

void sigma_constraints(const Mesh& mesh, int k, const LinearOnElement& div_data,
                       const std::array<EdgeLinear, 3>& normal_data, Mat12& c, Vec12& d) {
  c.setZero();
  d.setZero();
  const double h = mesh.diameter(k);
  for (int i = 0; i < 3; ++i) {
    const auto l = vertex_bary(i);
    for (int m = 0; m < 6; ++m) {
      const Vec2 g = monomial_gradient(mesh, k, m, l);
      c(i, m) = h * g.x();
      c(i, 6 + m) = h * g.y();
    }
    d[i] = -h * div_data.nodal[i];
  }
  for (int j = 0; j < 3; ++j) {
    const int a = (j + 1) % 3, b = (j + 2) % 3;
    const Vec2& n = mesh.normal(k, j);
    std::array<double, 3> pts[3] = {vertex_bary(a), vertex_bary(b), {0, 0, 0}};
    pts[2][a] = pts[2][b] = 0.5;
    const double vals[3] = {normal_data[j][0], normal_data[j][1], 0.5 * (normal_data[j][0] + normal_data[j][1])};
    for (int t = 0; t < 3; ++t) {
      const int row = 3 + 3 * j + t;
      for (int m = 0; m < 6; ++m) {
        const double phi = monomial(m, pts[t]);
        c(row, m) = phi * n.x();
        c(row, 6 + m) = phi * n.y();
      }
      d[row] = vals[t];
    }
  }
}

LinearOnElement sigma_divergence(const Mesh& mesh, int k, const ElementSigma& s) {
  LinearOnElement div;
  for (int i = 0; i < 3; ++i) {
    const auto l = vertex_bary(i);
    double v = 0;
    for (int m = 0; m < 6; ++m) {
      const Vec2 g = monomial_gradient(mesh, k, m, l);
      v += s.coeffs[m] * g.x() + s.coeffs[6 + m] * g.y();
    }
    div.nodal[i] = v;
  }
  return div;
}

double sigma_constraint_residual(const Mesh& mesh, int k, const ElementSigma& s, const LinearOnElement& div_data,
                                 const std::array<EdgeLinear, 3>& normal_data) {
  const LinearOnElement div = sigma_divergence(mesh, k, s);
  std::array<double, 3> r{};
  for (int i = 0; i < 3; ++i) r[i] = div.nodal[i] + div_data.nodal[i];
  double worst = std::sqrt(p1_norm2(mesh.area(k), r));
  double scale = std::sqrt(p1_norm2(mesh.area(k), div_data.nodal));
  for (int j = 0; j < 3; ++j) {
    const int a = (j + 1) % 3, b = (j + 2) % 3;
    const Vec2& n = mesh.normal(k, j);
    std::array<double, 3> pts[3] = {vertex_bary(a), vertex_bary(b), {0, 0, 0}};
    pts[2][a] = pts[2][b] = 0.5;
    double v[3];
    const double want[3] = {normal_data[j][0], normal_data[j][1], 0.5 * (normal_data[j][0] + normal_data[j][1])};
    for (int t = 0; t < 3; ++t) {
      Vec2 sv = Vec2::Zero();
      for (int m = 0; m < 6; ++m) sv += monomial(m, pts[t]) * Vec2(s.coeffs[m], s.coeffs[6 + m]);
      v[t] = sv.dot(n) - want[t];
    }
    const double len = mesh.edge_length(mesh.element_edges(k)[j]);
    worst = std::max(worst, std::sqrt(edge_quadratic_norm2(len, v[0], v[1], v[2])));
    scale += std::sqrt(edge_linear_norm2(len, normal_data[j]));
  }
  return scale > 0 ? worst / scale : worst;
}

ElementSigma recover_sigma(const Mesh& mesh, int k, const LinearOnElement& div_data,
                           const std::array<EdgeLinear, 3>& normal_data) {
  // Compatibility: (p_K, 1)_K + sum_e (p_e, 1)_e = 0.
  double total = div_data.mean() * mesh.area(k);
  double size = std::abs(total);
  for (int j = 0; j < 3; ++j) {
    const double len = mesh.edge_length(mesh.element_edges(k)[j]);
    const double flux = 0.5 * len * (normal_data[j][0] + normal_data[j][1]);
    total += flux;
    size += 0.5 * len * (std::abs(normal_data[j][0]) + std::abs(normal_data[j][1]));
  }
  for (double v : div_data.nodal) size += std::abs(v) * mesh.area(k) / 3;
  if (std::abs(total) > 1e-10 * size)
    throw NumericalError("sigma data incompatible on element " + std::to_string(k) + ": defect " +
                         std::to_string(total) + " vs size " + std::to_string(size));

  ElementSigma s;
  if (size == 0) return s;

  Mat12 c;
  Vec12 d;
  sigma_constraints(mesh, k, div_data, normal_data, c, d);
  const Mat12 g = sigma_gram(mesh, k);
  const Vec12 n = kernel_vector(mesh, k);
  // Row 0 is implied by the others through compatibility; replace it by G-orthogonality to the kernel.
  Mat12 a = c;
  Vec12 rhs = d;
  const Vec12 gn = g * n;
  a.row(0) = gn.transpose() / gn.cwiseAbs().maxCoeff();
  rhs[0] = 0;
  s.coeffs = a.partialPivLu().solve(rhs);
  s.norm = std::sqrt(std::max(0.0, s.coeffs.dot(g * s.coeffs)));
  const double res = sigma_constraint_residual(mesh, k, s, div_data, normal_data);
  if (!(res <= 1e-9)) throw NumericalError("sigma constraints not met on element " + std::to_string(k));
  return s;
}

ElementResidual element_residual(const Mesh& mesh, const ProblemData& data, const OcpFields& fields,
                                 const FluxSet& fluxes, int k, Side side) {
  const P1Field* xi = side == Side::State ? fields.state : fields.adjoint;
  if (!xi || (side == Side::Adjoint && !fields.state)) throw InvalidInput("element_residual: missing fields");
  if (fluxes.g.size() != 3 * static_cast<std::size_t>(mesh.num_elements()) || fluxes.side != side)
    throw InvalidInput("element_residual: missing fluxes for this side");
  const double s = side == Side::State ? 1.0 : -1.0;
  const ScalarFn& g = side == Side::State ? data.source : data.desired_state;
  const Vec2 grad = xi->gradient(k);
  const auto& rule = triangle_rule(data.quad_degree);

  Eigen::Vector3d gm = Eigen::Vector3d::Zero(), cm = Eigen::Vector3d::Zero();
  std::vector<double> gv(rule.size()), cv(rule.size());
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const auto& l = rule.points[q];
    const Vec2 x = mesh.point(k, l);
    gv[q] = g(x);
    cv[q] = data.velocity.value(x).dot(grad);
    const Eigen::Vector3d lv(l[0], l[1], l[2]);
    gm += rule.weights[q] * gv[q] * lv;
    cm += rule.weights[q] * cv[q] * lv;
  }
  gm *= 2 * mesh.area(k);
  cm *= 2 * mesh.area(k);
  const LinearOnElement pg = from_moments(mesh, k, gm);  // projection of f or y_d
  const LinearOnElement pc = from_moments(mesh, k, cm);  // projection of b.grad(xi)

  ElementResidual r;
  const auto xl = xi->local(k);
  for (int i = 0; i < 3; ++i) {
    if (side == Side::State) {
      const double u = fields.control ? (*fields.control)[k] : 0.0;
      r.interior.nodal[i] = pg.nodal[i] + u - pc.nodal[i] - data.kappa * xl[i];
    } else {
      r.interior.nodal[i] = (*fields.state)[mesh.element(k)[i]] - pg.nodal[i] + pc.nodal[i] - data.kappa * xl[i];
    }
  }
  {
    std::array<double, 3> g3{}, c3{}, x3{};
    for (int i = 0; i < 3; ++i) {
      g3[i] = pg.nodal[i];
      c3[i] = pc.nodal[i];
      x3[i] = data.kappa * xl[i];
    }
    const double area = mesh.area(k);
    r.magnitude = std::sqrt(p1_norm2(area, g3)) + std::sqrt(p1_norm2(area, c3)) + std::sqrt(p1_norm2(area, x3));
    if (side == Side::State && fields.control) r.magnitude += std::abs((*fields.control)[k]) * std::sqrt(area);
    if (side == Side::Adjoint) {
      const auto yl = fields.state->local(k);
      r.magnitude += std::sqrt(p1_norm2(area, yl));
    }
  }
  double osc = 0;
  const double gsign = side == Side::State ? 1.0 : -1.0;
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const auto& l = rule.points[q];
    const double v = gsign * (gv[q] - pg(l)) - s * (cv[q] - pc(l));
    osc += rule.weights[q] * v * v;
  }
  r.oscillation = std::sqrt(2 * mesh.area(k) * osc);

  for (int j = 0; j < 3; ++j) {
    const double flux = data.nu * grad.dot(mesh.normal(k, j));
    const EdgeLinear& gj = fluxes.flux(k, j);
    r.edge[j] = {gj[0] - flux, gj[1] - flux};
    const double len = mesh.edge_length(mesh.element_edges(k)[j]);
    r.magnitude += len * (0.5 * (std::abs(gj[0]) + std::abs(gj[1])) + std::abs(flux)) / std::sqrt(mesh.area(k));
  }
  return r;
}

LinearOnElement sigma_interior_data(const Mesh& mesh, int k, const ElementResidual& r) {
  double boundary = 0;
  for (int j = 0; j < 3; ++j)
    boundary += 0.5 * mesh.edge_length(mesh.element_edges(k)[j]) * (r.edge[j][0] + r.edge[j][1]);
  const double shift = r.interior.mean() + boundary / mesh.area(k);
  LinearOnElement p;
  for (int i = 0; i < 3; ++i) p.nodal[i] = r.interior.nodal[i] - shift;
  return p;
}

SigmaField recover_all(const Mesh& mesh, const ProblemData& data, const std::vector<ElementForms>& forms,
                       const OcpFields& fields, const FluxSet& fluxes, Side side) {
  const auto ne = static_cast<std::size_t>(mesh.num_elements());
  SigmaField sf;
  sf.side = side;
  sf.sigma.resize(ne);
  sf.residual.resize(ne);
  sf.identity_defect.resize(ne);
  std::vector<double> cres(ne), ratio(ne), idrel(ne);
  parallel_for(ne, [&](std::size_t kk) {
    const int k = static_cast<int>(kk);
    ElementResidual r = element_residual(mesh, data, fields, fluxes, k, side);
    const LinearOnElement pk = sigma_interior_data(mesh, k, r);
    ElementSigma sig = recover_sigma(mesh, k, pk, r.edge);
    cres[kk] = sigma_constraint_residual(mesh, k, sig, pk, r.edge);

    const double h = mesh.diameter(k);
    double edge_norms = 0;
    for (int j = 0; j < 3; ++j)
      edge_norms += std::sqrt(edge_linear_norm2(mesh.edge_length(mesh.element_edges(k)[j]), r.edge[j]));
    const double denom = std::sqrt(h) * edge_norms + h * std::sqrt(p1_norm2(mesh.area(k), pk.nodal));
    ratio[kk] = denom > 0 ? sig.norm / denom : 0.0;

    const LinearOnElement div = sigma_divergence(mesh, k, sig);
    std::array<double, 3> sum{};
    for (int i = 0; i < 3; ++i) sum[i] = r.interior.nodal[i] + div.nodal[i];
    const double lhs = std::sqrt(p1_norm2(mesh.area(k), sum));
    const double s1 = stab_eval(mesh, data, forms, k, side, fields, TestFunction::One);
    const double rhs = std::abs(s1) / std::sqrt(mesh.area(k));
    sf.identity_defect[kk] = std::abs(lhs - rhs);
    const double size = r.magnitude + std::sqrt(p1_norm2(mesh.area(k), div.nodal));
    idrel[kk] = size > 0 ? sf.identity_defect[kk] / size : sf.identity_defect[kk];

    sf.sigma[kk] = sig;
    sf.residual[kk] = r;
  });
  for (std::size_t k = 0; k < ne; ++k) {
    sf.max_constraint_residual = std::max(sf.max_constraint_residual, cres[k]);
    sf.max_stability_ratio = std::max(sf.max_stability_ratio, ratio[k]);
    sf.max_identity_defect = std::max(sf.max_identity_defect, idrel[k]);
  }
  return sf;
}

}  // namespace stabocp
