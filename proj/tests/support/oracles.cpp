#include "oracles.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace oracle {

namespace {

double factorial(int n) {
  double r = 1;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Barycentric coordinates of x in the triangle (a, b, c).
std::array<double, 3> barycentric(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& x) {
  const double area2 = cross(b - a, c - a);
  const double l1 = cross(x - a, c - a) / area2;
  const double l2 = cross(b - a, x - a) / area2;
  return {1 - l1 - l2, l1, l2};
}

}  // namespace

double triangle_monomial_integral(const Vec2& a, const Vec2& b, const Vec2& c, int i, int j) {
  // x = sum_m x_m l_m; expand x^i y^j with multinomials and integrate each
  // barycentric monomial exactly.
  const double area = 0.5 * std::abs(cross(b - a, c - a));
  const Vec2 pts[3] = {a, b, c};
  double total = 0;
  for (int i0 = 0; i0 <= i; ++i0)
    for (int i1 = 0; i0 + i1 <= i; ++i1) {
      const int i2 = i - i0 - i1;
      const double cx = factorial(i) / (factorial(i0) * factorial(i1) * factorial(i2)) *
                        std::pow(pts[0].x(), i0) * std::pow(pts[1].x(), i1) * std::pow(pts[2].x(), i2);
      if (cx == 0) continue;
      for (int j0 = 0; j0 <= j; ++j0)
        for (int j1 = 0; j0 + j1 <= j; ++j1) {
          const int j2 = j - j0 - j1;
          const double cy = factorial(j) / (factorial(j0) * factorial(j1) * factorial(j2)) *
                            std::pow(pts[0].y(), j0) * std::pow(pts[1].y(), j1) * std::pow(pts[2].y(), j2);
          const int e0 = i0 + j0, e1 = i1 + j1, e2 = i2 + j2;
          total += cx * cy * 2 * area * factorial(e0) * factorial(e1) * factorial(e2) / factorial(e0 + e1 + e2 + 2);
        }
    }
  return total;
}

ReducedQpResult brute_force_reduced_qp(const Mesh& mesh, const stabocp::ProblemData& data, double tol,
                                       int max_iters) {
  const int nv = mesh.num_vertices(), ne = mesh.num_elements();
  const Eigen::MatrixXd a = Eigen::MatrixXd(stabocp::assemble_B(mesh, data, true));
  const Eigen::MatrixXd m = Eigen::MatrixXd(stabocp::assemble_mass(mesh, true));
  const Eigen::VectorXd f = stabocp::assemble_load(mesh, data.source, data.quad_degree);
  const Eigen::VectorXd d = stabocp::assemble_load(mesh, data.desired_state, data.quad_degree);
  const auto bnd = stabocp::boundary_mask(mesh);

  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(nv, ne);
  Eigen::VectorXd area(ne);
  for (int k = 0; k < ne; ++k) {
    area[k] = mesh.area(k);
    for (int v : mesh.element(k))
      if (!bnd[v]) c(v, k) += mesh.area(k) / 3.0;
  }
  Eigen::MatrixXd mm = m;
  for (int v = 0; v < nv; ++v)
    if (bnd[v]) mm(v, v) = 0;

  const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  const Eigen::MatrixXd s = lu.solve(c);
  const Eigen::VectorXd y0 = lu.solve(f);
  const Eigen::MatrixXd h = s.transpose() * mm * s + data.theta * Eigen::MatrixXd(area.asDiagonal());
  const Eigen::VectorXd g0 = s.transpose() * (mm * y0 - d);

  auto clamp = [&](double w) { return std::min(data.upper, std::max(data.lower, w)); };
  ReducedQpResult r;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(ne);
  for (int k = 0; k < ne; ++k) u[k] = clamp(0);
  for (r.iterations = 0; r.iterations < max_iters; ++r.iterations) {
    const Eigen::VectorXd grad = h * u + g0;
    Eigen::VectorXd dir(ne);
    for (int k = 0; k < ne; ++k) dir[k] = clamp(u[k] - grad[k] / (data.theta * area[k])) - u[k];
    r.stationarity = dir.lpNorm<Eigen::Infinity>();
    if (r.stationarity <= tol) break;
    const double curv = dir.dot(h * dir);
    const double step = curv > 0 ? std::min(1.0, -grad.dot(dir) / curv) : 1.0;
    u += step * dir;
  }
  r.u = u;
  r.y = y0 + s * u;
  r.p = Eigen::FullPivLU<Eigen::MatrixXd>(a.transpose()).solve(mm * r.y - d);
  return r;
}

namespace {

struct LocalFrame {
  Vec2 centre;
  double scale;
};

LocalFrame frame(const Mesh& mesh, int k) {
  const auto& el = mesh.element(k);
  const Vec2 centre = (mesh.vertex(el[0]) + mesh.vertex(el[1]) + mesh.vertex(el[2])) / 3.0;
  double h = 0;
  for (int i = 0; i < 3; ++i) h = std::max(h, (mesh.vertex(el[i]) - mesh.vertex(el[(i + 1) % 3])).norm());
  return {centre, h};
}

// Scaled monomials {1, s, t, s^2, st, t^2} with (s, t) = (x - centre) / h and
// their x and y derivatives.
void monomials(const LocalFrame& f, const Vec2& x, double* phi, double* dx, double* dy) {
  const double s = (x.x() - f.centre.x()) / f.scale, t = (x.y() - f.centre.y()) / f.scale;
  const double ih = 1.0 / f.scale;
  if (phi) {
    phi[0] = 1;
    phi[1] = s;
    phi[2] = t;
    phi[3] = s * s;
    phi[4] = s * t;
    phi[5] = t * t;
  }
  if (dx) {
    dx[0] = 0;
    dx[1] = ih;
    dx[2] = 0;
    dx[3] = 2 * s * ih;
    dx[4] = t * ih;
    dx[5] = 0;
  }
  if (dy) {
    dy[0] = 0;
    dy[1] = 0;
    dy[2] = ih;
    dy[3] = 0;
    dy[4] = s * ih;
    dy[5] = 2 * t * ih;
  }
}

}  // namespace

Eigen::VectorXd least_norm_sigma(const Mesh& mesh, int k, const std::array<double, 3>& div_data,
                                 const std::array<std::array<double, 2>, 3>& normal_data, double* norm) {
  const LocalFrame fr = frame(mesh, k);
  const auto& el = mesh.element(k);
  Vec2 ref[3];
  for (int i = 0; i < 3; ++i) ref[i] = (mesh.vertex(el[i]) - fr.centre) / fr.scale;

  static const int pw[6][2] = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(12, 12);
  for (int a = 0; a < 6; ++a)
    for (int b = 0; b < 6; ++b) {
      const double v = fr.scale * fr.scale *
                       triangle_monomial_integral(ref[0], ref[1], ref[2], pw[a][0] + pw[b][0], pw[a][1] + pw[b][1]);
      gram(a, b) = v;
      gram(6 + a, 6 + b) = v;
    }

  Eigen::MatrixXd con = Eigen::MatrixXd::Zero(12, 12);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(12);
  double phi[6], dx[6], dy[6];
  for (int i = 0; i < 3; ++i) {
    monomials(fr, mesh.vertex(el[i]), nullptr, dx, dy);
    for (int a = 0; a < 6; ++a) {
      con(i, a) = -dx[a];
      con(i, 6 + a) = -dy[a];
    }
    rhs[i] = div_data[i];
  }
  for (int j = 0; j < 3; ++j) {
    const Vec2 pa = mesh.vertex(el[(j + 1) % 3]), pb = mesh.vertex(el[(j + 2) % 3]);
    const Vec2 t = pb - pa;
    const Vec2 n = Vec2(t.y(), -t.x()).normalized();  // outward for counter-clockwise elements
    const Vec2 pts[3] = {pa, pb, 0.5 * (pa + pb)};
    const double vals[3] = {normal_data[j][0], normal_data[j][1], 0.5 * (normal_data[j][0] + normal_data[j][1])};
    for (int q = 0; q < 3; ++q) {
      monomials(fr, pts[q], phi, nullptr, nullptr);
      const int row = 3 + 3 * j + q;
      for (int a = 0; a < 6; ++a) {
        con(row, a) = n.x() * phi[a];
        con(row, 6 + a) = n.y() * phi[a];
      }
      rhs[row] = vals[q];
    }
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(con, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd sv = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > 1e-10 * sv[0]) ++rank;
  Eigen::VectorXd part = Eigen::VectorXd::Zero(12);
  for (int i = 0; i < rank; ++i) part += svd.matrixV().col(i) * (svd.matrixU().col(i).dot(rhs) / sv[i]);
  const double defect = (con * part - rhs).norm();
  if (defect > 1e-9 * std::max(1.0, rhs.norm())) throw std::runtime_error("least_norm_sigma: incompatible data");

  const Eigen::MatrixXd null = svd.matrixV().rightCols(12 - rank);
  const Eigen::MatrixXd reduced = null.transpose() * gram * null;
  const Eigen::VectorXd z = -reduced.ldlt().solve(null.transpose() * gram * part);
  const Eigen::VectorXd coef = part + null * z;
  if (norm) *norm = std::sqrt(std::max(0.0, coef.dot(gram * coef)));
  return coef;
}

Vec2 eval_physical_sigma(const Mesh& mesh, int k, const Eigen::VectorXd& c, const Vec2& x) {
  const LocalFrame fr = frame(mesh, k);
  double phi[6];
  monomials(fr, x, phi, nullptr, nullptr);
  Vec2 out = Vec2::Zero();
  for (int a = 0; a < 6; ++a) {
    out.x() += c[a] * phi[a];
    out.y() += c[6 + a] * phi[a];
  }
  return out;
}

namespace {

using Polygon = std::vector<Vec2>;

// Keeps the part of poly where level(x) * sign <= bound * sign.
Polygon clip(const Polygon& poly, const std::function<double(const Vec2&)>& level, double bound, double sign) {
  Polygon out;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[(i + 1) % n];
    const double fa = sign * (level(a) - bound), fb = sign * (level(b) - bound);
    if (fa <= 0) out.push_back(a);
    if ((fa < 0 && fb > 0) || (fa > 0 && fb < 0)) out.push_back(a + (fa / (fa - fb)) * (b - a));
  }
  return out;
}

// Exact for quadratics: edge-midpoint rule on a fan triangulation.
double integrate_polygon(const Polygon& poly, const std::function<double(const Vec2&)>& f) {
  double total = 0;
  for (std::size_t i = 1; i + 1 < poly.size(); ++i) {
    const Vec2 &a = poly[0], &b = poly[i], &c = poly[i + 1];
    const double area = 0.5 * std::abs(cross(b - a, c - a));
    total += area / 3.0 * (f(0.5 * (a + b)) + f(0.5 * (b + c)) + f(0.5 * (c + a)));
  }
  return total;
}

}  // namespace

double clamped_gap_norm(const Mesh& mesh, int k, double u, const std::array<double, 3>& p, double theta, double lo,
                        double hi) {
  const auto& el = mesh.element(k);
  const Vec2 a = mesh.vertex(el[0]), b = mesh.vertex(el[1]), c = mesh.vertex(el[2]);
  auto w = [&](const Vec2& x) {
    const auto l = barycentric(a, b, c, x);
    return -(p[0] * l[0] + p[1] * l[1] + p[2] * l[2]) / theta;
  };
  const Polygon tri = {a, b, c};
  const Polygon below = clip(tri, w, lo, 1.0);
  const Polygon above = clip(tri, w, hi, -1.0);
  const Polygon middle = clip(clip(tri, w, lo, -1.0), w, hi, 1.0);
  double total = 0;
  if (below.size() >= 3) total += integrate_polygon(below, [&](const Vec2&) { return (u - lo) * (u - lo); });
  if (above.size() >= 3) total += integrate_polygon(above, [&](const Vec2&) { return (u - hi) * (u - hi); });
  if (middle.size() >= 3)
    total += integrate_polygon(middle, [&](const Vec2& x) { return (u - w(x)) * (u - w(x)); });
  return std::sqrt(total);
}

std::vector<double> pseudo_inverse_patch(const Mesh& mesh, int v, const std::vector<double>& delta) {
  const std::vector<int> fan = stabocp::patch(mesh, v);
  const int n = static_cast<int>(fan.size());
  if (static_cast<int>(delta.size()) != n) throw std::invalid_argument("pseudo_inverse_patch: size");
  // Each element owns two edges through v, identified by the opposite vertex.
  // Two fan elements share such an edge when they share that vertex.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int w : mesh.element(fan[i])) {
      if (w == v) continue;
      int other = -1;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        const auto& el = mesh.element(fan[j]);
        if (std::find(el.begin(), el.end(), w) != el.end()) other = j;
      }
      if (other < 0) {
        a(i, i) += 1.0;
      } else {
        a(i, i) += 0.5;
        a(i, other) -= 0.5;
      }
    }
  }
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) b[i] = delta[i];
  const Eigen::VectorXd x = a.completeOrthogonalDecomposition().pseudoInverse() * b;
  return std::vector<double>(x.data(), x.data() + n);
}

}  // namespace oracle
