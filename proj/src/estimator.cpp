#include "stabocp/estimator.hpp"

#include "stabocp/quadrature.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

namespace stabocp {

double c_osc(const ProblemData& data, double h) {
  return std::min(h / (std::numbers::pi * std::sqrt(data.nu)), 1.0 / std::sqrt(data.kappa));
}

double hbar(const ProblemData& data, double h) {
  return std::min(h / std::sqrt(data.nu), 1.0 / std::sqrt(data.kappa));
}

double eta_rho_K(const ProblemData& data, double area, double stab_one, double sigma_norm, double c_osc_K,
                 double osc_norm) {
  return std::abs(stab_one) / std::sqrt(data.kappa * area) + sigma_norm / std::sqrt(data.nu) + c_osc_K * osc_norm;
}

double eta_ct_K(const Mesh& mesh, const ProblemData& data, const P0Field& u, const P1Field& p, int k) {
  const auto& rule = triangle_rule(data.quad_degree);
  const auto pl = p.local(k);
  double s = 0;
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const auto& l = rule.points[q];
    const double pv = pl[0] * l[0] + pl[1] * l[1] + pl[2] * l[2];
    const double d = u[k] - project_control(-pv / data.theta, data.lower, data.upper);
    s += rule.weights[q] * d * d;
  }
  return std::sqrt(2 * mesh.area(k) * s);
}

ReliabilityConstants reliability_constants(double kappa, double theta) {
  const double poly = kappa * kappa * kappa + 2 * kappa * kappa + 4;
  const double t2 = theta * theta;
  ReliabilityConstants c;
  c.state = 2 + 4 / (kappa * kappa) + 8 / (t2 * std::pow(kappa, 6)) * poly;
  c.adjoint = 2 + 4 / (t2 * std::pow(kappa, 4)) * poly;
  c.control = 2 + 4 / kappa + 8 / std::pow(kappa, 3) + 8 / (t2 * std::pow(kappa, 7)) * poly;
  return c;
}

std::vector<double> upsilon_local(const ReliabilityConstants& c, const std::vector<double>& eta_st,
                                  const std::vector<double>& eta_ad, const std::vector<double>& eta_ct) {
  if (eta_st.size() != eta_ad.size() || eta_st.size() != eta_ct.size())
    throw InvalidInput("upsilon: indicator arrays differ in length");
  std::vector<double> out(eta_st.size());
  for (std::size_t k = 0; k < out.size(); ++k)
    out[k] = std::sqrt(c.state * eta_st[k] * eta_st[k] + c.adjoint * eta_ad[k] * eta_ad[k] +
                       c.control * eta_ct[k] * eta_ct[k]);
  return out;
}

RobustSide robust_indicators(const Mesh& mesh, const ProblemData& data, const OcpFields& fields, Side side,
                             const std::vector<ElementResidual>& residuals) {
  const Scheme scheme = data.scheme(side);
  if (scheme != Scheme::SUPG && scheme != Scheme::CIP)
    throw InvalidInput("robust estimation is defined for SUPG and CIP only (got " + to_string(scheme) + ")");
  const P1Field* xi = side == Side::State ? fields.state : fields.adjoint;
  if (!xi) throw InvalidInput("robust_indicators: missing field");
  const auto ne = static_cast<std::size_t>(mesh.num_elements());
  if (residuals.size() != ne) throw InvalidInput("robust_indicators: residuals have wrong size");

  RobustSide out;
  out.indicator.resize(ne);
  out.weighted_osc.resize(ne);
  out.theta.assign(ne, 0.0);
  const auto& rule = triangle_rule(data.quad_degree);
  parallel_for(ne, [&](std::size_t kk) {
    const int k = static_cast<int>(kk);
    const double hk = hbar(data, mesh.diameter(k));
    const Vec2 grad = xi->gradient(k);
    double e2 = hk * hk * p1_norm2(mesh.area(k), residuals[kk].interior.nodal);
    for (int j = 0; j < 3; ++j) {
      const int kn = mesh.neighbor(k, j);
      if (kn < 0) continue;
      const int e = mesh.element_edges(k)[j];
      const double jump = 0.5 * data.nu * (grad - xi->gradient(kn)).dot(mesh.normal(k, j));
      e2 += hbar(data, mesh.edge_length(e)) / std::sqrt(data.nu) * jump * jump * mesh.edge_length(e);
    }
    out.indicator[kk] = std::sqrt(e2);
    out.weighted_osc[kk] = hk * residuals[kk].oscillation;

    if (scheme == Scheme::CIP && !data.velocity.is_constant) {
      // b - Pi_K b componentwise, and the sup of the Frobenius norm of grad b.
      const LinearOnElement b0 = project_P1(mesh, k, [&](const Vec2& x) { return data.velocity.value(x).x(); },
                                            data.quad_degree);
      const LinearOnElement b1 = project_P1(mesh, k, [&](const Vec2& x) { return data.velocity.value(x).y(); },
                                            data.quad_degree);
      double s = 0, jac = 0;
      for (std::size_t q = 0; q < rule.size(); ++q) {
        const auto& l = rule.points[q];
        const Vec2 x = mesh.point(k, l);
        const Vec2 d = data.velocity.value(x) - Vec2(b0(l), b1(l));
        const double v = d.dot(grad);
        s += rule.weights[q] * v * v;
        jac = std::max(jac, data.velocity.jacobian(x).norm());
      }
      for (int i = 0; i < 3; ++i) jac = std::max(jac, data.velocity.jacobian(mesh.vertex(mesh.element(k)[i])).norm());
      const double area = mesh.area(k);
      out.theta[kk] = hk * std::sqrt(2 * area * s) + hk * mesh.diameter(k) * jac * grad.norm() * std::sqrt(area);
    }
  });
  return out;
}

EstimatorMode estimator_mode_from_string(const std::string& s) {
  if (s == "computable") return EstimatorMode::Computable;
  if (s == "robust") return EstimatorMode::Robust;
  if (s == "both") return EstimatorMode::Both;
  throw InvalidInput("unknown estimator mode '" + s + "' (expected computable, robust or both)");
}

std::string to_string(EstimatorMode m) {
  switch (m) {
    case EstimatorMode::Computable: return "computable";
    case EstimatorMode::Robust: return "robust";
    case EstimatorMode::Both: return "both";
  }
  return "?";
}

namespace {

double rss(const std::vector<double>& v) { return root_sum_squares(v); }

std::vector<double> side_eta(const Mesh& mesh, const ProblemData& data, const std::vector<ElementForms>& forms,
                             const OcpFields& fields, const SigmaField& sf, Side side, std::vector<double>& osc,
                             std::vector<double>& cosc) {
  const auto ne = static_cast<std::size_t>(mesh.num_elements());
  std::vector<double> eta(ne);
  osc.resize(ne);
  cosc.resize(ne);
  parallel_for(ne, [&](std::size_t kk) {
    const int k = static_cast<int>(kk);
    const double s1 = stab_eval(mesh, data, forms, k, side, fields, TestFunction::One);
    cosc[kk] = c_osc(data, mesh.diameter(k));
    osc[kk] = sf.residual[kk].oscillation;
    eta[kk] = eta_rho_K(data, mesh.area(k), s1, sf.sigma[kk].norm, cosc[kk], osc[kk]);
  });
  return eta;
}

}  // namespace

Estimate estimate(const Mesh& mesh, const ProblemData& data, const Discretization& disc, const OcpSolution& sol,
                  EstimatorMode mode) {
  const bool robust = mode != EstimatorMode::Computable;
  if (robust) {
    check_robust_admissible(data, mesh, data.state_scheme);
    check_robust_admissible(data, mesh, data.adjoint_scheme);
  }
  const OcpFields fields{&sol.state, &sol.adjoint, &sol.control};
  const auto ne = static_cast<std::size_t>(mesh.num_elements());

  Estimate est;
  EstimatorChecks& ch = est.checks;
  IndicatorField& ind = est.indicators;

  const FluxSet fst = build_fluxes(mesh, data, disc.state, Side::State, fields);
  const FluxSet fad = build_fluxes(mesh, data, disc.adjoint, Side::Adjoint, fields);
  ch.flux_consistency = std::max(fst.max_consistency, fad.max_consistency);
  ch.flux_equilibration = std::max(fst.max_equilibration, fad.max_equilibration);
  ch.patch_compatibility = std::max(fst.max_compatibility, fad.max_compatibility);

  const SigmaField sst = recover_all(mesh, data, disc.state, fields, fst, Side::State);
  const SigmaField sad = recover_all(mesh, data, disc.adjoint, fields, fad, Side::Adjoint);
  ch.sigma_constraints = std::max(sst.max_constraint_residual, sad.max_constraint_residual);
  ch.sigma_identity = std::max(sst.max_identity_defect, sad.max_identity_defect);
  ch.sigma_stability = std::max(sst.max_stability_ratio, sad.max_stability_ratio);

  ind.eta_st = side_eta(mesh, data, disc.state, fields, sst, Side::State, ind.osc_st, ind.c_osc);
  ind.eta_ad = side_eta(mesh, data, disc.adjoint, fields, sad, Side::Adjoint, ind.osc_ad, ind.c_osc);
  ind.eta_ct.resize(ne);
  ind.cell_peclet.resize(ne);
  parallel_for(ne, [&](std::size_t kk) {
    const int k = static_cast<int>(kk);
    ind.eta_ct[kk] = eta_ct_K(mesh, data, sol.control, sol.adjoint, k);
    ind.cell_peclet[kk] = velocity_sup(data, mesh, k) * mesh.diameter(k) / data.nu;
  });
  ind.constants = reliability_constants(data.kappa, data.theta);
  ind.upsilon = upsilon_local(ind.constants, ind.eta_st, ind.eta_ad, ind.eta_ct);
  ind.eta_st_global = rss(ind.eta_st);
  ind.eta_ad_global = rss(ind.eta_ad);
  ind.eta_ct_global = rss(ind.eta_ct);
  ind.upsilon_global = rss(ind.upsilon);

  if (robust) {
    ind.robust = true;
    const RobustSide rs = robust_indicators(mesh, data, fields, Side::State, sst.residual);
    const RobustSide ra = robust_indicators(mesh, data, fields, Side::Adjoint, sad.residual);
    ind.e_st = rs.indicator;
    ind.e_ad = ra.indicator;
    ind.theta_y = rs.theta;
    ind.theta_p = ra.theta;
    ind.osc_st_weighted = rs.weighted_osc;
    ind.osc_ad_weighted = ra.weighted_osc;
    ind.hbar.resize(ne);
    for (std::size_t k = 0; k < ne; ++k) ind.hbar[k] = hbar(data, mesh.diameter(static_cast<int>(k)));
    ind.e_st_global = rss(ind.e_st);
    ind.e_ad_global = rss(ind.e_ad);
    const double parts[] = {ind.e_st_global,     ind.e_ad_global,          ind.eta_ct_global,
                            rss(rs.weighted_osc), rss(ra.weighted_osc), rss(rs.theta), rss(ra.theta)};
    ind.upsilon_r = root_sum_squares(parts);
  }
  return est;
}

std::vector<double> state_equation_indicators(const Mesh& mesh, const ProblemData& data,
                                              const std::vector<ElementForms>& forms, const P1Field& y,
                                              const P0Field& control, double* global) {
  const OcpFields fields{&y, nullptr, &control};
  const FluxSet fs = build_fluxes(mesh, data, forms, Side::State, fields);
  const SigmaField sf = recover_all(mesh, data, forms, fields, fs, Side::State);
  std::vector<double> osc, cosc;
  std::vector<double> eta = side_eta(mesh, data, forms, fields, sf, Side::State, osc, cosc);
  if (global) *global = rss(eta);
  return eta;
}

std::vector<int> mark(const std::vector<double>& local, double factor) {
  if (!(factor > 0)) throw InvalidInput("marking factor must be positive");
  std::vector<double> sq(local.size());
  for (std::size_t k = 0; k < local.size(); ++k) sq[k] = local[k] * local[k];
  const double total = pairwise_sum(sq);
  std::vector<int> out;
  if (!(total > 0)) return out;
  // Relative slack so that exactly uniform indicators are all marked despite rounding in the sum.
  const double threshold = factor * total / static_cast<double>(local.size()) * (1 - 1e-12);
  for (std::size_t k = 0; k < local.size(); ++k)
    if (sq[k] >= threshold) out.push_back(static_cast<int>(k));
  return out;
}

namespace {

struct Column {
  const char* name;
  const std::vector<double>* values;
};

std::vector<Column> columns(const IndicatorField& ind) {
  std::vector<Column> c = {{"eta_st", &ind.eta_st}, {"eta_ad", &ind.eta_ad}, {"eta_ct", &ind.eta_ct},
                           {"upsilon", &ind.upsilon}, {"osc_st", &ind.osc_st}, {"osc_ad", &ind.osc_ad},
                           {"c_osc", &ind.c_osc},   {"cell_peclet", &ind.cell_peclet}};
  if (ind.robust) {
    c.insert(c.end(), {{"e_st", &ind.e_st},
                       {"e_ad", &ind.e_ad},
                       {"theta_y", &ind.theta_y},
                       {"theta_p", &ind.theta_p},
                       {"hbar", &ind.hbar},
                       {"osc_st_weighted", &ind.osc_st_weighted},
                       {"osc_ad_weighted", &ind.osc_ad_weighted}});
  }
  return c;
}

}  // namespace

void write_indicator_csv(std::ostream& out, const IndicatorField& ind) {
  const auto cols = columns(ind);
  out << "element";
  for (const auto& c : cols) out << ',' << c.name;
  out << '\n';
  char buf[32];
  for (std::size_t k = 0; k < ind.eta_st.size(); ++k) {
    out << k;
    for (const auto& c : cols) {
      std::snprintf(buf, sizeof buf, "%.16e", (*c.values)[k]);
      out << ',' << buf;
    }
    out << '\n';
  }
}

std::vector<VtkField> indicator_vtk_fields(const IndicatorField& ind) {
  std::vector<VtkField> out;
  for (const auto& c : columns(ind)) out.push_back({c.name, *c.values});
  return out;
}

}  // namespace stabocp
