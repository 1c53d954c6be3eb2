#pragma once

#include "stabocp/flux_recovery.hpp"
#include "stabocp/ocp_solver.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace stabocp {

/// Oscillation weight min{h/(pi sqrt(nu)), 1/sqrt(kappa)}.
double c_osc(const ProblemData& data, double h);

/// Robust weight min{h/sqrt(nu), 1/sqrt(kappa)}.
double hbar(const ProblemData& data, double h);

/// Computable indicator of one side on one element:
/// |S_K(1)|/sqrt(kappa |K|) + ||sigma_K||/sqrt(nu) + c_osc ||osc_K||.
double eta_rho_K(const ProblemData& data, double area, double stab_one, double sigma_norm, double c_osc_K,
                 double osc_norm);

/// ||u_K - clamp(-p/theta)||_{L2(K)} by the rule of degree data.quad_degree.
double eta_ct_K(const Mesh& mesh, const ProblemData& data, const P0Field& u, const P1Field& p, int k);

/// Weights of the three indicator families in the global bound.
struct ReliabilityConstants {
  double state = 0, adjoint = 0, control = 0;
};
ReliabilityConstants reliability_constants(double kappa, double theta);

/// Upsilon_K^2 = C_st eta_st^2 + C_ad eta_ad^2 + C_ct eta_ct^2 per element.
std::vector<double> upsilon_local(const ReliabilityConstants& c, const std::vector<double>& eta_st,
                                  const std::vector<double>& eta_ad, const std::vector<double>& eta_ct);

/// Robust indicators of one side, per element.
struct RobustSide {
  std::vector<double> indicator;     // E_K
  std::vector<double> weighted_osc;  // hbar_K ||osc_K||
  std::vector<double> theta;         // Theta_K(xi), 0 for SUPG
};

/// Needs the element residuals of the side (from recover_all). Throws
/// InvalidInput for schemes other than SUPG and CIP.
RobustSide robust_indicators(const Mesh& mesh, const ProblemData& data, const OcpFields& fields, Side side,
                             const std::vector<ElementResidual>& residuals);

enum class EstimatorMode { Computable, Robust, Both };
EstimatorMode estimator_mode_from_string(const std::string& s);
std::string to_string(EstimatorMode m);

struct IndicatorField {
  std::vector<double> eta_st, eta_ad, eta_ct, upsilon;
  std::vector<double> osc_st, osc_ad, c_osc;
  std::vector<double> e_st, e_ad, theta_y, theta_p, hbar, osc_st_weighted, osc_ad_weighted;
  std::vector<double> cell_peclet;  // ||b||_inf h / nu, diagnostics only
  double eta_st_global = 0, eta_ad_global = 0, eta_ct_global = 0, upsilon_global = 0;
  double e_st_global = 0, e_ad_global = 0, upsilon_r = 0;
  ReliabilityConstants constants;
  bool robust = false;
};

/// Equilibration and sigma diagnostics gathered while estimating.
struct EstimatorChecks {
  double flux_consistency = 0;     // worst |g_K + g_K'| over both sides
  double flux_equilibration = 0;   // worst relative first-order defect
  double patch_compatibility = 0;
  double sigma_constraints = 0;    // worst relative constraint residual
  double sigma_identity = 0;       // worst relative identity defect
  double sigma_stability = 0;
};

struct Estimate {
  IndicatorField indicators;
  EstimatorChecks checks;
};

Estimate estimate(const Mesh& mesh, const ProblemData& data, const Discretization& disc, const OcpSolution& sol,
                  EstimatorMode mode = EstimatorMode::Computable);

/// Indicators of the standalone state equation with a fixed control; returns
/// eta_K and writes the global value (the root-sum-squares).
std::vector<double> state_equation_indicators(const Mesh& mesh, const ProblemData& data,
                                              const std::vector<ElementForms>& forms, const P1Field& y,
                                              const P0Field& control, double* global = nullptr);

/// Elements with Upsilon_K^2 >= factor * Upsilon^2 / #T (factor 1 is the average rule).
std::vector<int> mark(const std::vector<double>& local, double factor = 1.0);

void write_indicator_csv(std::ostream& out, const IndicatorField& ind);
std::vector<VtkField> indicator_vtk_fields(const IndicatorField& ind);

}  // namespace stabocp
