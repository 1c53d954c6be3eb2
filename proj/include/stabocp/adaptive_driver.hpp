#pragma once

#include "stabocp/estimator.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace stabocp {

/// Problem data together with the exact optimal triple when it is known.
struct ProblemSetup {
  ProblemData data;
  std::optional<ExactSolution> exact;
};

/// The boundary-layer benchmark on the unit square: a=-1, b=-0.1, theta=1,
/// b=(1,0), kappa=1 and diffusion nu (1e-3 by default).
ProblemSetup example1_problem(Scheme state = Scheme::SUPG, Scheme adjoint = Scheme::SUPG, int quad_degree = 19,
                              double nu = 1e-3);

/// Named divergence-free velocity fields: "example1" = (1, 0), "rotating" =
/// (-(y - 1/2), x - 1/2), "shear" = (y, 0).
VelocityField velocity_from_registry(const std::string& name);

struct StudyConfig {
  // Problem. kind is "example1" or "custom".
  std::string kind = "example1";
  double nu = 1e-3, kappa = 1, theta = 1, lower = -1, upper = -0.1;
  std::string velocity_name = "example1";
  std::optional<Vec2> velocity_constant;
  std::optional<std::array<std::string, 2>> velocity_expr;
  std::optional<std::string> exact_state, exact_adjoint;  // closed form: f and y_d are derived
  std::optional<std::string> source, desired_state;       // data only: no exact solution
  std::map<std::string, double> constants;

  Scheme state_scheme = Scheme::SUPG;
  Scheme adjoint_scheme = Scheme::SUPG;
  EstimatorMode mode = EstimatorMode::Computable;
  int quad_degree = 19;
  int max_iterations = 60;
  long dof_budget = 150000;
  int initial_nx = 2, initial_ny = 2;
  double marking_factor = 1.0;  // mark K when Upsilon_K^2 >= factor * Upsilon^2 / #T
  std::string vtk = "all";      // all | last | none
  bool deterministic_history = true;
  std::string output_dir = "out";
  int threads = 1;
};

/// Parses the JSON config text (schema in README). Throws InvalidInput.
StudyConfig parse_study_config(const std::string& json_text);
StudyConfig load_study_config(const std::string& path);
/// The effective configuration as JSON text.
std::string config_to_json(const StudyConfig& c);

ProblemSetup make_problem(const StudyConfig& c);

/// Ndof = 2 (number of interior vertices) + number of elements.
long count_dofs(const Mesh& mesh);

struct HistoryRecord {
  int iteration = 0;
  long ndof = 0;
  int nelems = 0;
  ErrorNorms errors{};  // NaN when the exact solution is unknown
  double eta_st = 0, eta_ad = 0, eta_ct = 0, upsilon = 0, effectivity = 0;
  double e_st = 0, e_ad = 0, upsilon_r = 0, effectivity_r = 0;
  double walltime_s = 0;
  int marked = 0;
  int active_set_iterations = 0;
  EstimatorChecks checks;
};

struct StudyResult {
  std::vector<HistoryRecord> history;
  Mesh final_mesh;
  double slope_error = 0, slope_upsilon = 0, slope_upsilon_r = 0;
};

/// Least-squares slope of log(value) against log(ndof) over the last half of the records.
double tail_slope(const std::vector<HistoryRecord>& h, const std::function<double(const HistoryRecord&)>& value);

/// Adaptive loop: solve, estimate, mark, refine. Writes history.csv,
/// diagnostics.csv, timings.csv, summary.json and VTK files into
/// c.output_dir (skipped when it is empty). `on_iteration` is called after
/// each completed iteration.
StudyResult run_study(const StudyConfig& c,
                      const std::function<void(const HistoryRecord&, const Mesh&)>& on_iteration = {});

/// One solve and estimate on the initial mesh refined uniformly `refinements` times.
HistoryRecord solve_single(const StudyConfig& c, int refinements = 0);

void write_history_header(std::ostream& out, bool robust);
void write_history_row(std::ostream& out, const HistoryRecord& r, bool robust, bool deterministic);

}  // namespace stabocp
