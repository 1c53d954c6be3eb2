#include "stabocp/adaptive_driver.hpp"

#include "stabocp/expression.hpp"
#include "stabocp/quadrature.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

namespace stabocp {

using nlohmann::json;

namespace {

struct Layer {
  double value, d1, d2;
};

// x + (e^{(x-1)/nu} - c)/(c - 1) with c = e^{-1/nu}; vanishes at x = 0 and x = 1.
Layer outflow_layer(double x, double nu) {
  const double c = std::exp(-1.0 / nu);
  const double den = c - 1.0;
  const double e = std::exp((x - 1.0) / nu);
  return {x + (e - c) / den, 1.0 + e / (nu * den), e / (nu * nu * den)};
}

// 1 - x + (e^{-x/nu} - c)/(c - 1); vanishes at x = 0 and x = 1.
Layer inflow_layer(double x, double nu) {
  const double c = std::exp(-1.0 / nu);
  const double den = c - 1.0;
  const double e = std::exp(-x / nu);
  return {1.0 - x + (e - c) / den, -1.0 - e / (nu * den), e / (nu * nu * den)};
}

Layer bump(double y) { return {y * (1 - y), 1 - 2 * y, -2.0}; }

struct Smooth {
  double value;
  Vec2 grad;
  double laplacian;
};

Smooth product(const Layer& a, const Layer& s) {
  return {a.value * s.value, Vec2(a.d1 * s.value, a.value * s.d1), a.d2 * s.value + a.value * s.d2};
}

}  // namespace

ProblemSetup example1_problem(Scheme state, Scheme adjoint, int quad_degree, double nu) {
  ProblemSetup ps;
  ProblemData& d = ps.data;
  d.nu = nu;
  d.kappa = 1;
  d.theta = 1;
  d.lower = -1;
  d.upper = -0.1;
  d.velocity = VelocityField::constant(Vec2(1, 0));
  d.state_scheme = state;
  d.adjoint_scheme = adjoint;
  d.quad_degree = quad_degree;

  auto ybar = [nu](const Vec2& x) { return product(outflow_layer(x.x(), nu), bump(x.y())); };
  auto pbar = [nu](const Vec2& x) { return product(inflow_layer(x.x(), nu), bump(x.y())); };
  const double lo = d.lower, hi = d.upper, theta = d.theta, kappa = d.kappa;
  auto ubar = [=](const Vec2& x) { return std::min(hi, std::max(lo, -pbar(x).value / theta)); };

  d.source = [=](const Vec2& x) {
    const Smooth y = ybar(x);
    return -nu * y.laplacian + y.grad.x() + kappa * y.value - ubar(x);
  };
  d.desired_state = [=](const Vec2& x) {
    const Smooth p = pbar(x);
    return ybar(x).value + nu * p.laplacian + p.grad.x() - kappa * p.value;
  };

  ExactSolution ex;
  ex.state = [=](const Vec2& x) { return ybar(x).value; };
  ex.adjoint = [=](const Vec2& x) { return pbar(x).value; };
  ex.control = ubar;
  ex.state_gradient = [=](const Vec2& x) { return ybar(x).grad; };
  ex.adjoint_gradient = [=](const Vec2& x) { return pbar(x).grad; };
  ps.exact = std::move(ex);
  return ps;
}

VelocityField velocity_from_registry(const std::string& name) {
  if (name == "example1") return VelocityField::constant(Vec2(1, 0));
  if (name == "rotating") {
    VelocityField v;
    v.value = [](const Vec2& x) { return Vec2(-(x.y() - 0.5), x.x() - 0.5); };
    v.jacobian = [](const Vec2&) { return (Mat2() << 0, -1, 1, 0).finished(); };
    return v;
  }
  if (name == "shear") {
    VelocityField v;
    v.value = [](const Vec2& x) { return Vec2(x.y(), 0); };
    v.jacobian = [](const Vec2&) { return (Mat2() << 0, 1, 0, 0).finished(); };
    return v;
  }
  throw InvalidInput("unknown velocity field '" + name + "' (known: example1, rotating, shear)");
}

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw InvalidInput("unknown config key '" + it.key() + "' in " + where);
  }
}

void check_config(const StudyConfig& c) {
  if (c.kind != "example1" && c.kind != "custom") throw InvalidInput("problem kind must be example1 or custom");
  if (c.quad_degree < 2 || c.quad_degree > kMaxQuadratureDegree)
    throw InvalidInput("quadrature_degree must be in 2.." + std::to_string(kMaxQuadratureDegree));
  if (c.max_iterations < 1) throw InvalidInput("max_iterations must be positive");
  if (c.dof_budget < 1) throw InvalidInput("dof_budget must be positive");
  if (c.initial_nx < 1 || c.initial_ny < 1) throw InvalidInput("initial mesh needs nx, ny >= 1");
  if (!(c.marking_factor > 0)) throw InvalidInput("marking factor must be positive");
  if (c.vtk != "all" && c.vtk != "last" && c.vtk != "none") throw InvalidInput("output.vtk must be all, last or none");
  if (c.threads < 1) throw InvalidInput("threads must be positive");
  if (c.mode != EstimatorMode::Computable) {
    for (Scheme s : {c.state_scheme, c.adjoint_scheme})
      if (s != Scheme::SUPG && s != Scheme::CIP)
        throw InvalidInput("robust estimation needs SUPG or CIP on both sides (got " + to_string(s) +
                           "); GLS, ES and None are not covered by the robust theory");
  }
  if (c.kind == "custom") {
    const bool exact = c.exact_state || c.exact_adjoint;
    const bool given = c.source || c.desired_state;
    if (exact && given) throw InvalidInput("give either exact_state/exact_adjoint or source/desired_state, not both");
    if (exact && !(c.exact_state && c.exact_adjoint))
      throw InvalidInput("exact_state and exact_adjoint must be given together");
  }
}

}  // namespace

StudyConfig parse_study_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw InvalidInput("config must be a JSON object");
  reject_unknown(j,
                 {"problem", "stabilization", "estimator", "quadrature_degree", "max_iterations", "dof_budget",
                  "initial_mesh", "marking", "output", "threads"},
                 "top level");
  StudyConfig c;
  if (j.contains("problem")) {
    const json& p = j["problem"];
    if (p.is_string()) {
      c.kind = p.get<std::string>();
    } else if (p.is_object()) {
      reject_unknown(p,
                     {"kind", "nu", "kappa", "theta", "lower", "upper", "velocity", "exact_state", "exact_adjoint",
                      "source", "desired_state", "constants"},
                     "problem");
      c.kind = get_or<std::string>(p, "kind", "example1");
      c.nu = get_or(p, "nu", c.nu);
      if (c.kind == "example1") {
        for (const char* k : {"kappa", "theta", "lower", "upper", "velocity", "exact_state", "exact_adjoint",
                              "source", "desired_state", "constants"})
          if (p.contains(k)) throw InvalidInput(std::string("example1 only accepts 'nu', not '") + k + "'");
      } else {
        c.kappa = get_or(p, "kappa", c.kappa);
        c.theta = get_or(p, "theta", c.theta);
        c.lower = get_or(p, "lower", c.lower);
        c.upper = get_or(p, "upper", c.upper);
        if (p.contains("velocity")) {
          const json& v = p["velocity"];
          if (v.is_string()) {
            c.velocity_name = v.get<std::string>();
            velocity_from_registry(c.velocity_name);
          } else if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
            c.velocity_constant = Vec2(v[0].get<double>(), v[1].get<double>());
          } else if (v.is_array() && v.size() == 2 && v[0].is_string() && v[1].is_string()) {
            c.velocity_expr = std::array<std::string, 2>{v[0].get<std::string>(), v[1].get<std::string>()};
          } else {
            throw InvalidInput("velocity must be a registry name, [bx, by] or two expression strings");
          }
        }
        if (p.contains("exact_state")) c.exact_state = p["exact_state"].get<std::string>();
        if (p.contains("exact_adjoint")) c.exact_adjoint = p["exact_adjoint"].get<std::string>();
        if (p.contains("source")) c.source = p["source"].get<std::string>();
        if (p.contains("desired_state")) c.desired_state = p["desired_state"].get<std::string>();
        if (p.contains("constants")) c.constants = p["constants"].get<std::map<std::string, double>>();
      }
    } else {
      throw InvalidInput("problem must be a string or an object");
    }
  }
  if (j.contains("stabilization")) {
    const json& s = j["stabilization"];
    reject_unknown(s, {"state", "adjoint"}, "stabilization");
    c.state_scheme = scheme_from_string(get_or<std::string>(s, "state", to_string(c.state_scheme)));
    c.adjoint_scheme = scheme_from_string(get_or<std::string>(s, "adjoint", to_string(c.adjoint_scheme)));
  }
  c.mode = estimator_mode_from_string(get_or<std::string>(j, "estimator", to_string(c.mode)));
  c.quad_degree = get_or(j, "quadrature_degree", c.quad_degree);
  c.max_iterations = get_or(j, "max_iterations", c.max_iterations);
  c.dof_budget = get_or(j, "dof_budget", c.dof_budget);
  c.threads = get_or(j, "threads", c.threads);
  if (j.contains("initial_mesh")) {
    const json& m = j["initial_mesh"];
    reject_unknown(m, {"nx", "ny"}, "initial_mesh");
    c.initial_nx = get_or(m, "nx", c.initial_nx);
    c.initial_ny = get_or(m, "ny", c.initial_ny);
  }
  if (j.contains("marking")) {
    const json& m = j["marking"];
    reject_unknown(m, {"factor"}, "marking");
    c.marking_factor = get_or(m, "factor", c.marking_factor);
  }
  if (j.contains("output")) {
    const json& o = j["output"];
    reject_unknown(o, {"dir", "vtk", "deterministic_history"}, "output");
    c.output_dir = get_or(o, "dir", c.output_dir);
    c.vtk = get_or(o, "vtk", c.vtk);
    c.deterministic_history = get_or(o, "deterministic_history", c.deterministic_history);
  }
  check_config(c);
  return c;
}

StudyConfig load_study_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_study_config(ss.str());
}

std::string config_to_json(const StudyConfig& c) {
  json p;
  p["kind"] = c.kind;
  p["nu"] = c.nu;
  if (c.kind == "custom") {
    p["kappa"] = c.kappa;
    p["theta"] = c.theta;
    p["lower"] = c.lower;
    p["upper"] = c.upper;
    if (c.velocity_constant)
      p["velocity"] = {c.velocity_constant->x(), c.velocity_constant->y()};
    else if (c.velocity_expr)
      p["velocity"] = {(*c.velocity_expr)[0], (*c.velocity_expr)[1]};
    else
      p["velocity"] = c.velocity_name;
    if (c.exact_state) p["exact_state"] = *c.exact_state;
    if (c.exact_adjoint) p["exact_adjoint"] = *c.exact_adjoint;
    if (c.source) p["source"] = *c.source;
    if (c.desired_state) p["desired_state"] = *c.desired_state;
    if (!c.constants.empty()) p["constants"] = c.constants;
  }
  json j;
  j["problem"] = p;
  j["stabilization"] = {{"state", to_string(c.state_scheme)}, {"adjoint", to_string(c.adjoint_scheme)}};
  j["estimator"] = to_string(c.mode);
  j["quadrature_degree"] = c.quad_degree;
  j["max_iterations"] = c.max_iterations;
  j["dof_budget"] = c.dof_budget;
  j["initial_mesh"] = {{"nx", c.initial_nx}, {"ny", c.initial_ny}};
  j["marking"] = {{"factor", c.marking_factor}};
  j["output"] = {{"dir", c.output_dir}, {"vtk", c.vtk}, {"deterministic_history", c.deterministic_history}};
  j["threads"] = c.threads;
  return j.dump(2);
}

ProblemSetup make_problem(const StudyConfig& c) {
  check_config(c);
  if (c.kind == "example1") return example1_problem(c.state_scheme, c.adjoint_scheme, c.quad_degree, c.nu);

  ProblemSetup ps;
  ProblemData& d = ps.data;
  d.nu = c.nu;
  d.kappa = c.kappa;
  d.theta = c.theta;
  d.lower = c.lower;
  d.upper = c.upper;
  d.state_scheme = c.state_scheme;
  d.adjoint_scheme = c.adjoint_scheme;
  d.quad_degree = c.quad_degree;
  if (c.velocity_constant) {
    d.velocity = VelocityField::constant(*c.velocity_constant);
  } else if (c.velocity_expr) {
    const Expression bx((*c.velocity_expr)[0], c.constants), by((*c.velocity_expr)[1], c.constants);
    d.velocity.value = [bx, by](const Vec2& x) { return Vec2(bx(x), by(x)); };
    d.velocity.jacobian = [bx, by](const Vec2& x) {
      Mat2 m;
      m.row(0) = bx.jet(x).g.transpose();
      m.row(1) = by.jet(x).g.transpose();
      return m;
    };
  } else {
    d.velocity = velocity_from_registry(c.velocity_name);
  }
  d.validate();

  if (c.exact_state) {
    const Expression ye(*c.exact_state, c.constants), pe(*c.exact_adjoint, c.constants);
    const VelocityField vel = d.velocity;
    const double nu = d.nu, kappa = d.kappa, theta = d.theta, lo = d.lower, hi = d.upper;
    auto ubar = [=](const Vec2& x) { return std::min(hi, std::max(lo, -pe(x) / theta)); };
    d.source = [=](const Vec2& x) {
      const Jet2 y = ye.jet(x);
      return -nu * y.h.trace() + vel.value(x).dot(y.g) + kappa * y.v - ubar(x);
    };
    d.desired_state = [=](const Vec2& x) {
      const Jet2 p = pe.jet(x);
      return ye(x) + nu * p.h.trace() + vel.value(x).dot(p.g) - kappa * p.v;
    };
    ExactSolution ex;
    ex.state = [ye](const Vec2& x) { return ye(x); };
    ex.adjoint = [pe](const Vec2& x) { return pe(x); };
    ex.control = ubar;
    ex.state_gradient = [ye](const Vec2& x) { return Vec2(ye.jet(x).g); };
    ex.adjoint_gradient = [pe](const Vec2& x) { return Vec2(pe.jet(x).g); };
    ps.exact = std::move(ex);
  } else {
    if (c.source) {
      const Expression f(*c.source, c.constants);
      d.source = [f](const Vec2& x) { return f(x); };
    }
    if (c.desired_state) {
      const Expression yd(*c.desired_state, c.constants);
      d.desired_state = [yd](const Vec2& x) { return yd(x); };
    }
  }
  return ps;
}

long count_dofs(const Mesh& mesh) {
  long interior = 0;
  for (int v = 0; v < mesh.num_vertices(); ++v) interior += !mesh.is_boundary_vertex(v);
  return 2 * interior + mesh.num_elements();
}

double tail_slope(const std::vector<HistoryRecord>& h, const std::function<double(const HistoryRecord&)>& value) {
  const std::size_t n = h.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t start = n - std::max<std::size_t>(2, (n + 1) / 2);
  std::vector<double> xs, ys;
  for (std::size_t i = start; i < n; ++i) {
    const double v = value(h[i]);
    if (!(v > 0) || !std::isfinite(v)) continue;
    xs.push_back(std::log(static_cast<double>(h[i].ndof)));
    ys.push_back(std::log(v));
  }
  if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = static_cast<double>(xs.size());
  const double mx = pairwise_sum(xs) / m, my = pairwise_sum(ys) / m;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxx > 0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

void write_history_header(std::ostream& out, bool robust) {
  out << "iter,ndof,nelems,err_y,err_p,err_u,err_total,eta_st,eta_ad,eta_ct,upsilon,effectivity";
  if (robust) out << ",e_st,e_ad,upsilon_r,effectivity_r";
  out << ",walltime_s\n";
}

void write_history_row(std::ostream& out, const HistoryRecord& r, bool robust, bool deterministic) {
  char buf[40];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.16e", v);
    out << ',' << buf;
  };
  out << r.iteration << ',' << r.ndof << ',' << r.nelems;
  for (double v : {r.errors.state, r.errors.adjoint, r.errors.control, r.errors.total, r.eta_st, r.eta_ad, r.eta_ct,
                   r.upsilon, r.effectivity})
    num(v);
  if (robust)
    for (double v : {r.e_st, r.e_ad, r.upsilon_r, r.effectivity_r}) num(v);
  num(deterministic ? 0.0 : r.walltime_s);
  out << '\n';
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

struct IterationOutput {
  HistoryRecord record;
  OcpSolution solution;
  IndicatorField indicators;
  double solve_s = 0, estimate_s = 0;
};

IterationOutput run_iteration(const Mesh& mesh, const ProblemSetup& ps, EstimatorMode mode, const P0Field* init) {
  IterationOutput out;
  const auto t0 = Clock::now();
  const Discretization disc = discretize(mesh, ps.data);
  out.solution = solve_ocp(mesh, ps.data, disc, init);
  out.solve_s = seconds_since(t0);
  const auto t1 = Clock::now();
  Estimate est = estimate(mesh, ps.data, disc, out.solution, mode);
  out.estimate_s = seconds_since(t1);

  HistoryRecord& r = out.record;
  r.ndof = count_dofs(mesh);
  r.nelems = mesh.num_elements();
  const IndicatorField& ind = est.indicators;
  r.eta_st = ind.eta_st_global;
  r.eta_ad = ind.eta_ad_global;
  r.eta_ct = ind.eta_ct_global;
  r.upsilon = ind.upsilon_global;
  r.e_st = ind.e_st_global;
  r.e_ad = ind.e_ad_global;
  r.upsilon_r = ind.upsilon_r;
  r.checks = est.checks;
  r.active_set_iterations = out.solution.iterations;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (ps.exact) {
    r.errors = error_norms(mesh, ps.data, *ps.exact, out.solution.state, out.solution.adjoint, out.solution.control, 19);
    r.effectivity = r.errors.total > 0 ? r.upsilon / r.errors.total : nan;
    r.effectivity_r = ind.robust && r.errors.total > 0 ? r.upsilon_r / r.errors.total : nan;
  } else {
    r.errors = {nan, nan, nan, nan};
    r.effectivity = nan;
    r.effectivity_r = nan;
  }
  if (!ind.robust) r.effectivity_r = nan;
  out.indicators = std::move(est.indicators);
  return out;
}

void dump_vtk(const std::string& path, const Mesh& mesh, const IterationOutput& it) {
  std::vector<VtkField> point = {vtk_field("state", it.solution.state), vtk_field("adjoint", it.solution.adjoint)};
  std::vector<VtkField> cell = indicator_vtk_fields(it.indicators);
  cell.insert(cell.begin(), vtk_field("control", it.solution.control));
  write_vtk(path, mesh, point, cell);
}

std::string vtk_name(int iter) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "mesh_%03d.vtk", iter);
  return buf;
}

json checks_json(const std::vector<HistoryRecord>& h) {
  EstimatorChecks w;
  for (const auto& r : h) {
    w.flux_consistency = std::max(w.flux_consistency, r.checks.flux_consistency);
    w.flux_equilibration = std::max(w.flux_equilibration, r.checks.flux_equilibration);
    w.patch_compatibility = std::max(w.patch_compatibility, r.checks.patch_compatibility);
    w.sigma_constraints = std::max(w.sigma_constraints, r.checks.sigma_constraints);
    w.sigma_identity = std::max(w.sigma_identity, r.checks.sigma_identity);
    w.sigma_stability = std::max(w.sigma_stability, r.checks.sigma_stability);
  }
  return {{"flux_consistency", w.flux_consistency},     {"flux_equilibration", w.flux_equilibration},
          {"patch_compatibility", w.patch_compatibility}, {"sigma_constraints", w.sigma_constraints},
          {"sigma_identity", w.sigma_identity},           {"sigma_stability_ratio", w.sigma_stability}};
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

StudyResult run_study(const StudyConfig& c, const std::function<void(const HistoryRecord&, const Mesh&)>& on_iteration) {
  const ProblemSetup ps = make_problem(c);
  const bool robust = c.mode != EstimatorMode::Computable;
  const bool write = !c.output_dir.empty();
  std::ofstream hist, diag, timings;
  if (write) {
    std::filesystem::create_directories(c.output_dir);
    hist.open(std::filesystem::path(c.output_dir) / "history.csv");
    diag.open(std::filesystem::path(c.output_dir) / "diagnostics.csv");
    timings.open(std::filesystem::path(c.output_dir) / "timings.csv");
    if (!hist || !diag || !timings) throw InvalidInput("cannot write into " + c.output_dir);
    write_history_header(hist, robust);
    diag << "iter,marked,active_set_iterations,flux_consistency,flux_equilibration,patch_compatibility,"
            "sigma_constraints,sigma_identity,sigma_stability_ratio\n";
    timings << "iter,solve_s,estimate_s,total_s\n";
    hist.flush();
  }

  StudyResult result;
  Mesh mesh = build_rectangle_mesh(c.initial_nx, c.initial_ny);
  ps.data.check_solenoidal(mesh);
  std::vector<double> warm;
  std::string failure;
  try {
    for (int iter = 0; iter < c.max_iterations; ++iter) {
      const auto t0 = Clock::now();
      std::optional<P0Field> init;
      if (!warm.empty()) init.emplace(mesh, Eigen::Map<const Eigen::VectorXd>(warm.data(), warm.size()));
      IterationOutput it = run_iteration(mesh, ps, c.mode, init ? &*init : nullptr);
      HistoryRecord& r = it.record;
      r.iteration = iter;
      const std::vector<int> marked = mark(it.indicators.upsilon, c.marking_factor);
      r.marked = static_cast<int>(marked.size());
      r.walltime_s = seconds_since(t0);

      if (write) {
        write_history_row(hist, r, robust, c.deterministic_history);
        hist.flush();
        char buf[256];
        std::snprintf(buf, sizeof buf, "%d,%d,%d,%.6e,%.6e,%.6e,%.6e,%.6e,%.6e\n", iter, r.marked,
                      r.active_set_iterations, r.checks.flux_consistency, r.checks.flux_equilibration,
                      r.checks.patch_compatibility, r.checks.sigma_constraints, r.checks.sigma_identity,
                      r.checks.sigma_stability);
        diag << buf;
        diag.flush();
        std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f\n", iter, it.solve_s, it.estimate_s, r.walltime_s);
        timings << buf;
        timings.flush();
        if (c.vtk == "all") dump_vtk((std::filesystem::path(c.output_dir) / vtk_name(iter)).string(), mesh, it);
      }
      result.history.push_back(r);
      if (on_iteration) on_iteration(r, mesh);

      bool stop = marked.empty() || iter + 1 >= c.max_iterations;
      Mesh next;
      if (!stop) {
        next = refine(mesh, marked);
        stop = count_dofs(next) > c.dof_budget;
      }
      if (stop) {
        if (write && c.vtk == "last") dump_vtk((std::filesystem::path(c.output_dir) / vtk_name(iter)).string(), mesh, it);
        break;
      }
      warm.resize(next.num_elements());
      for (int k = 0; k < next.num_elements(); ++k) warm[k] = it.solution.control[next.parent(k)];
      it = IterationOutput{};  // fields refer to the old mesh
      mesh = std::move(next);
    }
  } catch (const std::exception& e) {
    failure = e.what();
  }
  result.final_mesh = mesh;
  result.slope_error = tail_slope(result.history, [](const HistoryRecord& r) { return r.errors.total; });
  result.slope_upsilon = tail_slope(result.history, [](const HistoryRecord& r) { return r.upsilon; });
  result.slope_upsilon_r = robust ? tail_slope(result.history, [](const HistoryRecord& r) { return r.upsilon_r; })
                                  : std::numeric_limits<double>::quiet_NaN();

  if (write) {
    json s;
    s["status"] = failure.empty() ? "ok" : "failed";
    if (!failure.empty()) s["error"] = failure;
    s["config"] = json::parse(config_to_json(c));
    s["iterations"] = result.history.size();
    if (!result.history.empty()) {
      const HistoryRecord& f = result.history.back();
      s["final"] = {{"ndof", f.ndof},
                    {"nelems", f.nelems},
                    {"err_total", finite_or_null(f.errors.total)},
                    {"upsilon", f.upsilon},
                    {"effectivity", finite_or_null(f.effectivity)}};
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (const auto& r : result.history)
        if (std::isfinite(r.effectivity)) {
          lo = std::min(lo, r.effectivity);
          hi = std::max(hi, r.effectivity);
        }
      s["effectivity_min"] = finite_or_null(lo);
      s["effectivity_max"] = finite_or_null(hi);
    }
    s["tail_slopes"] = {{"err_total", finite_or_null(result.slope_error)},
                        {"upsilon", finite_or_null(result.slope_upsilon)},
                        {"upsilon_r", finite_or_null(result.slope_upsilon_r)}};
    s["checks_max"] = checks_json(result.history);
    std::ofstream(std::filesystem::path(c.output_dir) / "summary.json") << s.dump(2) << '\n';
  }
  if (!failure.empty()) throw NumericalError("study aborted after " + std::to_string(result.history.size()) +
                                             " completed iterations: " + failure);
  return result;
}

HistoryRecord solve_single(const StudyConfig& c, int refinements) {
  if (refinements < 0) throw InvalidInput("refinements must be non-negative");
  const ProblemSetup ps = make_problem(c);
  Mesh mesh = build_rectangle_mesh(c.initial_nx, c.initial_ny);
  for (int i = 0; i < refinements; ++i) mesh = refine_uniform(mesh);
  ps.data.check_solenoidal(mesh);
  const auto t0 = Clock::now();
  IterationOutput it = run_iteration(mesh, ps, c.mode, nullptr);
  it.record.marked = static_cast<int>(mark(it.indicators.upsilon, c.marking_factor).size());
  it.record.walltime_s = seconds_since(t0);
  if (!c.output_dir.empty()) {
    const std::filesystem::path dir(c.output_dir);
    std::filesystem::create_directories(dir);
    const bool robust = c.mode != EstimatorMode::Computable;
    std::ofstream h(dir / "history.csv");
    write_history_header(h, robust);
    write_history_row(h, it.record, robust, c.deterministic_history);
    std::ofstream ind(dir / "indicators.csv");
    write_indicator_csv(ind, it.indicators);
    if (c.vtk != "none") dump_vtk((dir / "solution.vtk").string(), mesh, it);
    json s;
    s["status"] = "ok";
    s["config"] = json::parse(config_to_json(c));
    s["ndof"] = it.record.ndof;
    s["nelems"] = it.record.nelems;
    s["err_total"] = finite_or_null(it.record.errors.total);
    s["upsilon"] = it.record.upsilon;
    s["effectivity"] = finite_or_null(it.record.effectivity);
    s["active_set_iterations"] = it.record.active_set_iterations;
    s["checks_max"] = checks_json({it.record});
    std::ofstream(dir / "summary.json") << s.dump(2) << '\n';
  }
  return it.record;
}

}  // namespace stabocp
