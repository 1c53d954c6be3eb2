#pragma once

#include "stabocp/stabilization.hpp"

#include <optional>
#include <vector>

namespace stabocp {

/// min{upper, max{lower, w}}. Throws if lower >= upper.
double project_control(double w, double lower, double upper);

enum class ProjectionMode { Pointwise, ElementMean };

/// Pointwise mode clamps -p/theta at every vertex (a P1 interpolant, used for
/// inspection); ElementMean mode returns the P0 field clamp(-mean_K(p)/theta).
P1Field project_field_pointwise(const P1Field& p, double theta, double lower, double upper);
P0Field project_field_mean(const P1Field& p, double theta, double lower, double upper);

/// Per-element activity of the control bounds.
enum class Activity : signed char { Lower = -1, Inactive = 0, Upper = 1 };

struct OcpSolution {
  P1Field state;
  P1Field adjoint;
  P0Field control;
  int iterations = 0;
  std::vector<Activity> active;
  double state_residual = 0;    // ||residual|| / ||rhs|| of the state equation
  double adjoint_residual = 0;  // same for the adjoint equation
};

struct OcpOptions {
  int max_iters = 50;
  SolveOptions linear;
};

/// Both sides' element forms, built once per mesh.
struct Discretization {
  std::vector<ElementForms> state;
  std::vector<ElementForms> adjoint;
};
Discretization discretize(const Mesh& mesh, const ProblemData& data);

/// Primal-dual active set solve of the stabilized optimality system with a
/// piecewise constant control. `init` (optional) seeds the active sets.
OcpSolution solve_ocp(const Mesh& mesh, const ProblemData& data, const Discretization& disc,
                      const P0Field* init = nullptr, const OcpOptions& opts = {});
OcpSolution solve_ocp(const Mesh& mesh, const ProblemData& data, const P0Field* init = nullptr,
                      const OcpOptions& opts = {});

/// Stabilized state equation alone for a fixed piecewise constant control
/// (the single-equation setting). Uses the state-side forms.
P1Field solve_state(const Mesh& mesh, const std::vector<ElementForms>& forms, const P0Field& control,
                    const SolveOptions& linear = {});

}  // namespace stabocp
