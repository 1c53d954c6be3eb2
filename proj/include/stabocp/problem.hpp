#pragma once

#include "stabocp/mesh.hpp"

#include <functional>
#include <optional>
#include <string>

namespace stabocp {

enum class Scheme { None, SUPG, GLS, CIP, ES };
enum class Side { State, Adjoint };

std::string to_string(Scheme s);
Scheme scheme_from_string(const std::string& s);

/// Velocity b with its Jacobian (row i holds the gradient of component i).
struct VelocityField {
  std::function<Vec2(const Vec2&)> value;
  std::function<Mat2(const Vec2&)> jacobian;
  bool is_constant = false;

  static VelocityField constant(const Vec2& b);
};

/// Physical, control and discretization data of the optimal control problem
///   min 1/2 ||y - y_d||^2 + theta/2 ||u||^2,
///   -nu Lap y + b.grad y + kappa y = f + u,  y = 0 on the boundary,  lower <= u <= upper.
struct ProblemData {
  double nu = 1;
  double kappa = 1;
  double theta = 1;
  VelocityField velocity = VelocityField::constant(Vec2::Zero());
  ScalarFn source = [](const Vec2&) { return 0.0; };
  ScalarFn desired_state = [](const Vec2&) { return 0.0; };
  double lower = -1;
  double upper = 1;
  Scheme state_scheme = Scheme::None;
  Scheme adjoint_scheme = Scheme::None;
  int quad_degree = 19;

  Scheme scheme(Side s) const { return s == Side::State ? state_scheme : adjoint_scheme; }

  /// Checks scalar assumptions (positivity, bounds order, quadrature degree).
  void validate() const;
  /// Checks |int_K div b| <= 1e-10 |K| ||b|| on every element.
  void check_solenoidal(const Mesh& mesh) const;
};

/// Closed-form optimal triple used for error measurement.
struct ExactSolution {
  ScalarFn state, adjoint, control;
  std::function<Vec2(const Vec2&)> state_gradient, adjoint_gradient;
};

}  // namespace stabocp
