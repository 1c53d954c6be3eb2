#include "stabocp/problem.hpp"

#include "stabocp/quadrature.hpp"

#include <cmath>

namespace stabocp {

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::None: return "None";
    case Scheme::SUPG: return "SUPG";
    case Scheme::GLS: return "GLS";
    case Scheme::CIP: return "CIP";
    case Scheme::ES: return "ES";
  }
  return "?";
}

Scheme scheme_from_string(const std::string& s) {
  std::string u;
  for (char c : s) u += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (u == "NONE" || u == "GALERKIN") return Scheme::None;
  if (u == "SUPG") return Scheme::SUPG;
  if (u == "GLS") return Scheme::GLS;
  if (u == "CIP") return Scheme::CIP;
  if (u == "ES") return Scheme::ES;
  throw InvalidInput("unknown stabilization scheme '" + s + "'");
}

VelocityField VelocityField::constant(const Vec2& b) {
  VelocityField v;
  v.value = [b](const Vec2&) { return b; };
  v.jacobian = [](const Vec2&) { return Mat2::Zero().eval(); };
  v.is_constant = true;
  return v;
}

void ProblemData::validate() const {
  if (!(nu > 0) || !std::isfinite(nu)) throw InvalidInput("nu must be positive");
  if (!(kappa > 0) || !std::isfinite(kappa)) throw InvalidInput("kappa must be positive");
  if (!(theta > 0) || !std::isfinite(theta)) throw InvalidInput("theta must be positive");
  if (!(lower < upper)) throw InvalidInput("control bounds require lower < upper");
  if (quad_degree < 2 || quad_degree > kMaxQuadratureDegree)
    throw InvalidInput("quadrature degree must lie in [2, " + std::to_string(kMaxQuadratureDegree) + "]");
  if (!velocity.value || !source || !desired_state) throw InvalidInput("problem data functions must be set");
}

void ProblemData::check_solenoidal(const Mesh& mesh) const {
  const auto& rule = triangle_rule(quad_degree);
  for (int k = 0; k < mesh.num_elements(); ++k) {
    double div = 0, bmax = 0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Vec2 x = mesh.point(k, rule.points[q]);
      div += rule.weights[q] * velocity.jacobian(x).trace();
      bmax = std::max(bmax, velocity.value(x).norm());
    }
    div *= 2 * mesh.area(k);
    if (std::abs(div) > 1e-10 * mesh.area(k) * std::max(bmax, 1.0))
      throw InvalidInput("velocity field is not solenoidal on element " + std::to_string(k));
  }
}

}  // namespace stabocp
