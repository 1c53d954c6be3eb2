#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace stabocp {

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Property suite on built-in instances: control clamp cases, Lipschitz bound
/// of the projection, quadrature exactness, mesh conformity under random
/// refinement, the B*/B^T identity and coercivity. `seed` drives the random
/// instances only.
std::vector<PropertyResult> run_property_suite(std::uint64_t seed = 1);

/// One line per property; returns true when all passed.
bool print_property_report(std::ostream& out, const std::vector<PropertyResult>& results);

}  // namespace stabocp
