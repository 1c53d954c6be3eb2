#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace stabocp {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using ScalarFn = std::function<double(const Vec2&)>;

/// Raised when inputs violate a documented precondition.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical procedure fails (singular system, broken invariant, no convergence).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pairwise summation; result depends only on the order of `values`.
double pairwise_sum(std::span<const double> values);

/// sqrt of the pairwise sum of squares.
double root_sum_squares(std::span<const double> values);

/// Number of worker threads used by parallel_for (default 1).
void set_num_threads(int n);
int num_threads();

/// Runs body(i) for i in [0, n). Each index must write only to its own slots,
/// which keeps results independent of the thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace stabocp
