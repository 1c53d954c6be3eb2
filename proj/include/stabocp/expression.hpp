#pragma once

#include "stabocp/common.hpp"

#include <map>
#include <memory>
#include <string>

namespace stabocp {

/// Value, gradient and Hessian of a scalar function of (x, y), propagated
/// through arithmetic by second-order forward differentiation.
struct Jet2 {
  double v = 0;
  Vec2 g = Vec2::Zero();
  Mat2 h = Mat2::Zero();

  static Jet2 constant(double c) { return {c, Vec2::Zero(), Mat2::Zero()}; }
  static Jet2 variable(double value, int axis) {
    Jet2 j{value, Vec2::Zero(), Mat2::Zero()};
    j.g[axis] = 1;
    return j;
  }
};

Jet2 operator+(const Jet2& a, const Jet2& b);
Jet2 operator-(const Jet2& a, const Jet2& b);
Jet2 operator*(const Jet2& a, const Jet2& b);
Jet2 operator/(const Jet2& a, const Jet2& b);
Jet2 operator-(const Jet2& a);
/// Applies a scalar function with known first and second derivatives.
Jet2 chain(const Jet2& a, double f, double df, double d2f);

/// Parsed arithmetic expression in the variables x and y (aliases x1, x2).
///
/// Grammar: numbers, named constants, + - * / ^, unary minus, parentheses and
/// the functions sin cos tan exp log sqrt tanh atan abs pow(a,b) min(a,b) max(a,b).
/// `pi` is always defined; further constants can be supplied at parse time.
class Expression {
 public:
  Expression() = default;
  explicit Expression(const std::string& text, const std::map<std::string, double>& constants = {});

  double operator()(const Vec2& p) const;
  Jet2 jet(const Vec2& p) const;
  const std::string& text() const { return text_; }

  struct Node;

 private:
  std::string text_;
  std::shared_ptr<const Node> root_;
};

}  // namespace stabocp
