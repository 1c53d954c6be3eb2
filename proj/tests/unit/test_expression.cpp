#include "stabocp/expression.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace stabocp;

TEST(Expression, Arithmetic) {
  const Vec2 p(0.3, -1.5);
  EXPECT_DOUBLE_EQ(Expression("1 + 2*3")(p), 7);
  EXPECT_DOUBLE_EQ(Expression("(1 + 2)*3")(p), 9);
  EXPECT_DOUBLE_EQ(Expression("2^3^2")(p), 512);
  EXPECT_DOUBLE_EQ(Expression("-2^2")(p), -4);
  EXPECT_DOUBLE_EQ(Expression("2^-1")(p), 0.5);
  EXPECT_DOUBLE_EQ(Expression("8/4/2")(p), 1);
  EXPECT_DOUBLE_EQ(Expression("x - y")(p), 1.8);
  EXPECT_DOUBLE_EQ(Expression("x1*x2")(p), 0.3 * -1.5);
  EXPECT_DOUBLE_EQ(Expression("1.5e-3")(p), 1.5e-3);
  EXPECT_DOUBLE_EQ(Expression("pi")(p), std::numbers::pi);
  EXPECT_DOUBLE_EQ(Expression("min(x, y) + max(x, y)")(p), 0.3 - 1.5);
  EXPECT_DOUBLE_EQ(Expression("pow(abs(y), 2)")(p), 2.25);
  EXPECT_DOUBLE_EQ(Expression("a*x + b", {{"a", 2.0}, {"b", 1.0}})(p), 1.6);
  EXPECT_NEAR(Expression("exp(log(2)) + sqrt(16) + tanh(0) + atan(1)*4 + sin(0) + cos(0) + tan(0)")(p),
              2 + 4 + std::numbers::pi + 1, 1e-15);
}

TEST(Expression, ParseErrors) {
  for (const char* bad : {"", "1 +", "(x", "x)", "foo(x)", "z", "2 ** 3", "sin x", "pow(1)", "1 2"})
    EXPECT_THROW(Expression{bad}, InvalidInput) << bad;
}

// Forward second-order derivatives against central differences.
TEST(Expression, JetMatchesFiniteDifferences) {
  const char* cases[] = {"sin(pi*x)*exp(y)", "x^3*y - 2*x*y^2", "sqrt(1 + x*x + y*y)", "atan(x/(1+y*y))",
                         "tanh(3*x - y) / (2 + cos(x*y))", "log(2 + x) * pow(1 + y, 2.5)"};
  const Vec2 p(0.37, 0.61);
  const double step = 1e-4;
  for (const char* text : cases) {
    const Expression e(text);
    const Jet2 j = e.jet(p);
    EXPECT_NEAR(j.v, e(p), 1e-14) << text;
    for (int a = 0; a < 2; ++a) {
      Vec2 d = Vec2::Zero();
      d[a] = step;
      const double fd = (e(p + d) - e(p - d)) / (2 * step);
      EXPECT_NEAR(j.g[a], fd, 1e-7) << text;
      for (int b = 0; b < 2; ++b) {
        Vec2 s = Vec2::Zero();
        s[b] = step;
        const double fd2 = (e(p + d + s) - e(p + d - s) - e(p - d + s) + e(p - d - s)) / (4 * step * step);
        EXPECT_NEAR(j.h(a, b), fd2, 1e-5) << text;
      }
    }
    EXPECT_NEAR(j.h(0, 1), j.h(1, 0), 1e-13) << text;
  }
}

TEST(Expression, JetOfPolynomialIsExact) {
  const Jet2 j = Expression("x^2*y + 3*y").jet(Vec2(2, 5));
  EXPECT_DOUBLE_EQ(j.v, 35);
  EXPECT_DOUBLE_EQ(j.g[0], 20);
  EXPECT_DOUBLE_EQ(j.g[1], 7);
  EXPECT_DOUBLE_EQ(j.h(0, 0), 10);
  EXPECT_DOUBLE_EQ(j.h(0, 1), 4);
  EXPECT_DOUBLE_EQ(j.h(1, 1), 0);
}
