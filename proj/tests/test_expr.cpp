#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lyapcert/expr.hpp"

using namespace lyapcert;

TEST(Expr, EvaluatesArithmetic) {
  const auto e = Expr::parse("2*x1^2 - 3*x2 + d1*x1/4", 2, 1);
  const std::vector<double> x{1.5, -2.0}, d{0.8};
  EXPECT_DOUBLE_EQ(e.eval(x, d), 2 * 2.25 + 6.0 + 0.8 * 1.5 / 4);
  EXPECT_DOUBLE_EQ(Expr::parse("-x1^2", 1, 0).eval(std::vector<double>{3.0}), -9.0);
  EXPECT_DOUBLE_EQ(Expr::parse("2^-1", 0, 0).eval(std::vector<double>{}), 0.5);
  EXPECT_NEAR(Expr::parse("sin(x1)+exp(0)+sqrt(4)+abs(-2)+tanh(0)+log(1)+cos(0)", 1, 0).eval(std::vector<double>{0.5}),
              std::sin(0.5) + 1 + 2 + 2 + 0 + 0 + 1, 1e-15);
  EXPECT_DOUBLE_EQ(Expr::parse("s*2", 0, 0, true).eval(nullptr, nullptr, 3.0), 6.0);
  EXPECT_DOUBLE_EQ(Expr::parse("1e-3*x1", 1, 0).eval(std::vector<double>{2.0}), 2e-3);
}

TEST(Expr, RejectsMalformed) {
  EXPECT_THROW((void)Expr::parse("x1 +", 1, 0), ConfigError);
  EXPECT_THROW((void)Expr::parse("x3", 2, 0), ConfigError);
  EXPECT_THROW((void)Expr::parse("(x1", 1, 0), ConfigError);
  EXPECT_THROW((void)Expr::parse("foo(x1)", 1, 0), ConfigError);
  EXPECT_THROW((void)Expr::parse("s", 1, 0), ConfigError);
  EXPECT_THROW((void)Expr::parse("x1 x2", 2, 0), ConfigError);
}

TEST(Expr, DegreeDetection) {
  EXPECT_EQ(Expr::parse("d1*x1 - x2", 2, 1).degree(Expr::Kind::DistVar), 1);
  EXPECT_EQ(Expr::parse("d1^2*x1", 1, 1).degree(Expr::Kind::DistVar), 2);
  EXPECT_EQ(Expr::parse("sin(d1)*x1", 1, 1).degree(Expr::Kind::DistVar), Expr::kNotPolynomial);
  EXPECT_EQ(Expr::parse("x1^3*x2", 2, 0).degree(Expr::Kind::StateVar), 4);
  EXPECT_FALSE(Expr::parse("sin(x1)", 1, 0).polynomial_in_state());
  EXPECT_TRUE(Expr::parse("(x1+1)^2/3", 1, 0).polynomial_in_state());
}

TEST(Expr, RoundTripThroughString) {
  std::mt19937_64 rng(5);
  for (const char* src : {"2*x1^2 - 3*x2 + d1*x1/4", "-(x1-x2)^3", "exp(-x1)*x2", "x1/(1+x2^2)"}) {
    const auto e = Expr::parse(src, 2, 1);
    const auto back = Expr::parse(e.to_string(), 2, 1);
    for (int k = 0; k < 50; ++k) {
      const std::vector<double> x{uniform(rng, -2, 2), uniform(rng, -2, 2)}, d{uniform(rng, -1, 1)};
      EXPECT_DOUBLE_EQ(e.eval(x, d), back.eval(x, d)) << src;
    }
  }
}

TEST(ExprGradient, SymbolicMatchesFiniteDifference) {
  std::mt19937_64 rng(6);
  const auto poly = Expr::parse("x1^2 + 3*x1*x2 - x2^3/2 + 7", 2, 0);
  const ExprGradient g(poly, 2);
  EXPECT_TRUE(g.symbolic());
  for (int k = 0; k < 100; ++k) {
    const std::vector<double> x{uniform(rng, -3, 3), uniform(rng, -3, 3)};
    const auto v = g(x);
    EXPECT_NEAR(v[0], 2 * x[0] + 3 * x[1], 1e-12);
    EXPECT_NEAR(v[1], 3 * x[0] - 1.5 * x[1] * x[1], 1e-12);
  }
}

TEST(ExprGradient, FiniteDifferenceForNonPolynomial) {
  const auto e = Expr::parse("sin(x1)*exp(x2)", 2, 0);
  const ExprGradient g(e, 2);
  EXPECT_FALSE(g.symbolic());
  const std::vector<double> x{0.7, -0.3};
  const auto v = g(x);
  EXPECT_NEAR(v[0], std::cos(0.7) * std::exp(-0.3), 1e-7);
  EXPECT_NEAR(v[1], std::sin(0.7) * std::exp(-0.3), 1e-7);
}
