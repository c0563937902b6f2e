#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lyapcert/checker.hpp"
#include "lyapcert/examples.hpp"

using namespace lyapcert;

namespace {

const double kDefaultP = std::sqrt(7.0 / 5.0) / 5.0;

Example42Params default_params() {
  Example42Params P;
  P.p = kDefaultP;
  return P;
}

SamplingOptions light() {
  SamplingOptions o;
  o.density = 2500;
  o.scalar_levels = 300;
  o.near_zero_levels = 40;
  return o;
}

}  // namespace

TEST(Example41, LinearBetaConstants) {
  const auto c = build_example41({});
  for (double s : {1e-3, 1.0, 50.0}) {
    EXPECT_NEAR(c.b[0](s), 2.0 * s, 1e-12 * s);
    EXPECT_NEAR(c.c2(s), 0.0625 * s, 1e-12 * s);
    EXPECT_NEAR(c.g(s), 0.125 * s, 1e-12 * s);
    EXPECT_NEAR(c.gamma(s), 2.0 * s, 1e-12 * s);
    EXPECT_NEAR(c.r(s), 32.5, 1e-9);
  }
  const auto l = build_example41_linear(1.0, 1.0, 0.5, 0.5);
  ASSERT_TRUE(l.r.has_value());
  EXPECT_DOUBLE_EQ(*l.r, 32.5);
  EXPECT_DOUBLE_EQ(l.c2, 0.0625);
}

TEST(Example41, SlopeBoundEntersB0) {
  // |beta| <= K |x1| gives b0 = 1 + p^2 K^2
  const auto l = build_example41_linear(0.5, 2.0, 0.5, 0.5);
  EXPECT_DOUBLE_EQ(l.b[0], 2.0);
  Example41Input in;
  in.p = 0.5;
  in.beta = [](double x) { return 2.0 * x; };
  const auto g = build_example41(in);
  EXPECT_NEAR(g.b[0](3.0), 6.0, 1e-12);
}

TEST(Example41, ZeroBoxMakesW0Vanish) {
  Example41Input in;
  in.p = 0.0;
  const auto c = build_example41(in);
  EXPECT_TRUE(c.W[0].identically_zero);
  EXPECT_EQ(c.W[0]({3.0, -1.0}), 0.0);
}

TEST(Example41, CubicBetaCertified) {
  Example41Input in;
  in.beta = [](double x) { return x * x * x; };
  in.beta_tilde_derivative = [](double x) { return 3.0 * x * x; };
  in.label = "x1^3";
  const auto c = build_example41(in);
  EXPECT_NEAR(c.b[0](4.0), 4.0 + 64.0, 1e-9);
  const auto sys = example41_system(1.0, in.beta, in.label);
  const Verdict v = certify(sys, c, light());
  EXPECT_EQ(v.conclusion, Conclusion::URGAS);
  EXPECT_FALSE(v.report.any(Status::Fail));
}

TEST(Example41, InvalidBetaRejected) {
  Example41Input in;
  in.beta = [](double x) { return x + x * x; };
  EXPECT_THROW((void)build_example41(in), ConstructionError);
  in.beta = [](double x) { return std::atan(x); };
  EXPECT_THROW((void)build_example41(in), ConstructionError);
  in.beta = [](double x) { return 2.0 * x; };
  in.beta_tilde = [](double x) { return x; };
  EXPECT_THROW((void)build_example41(in), ConstructionError);
  in = {};
  in.c1 = 1.0;
  EXPECT_THROW((void)build_example41(in), ConstructionError);
}

TEST(Example42, DefaultPointDerivedConstants) {
  const auto d = example42_derived(default_params());
  EXPECT_NEAR(d.b, 3.056, 1e-12);
  EXPECT_NEAR(d.g_tilde, 6.112, 1e-12);
  EXPECT_NEAR(d.gamma, 1.0186667, 1e-7);
  EXPECT_NEAR(d.mu_min, 10.6653, 1e-4);
  EXPECT_NEAR(d.g, 0.00752999, 1e-7);
  EXPECT_NEAR(d.r, 1624.54, 0.01);
  EXPECT_FALSE(d.g_floored);
  const auto c = build_example42(default_params());
  EXPECT_NEAR(contraction_time(c), 1624.67, 0.01);
}

TEST(Example42, GTildeMatchesClosedForm) {
  // independent dense scan of 2(3+p^2) min over [0, Y] of (1 + 2y - y^2)/(1 + y^2)
  for (double p : {0.0, 0.1, kDefaultP}) {
    auto P = default_params();
    P.p = p;
    const auto d = example42_derived(P);
    double m = INFINITY;
    for (double y : linear_grid(0.0, d.sector, 100001)) m = std::min(m, (1.0 + 2.0 * y - y * y) / (1.0 + y * y));
    EXPECT_NEAR(d.g_tilde, 2.0 * (3.0 + p * p) * m, 1e-9);
    EXPECT_NEAR(d.g_tilde, 2.0 * (3.0 + p * p), 1e-12);
  }
}

TEST(Example42, SectorMatchesRegions) {
  const auto c = build_example42(default_params());
  const double Y = example42_derived(default_params()).sector;
  std::mt19937_64 rng(17);
  std::size_t checked = 0;
  for (int i = 0; i < 10000; ++i) {
    const State x{uniform(rng, -2, 2), uniform(rng, -2, 2)};
    const double ratio = std::abs(x[1] / x[0]);
    if (std::abs(ratio - Y) < 1e-9) continue;
    EXPECT_EQ(classify(c, x).region != Region::Good, ratio < Y);
    ++checked;
  }
  EXPECT_GT(checked, 9900u);
}

TEST(Example42, InfeasibleBoxNamed) {
  Example42Params P;
  P.p = 0.75;
  try {
    (void)build_example42(P);
    FAIL();
  } catch (const ConstructionError& e) {
    EXPECT_NE(std::string(e.what()).find("(4.12)"), std::string::npos);
  }
  EXPECT_NO_THROW((void)build_example42_unchecked(P));
}

TEST(Example42, NominalWindowBuildable) {
  Example42Params P;
  const auto c = build_example42(P);
  EXPECT_NEAR(c.b[0], 3.0, 0.0);
  EXPECT_TRUE(feasible_p(0.0, P.c1, P.c2, P.lambda).feasible);
}

TEST(Example42, MuBelowMinimumRejected) {
  auto P = default_params();
  P.mu = 10.0;
  EXPECT_THROW((void)build_example42(P), ConstructionError);
  P.mu = 11.0;
  EXPECT_NO_THROW((void)build_example42(P));
}

TEST(Example42, CapValue) {
  EXPECT_NEAR(example42_cap(), 0.71743894, 1e-8);
  EXPECT_NEAR(example42_c2_floor(0.75), 3.040784, 1e-6);
  EXPECT_GT(example42_c2_floor(0.75), 3.0);
}

TEST(Feasibility, DefaultPoint) {
  const auto f = feasible_p(kDefaultP, 2.8594, 2.6094, 0.9999);
  EXPECT_TRUE(f.feasible);
  EXPECT_TRUE(f.window);
  EXPECT_NEAR(f.margin + kDefaultP * kDefaultP, 0.0561927, 1e-7);
  EXPECT_NEAR(f.margin, 0.0001927, 1e-7);
}

TEST(Feasibility, LimitForm) {
  EXPECT_NEAR(limit_form_lhs(kDefaultP, 2.8594, 2.6094), 0.056498367, 1e-9);
  EXPECT_NEAR(limit_form_lhs(kDefaultP, 2.8594, 2.6094), 0.056497, 2e-6);
  EXPECT_GE(limit_form_lhs(kDefaultP, 2.8594, 2.6094) - kDefaultP * kDefaultP, 4e-4);
  // lambda -> 1 recovers the limit form
  EXPECT_NEAR(feasible_p(kDefaultP, 2.8594, 2.6094, 1.0 - 1e-12).margin + kDefaultP * kDefaultP,
              limit_form_lhs(kDefaultP, 2.8594, 2.6094), 1e-9);
}

TEST(Feasibility, EqualCsInfeasible) {
  EXPECT_FALSE(feasible_p(0.1, 2.7, 2.7, 0.999).feasible);
  EXPECT_LE(feasible_p(0.1, 2.7, 2.7, 0.999).margin, 0.0);
}

TEST(Feasibility, MarginNonincreasingInP) {
  double prev = INFINITY;
  for (double p : linear_grid(0.0, 0.7, 71)) {
    const double m = feasible_p(p, 2.8594, 2.6094, 0.9999).margin;
    EXPECT_LE(m, prev + 1e-15);
    prev = m;
  }
}

TEST(Feasibility, SqrtDomain) {
  EXPECT_THROW((void)feasible_p(0.0, 3.5, 2.6, 0.99), DomainError);
  EXPECT_THROW((void)limit_form_lhs(0.0, 3.5, 2.6), DomainError);
}

TEST(MaximizeP, DefaultSearch) {
  const auto res = maximize_p();
  EXPECT_GE(res.p_best, 0.232);
  EXPECT_LT(res.p_best, example42_cap());
  EXPECT_GT(res.p_best, kDefaultP);
  EXPECT_TRUE(res.best.feasible);
  EXPECT_TRUE(feasible_p(res.p_best, res.best.c1, res.best.c2, res.best.lambda).feasible);
  EXPECT_NEAR(res.best.p, res.p_best, 0.0);
  EXPECT_GE(res.frontier.size(), 2u);
}

TEST(MaximizeP, Reproducible) {
  SearchOptions o;
  o.resolution = 12;
  o.refinements = 1;
  o.p_tol = 1e-5;
  const auto a = maximize_p(o), b = maximize_p(o);
  ASSERT_EQ(a.frontier.size(), b.frontier.size());
  EXPECT_EQ(a.p_best, b.p_best);
  for (std::size_t i = 0; i < a.frontier.size(); ++i) {
    EXPECT_EQ(a.frontier[i].p, b.frontier[i].p);
    EXPECT_EQ(a.frontier[i].margin, b.frontier[i].margin);
  }
}

TEST(MaximizeP, DegenerateRanges) {
  SearchOptions o;
  o.c1 = {2.8, 2.8};
  o.c2 = {2.8, 2.8};
  const auto res = maximize_p(o);
  EXPECT_EQ(res.p_best, 0.0);
  EXPECT_FALSE(res.best.feasible);
  o = {};
  o.c1 = {3.0, 2.5};
  EXPECT_THROW((void)maximize_p(o), ConfigError);
  o = {};
  o.resolution = 1;
  EXPECT_THROW((void)maximize_p(o), ConfigError);
}
