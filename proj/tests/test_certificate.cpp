#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lyapcert/certificate.hpp"
#include "lyapcert/examples.hpp"

using namespace lyapcert;

namespace {

const double kDefaultP = std::sqrt(7.0 / 5.0) / 5.0;

LinearRateCertificate default42() {
  Example42Params P;
  P.p = kDefaultP;
  return build_example42(P);
}

// k = 0 chain with W0 = x1^2 on R^2 and linear gauges.
GeneralCertificate simple_general(double b0, double c2, double lam) {
  GeneralCertificate c;
  c.name = "simple";
  c.V = ScalarField::squared_norm();
  c.W = {ScalarField::from_expression("x1^2", 2)};
  c.rho = GaugeFunction::linear(2.0);
  c.c1 = GaugeFunction::linear(1.0);
  c.c2 = GaugeFunction::linear(c2);
  c.g = GaugeFunction::linear(1.0);
  c.lambda = GaugeFunction::linear(lam);
  c.gamma = GaugeFunction::linear(1.0);
  c.b = {GaugeFunction::linear(b0)};
  return c;
}

}  // namespace

TEST(Classify, Example42Labels) {
  const auto c = default42();
  EXPECT_EQ(classify(c, {0.0, 1.0}).region, Region::Good);
  const auto bad = classify(c, {1.0, 0.0});
  EXPECT_EQ(bad.region, Region::Bad);
  EXPECT_NEAR(bad.w0, 3.056, 1e-12);
  const double y = std::sqrt((3.0 + kDefaultP * kDefaultP - 2.6094) / 2.6094);
  EXPECT_NEAR(y, 0.41370, 1e-5);
  EXPECT_EQ(classify(c, {1.0, y}).region, Region::Transition);
  EXPECT_EQ(classify(c, {1.0, y * 1.001}).region, Region::Good);
}

TEST(Classify, LabelMatchesDefinition) {
  const auto c = default42();
  std::mt19937_64 rng(3);
  for (int i = 0; i < 2000; ++i) {
    const State x{uniform(rng, -3, 3), uniform(rng, -3, 3)};
    const auto l = classify(c, x);
    const double eps = 1e-12 * (1.0 + l.v);
    if (l.region == Region::Good) {
      EXPECT_LT(l.w0, l.c2v);
    }
    if (l.region == Region::Bad) {
      EXPECT_GT(l.w0, l.c1v);
    }
    if (l.region == Region::Transition) {
      EXPECT_GE(l.w0, l.c2v - eps);
      EXPECT_LE(l.w0, l.c1v + eps);
    }
  }
}

TEST(Classify, ScaleInvariantForQuadraticData) {
  const auto c = default42();
  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const State x{uniform(rng, -1, 1), uniform(rng, -1, 1)};
    const double a = std::exp(uniform(rng, -3, 3));
    const auto l1 = classify(c, x);
    const auto l2 = classify(c, scaled(x, a));
    // skip points within rounding of a region boundary
    if (std::abs(l1.w0 - l1.c2v) < 1e-9 * l1.v || std::abs(l1.w0 - l1.c1v) < 1e-9 * l1.v) continue;
    EXPECT_EQ(l1.region, l2.region);
  }
}

TEST(Validate, LinearOrderings) {
  auto c = default42();
  EXPECT_NO_THROW(validate(c, 2));
  auto bad = c;
  bad.c1 = 3.5;
  EXPECT_THROW(validate(bad, 2), ConstructionError);
  bad = c;
  bad.b = {2.0, 2.0};
  EXPECT_THROW(validate(bad, 2), ConstructionError);
  bad = c;
  bad.lambda = 1.0;
  EXPECT_THROW(validate(bad, 2), ConstructionError);
  bad = c;
  bad.envelope = std::make_pair(1.0, 1.0);
  EXPECT_THROW(validate(bad, 2), ConstructionError);
}

TEST(Validate, GeneralInvariants) {
  auto c = simple_general(0.5, 0.5, 0.5);
  EXPECT_NO_THROW(validate(c, 2));
  auto bad = c;
  bad.c1 = GaugeFunction::linear(2.0);
  EXPECT_THROW(validate(bad, 2), ConstructionError);
  bad = c;
  bad.lambda = GaugeFunction::linear(1.0);
  EXPECT_THROW(validate(bad, 2), ConstructionError);
  bad = c;
  bad.W = {ScalarField::from_expression("x1^2 + 1", 2)};
  EXPECT_THROW(validate(bad, 2), ConstructionError);
  bad = c;
  bad.mu = SmoothScalarMap::linear(-2.0);  // kappa = c1 + mu decreasing
  EXPECT_THROW(validate(bad, 2), ConstructionError);
}

TEST(AutoDwell, ZeroBracketGivesOne) {
  // b0 = c2 o lambda, k = 0
  const auto c = simple_general(0.25, 0.5, 0.5);
  const auto r = auto_dwell(c);
  for (double s : {1e-6, 1e-2, 1.0, 1e3}) EXPECT_NEAR(r(s), 1.0, 1e-12);
}

TEST(AutoDwell, SatisfiesDwellInequalityOnGrid) {
  // the Example 4.2 chain (k = 1) as a general certificate without r
  auto g = as_general(default42());
  g.r = nullptr;
  const auto r = auto_dwell(g);
  for (double s : log_grid(1e-6, 1e6, 1000)) {
    const double ls = g.lambda(s), rs = r(s);
    const double lhs = g.c2(ls) + g.g(ls) * rs * rs / 2.0;
    const double rhs = g.b[0](s) + rs * g.b[1](s);
    EXPECT_GT(lhs, rhs) << "s=" << s;
  }
}

TEST(AutoDwell, DivergentRatioRejected) {
  // g(lambda(s)) = s^2 against b0(s) = s: (b0 - c2(lambda))/g blows up at 0
  auto c = simple_general(2.0, 0.5, 0.5);
  c.g = GaugeFunction::power(1.0, 2.0);
  EXPECT_THROW((void)auto_dwell(c), ConstructionError);
}

TEST(Example41, DwellIsConstant) {
  const auto c = build_example41({});
  for (double s : {1e-4, 1.0, 1e4}) EXPECT_NEAR(c.r(s), 32.5, 1e-9);
}

TEST(ContractionTime, LinearClosedForm) {
  auto c = default42();
  c.r = 5.0;
  const double gamma = (3.0 + kDefaultP * kDefaultP) * std::pow(1.9999, 2) / (12.0 * 0.9999);
  const double expected = 5.0 + (std::log(gamma) - std::log(0.9999)) / (3.0 - 2.8594);
  EXPECT_NEAR(contraction_time(c), expected, 1e-12);
  EXPECT_NEAR(contraction_time(c) - 5.0, 0.13228, 1e-4);
  // the general version integrates the same constant gap
  const auto g = as_general(c);
  EXPECT_NEAR(contraction_time(g, {1.0, 0.0}), expected, 1e-9);
}

TEST(ContractionTime, DegenerateAndZero) {
  auto c = simple_general(0.5, 0.5, 0.5);
  c.gamma = GaugeFunction::linear(0.5);  // gamma = lambda
  c.r = [](double s) { return 2.0 + s; };
  EXPECT_NEAR(contraction_time(c, {1.0, 1.0}), 4.0, 1e-12);
  EXPECT_EQ(contraction_time(c, {0.0, 0.0}), 1.0);
}

TEST(ContractionTime, NonincreasingInRho) {
  auto c = simple_general(0.5, 0.5, 0.5);
  c.r = [](double) { return 1.0; };
  double prev = INFINITY;
  for (double rho : {1.1, 1.5, 2.0, 4.0, 10.0}) {
    c.rho = GaugeFunction::linear(rho);
    const double t = contraction_time(c, {2.0, 1.0});
    EXPECT_LE(t, prev);
    prev = t;
  }
}

TEST(ContractionTime, SingularGapRaises) {
  auto c = simple_general(0.5, 0.5, 0.5);
  c.r = [](double) { return 1.0; };
  c.rho = GaugeFunction::linear(1.0);  // rho = c1
  EXPECT_THROW((void)contraction_time(c, {1.0, 0.0}), QuadratureError);
}

TEST(ChainBound, HandValues) {
  EXPECT_DOUBLE_EQ(chain_bound({1.0, 0.0}, 2.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(chain_bound({0.7, 3.0}, 2.0, 0.0), 0.7);
  // k = 1: 1 + 2 - t^2/2! = 1 (1.6667 would need a t^3/3! term)
  EXPECT_NEAR(chain_bound({1.0, 1.0}, 1.0, 2.0), 1.0, 1e-15);
  EXPECT_NEAR(chain_bound({1.0, 1.0, 0.0}, 1.0, 2.0), 1.0 + 2.0 - 8.0 / 6.0, 1e-15);
  EXPECT_THROW((void)chain_bound({1.0}, 1.0, -1.0), DomainError);
}

TEST(ChainBound, DerivativeAtZeroIsW1) {
  const std::vector<double> w{0.3, -1.7, 2.0};
  const double h = 1e-7;
  EXPECT_NEAR((chain_bound(w, 0.5, h) - chain_bound(w, 0.5, 0.0)) / h, -1.7, 1e-6);
}

TEST(DwellExitBound, WithinDwellAndMatchesScan) {
  auto g = as_general(default42());
  for (double s : {0.01, 1.0, 100.0}) {
    const double t = dwell_exit_bound(g, s);
    EXPECT_LE(t, g.r(s));
    // dense scan oracle
    const double ls = g.lambda(s);
    double scan = NAN;
    for (double u : linear_grid(0.0, g.r(s), 200001)) {
      if (chain_bound({g.b[0](s), g.b[1](s)}, g.g(ls), u) < g.c2(ls)) {
        scan = u;
        break;
      }
    }
    EXPECT_NEAR(t, scan, g.r(s) / 100000.0);
  }
}

TEST(DwellExitBound, ZeroChainAndMonotoneInG) {
  auto c = simple_general(0.5, 0.5, 0.5);
  c.b = {GaugeFunction::constant(0.0)};
  c.r = [](double) { return 1.0; };
  EXPECT_EQ(dwell_exit_bound(c, 1.0), 0.0);

  auto g = as_general(default42());
  double prev = INFINITY;
  for (double k : {1.0, 2.0, 4.0, 8.0}) {
    g.g = GaugeFunction::linear(default42().g * k);
    const double t = dwell_exit_bound(g, 1.0);
    EXPECT_LE(t, prev);
    prev = t;
  }
}

TEST(DwellExitBound, ViolationNamed) {
  auto c = simple_general(0.9, 0.1, 0.5);
  c.r = [](double) { return 0.01; };
  try {
    (void)dwell_exit_bound(c, 1.0);
    FAIL();
  } catch (const ConstructionError& e) {
    EXPECT_NE(std::string(e.what()).find("(3.7)"), std::string::npos);
  }
}

TEST(UnitDirections, UnitAndDeterministic) {
  for (std::size_t n : {2u, 3u, 5u}) {
    const auto a = unit_directions(n, 64, 7), b = unit_directions(n, 64, 7);
    ASSERT_EQ(a.size(), 64u);
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_NEAR(norm2(a[i]), 1.0, 1e-12);
      EXPECT_EQ(a[i], b[i]);
    }
  }
}

TEST(ProjectToLevel, HitsLevel) {
  const auto V = ScalarField::from_expression("x1^2 + 3*x2^2 + x1^4", 2);
  for (double s : {1e-6, 0.3, 7.0, 1e4}) {
    const State x = project_to_level(V.value, {0.6, 0.8}, s);
    EXPECT_NEAR(V(x), s, 1e-9 * s);
  }
}
