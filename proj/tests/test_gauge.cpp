#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lyapcert/gauge.hpp"

using namespace lyapcert;

namespace {

std::vector<GaugeFunction> registry() {
  return {
      GaugeFunction::linear(3.0),
      GaugeFunction::linear(0.5),
      GaugeFunction::power(1.0, 2.0),
      GaugeFunction::power(2.0, 0.5),
      GaugeFunction::pwl({{0, 0}, {1, 2}, {2, 5}}),
      GaugeFunction::sum({{1.0, GaugeFunction::linear(1.0)}, {2.0, GaugeFunction::power(1.0, 3.0)}}),
      GaugeFunction::compose(GaugeFunction::power(1.0, 2.0), GaugeFunction::linear(0.5)),
      GaugeFunction::scale(4.0, GaugeFunction::power(1.0, 1.5)),
      GaugeFunction::max(GaugeFunction::linear(1.0), GaugeFunction::power(1.0, 2.0)),
      GaugeFunction::inverse_of(GaugeFunction::power(1.0, 1.5)),
      GaugeFunction::custom({[](double s) { return s + std::atan(s); }, GaugeClass::KInf, "s+atan"}),
  };
}

// random admissible sequence V_{i+1} in [0, V_i - q(V_i)], biased toward the upper end
std::vector<double> admissible_sequence(std::mt19937_64& rng, const GaugeFunction& q, std::size_t len) {
  std::vector<double> v(len);
  v[0] = std::exp(uniform(rng, std::log(1e-6), std::log(1e4)));
  for (std::size_t i = 1; i < len; ++i) {
    const double top = std::max(0.0, v[i - 1] - q(v[i - 1]));
    const double u = uniform01(rng);
    v[i] = top * (u < 0.7 ? 1.0 : u);
  }
  return v;
}

std::size_t count_violations(const GaugeFunction& q, std::size_t sequences, std::uint64_t seed) {
  const KLBound sigma = kl_from_contraction(q);
  std::mt19937_64 rng(seed);
  std::size_t bad = 0;
  for (std::size_t k = 0; k < sequences; ++k) {
    const std::size_t len = 1 + static_cast<std::size_t>(uniform01(rng) * 100.0);
    const auto v = admissible_sequence(rng, q, len);
    const auto bound = sigma.orbit(v[0], len);
    for (std::size_t i = 0; i < len; ++i) bad += v[i] > bound[i] ? 1 : 0;
  }
  return bad;
}

}  // namespace

TEST(Gauge, EvaluateExamples) {
  EXPECT_DOUBLE_EQ(GaugeFunction::linear(3.0)(2.0), 6.0);
  EXPECT_DOUBLE_EQ(GaugeFunction::linear(0.5)(0.0), 0.0);
  EXPECT_DOUBLE_EQ(GaugeFunction::linear(2.0)(1.5), 3.0);
  EXPECT_THROW((void)GaugeFunction::linear(1.0)(-1.0), DomainError);
}

TEST(Gauge, InvertExamples) {
  EXPECT_DOUBLE_EQ(GaugeFunction::linear(3.0).invert(6.0), 2.0);
  EXPECT_DOUBLE_EQ(GaugeFunction::power(1.0, 2.0).invert(0.0), 0.0);
  EXPECT_NEAR(GaugeFunction::pwl({{0, 0}, {1, 2}, {2, 5}}).invert(3.5), 1.5, 1e-15);
  const auto bounded = GaugeFunction::custom({[](double s) { return s / (1.0 + s); }, GaugeClass::K, "s/(1+s)",
                                              {}, {}, 1.0});
  EXPECT_THROW((void)bounded.invert(2.0), RangeError);
  EXPECT_NEAR(bounded.invert(0.5), 1.0, 1e-10);
}

TEST(Gauge, IterateExamples) {
  const auto half = GaugeFunction::linear(0.5);
  EXPECT_DOUBLE_EQ(half.iterate(8.0, 3), 1.0);
  EXPECT_DOUBLE_EQ(GaugeFunction::power(2.0, 2.0).iterate(5.0, 0), 5.0);
  const auto frac = GaugeFunction::custom({[](double s) { return s / (1.0 + s); }, GaugeClass::K, "s/(1+s)"});
  EXPECT_NEAR(frac.iterate(1.0, 2), 1.0 / 3.0, 1e-15);
}

TEST(Gauge, RegistryClassInvariants) {
  std::mt19937_64 rng(11);
  for (const auto& g : registry()) {
    SCOPED_TRACE(g.describe());
    EXPECT_NO_THROW(validate(g));
    EXPECT_EQ(g(0.0), 0.0);
    for (int k = 0; k < 1000; ++k) {
      const double a = std::exp(uniform(rng, -10.0, 10.0));
      const double b = a * (1.0 + uniform(rng, 1e-6, 1.0));
      EXPECT_LT(g(a), g(b));
    }
    if (g.tag() == GaugeClass::KInf) {
      EXPECT_GT(g(1e12), 1e6);
    }
  }
}

TEST(Gauge, InvertEvaluateRoundTrip) {
  std::mt19937_64 rng(12);
  for (const auto& g : registry()) {
    SCOPED_TRACE(g.describe());
    for (int k = 0; k < 1000; ++k) {
      const double s = std::exp(uniform(rng, -8.0, 6.0));
      const double back = g.invert(g(s));
      EXPECT_NEAR(back, s, 1e-9 * s);
      const double y = g(s);
      EXPECT_LE(std::abs(g(back) - y), 1e-10 * std::max(1.0, y));
    }
  }
}

TEST(Gauge, DerivativeMatchesFiniteDifferences) {
  for (const auto& g : registry()) {
    for (double s : {0.3, 1.7, 2.5, 7.0}) {
      const double h = 1e-5 * s;
      const double fd = (g(s + h) - g(s - h)) / (2 * h);
      EXPECT_NEAR(g.derivative(s), fd, 1e-6 * std::max(1.0, std::abs(fd))) << g.describe() << " at " << s;
    }
  }
}

TEST(Gauge, PwlRejectsBadTables) {
  EXPECT_THROW((void)GaugeFunction::pwl({{0, 0}}), DomainError);
  EXPECT_THROW((void)GaugeFunction::pwl({{0, 0}, {1, 2}, {1, 3}}), DomainError);
  EXPECT_THROW((void)GaugeFunction::pwl({{0, 0}, {1, 2}, {2, 1}}), DomainError);
}

TEST(Gauge, ValidateCatchesWrongTag) {
  const auto flat = GaugeFunction::custom({[](double s) { return std::min(s, 1.0); }, GaugeClass::KInf, "sat"});
  EXPECT_THROW(validate(flat), ConstructionError);
}

TEST(SmoothScalarMap, ZeroAtZeroAndDerivative) {
  const SmoothScalarMap mu([](double s) { return std::sin(s); }, nullptr, "sin");
  for (double s : {0.1, 1.0, 3.0}) EXPECT_NEAR(mu.derivative(s), std::cos(s), 1e-6 * std::max(1.0, std::cos(s)));
  EXPECT_THROW(SmoothScalarMap([](double s) { return s + 1.0; }, nullptr, "bad"), ConstructionError);
  EXPECT_TRUE(SmoothScalarMap::zero().identically_zero());
}

TEST(KLBound, HalfContractionExample) {
  const auto sigma = kl_from_contraction(GaugeFunction::linear(0.5));
  EXPECT_LE(sigma(8.0, 3.0), 2.0 + 1e-9);
  EXPECT_GE(sigma(8.0, 3.0), 2.0 - 1e-9);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(sigma(0.0, i), 0.0);
}

TEST(KLBound, ShapeInvariants) {
  const auto q = GaugeFunction::custom({[](double s) { return s * s / (1.0 + s); }, GaugeClass::KInf, "s2/(1+s)"});
  const auto sigma = kl_from_contraction(q);
  const auto levels = log_grid(1e-4, 1e4, 60);
  for (int i = 0; i < 60; i += 7) {
    for (std::size_t k = 1; k < levels.size(); ++k) EXPECT_LE(sigma(levels[k - 1], i), sigma(levels[k], i));
  }
  for (double s : levels) {
    const auto orbit = sigma.orbit(s, 400);
    for (std::size_t i = 1; i < orbit.size(); ++i) EXPECT_LE(orbit[i], orbit[i - 1]);
    EXPECT_LT(orbit.back(), 0.05 * s + 1e-2);
  }
}

TEST(KLBound, MajorizesRandomSequencesHalf) {
  EXPECT_EQ(count_violations(GaugeFunction::linear(0.5), 20000, 1), 0u);
}

TEST(KLBound, MajorizesRandomSequencesRational) {
  const auto q = GaugeFunction::custom({[](double s) { return s * s / (1.0 + s); }, GaugeClass::KInf, "s2/(1+s)"});
  EXPECT_EQ(count_violations(q, 20000, 2), 0u);
}

TEST(KLBound, MajorizesRandomSequencesSaturated) {
  const auto q = GaugeFunction::custom({[](double s) { return std::min(s, 1.0) / 4.0; }, GaugeClass::K, "min(s,1)/4",
                                        {}, {}, 0.25});
  EXPECT_EQ(count_violations(q, 20000, 3), 0u);
}

TEST(KLBound, RejectsOversizedQ) {
  EXPECT_THROW((void)kl_from_contraction(GaugeFunction::linear(1.5)), ConstructionError);
}

TEST(KLBound, NonMonotoneQUsesSampledEnvelope) {
  const auto q = GaugeFunction::custom({[](double s) { return s / (1.0 + s * s); }, GaugeClass::PositiveDefinite,
                                        "s/(1+s^2)", {}, {}, 0.5});
  EXPECT_EQ(count_violations(q, 3000, 4), 0u);
}

TEST(KinfEnvelope, Examples) {
  const auto sq = kinf_envelope([](double s) { return s * s; }, "s^2");
  EXPECT_NEAR(sq(1.0), 10.0 / 3.0, 1e-12);
  const auto zero = kinf_envelope([](double) { return 0.0; }, "0");
  EXPECT_NEAR(zero(2.7), 2.7, 1e-15);
  const auto id = kinf_envelope([](double s) { return s; }, "s");
  EXPECT_NEAR(id(2.0), 5.0, 1e-12);
  EXPECT_GE(id(2.0), 2.0);
}

TEST(KinfEnvelope, MajorizesStepInput) {
  auto step = [](double s) { return std::floor(4.0 * s) / 4.0 + 0.1 * s; };
  const auto a = kinf_envelope(step, "step");
  double prev = 0.0;
  for (double s : log_grid(1e-3, 1e3, 500)) {
    EXPECT_GE(a(s), step(s));
    EXPECT_GT(a(s), prev);
    prev = a(s);
  }
}

TEST(KinfEnvelope, RejectsNonMonotone) {
  EXPECT_THROW((void)kinf_envelope([](double s) { return std::sin(s) + s * 0.1; }, "wavy"), DomainError);
}
