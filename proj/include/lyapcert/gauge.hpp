#pragma once

// Comparison functions on [0, +inf): positive definite, class K, class K-infinity,
// plus KL bounds built from a contraction gauge.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lyapcert/errors.hpp"
#include "lyapcert/numeric.hpp"

namespace lyapcert {

/// Class membership declared for a gauge. Nonnegative covers the continuous
/// nonnegative maps used as chain bounds (b_i), which need not vanish at 0.
enum class GaugeClass { Nonnegative, PositiveDefinite, K, KInf };

[[nodiscard]] inline const char* to_string(GaugeClass c) {
  switch (c) {
    case GaugeClass::Nonnegative: return "nonnegative";
    case GaugeClass::PositiveDefinite: return "positive-definite";
    case GaugeClass::K: return "K";
    case GaugeClass::KInf: return "Kinf";
  }
  return "?";
}

[[nodiscard]] inline bool is_increasing_class(GaugeClass c) {
  return c == GaugeClass::K || c == GaugeClass::KInf;
}

using ScalarFn = std::function<double(double)>;

class GaugeFunction {
 public:
  GaugeFunction() : GaugeFunction(linear(1.0)) {}

  /// s -> c*s
  [[nodiscard]] static GaugeFunction linear(double c) {
    if (!(c > 0.0) || !std::isfinite(c)) throw DomainError("linear gauge needs a positive coefficient");
    auto n = std::make_shared<Node>();
    n->f = [c](double s) { return c * s; };
    n->inv = [c](double y) { return y / c; };
    n->df = [c](double) { return c; };
    n->tag = GaugeClass::KInf;
    n->lin = c;
    n->label = "linear(" + format_double(c) + ")";
    return GaugeFunction(std::move(n));
  }

  /// s -> c*s^e
  [[nodiscard]] static GaugeFunction power(double c, double e) {
    if (!(c > 0.0) || !(e > 0.0)) throw DomainError("power gauge needs positive coefficient and exponent");
    if (e == 1.0) return linear(c);
    auto n = std::make_shared<Node>();
    n->f = [c, e](double s) { return c * std::pow(s, e); };
    n->inv = [c, e](double y) { return std::pow(y / c, 1.0 / e); };
    n->df = [c, e](double s) { return c * e * std::pow(s, e - 1.0); };
    n->tag = GaugeClass::KInf;
    n->label = "power(" + format_double(c) + "," + format_double(e) + ")";
    return GaugeFunction(std::move(n));
  }

  /// The constant map s -> c (c >= 0); used for chain bounds b_i.
  [[nodiscard]] static GaugeFunction constant(double c) {
    if (!(c >= 0.0)) throw DomainError("constant gauge must be nonnegative");
    auto n = std::make_shared<Node>();
    n->f = [c](double) { return c; };
    n->df = [](double) { return 0.0; };
    n->tag = GaugeClass::Nonnegative;
    n->sup = c;
    n->label = "const(" + format_double(c) + ")";
    return GaugeFunction(std::move(n));
  }

  /// offset + sum_j w_j * g_j(s); weights must be nonnegative.
  [[nodiscard]] static GaugeFunction sum(const std::vector<std::pair<double, GaugeFunction>>& terms,
                                         double offset = 0.0) {
    if (terms.empty()) return constant(offset);
    bool all_linear = offset == 0.0;
    double lin_total = 0.0;
    GaugeClass tag = GaugeClass::Nonnegative;
    bool any_increasing = false, all_increasing = true, any_kinf = false;
    std::string label = "sum(";
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const auto& [w, g] = terms[i];
      if (!(w >= 0.0)) throw DomainError("sum gauge weights must be nonnegative");
      if (w == 0.0) continue;
      if (g.node_->lin) lin_total += w * *g.node_->lin; else all_linear = false;
      const bool inc = is_increasing_class(g.tag());
      any_increasing = any_increasing || inc;
      all_increasing = all_increasing && (inc || g.tag() == GaugeClass::Nonnegative);
      any_kinf = any_kinf || g.tag() == GaugeClass::KInf;
      if (i > 0) label += ",";
      label += format_double(w) + "*" + g.describe();
    }
    label += offset != 0.0 ? ";" + format_double(offset) + ")" : ")";
    if (all_linear && lin_total > 0.0) return linear(lin_total);
    if (offset == 0.0 && any_increasing && all_increasing) {
      // constants with zero offset still vanish at 0 only if every nonincreasing term does
      bool zero_at_zero = true;
      for (const auto& [w, g] : terms) zero_at_zero = zero_at_zero && (w == 0.0 || g(0.0) == 0.0);
      if (zero_at_zero) tag = any_kinf ? GaugeClass::KInf : GaugeClass::K;
    }
    auto n = std::make_shared<Node>();
    n->f = [terms, offset](double s) {
      double v = offset;
      for (const auto& [w, g] : terms) v += w * g(s);
      return v;
    };
    n->df = [terms](double s) {
      double v = 0.0;
      for (const auto& [w, g] : terms) v += w * g.derivative(s);
      return v;
    };
    n->tag = tag;
    if (tag != GaugeClass::KInf) {
      double sup = offset;
      for (const auto& [w, g] : terms) sup += w * g.supremum();
      n->sup = sup;
    }
    n->label = label;
    return GaugeFunction(std::move(n));
  }

  /// Piecewise-linear table through (x_j, y_j), x_0 = 0, x strictly increasing,
  /// y nondecreasing; extrapolates with the last slope.
  [[nodiscard]] static GaugeFunction pwl(std::vector<std::pair<double, double>> pts) {
    if (pts.size() < 2) throw DomainError("piecewise-linear gauge needs at least two points");
    if (pts.front().first != 0.0) throw DomainError("piecewise-linear gauge must start at s = 0");
    bool strict = true;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if (!(pts[i].first > pts[i - 1].first)) throw DomainError("piecewise-linear abscissae must increase");
      if (pts[i].second < pts[i - 1].second) throw DomainError("piecewise-linear values must not decrease");
      if (pts[i].second == pts[i - 1].second) strict = false;
    }
    if (pts.front().second < 0.0) throw DomainError("piecewise-linear values must be nonnegative");
    auto n = std::make_shared<Node>();
    const auto table = std::make_shared<const std::vector<std::pair<double, double>>>(std::move(pts));
    const std::size_t m = table->size();
    const double last_slope = ((*table)[m - 1].second - (*table)[m - 2].second) /
                              ((*table)[m - 1].first - (*table)[m - 2].first);
    n->f = [table, last_slope](double s) {
      const auto& t = *table;
      if (s >= t.back().first) return t.back().second + last_slope * (s - t.back().first);
      const auto it = std::upper_bound(t.begin(), t.end(), s,
                                       [](double v, const auto& p) { return v < p.first; });
      const auto& b = *it;
      const auto& a = *(it - 1);
      return a.second + (b.second - a.second) * (s - a.first) / (b.first - a.first);
    };
    n->df = [table, last_slope](double s) {
      const auto& t = *table;
      if (s >= t.back().first) return last_slope;
      const auto it = std::upper_bound(t.begin(), t.end(), s,
                                       [](double v, const auto& p) { return v < p.first; });
      const auto& b = *it;
      const auto& a = *(it - 1);
      return (b.second - a.second) / (b.first - a.first);
    };
    const bool zero = table->front().second == 0.0;
    if (strict && zero) {
      n->tag = last_slope > 0.0 ? GaugeClass::KInf : GaugeClass::K;
      n->inv = [table, last_slope](double y) {
        const auto& t = *table;
        if (y >= t.back().second) return t.back().first + (y - t.back().second) / last_slope;
        const auto it = std::upper_bound(t.begin(), t.end(), y,
                                         [](double v, const auto& p) { return v < p.second; });
        const auto& b = *it;
        const auto& a = *(it - 1);
        return a.first + (b.first - a.first) * (y - a.second) / (b.second - a.second);
      };
    } else {
      n->tag = zero ? GaugeClass::Nonnegative : GaugeClass::Nonnegative;
    }
    if (!(last_slope > 0.0)) n->sup = table->back().second;
    std::string label = "pwl(";
    for (std::size_t i = 0; i < m; ++i) {
      if (i) label += ";";
      label += format_double((*table)[i].first) + ":" + format_double((*table)[i].second);
    }
    n->label = label + ")";
    return GaugeFunction(std::move(n));
  }

  struct CustomSpec {
    ScalarFn value;
    GaugeClass tag = GaugeClass::KInf;
    std::string label = "custom";
    ScalarFn derivative{};
    ScalarFn inverse{};
    double supremum = std::numeric_limits<double>::infinity();
  };

  /// Arbitrary callable with a declared class; class membership is checked by sampling in validate().
  [[nodiscard]] static GaugeFunction custom(CustomSpec spec) {
    if (!spec.value) throw DomainError("custom gauge needs a value map");
    auto n = std::make_shared<Node>();
    n->f = std::move(spec.value);
    n->df = std::move(spec.derivative);
    n->inv = std::move(spec.inverse);
    n->tag = spec.tag;
    n->label = std::move(spec.label);
    n->sup = spec.tag == GaugeClass::KInf ? std::numeric_limits<double>::infinity() : spec.supremum;
    return GaugeFunction(std::move(n));
  }

  /// (outer o inner)(s) = outer(inner(s))
  [[nodiscard]] static GaugeFunction compose(const GaugeFunction& outer, const GaugeFunction& inner) {
    if (outer.node_->lin && inner.node_->lin) return linear(*outer.node_->lin * *inner.node_->lin);
    auto n = std::make_shared<Node>();
    n->f = [outer, inner](double s) { return outer(inner(s)); };
    n->df = [outer, inner](double s) { return outer.derivative(inner(s)) * inner.derivative(s); };
    const bool inc = is_increasing_class(outer.tag()) && is_increasing_class(inner.tag());
    if (inc) {
      n->tag = (outer.tag() == GaugeClass::KInf && inner.tag() == GaugeClass::KInf) ? GaugeClass::KInf
                                                                                   : GaugeClass::K;
      n->inv = [outer, inner](double y) { return inner.invert(outer.invert(y)); };
    } else {
      n->tag = GaugeClass::Nonnegative;
    }
    if (n->tag != GaugeClass::KInf) n->sup = outer.supremum();
    n->label = outer.describe() + "o" + inner.describe();
    return GaugeFunction(std::move(n));
  }

  /// k * g
  [[nodiscard]] static GaugeFunction scale(double k, const GaugeFunction& g) {
    if (!(k > 0.0)) throw DomainError("scale factor must be positive");
    if (g.node_->lin) return linear(k * *g.node_->lin);
    auto n = std::make_shared<Node>();
    n->f = [k, g](double s) { return k * g(s); };
    n->df = [k, g](double s) { return k * g.derivative(s); };
    if (g.node_->inv || is_increasing_class(g.tag())) n->inv = [k, g](double y) { return g.invert(y / k); };
    if (!is_increasing_class(g.tag())) n->inv = nullptr;
    n->tag = g.tag();
    n->sup = k * g.supremum();
    n->label = format_double(k) + "*" + g.describe();
    return GaugeFunction(std::move(n));
  }

  /// s -> g(k*s)
  [[nodiscard]] static GaugeFunction dilate(const GaugeFunction& g, double k) {
    return compose(g, linear(k));
  }

  /// pointwise max of two gauges
  [[nodiscard]] static GaugeFunction max(const GaugeFunction& a, const GaugeFunction& b) {
    auto n = std::make_shared<Node>();
    n->f = [a, b](double s) { return std::max(a(s), b(s)); };
    n->df = [a, b](double s) { return a(s) >= b(s) ? a.derivative(s) : b.derivative(s); };
    if (is_increasing_class(a.tag()) && is_increasing_class(b.tag())) {
      n->tag = (a.tag() == GaugeClass::KInf || b.tag() == GaugeClass::KInf) ? GaugeClass::KInf
                                                                           : GaugeClass::K;
    } else {
      n->tag = GaugeClass::Nonnegative;
    }
    n->sup = std::max(a.supremum(), b.supremum());
    n->label = "max(" + a.describe() + "," + b.describe() + ")";
    return GaugeFunction(std::move(n));
  }

  /// g^{-1} as a gauge; g must be of class K-infinity.
  [[nodiscard]] static GaugeFunction inverse_of(const GaugeFunction& g) {
    if (g.tag() != GaugeClass::KInf) throw DomainError("only class Kinf gauges have a Kinf inverse");
    if (g.node_->lin) return linear(1.0 / *g.node_->lin);
    auto n = std::make_shared<Node>();
    n->f = [g](double y) { return g.invert(y); };
    n->inv = [g](double s) { return g(s); };
    n->df = [g](double y) {
      const double d = g.derivative(g.invert(y));
      return d > 0.0 ? 1.0 / d : std::numeric_limits<double>::infinity();
    };
    n->tag = GaugeClass::KInf;
    n->label = "inv(" + g.describe() + ")";
    return GaugeFunction(std::move(n));
  }

  /// g(s); throws DomainError for negative or non-finite s.
  [[nodiscard]] double operator()(double s) const {
    if (!(s >= 0.0)) throw DomainError("gauge evaluated at negative or NaN argument");
    return node_->f(s);
  }
  [[nodiscard]] double evaluate(double s) const { return (*this)(s); }

  /// Derivative, analytic when available, else central difference.
  [[nodiscard]] double derivative(double s) const {
    if (!(s >= 0.0)) throw DomainError("gauge derivative at negative argument");
    if (node_->df) return node_->df(s);
    const double h = 1e-6 * std::max(1.0, s);
    if (s < h) return (node_->f(s + h) - node_->f(s)) / h;
    return (node_->f(s + h) - node_->f(s - h)) / (2.0 * h);
  }

  /// s with g(s) = y. Closed form when the representation allows, else bracketing + TOMS 748.
  [[nodiscard]] double invert(double y) const {
    if (!is_increasing_class(tag())) throw DomainError("invert needs a class K or Kinf gauge");
    if (!(y >= 0.0)) throw DomainError("gauge inverse at negative argument");
    if (y >= supremum()) throw RangeError("value " + format_double(y) + " outside the range of " + describe());
    if (node_->inv) return node_->inv(y);
    if (y == 0.0) return 0.0;
    const auto& f = node_->f;
    double lo = 0.0, hi = 1.0;
    while (f(hi) < y) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e300) throw RangeError("value " + format_double(y) + " outside the range of " + describe());
    }
    while (lo == 0.0 && f(hi * 0.5) >= y && hi > 1e-300) hi *= 0.5;
    if (lo == 0.0) lo = hi * 0.5;
    if (f(lo) >= y) lo = 0.0;
    auto h = [&](double s) { return f(s) - y; };
    return bracket_root(h, lo, hi, h(lo), h(hi));
  }

  /// g applied i times.
  [[nodiscard]] double iterate(double s, int i) const {
    if (i < 0) throw DomainError("negative iteration count");
    double v = s;
    for (int k = 0; k < i; ++k) v = (*this)(v);
    return v;
  }

  [[nodiscard]] GaugeClass tag() const noexcept { return node_->tag; }
  [[nodiscard]] const std::string& describe() const noexcept { return node_->label; }
  [[nodiscard]] double supremum() const noexcept { return node_->sup; }
  /// Coefficient when the gauge is exactly s -> c*s.
  [[nodiscard]] std::optional<double> linear_coefficient() const noexcept { return node_->lin; }

 private:
  struct Node {
    ScalarFn f, inv, df;
    GaugeClass tag = GaugeClass::KInf;
    double sup = std::numeric_limits<double>::infinity();
    std::optional<double> lin;
    std::string label;
  };
  explicit GaugeFunction(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
  std::shared_ptr<const Node> node_;
};

/// Sampled check of the declared class. Throws ConstructionError naming the first violation.
inline void validate(const GaugeFunction& g, double lo = 1e-6, double hi = 1e6, std::size_t count = 1000) {
  const auto grid = log_grid(lo, hi, count);
  if (g.tag() != GaugeClass::Nonnegative) {
    if (std::abs(g(0.0)) > 1e-12) throw ConstructionError(g.describe() + ": value at 0 is not 0");
  }
  double prev = g(0.0);
  for (double s : grid) {
    const double v = g(s);
    if (!std::isfinite(v) || v < 0.0) throw ConstructionError(g.describe() + ": invalid value at s=" + format_double(s));
    if (g.tag() == GaugeClass::PositiveDefinite && !(v > 0.0))
      throw ConstructionError(g.describe() + ": not positive at s=" + format_double(s));
    if (is_increasing_class(g.tag()) && !(v > prev))
      throw ConstructionError(g.describe() + ": not strictly increasing near s=" + format_double(s));
    prev = v;
  }
  if (g.tag() == GaugeClass::KInf && !(g(1e12) > 1e6))
    throw ConstructionError(g.describe() + ": not unbounded (value at 1e12 below 1e6)");
}

// ---------------------------------------------------------------------------

/// C^1 scalar map on [0, inf) with mu(0) = 0.
class SmoothScalarMap {
 public:
  SmoothScalarMap() : SmoothScalarMap(zero()) {}
  SmoothScalarMap(ScalarFn value, ScalarFn derivative, std::string label, bool identically_zero = false)
      : value_(std::move(value)), derivative_(std::move(derivative)), label_(std::move(label)),
        zero_(identically_zero) {
    if (std::abs(value_(0.0)) > 1e-12) throw ConstructionError(label_ + ": mu(0) must be 0");
  }

  [[nodiscard]] static SmoothScalarMap zero() {
    return SmoothScalarMap([](double) { return 0.0; }, [](double) { return 0.0; }, "0", true);
  }
  [[nodiscard]] static SmoothScalarMap linear(double c) {
    if (c == 0.0) return zero();
    return SmoothScalarMap([c](double s) { return c * s; }, [c](double) { return c; },
                           "linear(" + format_double(c) + ")");
  }

  [[nodiscard]] double operator()(double s) const { return value_(s); }
  [[nodiscard]] double derivative(double s) const {
    if (derivative_) return derivative_(s);
    const double h = 1e-6 * std::max(1.0, std::abs(s));
    if (s < h) return (value_(s + h) - value_(s)) / h;
    return (value_(s + h) - value_(s - h)) / (2.0 * h);
  }
  [[nodiscard]] const std::string& describe() const noexcept { return label_; }
  [[nodiscard]] bool identically_zero() const noexcept { return zero_; }

 private:
  ScalarFn value_, derivative_;
  std::string label_;
  bool zero_ = false;
};

// ---------------------------------------------------------------------------

enum class KLProvenance { ConstructedFromQ, UserSupplied };

/// sigma(s, t): nondecreasing in s, nonincreasing in t, tends to 0 as t grows.
/// Bounds built from q are discrete (t is an iteration count; fractional t is floored).
class KLBound {
 public:
  using Rule = std::function<double(double, double)>;

  KLBound(Rule rule, KLProvenance provenance, bool discrete, std::string label)
      : rule_(std::move(rule)), provenance_(provenance), discrete_(discrete), label_(std::move(label)) {}

  [[nodiscard]] static KLBound user(Rule rule, std::string label = "user") {
    return KLBound(std::move(rule), KLProvenance::UserSupplied, false, std::move(label));
  }

  [[nodiscard]] double operator()(double s, double t) const {
    if (!(s >= 0.0) || !(t >= 0.0)) throw DomainError("KL bound needs nonnegative arguments");
    return rule_(s, discrete_ ? std::floor(t) : t);
  }

  /// sigma(s, 0..count-1), computed in one pass when the bound is an iterated envelope.
  [[nodiscard]] std::vector<double> orbit(double s, std::size_t count) const {
    std::vector<double> out(count);
    if (step_) {
      double v = s, guard = s;
      for (std::size_t i = 0; i < count; ++i) {
        out[i] = v + guard;
        v = step_(v);
        guard *= 0.5;
      }
      return out;
    }
    for (std::size_t i = 0; i < count; ++i) out[i] = (*this)(s, static_cast<double>(i));
    return out;
  }

  [[nodiscard]] KLProvenance provenance() const noexcept { return provenance_; }
  [[nodiscard]] bool discrete() const noexcept { return discrete_; }
  [[nodiscard]] const std::string& describe() const noexcept { return label_; }

  /// Monotone envelope step s -> G^(s) when constructed from q.
  [[nodiscard]] const ScalarFn& envelope() const noexcept { return step_; }

 private:
  friend KLBound kl_from_contraction(const GaugeFunction& q);
  Rule rule_;
  KLProvenance provenance_;
  bool discrete_;
  std::string label_;
  ScalarFn step_;
};

namespace detail {

/// Upper bound of sup_{[a,b]} (u - q(u)) for nondecreasing q, tight to `tol`,
/// by branch and bound with the cell bound b - q(a).
inline double envelope_cell_sup(const GaugeFunction& q, double a, double b, double floor_value, double tol) {
  auto G = [&](double u) { return u - q(u); };
  double best = std::max(floor_value, std::max(G(a), G(b)));
  struct Cell { double a, b, qa; };
  std::vector<Cell> stack{{a, b, q(a)}};
  double bound = best;
  int budget = 4000;
  while (!stack.empty()) {
    const Cell c = stack.back();
    stack.pop_back();
    const double ub = c.b - c.qa;
    if (ub <= best + tol) continue;
    if (--budget <= 0 || c.b - c.a <= 1e-15 * std::max(1.0, c.b)) {
      bound = std::max(bound, ub);
      continue;
    }
    const double m = 0.5 * (c.a + c.b);
    const double qm = q(m);
    best = std::max(best, m - qm);
    stack.push_back({c.a, m, c.qa});
    stack.push_back({m, c.b, qm});
  }
  return std::max(best + tol, bound);
}

/// Heuristic cell sup for q with no monotonicity: dense samples plus the largest local variation.
inline double envelope_cell_sampled(const GaugeFunction& q, double a, double b, int samples = 64) {
  double prev = a - q(a), best = prev, var = 0.0;
  for (int k = 1; k <= samples; ++k) {
    const double u = a + (b - a) * k / samples;
    const double v = u - q(u);
    best = std::max(best, v);
    var = std::max(var, std::abs(v - prev));
    prev = v;
  }
  return best + var;
}

}  // namespace detail

/// sigma(s, i) = G^^i(s) + s 2^-i, G^ an upper bound of the monotone envelope
/// sup_{u <= s} (u - q(u)). Any sequence with V_{i+1} <= V_i - q(V_i) obeys V_i <= sigma(V_0, i).
inline KLBound kl_from_contraction(const GaugeFunction& q) {
  // levels below kLo are bounded by the identity, above kHi by the last cell bound
  constexpr double kLo = 1e-150, kHi = 1e150;
  constexpr double kCellsPerOctave = 16.0;
  const double log_ratio = std::log(2.0) / kCellsPerOctave;
  const std::size_t cells = static_cast<std::size_t>(std::ceil((std::log(kHi) - std::log(kLo)) / log_ratio));
  const bool monotone = is_increasing_class(q.tag());

  auto node = [=](std::size_t j) { return kLo * std::exp(log_ratio * static_cast<double>(j)); };

  // sanity sweep: q must be positive and must not exceed s (positivity is only probed
  // where q cannot underflow)
  for (std::size_t j = 0; j <= cells; j += 4) {
    const double s = node(j);
    const double v = q(s);
    if (!(v >= 0.0) || (s >= 1e-8 && s <= 1e8 && !(v > 0.0)))
      throw ConstructionError("q is not positive at s=" + format_double(s) + "; q must be positive definite");
    if (v > s * (1.0 + 1e-12))
      throw ConstructionError("q(s) > s at s=" + format_double(s) + "; clip q so the sequence stays nonnegative");
  }

  // H[j] >= sup over [0, node(j)] of G
  auto H = std::make_shared<std::vector<double>>(cells + 1);
  (*H)[0] = node(0);
  for (std::size_t j = 1; j <= cells; ++j) {
    const double a = node(j - 1), b = node(j);
    const double cell = monotone ? detail::envelope_cell_sup(q, a, b, (*H)[j - 1], 1e-13 * b)
                                 : detail::envelope_cell_sampled(q, a, b);
    (*H)[j] = std::min(b, std::max((*H)[j - 1], cell));
  }

  auto step = [q, H, cells, log_ratio, monotone, node](double s) -> double {
    if (s <= 0.0) return 0.0;
    if (s <= kLo) return s;
    const auto& h = *H;
    if (s >= kHi) {
      const double tail = monotone ? s - q(kHi) : s;
      return std::min(s, std::max(h[cells], tail));
    }
    std::size_t j = static_cast<std::size_t>(std::ceil((std::log(s) - std::log(kLo)) / log_ratio));
    j = std::clamp<std::size_t>(j, 1, cells);
    while (j < cells && node(j) < s) ++j;
    while (j > 1 && node(j - 1) >= s) --j;
    if (!monotone) return std::min(s, h[j]);
    const double a = node(j - 1);
    const double within = detail::envelope_cell_sup(q, a, s, h[j - 1], 1e-13 * s);
    return std::min({s, h[j], std::max(h[j - 1], within)});
  };

  KLBound out(
      [step](double s, double t) {
        const auto n = static_cast<long long>(t);
        double v = s;
        for (long long i = 0; i < n && v > 0.0; ++i) v = step(v);
        return v + s * std::ldexp(1.0, -static_cast<int>(std::min<long long>(n, 2000)));
      },
      KLProvenance::ConstructedFromQ, true, "envelope(" + q.describe() + ")");
  out.step_ = step;
  return out;
}

/// a~(s) = s + (1/s) * integral_s^{2s} p; class Kinf and a~ >= p.
/// p must be nondecreasing with p(0+) = 0.
inline GaugeFunction kinf_envelope(const ScalarFn& p, std::string label = "p") {
  // monotonicity probe on a wide grid
  const auto grid = log_grid(1e-8, 1e8, 400);
  double prev = p(grid.front());
  if (!(prev >= 0.0)) throw DomainError(label + " is negative near 0");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double v = p(grid[i]);
    if (v < prev - 1e-12 * std::max(1.0, std::abs(prev)))
      throw DomainError(label + " is not nondecreasing near s=" + format_double(grid[i]));
    prev = v;
  }
  auto value = [p, label](double s) {
    if (s == 0.0) return 0.0;
    // monotonicity on the quadrature interval
    double last = p(s);
    for (int k = 1; k <= 16; ++k) {
      const double u = s * (1.0 + k / 16.0);
      const double v = p(u);
      if (v < last - 1e-12 * std::max(1.0, std::abs(last)))
        throw DomainError(label + " is not nondecreasing near s=" + format_double(u));
      last = v;
    }
    return s + integrate_adaptive(p, s, 2.0 * s, 1e-12) / s;
  };
  return GaugeFunction::custom({value, GaugeClass::KInf, "kinf_envelope(" + label + ")"});
}

}  // namespace lyapcert
