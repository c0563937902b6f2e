#pragma once

// Uncertain systems xdot = f(d, x), d in a box D, and piecewise-constant disturbance signals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "lyapcert/errors.hpp"
#include "lyapcert/expr.hpp"
#include "lyapcert/numeric.hpp"

namespace lyapcert {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  [[nodiscard]] double width() const { return hi - lo; }
};

enum class Hypothesis { H1, H2, H3, H4 };

using VectorField = std::function<State(const Disturbance&, const State&)>;

struct UncertainSystem {
  std::string name;
  std::size_t n = 0;
  VectorField field;
  std::vector<Interval> box;
  bool affine_in_d = false;
  std::set<Hypothesis> declared{Hypothesis::H1, Hypothesis::H2, Hypothesis::H4};

  [[nodiscard]] std::size_t l() const { return box.size(); }
  [[nodiscard]] State operator()(const Disturbance& d, const State& x) const { return field(d, x); }

  /// Vertices of D in lexicographic order (lo before hi); degenerate coordinates contribute one value.
  [[nodiscard]] std::vector<Disturbance> vertices() const {
    std::vector<Disturbance> out{Disturbance{}};
    for (const auto& iv : box) {
      std::vector<Disturbance> next;
      for (const auto& partial : out) {
        auto a = partial;
        a.push_back(iv.lo);
        next.push_back(std::move(a));
        if (iv.hi != iv.lo) {
          auto b = partial;
          b.push_back(iv.hi);
          next.push_back(std::move(b));
        }
      }
      out = std::move(next);
    }
    return out;
  }

  [[nodiscard]] Disturbance center() const {
    Disturbance c;
    for (const auto& iv : box) c.push_back(0.5 * (iv.lo + iv.hi));
    return c;
  }
};

/// Builds a system from expression strings f_i(x, d).
[[nodiscard]] inline UncertainSystem system_from_expressions(const std::vector<std::string>& components,
                                                             std::vector<Interval> box, std::string name = "user") {
  UncertainSystem sys;
  sys.name = std::move(name);
  sys.n = components.size();
  sys.box = std::move(box);
  std::vector<Expr> exprs;
  int d_degree = 0;
  for (const auto& c : components) {
    exprs.push_back(Expr::parse(c, sys.n, sys.box.size()));
    d_degree = std::max(d_degree, exprs.back().degree(Expr::Kind::DistVar));
  }
  sys.affine_in_d = d_degree <= 1;
  sys.field = [exprs](const Disturbance& d, const State& x) {
    State out(exprs.size());
    const double* dp = d.empty() ? nullptr : d.data();
    for (std::size_t i = 0; i < exprs.size(); ++i) out[i] = exprs[i].eval(x.data(), dp);
    return out;
  };
  return sys;
}

/// Checks H1 (box nonempty and bounded), probes H2 (f(d, 0) = 0 on 100 sampled d) and,
/// when declared, H4 (bounded difference quotients on compact probes).
inline void validate(const UncertainSystem& sys, std::uint64_t seed = 7) {
  if (sys.n == 0 || !sys.field) throw ConfigError("system '" + sys.name + "' has no state or no vector field");
  for (const auto& iv : sys.box) {
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || iv.lo > iv.hi)
      throw ConfigError("system '" + sys.name + "': disturbance box must be nonempty and bounded (H1)");
  }
  std::mt19937_64 rng(splitmix64(seed));
  auto draw = [&] {
    Disturbance d;
    for (const auto& iv : sys.box) d.push_back(uniform(rng, iv.lo, iv.hi));
    return d;
  };
  const State zero(sys.n, 0.0);
  const auto corners = sys.vertices();
  for (std::size_t k = 0; k < 100; ++k) {
    const Disturbance d = k < corners.size() ? corners[k] : draw();
    const State f0 = sys(d, zero);
    for (double v : f0) {
      if (!(std::abs(v) <= 1e-12))
        throw ConstructionError("system '" + sys.name + "': f(d, 0) != 0 (H2) at a sampled d");
    }
  }
  if (sys.declared.count(Hypothesis::H4)) {
    for (double radius : {1.0, 10.0}) {
      double worst = 0.0;
      for (int k = 0; k < 200; ++k) {
        State x(sys.n), y(sys.n);
        for (std::size_t i = 0; i < sys.n; ++i) {
          x[i] = uniform(rng, -radius, radius);
          y[i] = x[i] + uniform(rng, -1e-3, 1e-3) * radius;
        }
        const Disturbance d = draw();
        State fx = sys(d, x), fy = sys(d, y);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < sys.n; ++i) {
          num += (fx[i] - fy[i]) * (fx[i] - fy[i]);
          den += (x[i] - y[i]) * (x[i] - y[i]);
        }
        if (den > 0.0) worst = std::max(worst, std::sqrt(num / den));
      }
      if (!std::isfinite(worst) || worst > 1e12)
        throw ConstructionError("system '" + sys.name + "': difference quotients unbounded near radius " +
                                format_double(radius) + " (H4)");
    }
  }
}

struct DirectionalMax {
  double value = 0.0;
  Disturbance d;
  bool exact = true;  // false: lower bound from a search over D
};

/// max over d in D of gradient . f(d, x). Exact by vertex enumeration for fields affine in d.
[[nodiscard]] inline DirectionalMax max_directional(const UncertainSystem& sys, const std::vector<double>& gradient,
                                                    const State& x) {
  DirectionalMax best;
  best.value = -std::numeric_limits<double>::infinity();
  bool zero_grad = std::all_of(gradient.begin(), gradient.end(), [](double g) { return g == 0.0; });
  if (zero_grad) {
    best.value = 0.0;
    best.d = sys.center();
    return best;
  }
  if (sys.affine_in_d || sys.box.empty()) {
    for (const auto& v : sys.vertices()) {
      const double val = dot(gradient, sys(v, x));
      if (val > best.value) {
        best.value = val;
        best.d = v;
      }
    }
    best.exact = true;
    return best;
  }
  // non-affine: grid seeding then coordinate refinement
  const std::size_t l = sys.l();
  const std::size_t per_dim = std::max<std::size_t>(2, static_cast<std::size_t>(std::pow(2000.0, 1.0 / l)));
  std::vector<std::size_t> idx(l, 0);
  auto objective = [&](const Disturbance& d) { return dot(gradient, sys(d, x)); };
  for (;;) {
    Disturbance d(l);
    for (std::size_t j = 0; j < l; ++j) {
      d[j] = sys.box[j].lo + sys.box[j].width() * static_cast<double>(idx[j]) / static_cast<double>(per_dim - 1);
    }
    const double val = objective(d);
    if (val > best.value) {
      best.value = val;
      best.d = d;
    }
    std::size_t j = 0;
    while (j < l && ++idx[j] == per_dim) idx[j++] = 0;
    if (j == l) break;
  }
  for (int sweep = 0; sweep < 3; ++sweep) {
    for (std::size_t j = 0; j < l; ++j) {
      const double h = sys.box[j].width() / static_cast<double>(per_dim - 1);
      const double lo = std::max(sys.box[j].lo, best.d[j] - h), hi = std::min(sys.box[j].hi, best.d[j] + h);
      if (!(hi > lo)) continue;
      Disturbance trial = best.d;
      const auto [t, negv] = minimize_1d(
          [&](double v) {
            trial[j] = v;
            return -objective(trial);
          },
          lo, hi);
      if (-negv > best.value) {
        best.value = -negv;
        best.d[j] = t;
      }
    }
  }
  best.exact = false;
  return best;
}

enum class SignalStrategy { Vertices, Uniform, Mixed };

[[nodiscard]] inline const char* to_string(SignalStrategy s) {
  switch (s) {
    case SignalStrategy::Vertices: return "vertices";
    case SignalStrategy::Uniform: return "uniform";
    case SignalStrategy::Mixed: return "mixed";
  }
  return "?";
}

/// Piecewise-constant d: value[k] on [breakpoints[k], breakpoints[k+1]), the last value up to horizon.
class DisturbanceSignal {
 public:
  DisturbanceSignal() = default;
  DisturbanceSignal(std::vector<double> breakpoints, std::vector<Disturbance> values, double horizon,
                    std::string provenance = "explicit")
      : breakpoints_(std::move(breakpoints)), values_(std::move(values)), horizon_(horizon),
        provenance_(std::move(provenance)) {
    if (breakpoints_.empty() || breakpoints_.size() != values_.size())
      throw ConfigError("signal needs one value per breakpoint");
    if (breakpoints_.front() != 0.0) throw ConfigError("signal breakpoints must start at 0");
    for (std::size_t i = 1; i < breakpoints_.size(); ++i) {
      if (!(breakpoints_[i] > breakpoints_[i - 1])) throw ConfigError("signal breakpoints must increase");
    }
    if (!(horizon_ > breakpoints_.back())) throw ConfigError("signal horizon must exceed the last breakpoint");
  }

  [[nodiscard]] static DisturbanceSignal constant(Disturbance value, double horizon) {
    return DisturbanceSignal({0.0}, {std::move(value)}, horizon, "constant");
  }

  [[nodiscard]] std::size_t segment(double t) const {
    const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), t);
    return it == breakpoints_.begin() ? 0 : static_cast<std::size_t>(it - breakpoints_.begin()) - 1;
  }
  [[nodiscard]] const Disturbance& at(double t) const { return values_[segment(t)]; }
  [[nodiscard]] double segment_end(std::size_t k) const {
    return k + 1 < breakpoints_.size() ? breakpoints_[k + 1] : horizon_;
  }

  /// P_tau d: the signal t -> d(t + tau).
  [[nodiscard]] DisturbanceSignal shifted(double tau) const {
    if (!(tau >= 0.0) || !(tau < horizon_)) throw RangeError("shift outside the signal horizon");
    const std::size_t k0 = segment(tau);
    std::vector<double> bp{0.0};
    std::vector<Disturbance> vals{values_[k0]};
    for (std::size_t k = k0 + 1; k < breakpoints_.size(); ++k) {
      const double b = breakpoints_[k] - tau;
      if (b > bp.back()) {
        bp.push_back(b);
        vals.push_back(values_[k]);
      }
    }
    return DisturbanceSignal(std::move(bp), std::move(vals), horizon_ - tau, provenance_ + "|shift");
  }

  [[nodiscard]] const std::vector<double>& breakpoints() const { return breakpoints_; }
  [[nodiscard]] const std::vector<Disturbance>& values() const { return values_; }
  [[nodiscard]] double horizon() const { return horizon_; }
  [[nodiscard]] const std::string& provenance() const { return provenance_; }

 private:
  std::vector<double> breakpoints_;
  std::vector<Disturbance> values_;
  double horizon_ = 0.0;
  std::string provenance_;
};

/// Piecewise-constant signal with segments of length `dwell`, deterministic per seed.
[[nodiscard]] inline DisturbanceSignal sample_signal(const UncertainSystem& sys, double horizon, double dwell,
                                                     SignalStrategy strategy, std::uint64_t seed) {
  if (!(horizon > 0.0) || !(dwell > 0.0)) throw ConfigError("signal horizon and dwell must be positive");
  for (const auto& iv : sys.box) {
    if (!(iv.lo <= iv.hi)) throw ConfigError("empty disturbance box");
  }
  std::mt19937_64 rng(splitmix64(seed));
  std::vector<double> bp;
  std::vector<Disturbance> vals;
  const auto segments = static_cast<std::size_t>(std::ceil(horizon / dwell));
  for (std::size_t k = 0; k < std::max<std::size_t>(segments, 1); ++k) {
    const double t = static_cast<double>(k) * dwell;
    if (k > 0 && !(t < horizon)) break;
    bp.push_back(t);
    const bool vertex = strategy == SignalStrategy::Vertices ||
                        (strategy == SignalStrategy::Mixed && uniform01(rng) < 0.5);
    Disturbance d;
    for (const auto& iv : sys.box) {
      if (vertex) d.push_back(uniform01(rng) < 0.5 ? iv.lo : iv.hi);
      else d.push_back(uniform(rng, iv.lo, iv.hi));
    }
    vals.push_back(std::move(d));
  }
  return DisturbanceSignal(std::move(bp), std::move(vals), horizon,
                           std::string(to_string(strategy)) + ":seed=" + std::to_string(seed));
}

}  // namespace lyapcert
