#pragma once

// The two planar examples: x1' = -x1, x2' = d beta(x1) - x2 with d in [-p, p], and
// x1' = x2, x2' = -(1+d) x1 - 2 x2 with d in [0, p]; certificate factories and the
// p-maximization for the second one.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lyapcert/certificate.hpp"
#include "lyapcert/errors.hpp"
#include "lyapcert/gauge.hpp"
#include "lyapcert/numeric.hpp"
#include "lyapcert/system.hpp"

namespace lyapcert {

// ---------------------------------------------------------------------------
// Example 4.1

struct Example41Input {
  ScalarFn beta = [](double x) { return x; };
  ScalarFn beta_tilde{};  // odd, convex Kinf on [0, inf), |beta| <= beta_tilde; defaults to beta
  ScalarFn beta_tilde_derivative{};
  double p = 1.0;
  double c1 = 0.5;
  double lambda = 0.5;
  std::string label = "x1";
};

[[nodiscard]] inline UncertainSystem example41_system(double p, ScalarFn beta, std::string label = "x1") {
  if (!(p >= 0.0)) throw ConfigError("example41: p must be nonnegative");
  UncertainSystem sys;
  sys.name = "example41(beta=" + label + ")";
  sys.n = 2;
  sys.box = {{-p, p}};
  sys.affine_in_d = true;
  sys.field = [beta](const Disturbance& d, const State& x) {
    return State{-x[0], d[0] * beta(x[0]) - x[1]};
  };
  return sys;
}

namespace detail {

inline double central_difference(const ScalarFn& f, double x) {
  const double h = 1e-7 * std::max(1.0, std::abs(x));
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline void check_beta(const Example41Input& in, const ScalarFn& bt) {
  if (std::abs(in.beta(0.0)) > 1e-12) throw ConstructionError("example41: beta(0) != 0");
  const auto grid = log_grid(1e-4, 1e2, 400);
  double prev = 0.0, prev_slope = -INFINITY;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double x = grid[i];
    const double v = bt(x);
    if (std::abs(bt(-x) + v) > 1e-9 * std::max(1.0, std::abs(v)))
      throw ConstructionError("example41: beta_tilde is not odd at x=" + format_double(x));
    if (!(v > prev)) throw ConstructionError("example41: beta_tilde not increasing at x=" + format_double(x));
    if (i > 0) {
      const double slope = (v - prev) / (x - grid[i - 1]);
      if (slope < prev_slope * (1.0 - 1e-9) - 1e-12)
        throw ConstructionError("example41: beta_tilde not convex on [0, inf) near x=" + format_double(x));
      prev_slope = slope;
    }
    prev = v;
    for (double y : {x, -x}) {
      if (std::abs(in.beta(y)) > std::abs(bt(y)) * (1.0 + 1e-12) + 1e-15)
        throw ConstructionError("example41: |beta| > beta_tilde at x=" + format_double(y));
    }
  }
}

}  // namespace detail

/// Theorem 3.1 certificate: k = 0, V = |x|^2, rho(s) = s, W0 = p^2 beta_tilde(x1)^2, mu = 0,
/// b0(s) = s + p^2 beta_tilde(sqrt s)^2, c2 = c1 lambda^2 b0^{-1}, g = 2 c2, gamma = b0,
/// r(s) = 1/2 + b0(s) / (2 c2(lambda s)).
[[nodiscard]] inline GeneralCertificate build_example41(const Example41Input& in) {
  if (!(in.p >= 0.0)) throw ConstructionError("example41: p must be nonnegative");
  if (!(in.c1 > 0.0 && in.c1 < 1.0)) throw ConstructionError("example41: c1 must lie in (0,1)");
  if (!(in.lambda > 0.0 && in.lambda < 1.0)) throw ConstructionError("example41: lambda must lie in (0,1)");
  const ScalarFn bt = in.beta_tilde ? in.beta_tilde : in.beta;
  detail::check_beta(in, bt);
  const ScalarFn dbt = in.beta_tilde_derivative ? in.beta_tilde_derivative
                                                : ScalarFn([bt](double x) { return detail::central_difference(bt, x); });
  const double p2 = in.p * in.p;

  GeneralCertificate c;
  c.name = "example41(p=" + format_double(in.p) + ",beta=" + in.label + ")";
  c.V = ScalarField::squared_norm();
  ScalarField w0;
  w0.label = format_double(p2) + "*bt(x1)^2";
  w0.value = [bt, p2](const State& x) {
    const double b = bt(x[0]);
    return p2 * b * b;
  };
  w0.gradient = [bt, dbt, p2](const State& x) { return std::vector<double>{2.0 * p2 * bt(x[0]) * dbt(x[0]), 0.0}; };
  w0.identically_zero = p2 == 0.0;
  c.W = {w0};

  const auto lin = GaugeFunction::linear;
  // linear beta_tilde gives the closed form (1 + p^2 K^2) s
  const double K = bt(1.0);
  bool linear_bt = K > 0.0;
  for (double x : {1e-3, 0.5, 2.0, 10.0}) linear_bt = linear_bt && std::abs(bt(x) - K * x) <= 1e-12 * K * x;
  const GaugeFunction b0 = linear_bt ? lin(1.0 + p2 * K * K)
                                     : GaugeFunction::custom({[bt, p2](double s) {
                                                                const double b = bt(std::sqrt(s));
                                                                return s + p2 * b * b;
                                                              },
                                                              GaugeClass::KInf, "s+p^2 bt(sqrt s)^2"});
  c.rho = lin(1.0);
  c.c1 = lin(in.c1);
  c.c2 = GaugeFunction::scale(in.c1 * in.lambda * in.lambda, GaugeFunction::inverse_of(b0));
  c.g = GaugeFunction::scale(2.0, c.c2);
  c.lambda = lin(in.lambda);
  c.gamma = b0;
  c.b = {b0};
  c.mu = SmoothScalarMap::zero();
  const auto c2 = c.c2;
  const double lam = in.lambda;
  c.r = [b0, c2, lam](double s) { return s <= 0.0 ? 1.0 : 0.5 + b0(s) / (2.0 * c2(lam * s)); };
  c.r_label = "1/2+b0/(2c2(lambda s))";
  return c;
}

/// Theorem 3.7 version for |beta(x1)| <= K |x1|: b0 = 1 + p^2 K^2, c2 = c1 lambda^2 / b0, g = 2 c2,
/// gamma = b0, r = 1/2 + b0 / (2 c2 lambda), with K1 = 0.5, K2 = 2.
[[nodiscard]] inline LinearRateCertificate build_example41_linear(double p, double K, double c1, double lambda) {
  if (!(p >= 0.0) || !(K > 0.0)) throw ConstructionError("example41: need p >= 0 and K > 0");
  if (!(c1 > 0.0 && c1 < 1.0)) throw ConstructionError("example41: c1 must lie in (0,1)");
  if (!(lambda > 0.0 && lambda < 1.0)) throw ConstructionError("example41: lambda must lie in (0,1)");
  LinearRateCertificate c;
  c.name = "example41-linear(p=" + format_double(p) + ",K=" + format_double(K) + ")";
  c.V = ScalarField::squared_norm();
  const double w = p * p * K * K;
  ScalarField w0;
  w0.label = format_double(w) + "*x1^2";
  w0.value = [w](const State& x) { return w * x[0] * x[0]; };
  w0.gradient = [w](const State& x) { return std::vector<double>{2.0 * w * x[0], 0.0}; };
  w0.identically_zero = w == 0.0;
  w0.symbolic_gradient = true;
  c.W = {w0};
  const double b0 = 1.0 + w;
  c.rho = 1.0;
  c.c1 = c1;
  c.c2 = c1 * lambda * lambda / b0;
  c.g = 2.0 * c.c2;
  c.gamma = b0;
  c.lambda = lambda;
  c.mu = 0.0;
  c.b = {b0};
  c.r = 0.5 + b0 / (2.0 * c.c2 * lambda);
  c.envelope = std::make_pair(0.5, 2.0);
  c.gamma_route = GammaRoute::MaxForm;
  return c;
}

// ---------------------------------------------------------------------------
// Example 4.2

[[nodiscard]] inline UncertainSystem example42_system(double p) {
  if (!(p >= 0.0)) throw ConfigError("example42: p must be nonnegative");
  UncertainSystem sys;
  sys.name = "example42";
  sys.n = 2;
  sys.box = {{0.0, p}};
  sys.affine_in_d = true;
  sys.field = [](const Disturbance& d, const State& x) { return State{x[1], -(1.0 + d[0]) * x[0] - 2.0 * x[1]}; };
  return sys;
}

struct Example42Params {
  double p = 0.0;
  double c1 = 2.8594;
  double c2 = 2.6094;
  double lambda = 0.9999;
  std::optional<double> mu;  // default: equality in (4.17)
};

struct Example42Derived {
  double b = 0.0;            // b0 = b1 = 3 + p^2
  double sector = 0.0;       // sqrt((3 + p^2 - c2)/c2)
  double band_inner = 0.0;   // sqrt((3 + p^2 - c1)/c1)
  double mu = 0.0, mu_min = 0.0;
  double g = 0.0, g_sector_min = 0.0;
  double g_tilde = 0.0;
  double gamma = 0.0;
  double r = 0.0;
  bool g_floored = false;
};

namespace detail {

inline double h42(double y) { return (1.0 + 2.0 * y - y * y) / (1.0 + y * y); }

inline double min_h42(double lo, double hi) {
  if (!(hi > lo)) return h42(lo);
  const auto [y, negv] = maximize_scan([](double t) { return -h42(t); }, lo, hi, 4097);
  (void)y;
  return std::min({-negv, h42(lo), h42(hi)});
}

}  // namespace detail

inline constexpr double kSqrt2 = 1.4142135623730951;

/// sqrt(9 - 6 sqrt 2): no c2 in ((3 + p^2)/(4 - 2 sqrt 2), 3) beyond it.
[[nodiscard]] inline double example42_cap() { return std::sqrt(9.0 - 6.0 * kSqrt2); }

[[nodiscard]] inline double example42_c2_floor(double p) { return (3.0 + p * p) / (4.0 - 2.0 * kSqrt2); }

/// Derived constants without enforcing the parameter constraints.
[[nodiscard]] inline Example42Derived example42_derived(const Example42Params& P) {
  const double b = 3.0 + P.p * P.p;
  if (!(P.c1 > 0.0 && P.c2 > 0.0) || P.c1 > b || P.c2 > b)
    throw DomainError("example42: need 0 < c2, c1 <= 3 + p^2");
  if (!(P.lambda > 0.0 && P.lambda < 1.0)) throw DomainError("example42: lambda must lie in (0,1)");
  if (!(P.c1 < 3.0)) throw DomainError("example42: c1 must be below rho = 3");
  Example42Derived d;
  d.b = b;
  d.sector = std::sqrt((b - P.c2) / P.c2);
  d.band_inner = std::sqrt((b - P.c1) / P.c1);
  d.mu_min = 2.0 * std::sqrt(P.c1 * (b - P.c1)) / (3.0 - P.c1);
  d.mu = P.mu.value_or(d.mu_min);
  d.g_sector_min = 2.0 * b * detail::min_h42(-d.sector, d.sector);
  d.g = d.g_sector_min;
  if (!(d.g > 0.0)) {
    d.g = 1e-6 * 2.0 * b;
    d.g_floored = true;
  }
  d.g_tilde = 2.0 * b * detail::min_h42(0.0, d.sector);
  d.gamma = b * (P.lambda + 1.0) * (P.lambda + 1.0) / (12.0 * P.lambda);
  d.r = detail::remark32_dwell(1, {b, b}, P.c2 * P.lambda, d.g * P.lambda);
  return d;
}

/// Throws ConstructionError naming the first violated parameter constraint.
inline void check_example42(const Example42Params& P) {
  const double floor = example42_c2_floor(P.p);
  if (!(P.p >= 0.0)) throw ConstructionError("example42: p must be nonnegative");
  if (!(floor < 3.0))
    throw ConstructionError("example42: (4.12) window empty: (3+p^2)/(4-2sqrt2) = " + format_double(floor) +
                            " >= rho = 3");
  if (!(floor < P.c2)) throw ConstructionError("example42: (4.12) needs c2 > " + format_double(floor));
  if (!(P.c2 < P.c1)) throw ConstructionError("example42: need c2 < c1");
  if (!(P.c1 < 3.0)) throw ConstructionError("example42: need c1 < rho = 3");
  if (!(P.lambda > 0.0 && P.lambda < 1.0)) throw ConstructionError("example42: lambda must lie in (0,1)");
  const auto d = example42_derived(P);
  if (P.mu && *P.mu < d.mu_min * (1.0 - 1e-15))
    throw ConstructionError("example42: (4.17) needs mu >= " + format_double(d.mu_min));
}

/// Corollary 3.10 certificate, k = 1, rho = 3, V = |x|^2, W0 = (3+p^2) x1^2, W1 = 2(3+p^2) x1 x2,
/// without checking the parameter constraints (g floored at 1e-6 * 2(3+p^2) if the sector minimum is <= 0).
[[nodiscard]] inline LinearRateCertificate build_example42_unchecked(const Example42Params& P) {
  const auto d = example42_derived(P);
  LinearRateCertificate c;
  c.name = "example42(p=" + format_double(P.p) + ")";
  c.V = ScalarField::squared_norm();
  const double b = d.b;
  ScalarField w0, w1;
  w0.label = format_double(b) + "*x1^2";
  w0.value = [b](const State& x) { return b * x[0] * x[0]; };
  w0.gradient = [b](const State& x) { return std::vector<double>{2.0 * b * x[0], 0.0}; };
  w0.symbolic_gradient = true;
  w1.label = format_double(2.0 * b) + "*x1*x2";
  w1.value = [b](const State& x) { return 2.0 * b * x[0] * x[1]; };
  w1.gradient = [b](const State& x) { return std::vector<double>{2.0 * b * x[1], 2.0 * b * x[0]}; };
  w1.symbolic_gradient = true;
  c.W = {w0, w1};
  c.rho = 3.0;
  c.c1 = P.c1;
  c.c2 = P.c2;
  c.g = d.g;
  c.g_tilde = d.g_tilde;
  c.gamma = d.gamma;
  c.lambda = P.lambda;
  c.mu = d.mu;
  c.b = {b, b};
  c.envelope = std::make_pair(0.5, 2.0);
  c.gamma_route = GammaRoute::MinForm;
  return c;
}

[[nodiscard]] inline LinearRateCertificate build_example42(const Example42Params& P) {
  check_example42(P);
  return build_example42_unchecked(P);
}

struct Feasibility {
  bool feasible = false;
  double margin = 0.0;  // LHS - p^2 of the explicit-lambda form
  bool window = false;  // (3+p^2)/(4-2sqrt2) < c2 < c1 < 3
};

/// 12 lambda^2/(lambda+1)^2 * (c1(3-c1) + 2 sqrt(c1(3+p^2-c1))) / (c2(3-c1) + 2 sqrt(...)) - 3 > p^2.
[[nodiscard]] inline Feasibility feasible_p(double p, double c1, double c2, double lambda) {
  const double b = 3.0 + p * p;
  if (c1 > b || c1 < 0.0) throw DomainError("feasible_p: sqrt(c1(3+p^2-c1)) undefined for c1=" + format_double(c1));
  const double root = 2.0 * std::sqrt(c1 * (b - c1));
  const double ratio = (c1 * (3.0 - c1) + root) / (c2 * (3.0 - c1) + root);
  const double lhs = 12.0 * lambda * lambda / ((lambda + 1.0) * (lambda + 1.0)) * ratio - 3.0;
  Feasibility f;
  f.margin = lhs - p * p;
  f.window = example42_c2_floor(p) < c2 && c2 < c1 && c1 < 3.0;
  f.feasible = f.window && f.margin > 0.0 && lambda > 0.0 && lambda < 1.0;
  return f;
}

/// The lambda -> 1 limit form: 3(c1 - c2)(3 - c1) / (c2(3 - c1) + 2 sqrt(c1(3+p^2-c1))).
[[nodiscard]] inline double limit_form_lhs(double p, double c1, double c2) {
  const double b = 3.0 + p * p;
  if (c1 > b || c1 < 0.0) throw DomainError("limit form: sqrt(c1(3+p^2-c1)) undefined");
  return 3.0 * (c1 - c2) * (3.0 - c1) / (c2 * (3.0 - c1) + 2.0 * std::sqrt(c1 * (b - c1)));
}

struct Range {
  double lo = 0.0, hi = 0.0;
};

struct SearchOptions {
  Range c1{2.5, 3.0};
  Range c2{2.5, 3.0};
  Range lambda{0.99, 1.0};
  std::size_t resolution = 48;
  std::size_t refinements = 3;
  double p_tol = 1e-7;
};

struct FrontierRow {
  double p = 0.0, c1 = 0.0, c2 = 0.0, lambda = 0.0, margin = -INFINITY;
  bool feasible = false;
};

struct SearchResult {
  double p_best = 0.0;
  FrontierRow best;
  std::vector<FrontierRow> frontier;  // one row per probed p
};

namespace detail {

/// Interior grid of an open range; a degenerate range yields its single point.
inline std::vector<double> open_grid(Range r, std::size_t m) {
  if (r.hi == r.lo) return {r.lo};
  std::vector<double> g(m);
  for (std::size_t i = 0; i < m; ++i)
    g[i] = r.lo + (r.hi - r.lo) * static_cast<double>(i + 1) / static_cast<double>(m + 1);
  return g;
}

/// Best margin at fixed p over the (c1, c2, lambda) grid with successive zoomed refinements.
inline FrontierRow best_at(double p, const SearchOptions& o) {
  FrontierRow best;
  best.p = p;
  Range r1 = o.c1, r2 = o.c2, rl = o.lambda;
  for (std::size_t pass = 0; pass <= o.refinements; ++pass) {
    const auto g1 = open_grid(r1, o.resolution), g2 = open_grid(r2, o.resolution), gl = open_grid(rl, o.resolution);
    std::vector<FrontierRow> per(g1.size());
    parallel_for(g1.size(), [&](std::size_t i) {
      FrontierRow loc;
      loc.p = p;
      for (double c2 : g2) {
        if (!(c2 < g1[i])) continue;
        for (double l : gl) {
          if (g1[i] > 3.0 + p * p) continue;
          const auto f = feasible_p(p, g1[i], c2, l);
          if (!f.window) continue;
          if (f.margin > loc.margin) loc = {p, g1[i], c2, l, f.margin, f.feasible};
        }
      }
      per[i] = loc;
    });
    bool improved = false;
    for (const auto& row : per) {  // index order keeps the lexicographic tie-break
      if (row.margin > best.margin) {
        best = row;
        improved = true;
      }
    }
    if (!improved && pass > 0) break;
    if (best.margin == -INFINITY) break;
    auto zoom = [&](Range r, double centre, Range bounds) {
      const double half = (r.hi - r.lo) / static_cast<double>(o.resolution + 1);
      return Range{std::max(bounds.lo, centre - half), std::min(bounds.hi, centre + half)};
    };
    r1 = zoom(r1, best.c1, o.c1);
    r2 = zoom(r2, best.c2, o.c2);
    rl = zoom(rl, best.lambda, o.lambda);
  }
  return best;
}

}  // namespace detail

/// Largest p with a feasible (c1, c2, lambda) found; bisection on p below the sqrt(9 - 6 sqrt 2) cap.
[[nodiscard]] inline SearchResult maximize_p(const SearchOptions& o = {}) {
  for (const Range* r : {&o.c1, &o.c2, &o.lambda}) {
    if (!(r->lo <= r->hi)) throw ConfigError("maximize_p: empty search range");
  }
  if (o.resolution < 2) throw ConfigError("maximize_p: resolution must be at least 2");
  if (!(o.lambda.lo > 0.0 && o.lambda.hi <= 1.0)) throw ConfigError("maximize_p: lambda range must lie in (0,1]");
  SearchResult res;
  double lo = 0.0, hi = example42_cap();
  const FrontierRow at0 = detail::best_at(0.0, o);
  res.frontier.push_back(at0);
  if (!at0.feasible) return res;
  res.best = at0;
  while (hi - lo > o.p_tol) {
    const double mid = 0.5 * (lo + hi);
    const FrontierRow row = detail::best_at(mid, o);
    res.frontier.push_back(row);
    if (row.feasible) {
      lo = mid;
      res.best = row;
    } else {
      hi = mid;
    }
  }
  res.p_best = lo;
  return res;
}

}  // namespace lyapcert
