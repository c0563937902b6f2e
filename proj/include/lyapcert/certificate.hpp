#pragma once

// Stability certificates (general gauges, linear rates), region classification and the
// derived quantities: dwell map r, contraction time T(x), chain bound, dwell exit time.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "lyapcert/errors.hpp"
#include "lyapcert/expr.hpp"
#include "lyapcert/gauge.hpp"
#include "lyapcert/numeric.hpp"

namespace lyapcert {

/// Scalar function on the state space with its gradient.
struct ScalarField {
  std::function<double(const State&)> value;
  std::function<std::vector<double>(const State&)> gradient;
  std::string label;
  bool identically_zero = false;
  bool symbolic_gradient = false;

  [[nodiscard]] double operator()(const State& x) const { return value(x); }

  [[nodiscard]] static ScalarField from_expression(const std::string& text, std::size_t n) {
    const Expr e = Expr::parse(text, n, 0);
    const ExprGradient grad(e, n);
    ScalarField f;
    f.value = [e](const State& x) { return e.eval(x); };
    f.gradient = [grad](const State& x) { return grad(x); };
    f.label = e.to_string();
    f.identically_zero = e.is_zero_constant();
    f.symbolic_gradient = grad.symbolic();
    return f;
  }

  [[nodiscard]] static ScalarField zero(std::size_t n) {
    ScalarField f;
    f.value = [](const State&) { return 0.0; };
    f.gradient = [n](const State&) { return std::vector<double>(n, 0.0); };
    f.label = "0";
    f.identically_zero = true;
    f.symbolic_gradient = true;
    return f;
  }

  /// |x|^2
  [[nodiscard]] static ScalarField squared_norm() {
    ScalarField f;
    f.value = [](const State& x) { return norm2(x); };
    f.gradient = [](const State& x) { return scaled(x, 2.0); };
    f.label = "|x|^2";
    f.symbolic_gradient = true;
    return f;
  }

  [[nodiscard]] static ScalarField constant(double c, std::size_t n) {
    ScalarField f;
    f.value = [c](const State&) { return c; };
    f.gradient = [n](const State&) { return std::vector<double>(n, 0.0); };
    f.label = format_double(c);
    f.symbolic_gradient = true;
    return f;
  }
};

/// Deterministic unit directions: equal angles in the plane, Halton points pushed
/// through the normal quantile otherwise. `seed` rotates the set.
[[nodiscard]] inline std::vector<State> unit_directions(std::size_t n, std::size_t count, std::uint64_t seed) {
  std::vector<State> out;
  if (n == 0 || count == 0) return out;
  std::mt19937_64 rng(splitmix64(seed));
  if (n == 1) {
    for (std::size_t j = 0; j < count; ++j) out.push_back({j % 2 == 0 ? 1.0 : -1.0});
    return out;
  }
  if (n == 2) {
    const double shift = uniform01(rng);
    for (std::size_t j = 0; j < count; ++j) {
      const double a = 2.0 * M_PI * (static_cast<double>(j) + shift) / static_cast<double>(count);
      out.push_back({std::cos(a), std::sin(a)});
    }
    return out;
  }
  std::vector<double> shift(n);
  for (auto& v : shift) v = uniform01(rng);
  for (std::size_t j = 0; j < count; ++j) {
    State u(n);
    for (std::size_t i = 0; i < n; ++i) {
      double h = radical_inverse(j + 1, nth_prime(i)) + shift[i];
      h -= std::floor(h);
      u[i] = normal_quantile(std::clamp(h, 1e-12, 1.0 - 1e-12));
    }
    const double len = norm(u);
    for (auto& v : u) v /= len;
    out.push_back(std::move(u));
  }
  return out;
}

/// Point alpha*u with V(alpha*u) = s (first crossing along the ray).
[[nodiscard]] inline State project_to_level(const std::function<double(const State&)>& V, const State& u, double s) {
  if (s <= 0.0) return State(u.size(), 0.0);
  auto h = [&](double a) { return V(scaled(u, a)) - s; };
  double lo = 0.0, hi = 1.0;
  double fhi = h(hi);
  while (fhi < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e150) throw RangeError("V does not reach level " + format_double(s) + " along a ray");
    fhi = h(hi);
  }
  while (lo == 0.0 && hi > 1e-150 && h(0.5 * hi) >= 0.0) hi *= 0.5;
  if (lo == 0.0) lo = 0.5 * hi;
  double flo = h(lo);
  if (flo >= 0.0) {
    lo = 0.0;
    flo = -s;
  }
  return scaled(u, bracket_root(h, lo, hi, flo, h(hi)));
}

/// Dwell map r: levels -> (0, inf).
using DwellMap = std::function<double(double)>;

enum class GammaRoute { Auto, MaxForm, MinForm };

[[nodiscard]] inline const char* to_string(GammaRoute r) {
  switch (r) {
    case GammaRoute::Auto: return "auto";
    case GammaRoute::MaxForm: return "max";
    case GammaRoute::MinForm: return "min";
  }
  return "?";
}

struct GeneralCertificate {
  std::string name = "certificate";
  ScalarField V;
  std::vector<ScalarField> W;  // W_0 .. W_k
  GaugeFunction rho, c1, c2, g;
  std::optional<GaugeFunction> g_tilde;
  GaugeFunction lambda, gamma;
  std::vector<GaugeFunction> b;  // b_0 .. b_k
  DwellMap r;                    // empty: filled by auto_dwell
  std::string r_label = "auto";
  SmoothScalarMap mu = SmoothScalarMap::zero();
  std::optional<ScalarField> phi;
  GammaRoute gamma_route = GammaRoute::Auto;
  bool remark36 = false;

  [[nodiscard]] int k() const { return static_cast<int>(W.size()) - 1; }
  [[nodiscard]] bool min_form() const {
    return gamma_route == GammaRoute::MinForm || (gamma_route == GammaRoute::Auto && g_tilde.has_value());
  }
};

struct LinearRateCertificate {
  std::string name = "certificate";
  ScalarField V;
  std::vector<ScalarField> W;
  double rho = 0, c1 = 0, c2 = 0, g = 0, gamma = 0, lambda = 0, mu = 0;
  std::optional<double> r;  // empty: Remark 3.2 formula at unit level
  std::vector<double> b;
  std::optional<double> g_tilde;
  std::optional<ScalarField> phi;
  std::optional<std::pair<double, double>> envelope;  // K1 |x|^2 <= V <= K2 |x|^2
  GammaRoute gamma_route = GammaRoute::Auto;

  [[nodiscard]] int k() const { return static_cast<int>(W.size()) - 1; }
  [[nodiscard]] bool min_form() const {
    return gamma_route == GammaRoute::MinForm || (gamma_route == GammaRoute::Auto && g_tilde.has_value());
  }
};

namespace detail {

/// r from the Remark 3.2 max/root formula; `lam_s` = lambda(s) already applied.
inline double remark32_dwell(int k, const std::vector<double>& b, double c2_lam, double g_lam) {
  const double kf = factorial(k + 1) * (k + 1);
  double best = std::pow(std::max(0.0, kf * (b[0] - c2_lam) / g_lam), 1.0 / (k + 1));
  for (int i = 1; i <= k; ++i) {
    const double rad = std::max(0.0, kf * b[static_cast<std::size_t>(i)] / (factorial(i) * g_lam));
    best = std::max(best, std::pow(rad, 1.0 / (k + 1 - i)));
  }
  return 1.0 + best;
}

/// sum_i tau^i/i! w_i - G tau^{k+1}/(k+1)!
inline double chain_polynomial(const std::vector<double>& w, double G, double tau) {
  double acc = 0.0, term = 1.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i > 0) term *= tau / static_cast<double>(i);
    acc += term * w[i];
  }
  term *= tau / static_cast<double>(w.size());
  return acc - G * term;
}

/// True when the sampled values (ascending levels toward 0 first) show no growth over the
/// smallest decade compared with two decades above.
inline bool bounded_trend(const std::vector<double>& levels, const std::vector<double>& values) {
  const double lo = levels.front();
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!std::isfinite(values[i])) return false;
    if (levels[i] <= 10.0 * lo) a = std::max(a, values[i]);
    else if (levels[i] >= 100.0 * lo && levels[i] <= 1000.0 * lo) b = std::max(b, values[i]);
  }
  return a <= 1.05 * b + 1e-9;
}

}  // namespace detail

/// Checks the Theorem 3.1 structural requirements on sampled levels; throws ConstructionError.
inline void validate(const GeneralCertificate& c, std::size_t n) {
  if (c.W.empty()) throw ConstructionError(c.name + ": chain W_0..W_k is empty");
  if (c.b.size() != c.W.size()) throw ConstructionError(c.name + ": need one b_i per W_i");
  const State zero(n, 0.0);
  for (std::size_t i = 0; i < c.W.size(); ++i) {
    if (std::abs(c.W[i](zero)) > 1e-12) throw ConstructionError(c.name + ": W_" + std::to_string(i) + "(0) != 0");
  }
  if (std::abs(c.V(zero)) > 1e-12) throw ConstructionError(c.name + ": V(0) != 0");
  double prev_kappa = -INFINITY;
  for (double s : log_grid(1e-6, 1e6, 1000)) {
    const double rho = c.rho(s), c1 = c.c1(s), c2 = c.c2(s);
    if (!(rho > c1)) throw ConstructionError(c.name + ": rho(s) > c1(s) fails at s=" + format_double(s));
    if (!(c1 >= c2)) throw ConstructionError(c.name + ": c1(s) >= c2(s) fails at s=" + format_double(s));
    if (!(c.lambda(s) < s)) throw ConstructionError(c.name + ": lambda(s) < s fails at s=" + format_double(s));
    const double kappa = c1 + c.mu(s);
    if (kappa < prev_kappa - 1e-12 * std::max(1.0, std::abs(kappa)))
      throw ConstructionError(c.name + ": kappa = c1 + mu decreases at s=" + format_double(s));
    prev_kappa = kappa;
  }
}

/// Constant orderings of Theorem 3.7; throws ConstructionError naming the first violation.
inline void validate(const LinearRateCertificate& c, std::size_t n) {
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) throw ConstructionError(c.name + ": " + what);
  };
  need(!c.W.empty(), "chain W_0..W_k is empty");
  need(c.b.size() == c.W.size(), "need one b_i per W_i");
  need(c.rho > c.c1, "rho > c1");
  need(c.c1 >= c.c2, "c1 >= c2");
  need(c.c2 > 0.0, "c2 > 0");
  need(c.lambda > 0.0 && c.lambda < 1.0, "lambda in (0,1)");
  need(c.mu >= -c.c1, "mu >= -c1");
  need(c.g > 0.0, "g > 0");
  need(c.gamma > 0.0, "gamma > 0");
  for (double bi : c.b) need(bi >= 0.0, "b_i >= 0");
  need(c.b[0] >= c.rho, "b_0 >= rho");
  if (c.r) need(*c.r > 0.0, "r > 0");
  if (c.g_tilde) need(*c.g_tilde > 0.0, "g_tilde > 0");
  if (c.envelope) need(c.envelope->first > 0.0 && c.envelope->first < c.envelope->second, "0 < K1 < K2");
  const State zero(n, 0.0);
  for (std::size_t i = 0; i < c.W.size(); ++i) need(std::abs(c.W[i](zero)) <= 1e-12, "W_i(0) = 0");
}

/// Dwell constant for a linear-rate certificate: the given r, else Remark 3.2 at level 1.
[[nodiscard]] inline double dwell(const LinearRateCertificate& c) {
  if (c.r) return *c.r;
  return detail::remark32_dwell(c.k(), c.b, c.c2 * c.lambda, c.g * c.lambda);
}

/// The general certificate with rho(s) = rho s, ..., r(s) = r.
[[nodiscard]] inline GeneralCertificate as_general(const LinearRateCertificate& c) {
  GeneralCertificate g;
  g.name = c.name;
  g.V = c.V;
  g.W = c.W;
  g.rho = GaugeFunction::linear(c.rho);
  g.c1 = GaugeFunction::linear(c.c1);
  g.c2 = GaugeFunction::linear(c.c2);
  g.g = GaugeFunction::linear(c.g);
  if (c.g_tilde) g.g_tilde = GaugeFunction::linear(*c.g_tilde);
  g.lambda = GaugeFunction::linear(c.lambda);
  g.gamma = GaugeFunction::linear(c.gamma);
  for (double bi : c.b) g.b.push_back(bi > 0.0 ? GaugeFunction::linear(bi) : GaugeFunction::constant(0.0));
  const double r = dwell(c);
  g.r = [r](double) { return r; };
  g.r_label = format_double(r);
  g.mu = SmoothScalarMap::linear(c.mu);
  g.phi = c.phi;
  g.gamma_route = c.gamma_route;
  return g;
}

/// r(s) from the Remark 3.2 formula, after checking its limsup premises near 0.
[[nodiscard]] inline DwellMap auto_dwell(const GeneralCertificate& c) {
  const int k = c.k();
  auto b_at = [&c](double s) {
    std::vector<double> out;
    for (const auto& bi : c.b) out.push_back(bi(s));
    return out;
  };
  const auto near0 = log_grid(1e-8, 1e-2, 100);
  std::vector<double> ratio0, ratio_i;
  for (double s : near0) {
    const double gl = c.g(c.lambda(s));
    ratio0.push_back((c.b[0](s) - c.c2(c.lambda(s))) / gl);
    double worst = 0.0;
    for (int i = 1; i <= k; ++i) worst = std::max(worst, c.b[static_cast<std::size_t>(i)](s) / gl);
    ratio_i.push_back(worst);
  }
  if (!detail::bounded_trend(near0, ratio0))
    throw ConstructionError(c.name + ": limsup (b_0(s) - c2(lambda(s)))/g(lambda(s)) appears unbounded as s -> 0");
  if (k > 0 && !detail::bounded_trend(near0, ratio_i))
    throw ConstructionError(c.name + ": limsup b_i(s)/g(lambda(s)) appears unbounded as s -> 0");

  // copies so the map outlives the certificate
  auto b = c.b;
  auto c2 = c.c2, g = c.g, lambda = c.lambda;
  DwellMap r = [k, b, c2, g, lambda](double s) {
    if (s <= 0.0) return 1.0;
    std::vector<double> bs;
    for (const auto& bi : b) bs.push_back(bi(s));
    const double ls = lambda(s);
    return detail::remark32_dwell(k, bs, c2(ls), g(ls));
  };
  for (double s : log_grid(1e-6, 1e6, 1000)) {
    const double rs = r(s), ls = c.lambda(s);
    const double lhs = c.c2(ls) + c.g(ls) * std::pow(rs, k + 1) / factorial(k + 1);
    const double rhs = detail::chain_polynomial(b_at(s), 0.0, rs);
    if (!(lhs > rhs)) throw ConstructionError(c.name + ": auto dwell map violates (3.7) at s=" + format_double(s));
  }
  return r;
}

/// Fills r by auto_dwell when it was left empty.
inline void complete_dwell(GeneralCertificate& c) {
  if (!c.r) {
    c.r = auto_dwell(c);
    c.r_label = "auto";
  }
}

enum class Region { Good, Transition, Bad };

[[nodiscard]] inline const char* to_string(Region r) {
  switch (r) {
    case Region::Good: return "Good";
    case Region::Transition: return "Transition";
    case Region::Bad: return "Bad";
  }
  return "?";
}

struct RegionLabel {
  Region region = Region::Good;
  double w0 = 0.0, c1v = 0.0, c2v = 0.0, v = 0.0;
};

/// Good: W0 < c2(V); Bad: W0 > c1(V); ties within 1e-12 (1 + V) resolve to Transition.
[[nodiscard]] inline RegionLabel classify(const GeneralCertificate& c, const State& x) {
  RegionLabel out;
  out.v = c.V(x);
  out.w0 = c.W[0](x);
  out.c1v = c.c1(out.v);
  out.c2v = c.c2(out.v);
  const double eps = 1e-12 * (1.0 + out.v);
  if (out.w0 < out.c2v - eps) out.region = Region::Good;
  else if (out.w0 > out.c1v + eps) out.region = Region::Bad;
  else out.region = Region::Transition;
  return out;
}

[[nodiscard]] inline RegionLabel classify(const LinearRateCertificate& c, const State& x) {
  RegionLabel out;
  out.v = c.V(x);
  out.w0 = c.W[0](x);
  out.c1v = c.c1 * out.v;
  out.c2v = c.c2 * out.v;
  const double eps = 1e-12 * (1.0 + out.v);
  if (out.w0 < out.c2v - eps) out.region = Region::Good;
  else if (out.w0 > out.c1v + eps) out.region = Region::Bad;
  else out.region = Region::Transition;
  return out;
}

/// p(s) = r(s) + int_{lambda(s)}^{gamma(s)} dtau / (rho - c1), p(0) = 1.
[[nodiscard]] inline double contraction_time_level(const GeneralCertificate& c, double s) {
  if (s <= 0.0) return 1.0;
  if (!c.r) throw ConstructionError(c.name + ": dwell map not set");
  const double a = c.lambda(s), b = c.gamma(s);
  auto gap = [&c](double t) { return c.rho(t) - c.c1(t); };
  auto guard = [&](double t) {
    if (!(gap(t) >= 1e-14 * std::max(c.rho(t), std::numeric_limits<double>::min())))
      throw QuadratureError("rho - c1 vanishes at tau=" + format_double(t) + " (condition 3.9)");
  };
  const double lo = std::min(a, b), hi = std::max(a, b);
  for (double t : linear_grid(lo, hi, 65)) guard(t);
  double integral = 0.0;
  if (hi > lo) {
    integral = integrate_adaptive(
        [&](double t) {
          guard(t);
          return 1.0 / gap(t);
        },
        lo, hi, 1e-12);
    if (b < a) integral = -integral;
  }
  return c.r(s) + integral;
}

[[nodiscard]] inline double contraction_time(const GeneralCertificate& c, const State& x) {
  return contraction_time_level(c, c.V(x));
}

/// T = r + (ln gamma - ln lambda)/(rho - c1), constant in x.
[[nodiscard]] inline double contraction_time(const LinearRateCertificate& c) {
  return dwell(c) + (std::log(c.gamma) - std::log(c.lambda)) / (c.rho - c.c1);
}

/// sum_i t^i/i! W_i - g_floor t^{k+1}/(k+1)!
[[nodiscard]] inline double chain_bound(const std::vector<double>& w, double g_floor, double t) {
  if (w.empty()) throw DomainError("chain_bound needs W_0");
  if (t < 0.0 || g_floor < 0.0) throw DomainError("chain_bound needs t >= 0 and g_floor >= 0");
  return detail::chain_polynomial(w, g_floor, t);
}

/// Smallest t in [0, r(s)] with chain_bound(b(s), g(lambda(s)), t) < c2(lambda(s)).
[[nodiscard]] inline double dwell_exit_bound(const GeneralCertificate& c, double s) {
  if (!c.r) throw ConstructionError(c.name + ": dwell map not set");
  std::vector<double> bs;
  for (const auto& bi : c.b) bs.push_back(bi(s));
  const double ls = c.lambda(s);
  const double G = c.g(ls), thr = c.c2(ls), rs = c.r(s);
  auto below = [&](double t) { return detail::chain_polynomial(bs, G, t) < thr; };
  if (below(0.0)) return 0.0;
  const auto grid = linear_grid(0.0, rs, 2049);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (below(grid[i])) return bisect_predicate(below, grid[i - 1], grid[i], 1e-12 * std::max(1.0, rs));
  }
  throw ConstructionError(c.name + ": chain bound stays above c2(lambda(s)) on [0, r(s)], (3.7) violated at s=" +
                          format_double(s));
}

}  // namespace lyapcert
