#pragma once

// Simulation side of the discretization approach: contraction runs V(x_{i+1}) <= V_i - q(V_i),
// KL decay envelopes, attractivity times, exponential constants, converse data and the
// phi time-change identity.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "lyapcert/certificate.hpp"
#include "lyapcert/errors.hpp"
#include "lyapcert/gauge.hpp"
#include "lyapcert/numeric.hpp"
#include "lyapcert/simulate.hpp"
#include "lyapcert/system.hpp"

namespace lyapcert {

using TimeMap = std::function<double(const State&)>;

struct ContractionRun {
  State x0;
  DisturbanceSignal signal;
  std::vector<double> tau, t, T, V;  // tau, V have steps+1 entries
  std::vector<State> x;
  std::vector<bool> pass;
  std::vector<double> sup_v;          // max of V over [tau_i, tau_{i+1}]
  std::vector<bool> bound_ok;         // sup_v <= a(V_0); empty when no a was given
  bool diverged = false;
  std::string failure;

  [[nodiscard]] std::size_t steps() const { return t.size(); }
  [[nodiscard]] bool all_pass() const {
    return !diverged && std::all_of(pass.begin(), pass.end(), [](bool b) { return b; }) &&
           std::all_of(bound_ok.begin(), bound_ok.end(), [](bool b) { return b; });
  }
};

/// Uniform point in the closed ball of radius R.
[[nodiscard]] inline State random_in_ball(std::size_t n, double R, std::mt19937_64& rng) {
  State x(n);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& xi : x) {
      xi = normal_quantile(std::clamp(uniform01(rng), 1e-300, 1.0 - 1e-16));
      norm += xi * xi;
    }
  } while (norm == 0.0);
  const double scale = R * std::pow(uniform01(rng), 1.0 / static_cast<double>(n)) / std::sqrt(norm);
  for (auto& xi : x) xi *= scale;
  return x;
}

/// q(s) = s - lambda(s).
[[nodiscard]] inline GaugeFunction decrement_of(const GaugeFunction& lambda) {
  if (const auto c = lambda.linear_coefficient()) return GaugeFunction::linear(1.0 - *c);
  return GaugeFunction::custom({[lambda](double s) { return s - lambda(s); }, GaugeClass::PositiveDefinite,
                                "s-" + lambda.describe()});
}

struct ContractionOptions {
  double tol = 1e-9;
  std::optional<GaugeFunction> a;  // overshoot gauge for (2.1)
};

/// Builds x_{i+1} = x(t_i, x_i; P_{tau_i} d) with t_i the first integrator node in [0, T(x_i)]
/// where V drops to V_i - q(V_i); without such a node t_i is the minimizer of V on [0, T(x_i)].
[[nodiscard]] inline ContractionRun run_contraction(const UncertainSystem& sys, const StateFunctional& V,
                                                    const TimeMap& T, const GaugeFunction& q, const State& x0,
                                                    const DisturbanceSignal& signal, std::size_t steps,
                                                    const ContractionOptions& opt = {}) {
  if (steps == 0) throw ConfigError("contraction run needs at least one step");
  ContractionRun run;
  run.x0 = x0;
  run.signal = signal;
  run.tau.push_back(0.0);
  run.x.push_back(x0);
  run.V.push_back(V(x0));
  const Integrator integ(sys, {opt.tol});
  for (std::size_t i = 0; i < steps; ++i) {
    const State& xi = run.x.back();
    const double vi = run.V.back();
    const double Ti = T(xi);
    if (!(Ti > 0.0) || !std::isfinite(Ti)) throw ConfigError("T(x) must be positive and finite");
    const double target = vi - q(vi);
    try {
      const DisturbanceSignal shifted = signal.shifted(run.tau.back());
      Trajectory tr = integ.run(xi, shifted, Ti, [&](double, const State& y) { return V(y) <= target; });
      double ti = tr.t_end();
      State next = tr.back();
      bool ok = V(next) <= target;
      if (!ok) {
        const auto [tmin, vmin] = min_on_trajectory(tr, V, 0.0, tr.t_end());
        (void)vmin;
        ti = tmin;
        next = ti > 0.0 ? integ.run(xi, shifted, ti).back() : xi;
        ok = V(next) <= target;
      }
      double sup = vi;
      for (const auto& y : tr.states()) {
        if (tr.times().empty()) break;
        sup = std::max(sup, V(y));
      }
      run.t.push_back(ti);
      run.T.push_back(Ti);
      run.pass.push_back(ok);
      run.sup_v.push_back(sup);
      if (opt.a) run.bound_ok.push_back(sup <= (*opt.a)(run.V.front()) * (1.0 + 1e-12) + 1e-300);
      run.tau.push_back(run.tau.back() + ti);
      run.x.push_back(next);
      run.V.push_back(V(next));
    } catch (const DivergenceError& e) {
      run.diverged = true;
      run.failure = std::string("FAILED-DIVERGED at step ") + std::to_string(i) + ": " + e.what();
      break;
    }
  }
  return run;
}

struct EnvelopeReport {
  KLBound sigma;
  double max_ratio = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> violations;  // (run, index)
  [[nodiscard]] bool conforms() const { return violations.empty(); }
};

/// sigma from q and the check V_i <= sigma(V_0, i) over all runs.
[[nodiscard]] inline EnvelopeReport decay_envelope(const std::vector<ContractionRun>& runs, const GaugeFunction& q) {
  if (runs.empty()) throw ConfigError("decay_envelope needs at least one run");
  EnvelopeReport rep{kl_from_contraction(q), 0.0, {}};
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& v = runs[r].V;
    const auto bound = rep.sigma.orbit(v.front(), v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (v[i] == 0.0) continue;
      const double ratio = bound[i] > 0.0 ? v[i] / bound[i] : INFINITY;
      rep.max_ratio = std::max(rep.max_ratio, ratio);
      if (v[i] > bound[i]) rep.violations.emplace_back(r, i);
    }
  }
  return rep;
}

struct AttractivityEstimate {
  std::size_t N = 0;
  double T_tilde = 0.0, T_hat = 0.0, B = 0.0;
};

/// T_hat(eps, R) = N * T_tilde with N the least i where sigma(B(R), i) <= a^{-1}(eps).
[[nodiscard]] inline AttractivityEstimate attractivity_estimate(const StateFunctional& V, std::size_t n,
                                                                const GaugeFunction& a, const KLBound& sigma,
                                                                const TimeMap& T, double eps, double R,
                                                                std::size_t directions = 256,
                                                                std::uint64_t seed = 1) {
  if (!(eps > 0.0) || !(R >= 0.0)) throw ConfigError("attractivity estimate needs eps > 0 and R >= 0");
  AttractivityEstimate est;
  const auto dirs = unit_directions(n, directions, seed);
  for (const auto& u : dirs) est.B = std::max(est.B, V(scaled(u, R)));
  if (eps >= a(est.B)) return est;
  const double target = a.invert(eps);
  std::size_t i = 0;
  // B carries rounding from the sampled sphere, so the comparison allows a relative ulp-scale slack
  while (sigma(est.B, static_cast<double>(i)) > target * (1.0 + 1e-12)) {
    if (++i > 100000000) throw RangeError("sigma does not reach a^{-1}(eps)");
  }
  est.N = i;
  for (double level : linear_grid(target, target + est.B, 32)) {
    for (const auto& u : dirs) est.T_tilde = std::max(est.T_tilde, T(project_to_level(V, u, level)));
  }
  est.T_hat = static_cast<double>(est.N) * est.T_tilde;
  return est;
}

struct ExponentialConstants {
  double M = 1.0, sigma = 0.0, sigma_raw = 0.0;
};

/// exp(-2 sigma_raw) = 1 - q_frac; rate sigma_raw / r, amplitude exp(sigma_raw) sqrt(K2 M_a / K1).
[[nodiscard]] inline ExponentialConstants exponential_constants(double M_a, double r, double q_frac, double K1,
                                                                double K2) {
  if (!(K1 > 0.0 && K1 < K2)) throw ConfigError("exponential constants need 0 < K1 < K2");
  if (!(q_frac > 0.0 && q_frac < 1.0)) throw ConfigError("exponential constants need q in (0,1)");
  if (!(M_a >= 1.0)) throw ConfigError("exponential constants need M_a >= 1");
  if (!(r > 0.0)) throw ConfigError("exponential constants need r > 0");
  ExponentialConstants c;
  c.sigma_raw = -std::log1p(-q_frac) / 2.0;
  c.sigma = c.sigma_raw / r;
  c.M = std::exp(c.sigma_raw) * std::sqrt(K2 * M_a / K1);
  return c;
}

struct ConverseData {
  GaugeFunction a;
  std::function<double(double)> t;  // level -> time
  std::function<double(double)> T;  // t + 1
  bool strictness_repaired = false;
  double max_t_on_grid = 0.0;
};

/// a(s) = a2(sigma(a1^{-1}(s), 0)); t(s) solves a2(sigma(a1^{-1}(s), t)) = (1 - q) s.
[[nodiscard]] inline ConverseData converse_data(const KLBound& sigma, const GaugeFunction& a1, const GaugeFunction& a2,
                                                double q_frac) {
  if (!(q_frac > 0.0 && q_frac < 1.0)) throw ConfigError("converse data needs q in (0,1)");
  ConverseData out;
  bool strict = true;
  for (double s : log_grid(1e-3, 1e3, 13)) {
    double prev = sigma(s, 0.0);
    for (double t : linear_grid(0.05, 20.0, 60)) {
      const double v = sigma(s, t);
      if (!(v < prev)) strict = false;
      prev = v;
    }
  }
  out.strictness_repaired = !strict;
  const KLBound sig = strict ? sigma
                             : KLBound::user([sigma](double s, double t) { return sigma(s, t) + s * std::exp(-t); },
                                             sigma.describe() + "+s*exp(-t)");
  out.a = GaugeFunction::custom(
      {[sig, a1, a2](double s) { return a2(sig(a1.invert(s), 0.0)); }, GaugeClass::K, "a"});
  out.t = [sig, a1, a2, q_frac](double s) {
    if (s <= 0.0) return 0.0;
    const double x = a1.invert(s);
    const double goal = (1.0 - q_frac) * s;
    auto above = [&](double t) { return a2(sig(x, t)) > goal; };
    if (!above(0.0)) return 0.0;
    double hi = 1.0;
    while (above(hi)) {
      hi *= 2.0;
      if (hi > 1e12)
        throw RangeError("converse time bracket failed at level " + format_double(s) + ", residual " +
                         format_double(a2(sig(x, hi)) - goal));
    }
    return bisect_predicate([&](double t) { return !above(t); }, 0.0, hi, 1e-10);
  };
  auto t = out.t;
  out.T = [t](double s) { return t(s) + 1.0; };
  for (double s : log_grid(1e-3, 1e3, 61)) out.max_t_on_grid = std::max(out.max_t_on_grid, out.t(s));
  return out;
}

/// f / phi, the time-rescaled system.
[[nodiscard]] inline UncertainSystem rescaled(const UncertainSystem& sys, const ScalarField& phi) {
  UncertainSystem out = sys;
  out.name = sys.name + "/phi";
  auto f = sys.field;
  out.field = [f, phi](const Disturbance& d, const State& x) { return scaled(f(d, x), 1.0 / phi(x)); };
  return out;
}

struct RescaleReport {
  double max_error = 0.0;
  std::size_t points = 0;
  double tolerance = 0.0;
  [[nodiscard]] bool conforms() const { return max_error <= tolerance; }
};

/// Checks x(t) = y(int_0^t phi(x)) where y solves the rescaled system driven by the time-changed signal.
[[nodiscard]] inline RescaleReport rescale_check(const UncertainSystem& sys, const ScalarField& phi, const State& x0,
                                                 const DisturbanceSignal& signal, double horizon, double tol = 1e-9) {
  // checkpoints become breakpoints so both integrations land on them exactly
  std::vector<double> bp;
  std::vector<Disturbance> vals;
  for (double t : linear_grid(0.0, horizon, 21)) {
    if (t < horizon) bp.push_back(t);
  }
  for (std::size_t k = 0; k < signal.breakpoints().size(); ++k) {
    if (signal.breakpoints()[k] < horizon) bp.push_back(signal.breakpoints()[k]);
  }
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
  for (double t : bp) vals.push_back(signal.at(t));
  const DisturbanceSignal fine(bp, vals, horizon, signal.provenance() + "|checkpoints");

  UncertainSystem aug = sys;
  aug.n = sys.n + 1;
  auto f = sys.field;
  const std::size_t n = sys.n;
  aug.field = [f, phi, n](const Disturbance& d, const State& z) {
    const State x(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(n));
    State out = f(d, x);
    out.push_back(phi(x));
    return out;
  };
  State z0 = x0;
  z0.push_back(0.0);
  const Trajectory tx = Integrator(aug, {tol}).run(z0, fine, horizon);

  auto node = [](const Trajectory& tr, double t) -> const State& {
    const auto it = std::lower_bound(tr.times().begin(), tr.times().end(), t);
    return tr.states()[static_cast<std::size_t>(it - tr.times().begin())];
  };
  std::vector<double> checkpoints = bp;
  checkpoints.push_back(horizon);
  std::vector<double> stretched;
  for (double t : checkpoints) stretched.push_back(node(tx, t)[n]);
  std::vector<double> ybp(stretched.begin(), stretched.end() - 1);
  const DisturbanceSignal changed(ybp, vals, stretched.back(), signal.provenance() + "|time-changed");
  const UncertainSystem ysys = rescaled(sys, phi);
  const Trajectory ty = Integrator(ysys, {tol}).run(x0, changed, stretched.back());

  RescaleReport rep;
  rep.tolerance = 10.0 * tol * std::max(1.0, norm(x0));
  for (std::size_t k = 0; k < checkpoints.size(); ++k) {
    const State& zx = node(tx, checkpoints[k]);
    const State x(zx.begin(), zx.begin() + static_cast<std::ptrdiff_t>(n));
    rep.max_error = std::max(rep.max_error, max_abs_diff(x, node(ty, stretched[k])));
    ++rep.points;
  }
  return rep;
}

struct ChainConformance {
  std::size_t nodes = 0;  // points compared: accepted nodes and dense-output points between them
  double segment_length = 0.0;
  double worst_excess = -INFINITY;  // max of W0(x(t)) - chain bound
};

/// Follows x(t) from x0 while W0 >= c2(V) and V > lambda(V0), comparing W0 with the chain bound.
[[nodiscard]] inline ChainConformance chain_bound_conformance(const UncertainSystem& sys,
                                                              const GeneralCertificate& cert, const State& x0,
                                                              const DisturbanceSignal& signal, double horizon,
                                                              double tol = 1e-9) {
  const double v0 = cert.V(x0);
  const double lam = cert.lambda(v0);
  auto inside = [&](const State& x) {
    return classify(cert, x).region != Region::Good && cert.V(x) > lam;
  };
  ChainConformance out;
  if (!inside(x0)) return out;
  std::vector<double> w;
  for (const auto& wi : cert.W) w.push_back(wi(x0));
  const double G = cert.g(lam);
  const Trajectory tr = Integrator(sys, {tol}).run(x0, signal, horizon, [&](double, const State& x) { return !inside(x); });
  // accepted nodes plus dense-output points inside each step
  constexpr std::size_t kPerStep = 8;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const double t0 = tr.times()[k];
    const double t1 = k + 1 < tr.size() ? tr.times()[k + 1] : t0;
    const std::size_t m = k + 1 < tr.size() ? kPerStep : 1;
    for (std::size_t j = 0; j < m; ++j) {
      const double t = t0 + (t1 - t0) * static_cast<double>(j) / static_cast<double>(kPerStep);
      const State x = j == 0 ? tr.states()[k] : tr.at(t);
      if (!inside(x)) return out;
      out.worst_excess = std::max(out.worst_excess, cert.W[0](x) - chain_bound(w, G, t));
      out.segment_length = t;
      ++out.nodes;
    }
  }
  return out;
}

/// CSV with columns i, tau_i, t_i, T_i, V_i, pass.
inline void write_run_csv(std::ostream& os, const ContractionRun& run) {
  os << "i,tau_i,t_i,T_i,V_i,pass\n";
  for (std::size_t i = 0; i < run.steps(); ++i) {
    os << i << "," << format_double(run.tau[i]) << "," << format_double(run.t[i]) << "," << format_double(run.T[i])
       << "," << format_double(run.V[i]) << "," << (run.pass[i] ? 1 : 0) << "\n";
  }
  const std::size_t last = run.steps();
  os << last << "," << format_double(run.tau[last]) << ",,," << format_double(run.V[last]) << ",\n";
}

}  // namespace lyapcert
