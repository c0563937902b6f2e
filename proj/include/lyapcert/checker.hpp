#pragma once

// Premise verification: pointwise conditions over sampled states with exact or searched
// d-maximization, scalar gauge inequalities over level grids, and the final verdict.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "lyapcert/certificate.hpp"
#include "lyapcert/discretize.hpp"
#include "lyapcert/errors.hpp"
#include "lyapcert/gauge.hpp"
#include "lyapcert/numeric.hpp"
#include "lyapcert/system.hpp"

namespace lyapcert {

enum class Status { PassExact, PassSampled, PassVacuous, Fail, Skipped };

[[nodiscard]] inline const char* to_string(Status s) {
  switch (s) {
    case Status::PassExact: return "PASS-exact";
    case Status::PassSampled: return "PASS-sampled";
    case Status::PassVacuous: return "PASS-vacuous";
    case Status::Fail: return "FAIL";
    case Status::Skipped: return "SKIPPED";
  }
  return "?";
}

[[nodiscard]] inline bool is_pass(Status s) {
  return s == Status::PassExact || s == Status::PassSampled || s == Status::PassVacuous;
}

struct Witness {
  State x;
  Disturbance d;
  double lhs = 0.0, rhs = 0.0;
};

struct CheckEntry {
  std::string id;
  Status status = Status::Skipped;
  double margin = 0.0;  // min of rhs - lhs (or lhs - rhs for ">" forms); slack, positive is good
  bool strict = false;
  std::optional<Witness> witness;
  std::size_t samples = 0, in_region = 0;
  std::string note;
};

struct CheckReport {
  std::vector<CheckEntry> entries;

  [[nodiscard]] const CheckEntry* find(const std::string& id) const {
    for (const auto& e : entries) {
      if (e.id == id) return &e;
    }
    return nullptr;
  }
  [[nodiscard]] bool any(Status s) const {
    return std::any_of(entries.begin(), entries.end(), [s](const CheckEntry& e) { return e.status == s; });
  }
  [[nodiscard]] bool all_pass() const {
    return std::all_of(entries.begin(), entries.end(), [](const CheckEntry& e) { return is_pass(e.status); });
  }
  void append(const CheckReport& other) { entries.insert(entries.end(), other.entries.begin(), other.entries.end()); }
};

struct SamplingOptions {
  std::size_t density = 10000;  // pointwise samples (shell grid), plus 10% low-discrepancy fill
  double v_min = 1e-2, v_max = 1e2;
  std::uint64_t seed = 1;
  double delta = 1e-9;            // strictness / tolerance scale
  std::size_t scalar_levels = 1000;
  std::size_t near_zero_levels = 100;
};

inline void validate(const SamplingOptions& o) {
  if (o.density == 0) throw ConfigError("sampling density must be positive");
  if (!(o.v_min > 0.0) || !(o.v_max >= o.v_min) || !std::isfinite(o.v_max))
    throw ConfigError("sampling level range must satisfy 0 < v_min <= v_max");
  if (!(o.delta > 0.0)) throw ConfigError("tolerance delta must be positive");
  if (o.scalar_levels < 2) throw ConfigError("scalar level grid needs at least 2 levels");
}

using Certificate = std::variant<GeneralCertificate, LinearRateCertificate>;

// ---------------------------------------------------------------------------
// Samples

struct SampleSet {
  std::vector<State> states;
  std::vector<State> directions;
};

/// Shell grid: directions x log-spaced V levels, plus a Halton fill over (level, direction).
[[nodiscard]] inline SampleSet build_samples(const ScalarField& V, std::size_t n, const SamplingOptions& o) {
  validate(o);
  SampleSet set;
  const std::size_t nd = n == 1 ? 2 : std::max<std::size_t>(8, static_cast<std::size_t>(std::ceil(std::sqrt(
                                                                   static_cast<double>(o.density)))));
  const std::size_t nl = std::max<std::size_t>(1, o.density / nd);
  set.directions = unit_directions(n, nd, o.seed);
  const auto levels = o.v_max > o.v_min ? log_grid(o.v_min, o.v_max, std::max<std::size_t>(nl, 2))
                                        : std::vector<double>{o.v_min};
  for (double s : levels) {
    for (const auto& u : set.directions) set.states.push_back(project_to_level(V.value, u, s));
  }
  const std::size_t fill = o.density / 10;
  const auto extra = unit_directions(n, fill, o.seed + 1);
  std::mt19937_64 rng(splitmix64(o.seed ^ 0x5bd1e995ULL));
  const double shift = uniform01(rng);
  const double llo = std::log(o.v_min), lhi = std::log(o.v_max);
  for (std::size_t j = 0; j < fill; ++j) {
    double h = radical_inverse(j + 1, 2) + shift;
    h -= std::floor(h);
    const double s = std::exp(llo + (lhi - llo) * h);
    set.states.push_back(project_to_level(V.value, extra[(j * 7919) % fill], s));
  }
  return set;
}

// ---------------------------------------------------------------------------
// Pointwise conditions

enum class RegionKind { All, Active, Band, ActivePositive };

struct PointEval {
  double lhs = 0.0, rhs = 0.0;
  Disturbance d;
  bool exact = true;
};

struct PointCondition {
  std::string id;
  RegionKind region = RegionKind::All;
  std::function<PointEval(const State&)> eval;
};

struct CertificateView {
  GeneralCertificate general;
  bool linear = false;
  std::optional<std::pair<double, double>> envelope;
};

[[nodiscard]] inline CertificateView view_of(const Certificate& c) {
  CertificateView v;
  if (const auto* g = std::get_if<GeneralCertificate>(&c)) {
    v.general = *g;
  } else {
    const auto& l = std::get<LinearRateCertificate>(c);
    v.general = as_general(l);
    v.linear = true;
    v.envelope = l.envelope;
  }
  return v;
}

/// Whether x lies in the region a condition is restricted to (ties count as inside).
[[nodiscard]] inline bool in_region(const GeneralCertificate& c, RegionKind kind, const State& x) {
  if (kind == RegionKind::All) return true;
  const RegionLabel lab = classify(c, x);
  if (kind == RegionKind::Band) return lab.region == Region::Transition;
  if (lab.region == Region::Good) return false;
  if (kind == RegionKind::Active) return true;
  if (c.k() < 1) return false;
  double best = -INFINITY;
  for (std::size_t i = 1; i < c.W.size(); ++i) best = std::max(best, c.W[i](x));
  return best >= -1e-12 * (1.0 + lab.v);
}

/// The region-restricted differential and bound conditions for the certificate flavor.
[[nodiscard]] inline std::vector<PointCondition> pointwise_conditions(const UncertainSystem& sys,
                                                                      const CertificateView& view) {
  const GeneralCertificate& c = view.general;
  const bool lin = view.linear, phi = c.phi.has_value();
  const int k = c.k();
  auto phi_at = [c](const State& x) { return c.phi ? (*c.phi)(x) : 1.0; };
  auto dmax = [&sys](const std::vector<double>& grad, const State& x) { return max_directional(sys, grad, x); };
  std::vector<PointCondition> out;

  out.push_back({lin ? (phi ? "3.35" : "3.26") : (phi ? "3.22" : "3.1"), RegionKind::All,
                 [c, phi_at, dmax](const State& x) {
                   const auto m = dmax(c.V.gradient(x), x);
                   return PointEval{m.value, phi_at(x) * (-c.rho(c.V(x)) + c.W[0](x)), m.d, m.exact};
                 }});
  for (int i = 0; i < k; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    out.push_back({std::string(lin ? (phi ? "3.36" : "3.27") : (phi ? "3.23" : "3.2")) + "[" + std::to_string(i) + "]",
                   RegionKind::Active, [c, phi_at, dmax, ii](const State& x) {
                     const auto m = dmax(c.W[ii].gradient(x), x);
                     return PointEval{m.value, phi_at(x) * c.W[ii + 1](x), m.d, m.exact};
                   }});
  }
  for (int i = 0; i <= k; ++i) {
    const auto ii = static_cast<std::size_t>(i);
    out.push_back({std::string(lin ? "3.28" : "3.3") + "[" + std::to_string(i) + "]", RegionKind::Active,
                   [c, ii](const State& x) { return PointEval{c.W[ii](x), c.b[ii](c.V(x)), {}, true}; }});
  }
  const auto kk = static_cast<std::size_t>(k);
  out.push_back({lin ? (phi ? "3.37" : "3.29") : (phi ? "3.24" : "3.4"), RegionKind::Active,
                 [c, phi_at, dmax, kk](const State& x) {
                   const auto m = dmax(c.W[kk].gradient(x), x);
                   return PointEval{m.value, -phi_at(x) * c.g(c.V(x)), m.d, m.exact};
                 }});
  out.push_back({lin ? "3.30" : "3.5", RegionKind::Band, [c, dmax](const State& x) {
                   const auto a = dmax(c.W[0].gradient(x), x);
                   const double v = c.V(x);
                   PointEval e{a.value, 0.0, a.d, a.exact};
                   if (!c.mu.identically_zero()) {
                     const auto b = dmax(scaled(c.V.gradient(x), c.mu.derivative(v)), x);
                     e.lhs += b.value;
                     e.exact = e.exact && b.exact;
                   }
                   return e;
                 }});
  if (c.g_tilde) {
    out.push_back({lin ? "3.45" : "3.38", RegionKind::ActivePositive, [c, phi_at, dmax, kk](const State& x) {
                     const auto m = dmax(c.W[kk].gradient(x), x);
                     return PointEval{m.value, -phi_at(x) * (*c.g_tilde)(c.V(x)), m.d, m.exact};
                   }});
  }
  return out;
}

namespace detail {

/// Relative tolerance: numeric equality at scale |lhs| + |rhs| cannot witness strictness.
inline double tolerance(double delta, double lhs, double rhs) {
  return delta * (std::abs(lhs) + std::abs(rhs)) + std::numeric_limits<double>::min();
}

}  // namespace detail

/// Evaluates every pointwise condition on the sample set; statuses per condition.
[[nodiscard]] inline CheckReport check_pointwise(const UncertainSystem& sys, const CertificateView& view,
                                                 const SampleSet& samples, const SamplingOptions& o) {
  const GeneralCertificate& c = view.general;
  const auto conds = pointwise_conditions(sys, view);
  const std::size_t m = samples.states.size();
  std::vector<std::vector<std::optional<PointEval>>> res(conds.size(), std::vector<std::optional<PointEval>>(m));
  parallel_for(m, [&](std::size_t j) {
    const State& x = samples.states[j];
    for (std::size_t ci = 0; ci < conds.size(); ++ci) {
      if (in_region(c, conds[ci].region, x)) res[ci][j] = conds[ci].eval(x);
    }
  });
  CheckReport rep;
  const bool w0_zero = c.W[0].identically_zero;
  for (std::size_t ci = 0; ci < conds.size(); ++ci) {
    CheckEntry e;
    e.id = conds[ci].id;
    e.samples = m;
    e.margin = INFINITY;
    bool exact = true, failed = false;
    double worst_norm = INFINITY;
    for (std::size_t j = 0; j < m; ++j) {
      const auto& r = res[ci][j];
      if (!r) continue;
      ++e.in_region;
      exact = exact && r->exact;
      const double slack = r->rhs - r->lhs;
      e.margin = std::min(e.margin, slack);
      const double tol = detail::tolerance(o.delta, r->lhs, r->rhs);
      const double normalized = slack + tol;
      if (slack < -tol) {
        failed = true;
        if (normalized < worst_norm) {
          worst_norm = normalized;
          e.witness = Witness{samples.states[j], r->d, r->lhs, r->rhs};
        }
      }
    }
    const RegionKind kind = conds[ci].region;
    const bool vacuous_region =
        kind != RegionKind::All && (w0_zero || (kind == RegionKind::ActivePositive && c.k() < 1));
    if (e.in_region == 0) {
      e.margin = 0.0;
      if (vacuous_region) {
        e.status = Status::PassVacuous;
        e.note = kind == RegionKind::ActivePositive && c.k() < 1 ? "region empty for k = 0" : "region reduces to {0}";
      } else {
        e.status = Status::Skipped;
        e.note = "no sample in region; densify (0 of " + std::to_string(m) + ")";
      }
    } else if (failed) {
      e.status = Status::Fail;
    } else {
      e.status = exact ? Status::PassExact : Status::PassSampled;
    }
    rep.entries.push_back(std::move(e));
  }
  if (c.phi) {
    CheckEntry e;
    e.id = "phi>0";
    e.samples = e.in_region = m;
    e.margin = INFINITY;
    for (const auto& x : samples.states) {
      const double v = (*c.phi)(x);
      if (v < e.margin) {
        e.margin = v;
        if (!(v > 0.0)) e.witness = Witness{x, {}, v, 0.0};
      }
    }
    e.status = e.margin > 0.0 ? Status::PassSampled : Status::Fail;
    rep.entries.push_back(std::move(e));
  }
  if (view.envelope) {
    const auto [K1, K2] = *view.envelope;
    CheckEntry e;
    e.id = "envelope";
    e.samples = e.in_region = m;
    e.margin = INFINITY;
    bool failed = false;
    for (const auto& x : samples.states) {
      const double v = c.V(x), r2 = norm2(x);
      const double slack = std::min(v - K1 * r2, K2 * r2 - v);
      const double tol = detail::tolerance(o.delta, v, K2 * r2);
      e.margin = std::min(e.margin, slack);
      if (slack < -tol && !failed) {
        failed = true;
        e.witness = Witness{x, {}, v, r2};
      }
      if (c.phi && (*c.phi)(x) < K1 && !failed) {
        failed = true;
        e.witness = Witness{x, {}, (*c.phi)(x), K1};
        e.note = "phi < K1";
      }
    }
    e.status = failed ? Status::Fail : Status::PassSampled;
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

/// Re-evaluates condition `id` at the witness state; slack rhs - lhs, empty outside the region.
[[nodiscard]] inline std::optional<double> reevaluate(const UncertainSystem& sys, const CertificateView& view,
                                                      const std::string& id, const State& x) {
  for (const auto& pc : pointwise_conditions(sys, view)) {
    if (pc.id != id) continue;
    if (!in_region(view.general, pc.region, x)) return std::nullopt;
    const auto e = pc.eval(x);
    return e.rhs - e.lhs;
  }
  throw ConfigError("unknown pointwise condition " + id);
}

// ---------------------------------------------------------------------------
// Scalar conditions

namespace detail {

inline CheckEntry scalar_entry(std::string id, bool strict) {
  CheckEntry e;
  e.id = std::move(id);
  e.strict = strict;
  e.margin = INFINITY;
  return e;
}

/// Folds one level into an entry; slack is "good minus bad".
inline void fold(CheckEntry& e, double slack, double lhs, double rhs, double level, double delta, bool& failed) {
  ++e.samples;
  ++e.in_region;
  const double tol = tolerance(delta, lhs, rhs);
  const bool bad = e.strict ? !(slack >= tol) : !(slack >= -tol);
  if (slack < e.margin) e.margin = slack;
  if (bad && !failed) {
    failed = true;
    e.witness = Witness{{level}, {}, lhs, rhs};
  }
}

inline void finish(CheckEntry& e, bool failed, Status pass) { e.status = failed ? Status::Fail : pass; }

}  // namespace detail

/// Level grid for scalar conditions: the configured range plus levels down to 1e-8.
[[nodiscard]] inline std::vector<double> scalar_levels(const SamplingOptions& o) {
  std::vector<double> out;
  if (o.v_min > 1e-8) {
    out = log_grid(1e-8, o.v_min, o.near_zero_levels + 1);
    out.pop_back();
  }
  const auto main = o.v_max > o.v_min ? log_grid(o.v_min, o.v_max, o.scalar_levels) : std::vector<double>{o.v_min};
  out.insert(out.end(), main.begin(), main.end());
  return out;
}

[[nodiscard]] inline CheckReport check_scalar(const GeneralCertificate& c, std::size_t n, const SampleSet& samples,
                                              const SamplingOptions& o) {
  CheckReport rep;
  {
    CheckEntry e = detail::scalar_entry("structure", false);
    e.margin = 0.0;
    try {
      validate(c, n);
      e.status = Status::PassSampled;
    } catch (const ConstructionError& err) {
      e.status = Status::Fail;
      e.note = err.what();
    }
    rep.entries.push_back(std::move(e));
  }
  if (!c.r) throw ConfigError(c.name + ": dwell map missing; call complete_dwell first");
  const int k = c.k();
  const auto levels = scalar_levels(o);
  const double kf = factorial(k + 1);

  {
    CheckEntry e = detail::scalar_entry("3.6", true);
    bool failed = false;
    for (double s : levels) {
      const double l = c.lambda(s), gm = c.gamma(s);
      const double lhs = c.c1(l) + c.mu(l), rhs = c.c2(gm) + c.mu(gm);
      detail::fold(e, lhs - rhs, lhs, rhs, s, o.delta, failed);
    }
    detail::finish(e, failed, Status::PassSampled);
    rep.entries.push_back(std::move(e));
  }
  auto b_at = [&c](double s) {
    std::vector<double> v;
    for (const auto& bi : c.b) v.push_back(bi(s));
    return v;
  };
  {
    CheckEntry e = detail::scalar_entry("3.7", true);
    bool failed = false;
    for (double s : levels) {
      const double l = c.lambda(s), r = c.r(s);
      const double lhs = c.c2(l) + c.g(l) * std::pow(r, k + 1) / kf;
      const double rhs = detail::chain_polynomial(b_at(s), 0.0, r);
      detail::fold(e, lhs - rhs, lhs, rhs, s, o.delta, failed);
    }
    detail::finish(e, failed, Status::PassSampled);
    rep.entries.push_back(std::move(e));
  }
  if (!c.min_form()) {
    CheckEntry e = detail::scalar_entry("3.8", false);
    bool failed = false;
    for (double s : levels) {
      const auto bs = b_at(s);
      const double G = c.g(c.lambda(s));
      const double inner =
          maximize_scan([&](double t) { return detail::chain_polynomial(bs, G, t); }, 0.0, c.r(s)).second;
      const double need = std::max(s, c.rho.invert(std::max(inner, 0.0)));
      detail::fold(e, c.gamma(s) - need, c.gamma(s), need, s, o.delta, failed);
    }
    detail::finish(e, failed, Status::PassSampled);
    rep.entries.push_back(std::move(e));
  } else {
    if (!c.g_tilde) throw ConfigError(c.name + ": min-form gamma route needs g_tilde");
    CheckEntry e = detail::scalar_entry("3.39", false);
    bool failed = false;
    const auto sub = log_grid(levels.front(), levels.back(), 200);
    std::vector<double> inner_max(sub.size(), -INFINITY);
    parallel_for(sub.size(), [&](std::size_t li) {
      const double s = sub[li];
      const double G = (*c.g_tilde)(c.lambda(s));
      const double r = c.r(s);
      for (const auto& u : samples.directions) {
        const State x = project_to_level(c.V.value, u, s);
        std::vector<double> w;
        for (const auto& wi : c.W) w.push_back(wi(x));
        const double v = maximize_scan([&](double t) { return detail::chain_polynomial(w, G, t); }, 0.0, r, 64).second;
        inner_max[li] = std::max(inner_max[li], v);
      }
    });
    for (std::size_t li = 0; li < sub.size(); ++li) {
      const double s = sub[li];
      const double need = std::min(s, c.rho.invert(std::max(inner_max[li], 0.0)));
      detail::fold(e, c.gamma(s) - need, c.gamma(s), need, s, o.delta, failed);
    }
    e.note = "min form as printed; levels=" + std::to_string(sub.size());
    detail::finish(e, failed, Status::PassSampled);
    rep.entries.push_back(std::move(e));
  }
  {
    CheckEntry e = detail::scalar_entry("3.9", false);
    const auto near0 = log_grid(1e-8, std::max(1e-5, std::min(1e-2, o.v_min)), o.near_zero_levels);
    std::vector<double> vals;
    try {
      for (double s : near0) vals.push_back(contraction_time_level(c, s) - c.r(s));
      const bool ok = detail::bounded_trend(near0, vals);
      e.status = ok ? Status::PassSampled : Status::Fail;
      e.margin = *std::max_element(vals.begin(), vals.end());
      e.samples = e.in_region = near0.size();
      e.note = ok ? "bounded sampled trend" : "integral grows toward 0";
      if (!ok) e.witness = Witness{{near0.front()}, {}, vals.front(), vals.back()};
    } catch (const QuadratureError& err) {
      e.status = Status::Fail;
      e.margin = -INFINITY;
      e.note = err.what();
    }
    rep.entries.push_back(std::move(e));
  }
  if (c.r_label == "auto") {
    CheckEntry e = detail::scalar_entry("R3.2", false);
    e.status = Status::PassSampled;
    e.margin = 0.0;
    e.note = "limsup ratios bounded on sampled trend";
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

[[nodiscard]] inline CheckReport check_scalar(const LinearRateCertificate& c, std::size_t n, const SampleSet& samples,
                                              const SamplingOptions& o) {
  CheckReport rep;
  {
    CheckEntry e = detail::scalar_entry("constants", false);
    e.margin = 0.0;
    try {
      validate(c, n);
      e.status = Status::PassExact;
    } catch (const ConstructionError& err) {
      e.status = Status::Fail;
      e.note = err.what();
    }
    rep.entries.push_back(std::move(e));
  }
  const int k = c.k();
  const double kf = factorial(k + 1);
  const double r = dwell(c);
  {
    CheckEntry e = detail::scalar_entry("3.31", true);
    bool failed = false;
    const double lhs = (c.c1 + c.mu) * c.lambda, rhs = (c.c2 + c.mu) * c.gamma;
    detail::fold(e, lhs - rhs, lhs, rhs, 1.0, o.delta, failed);
    detail::finish(e, failed, Status::PassExact);
    rep.entries.push_back(std::move(e));
  }
  {
    CheckEntry e = detail::scalar_entry("3.32", true);
    bool failed = false;
    const double lhs = c.c2 * c.lambda + c.g * c.lambda * std::pow(r, k + 1) / kf;
    const double rhs = detail::chain_polynomial(c.b, 0.0, r);
    detail::fold(e, lhs - rhs, lhs, rhs, 1.0, o.delta, failed);
    e.note = "r=" + format_double(r);
    detail::finish(e, failed, Status::PassExact);
    rep.entries.push_back(std::move(e));
  }
  const double exp_term = std::exp((c.b[0] - c.rho) * r);
  if (!c.min_form()) {
    CheckEntry e = detail::scalar_entry("3.33", false);
    bool failed = false;
    const double G = c.g * c.lambda;
    const double max_term =
        maximize_scan([&](double t) { return detail::chain_polynomial(c.b, G, t); }, 0.0, r, 4096).second / c.rho;
    const double need = std::min(exp_term, max_term);
    detail::fold(e, c.gamma - need, c.gamma, need, 1.0, o.delta, failed);
    e.note = "exp-term=" + format_double(exp_term) + " max-term=" + format_double(max_term) +
             " max-form(3.8)=" + format_double(std::max(1.0, max_term));
    detail::finish(e, failed, Status::PassExact);
    rep.entries.push_back(std::move(e));
  } else {
    if (!c.g_tilde) throw ConfigError(c.name + ": min-form gamma route needs g_tilde");
    CheckEntry e = detail::scalar_entry("3.46", false);
    bool failed = false;
    const double G = *c.g_tilde * c.lambda;
    std::vector<double> best(samples.states.size(), -INFINITY);
    parallel_for(samples.states.size(), [&](std::size_t j) {
      const State& x = samples.states[j];
      const double v = c.V(x);
      std::vector<double> w;
      for (const auto& wi : c.W) w.push_back(wi(x) / v);
      best[j] = maximize_scan([&](double t) { return detail::chain_polynomial(w, G, t); }, 0.0, r, 64).second / c.rho;
    });
    const auto it = std::max_element(best.begin(), best.end());
    const double sup_term = *it;
    const double need = std::min(exp_term, sup_term);
    detail::fold(e, c.gamma - need, c.gamma, need, 1.0, o.delta, failed);
    if (failed) e.witness->x = samples.states[static_cast<std::size_t>(it - best.begin())];
    e.samples = e.in_region = samples.states.size();
    e.note = "exp-term=" + format_double(exp_term) + " sup-term=" + format_double(sup_term);
    detail::finish(e, failed, Status::PassSampled);
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Verdict

enum class Route { Thm31, Cor35, Cor39, Thm37, Cor38, Cor310, Remark36Auto };

[[nodiscard]] inline const char* to_string(Route r) {
  switch (r) {
    case Route::Thm31: return "Thm3.1";
    case Route::Cor35: return "Cor3.5";
    case Route::Cor39: return "Cor3.9";
    case Route::Thm37: return "Thm3.7";
    case Route::Cor38: return "Cor3.8";
    case Route::Cor310: return "Cor3.10";
    case Route::Remark36Auto: return "Remark3.6-auto";
  }
  return "?";
}

enum class Conclusion { URGAS, URGES, Inconclusive };

[[nodiscard]] inline const char* to_string(Conclusion c) {
  switch (c) {
    case Conclusion::URGAS: return "URGAS";
    case Conclusion::URGES: return "URGES";
    case Conclusion::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct Verdict {
  Route route = Route::Thm31;
  Conclusion conclusion = Conclusion::Inconclusive;
  std::optional<ExponentialConstants> exponential;
  std::optional<double> T_linear;  // constant contraction time for linear-rate certificates
  CheckReport report;

  /// 0 certified, 1 a FAIL entry, 2 inconclusive without FAIL.
  [[nodiscard]] int exit_code() const {
    if (conclusion != Conclusion::Inconclusive) return 0;
    return report.any(Status::Fail) ? 1 : 2;
  }
};

[[nodiscard]] inline Route route_of(const Certificate& cert) {
  if (const auto* g = std::get_if<GeneralCertificate>(&cert)) {
    if (g->remark36) return Route::Remark36Auto;
    if (g->min_form()) return Route::Cor39;
    return g->phi ? Route::Cor35 : Route::Thm31;
  }
  const auto& l = std::get<LinearRateCertificate>(cert);
  if (l.min_form()) return Route::Cor310;
  return l.phi ? Route::Cor38 : Route::Thm37;
}

/// check_scalar then check_pointwise; URGAS iff every entry passes, URGES for verified linear-rate envelopes.
[[nodiscard]] inline Verdict certify(const UncertainSystem& sys, Certificate cert, const SamplingOptions& o) {
  validate(o);
  Verdict v;
  if (auto* g = std::get_if<GeneralCertificate>(&cert)) {
    if (g->min_form() && !g->g_tilde) throw ConfigError(g->name + ": min-form gamma route needs g_tilde");
    if (g->W.empty() || g->b.size() != g->W.size()) throw ConfigError(g->name + ": chain and b_i sizes differ");
    complete_dwell(*g);
  } else {
    const auto& l = std::get<LinearRateCertificate>(cert);
    if (l.min_form() && !l.g_tilde) throw ConfigError(l.name + ": min-form gamma route needs g_tilde");
    if (l.W.empty() || l.b.size() != l.W.size()) throw ConfigError(l.name + ": chain and b_i sizes differ");
  }
  v.route = route_of(cert);
  const CertificateView view = view_of(cert);
  const SampleSet samples = build_samples(view.general.V, sys.n, o);
  if (const auto* l = std::get_if<LinearRateCertificate>(&cert)) {
    v.report = check_scalar(*l, sys.n, samples, o);
  } else {
    v.report = check_scalar(std::get<GeneralCertificate>(cert), sys.n, samples, o);
  }
  v.report.append(check_pointwise(sys, view, samples, o));
  if (!v.report.all_pass()) return v;
  v.conclusion = Conclusion::URGAS;
  if (const auto* l = std::get_if<LinearRateCertificate>(&cert)) {
    const double T = contraction_time(*l);
    v.T_linear = T;
    if (l->envelope && v.report.find("envelope") && is_pass(v.report.find("envelope")->status)) {
      const double Ma = std::exp((l->b[0] - l->rho) * T);
      auto ec = exponential_constants(std::max(1.0, Ma), T, 1.0 - l->lambda, l->envelope->first,
                                      l->envelope->second);
      if (l->phi) ec.sigma *= l->envelope->first;  // time change with phi >= K1
      v.exponential = ec;
      v.conclusion = Conclusion::URGES;
    }
  }
  return v;
}

/// Lyapunov's direct method as a k = 0 chain: W0 = 0, phi = -max_d grad V f / rho(V).
[[nodiscard]] inline GeneralCertificate auto_complete_classical(const UncertainSystem& sys, const ScalarField& V,
                                                                double rho_rate = 2.0) {
  if (!(rho_rate > 0.0)) throw ConfigError("rho rate must be positive");
  GeneralCertificate c;
  c.name = "remark3.6(" + V.label + ")";
  c.V = V;
  c.W = {ScalarField::zero(sys.n)};
  c.rho = GaugeFunction::linear(rho_rate);
  c.c1 = GaugeFunction::linear(0.75 * rho_rate);
  c.c2 = GaugeFunction::linear(0.25 * rho_rate);  // (1/2) rho(s/2)
  c.g = GaugeFunction::linear(1.0);
  c.lambda = GaugeFunction::linear(std::max(0.5, 1.0 - rho_rate / 8.0));
  c.gamma = GaugeFunction::linear(1.0);
  c.b = {GaugeFunction::constant(0.0)};
  c.r = [](double) { return 1.0; };
  c.r_label = "1";
  c.mu = SmoothScalarMap::zero();
  ScalarField phi;
  phi.label = "-max dV/rho(V)";
  auto sys_copy = sys;
  auto rho = c.rho;
  phi.value = [sys_copy, V, rho](const State& x) {
    const double v = V(x);
    if (v <= 0.0) return 1.0;
    return -max_directional(sys_copy, V.gradient(x), x).value / rho(v);
  };
  phi.gradient = [](const State& x) { return std::vector<double>(x.size(), 0.0); };
  c.phi = phi;
  c.remark36 = true;
  return c;
}

// ---------------------------------------------------------------------------
// Output

namespace detail {

inline std::string join(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ";";
    s += format_double(v[i]);
  }
  return s;
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace detail

/// CSV: condition, status, margin, samples, in_region, witness_x, witness_d, lhs, rhs, note.
inline void write_report_csv(std::ostream& os, const CheckReport& rep) {
  os << "condition,status,margin,samples,in_region,witness_x,witness_d,lhs,rhs,note\n";
  for (const auto& e : rep.entries) {
    os << e.id << "," << to_string(e.status) << "," << format_double(e.margin) << "," << e.samples << ","
       << e.in_region << ",";
    if (e.witness) {
      os << detail::join(e.witness->x) << "," << detail::join(e.witness->d) << "," << format_double(e.witness->lhs)
         << "," << format_double(e.witness->rhs);
    } else {
      os << ",,,";
    }
    os << "," << detail::csv_quote(e.note) << "\n";
  }
}

inline void write_verdict_text(std::ostream& os, const Verdict& v) {
  os << "route: " << to_string(v.route) << "\n";
  os << "conclusion: " << to_string(v.conclusion) << "\n";
  if (v.T_linear) os << "T: " << format_double(*v.T_linear) << "\n";
  if (v.exponential) {
    os << "M: " << format_double(v.exponential->M) << "\n";
    os << "sigma: " << format_double(v.exponential->sigma) << "\n";
  }
  for (const auto& e : v.report.entries) {
    os << "  " << e.id << "  " << to_string(e.status) << "  margin=" << format_double(e.margin);
    if (e.witness) os << "  witness x=(" << detail::join(e.witness->x) << ") d=(" << detail::join(e.witness->d) << ")";
    if (!e.note.empty()) os << "  " << e.note;
    os << "\n";
  }
}

}  // namespace lyapcert
