#pragma once

// Small numerical toolbox shared by all modules: vector helpers, grids,
// root bracketing, 1-D minimisation, quadrature, deterministic RNG and
// a deterministic parallel loop.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "lyapcert/errors.hpp"

namespace lyapcert {

using State = std::vector<double>;
using Disturbance = std::vector<double>;

[[nodiscard]] inline double dot(const State& a, const State& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

[[nodiscard]] inline double norm2(const State& a) { return dot(a, a); }
[[nodiscard]] inline double norm(const State& a) { return std::sqrt(norm2(a)); }

[[nodiscard]] inline State scaled(const State& a, double k) {
  State out(a);
  for (auto& v : out) v *= k;
  return out;
}

[[nodiscard]] inline double max_abs_diff(const State& a, const State& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

[[nodiscard]] inline bool all_finite(const State& a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

[[nodiscard]] inline double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

/// Logarithmically spaced grid with `count` points from lo to hi inclusive.
[[nodiscard]] inline std::vector<double> log_grid(double lo, double hi, std::size_t count) {
  std::vector<double> g;
  if (count == 0) return g;
  if (count == 1) return {lo};
  g.reserve(count);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < count; ++i) {
    g.push_back(std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1)));
  }
  g.front() = lo;
  g.back() = hi;
  return g;
}

[[nodiscard]] inline std::vector<double> linear_grid(double lo, double hi, std::size_t count) {
  std::vector<double> g;
  if (count == 0) return g;
  if (count == 1) return {lo};
  g.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    g.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  g.back() = hi;
  return g;
}

/// Root of f on [lo, hi] given f(lo) and f(hi) of opposite sign (TOMS 748).
/// Returns the bracket end where f has the sign of f(hi).
template <class F>
[[nodiscard]] double bracket_root(F&& f, double lo, double hi, double flo, double fhi,
                                  int bits = std::numeric_limits<double>::digits - 1) {
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  boost::uintmax_t iters = 400;
  const auto res = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi,
                                                     boost::math::tools::eps_tolerance<double>(bits),
                                                     iters);
  const double a = res.first, b = res.second;
  // keep the end on the same side as hi so "first time predicate holds" semantics are preserved
  const double fb = f(b);
  if ((fb >= 0.0) == (fhi >= 0.0)) return b;
  return a;
}

/// Plain bisection for a predicate that is false at lo and true at hi.
/// Returns a point where the predicate holds, within `tol` of the switch.
template <class P>
[[nodiscard]] double bisect_predicate(P&& holds, double lo, double hi, double tol) {
  for (int it = 0; it < 2000 && hi - lo > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (holds(mid)) hi = mid; else lo = mid;
  }
  return hi;
}

/// Local minimum of f on [lo, hi] (Brent: golden section with parabolic steps).
template <class F>
[[nodiscard]] std::pair<double, double> minimize_1d(F&& f, double lo, double hi) {
  boost::uintmax_t iters = 200;
  return boost::math::tools::brent_find_minima(f, lo, hi, std::numeric_limits<double>::digits / 2,
                                               iters);
}

/// max of f on [lo, hi]: dense scan followed by Brent refinement around the best node.
template <class F>
[[nodiscard]] std::pair<double, double> maximize_scan(F&& f, double lo, double hi,
                                                      std::size_t nodes = 256) {
  if (!(hi > lo)) return {lo, f(lo)};
  double best_t = lo, best_v = f(lo);
  std::size_t best_i = 0;
  for (std::size_t i = 1; i < nodes; ++i) {
    const double t = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(nodes - 1);
    const double v = f(t);
    if (v > best_v) {
      best_v = v;
      best_t = t;
      best_i = i;
    }
  }
  const double h = (hi - lo) / static_cast<double>(nodes - 1);
  const double a = std::max(lo, lo + h * (static_cast<double>(best_i) - 1.0));
  const double b = std::min(hi, lo + h * (static_cast<double>(best_i) + 1.0));
  if (b > a) {
    const auto [t, negv] = minimize_1d([&](double x) { return -f(x); }, a, b);
    if (-negv > best_v) {
      best_v = -negv;
      best_t = t;
    }
  }
  return {best_t, best_v};
}

/// Adaptive Gauss-Kronrod integral of f over [a, b].
template <class F>
[[nodiscard]] double integrate_adaptive(F&& f, double a, double b, double rel_tol = 1e-12) {
  if (a == b) return 0.0;
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 21>::integrate(f, a, b, 15, rel_tol,
                                                                                &err);
  if (!std::isfinite(v)) throw QuadratureError("non-finite integral");
  return v;
}

// ---------------------------------------------------------------------------
// Deterministic randomness

/// 64-bit mixer used for counter-based streams.
[[nodiscard]] constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Uniform double in [0, 1) built from the top 53 bits, identical on every platform.
[[nodiscard]] inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

[[nodiscard]] inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Radical inverse in the given prime base (Halton coordinate).
[[nodiscard]] inline double radical_inverse(std::uint64_t index, unsigned base) {
  double inv = 1.0 / base, f = inv, r = 0.0;
  while (index > 0) {
    r += f * static_cast<double>(index % base);
    index /= base;
    f *= inv;
  }
  return r;
}

[[nodiscard]] inline unsigned nth_prime(std::size_t k) {
  static constexpr unsigned primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31,
                                        37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79};
  return primes[k % (sizeof(primes) / sizeof(primes[0]))];
}

/// Standard normal quantile.
[[nodiscard]] inline double normal_quantile(double u) {
  u = std::clamp(u, 1e-15, 1.0 - 1e-15);
  return std::sqrt(2.0) * boost::math::erf_inv(2.0 * u - 1.0);
}

// ---------------------------------------------------------------------------
// Parallel loop. Results are written by index so output never depends on scheduling.

[[nodiscard]] inline unsigned worker_count() {
  if (const char* env = std::getenv("LYAPCERT_WORKERS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : hw;
}

template <class F>
void parallel_for(std::size_t count, F&& body) {
  const unsigned workers = std::min<std::size_t>(worker_count(), std::max<std::size_t>(count, 1));
  if (workers <= 1 || count < 64) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------
// Formatting

/// Shortest round-trip decimal representation of v.
[[nodiscard]] inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace lyapcert
