#pragma once

// Adaptive integration of xdot = f(d(t), x) with restarts at disturbance breakpoints,
// cubic Hermite dense output, minimum search and first crossing.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "lyapcert/errors.hpp"
#include "lyapcert/numeric.hpp"
#include "lyapcert/system.hpp"

namespace lyapcert {

using StateFunctional = std::function<double(const State&)>;

class Trajectory {
 public:
  Trajectory() = default;

  [[nodiscard]] const std::vector<double>& times() const { return times_; }
  [[nodiscard]] const std::vector<State>& states() const { return states_; }
  [[nodiscard]] const DisturbanceSignal& signal() const { return signal_; }
  [[nodiscard]] double tolerance() const { return tol_; }
  [[nodiscard]] double t0() const { return times_.front(); }
  [[nodiscard]] double t_end() const { return times_.back(); }
  [[nodiscard]] std::size_t size() const { return times_.size(); }
  [[nodiscard]] const State& back() const { return states_.back(); }

  /// State at t by cubic Hermite interpolation on the step containing t.
  [[nodiscard]] State at(double t) const {
    if (!(t >= times_.front() - 1e-12 * std::max(1.0, std::abs(times_.front()))) ||
        !(t <= times_.back() + 1e-12 * std::max(1.0, std::abs(times_.back()))))
      throw RangeError("time " + format_double(t) + " outside trajectory range");
    if (times_.size() == 1) return states_.front();
    auto it = std::upper_bound(times_.begin(), times_.end(), t);
    std::size_t k = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
    if (k >= times_.size() - 1) return states_.back();
    const double h = times_[k + 1] - times_[k];
    const double u = (t - times_[k]) / h;
    if (u == 0.0) return states_[k];
    const double h00 = (1 + 2 * u) * (1 - u) * (1 - u), h10 = u * (1 - u) * (1 - u);
    const double h01 = u * u * (3 - 2 * u), h11 = u * u * (u - 1);
    State out(states_[k].size());
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = h00 * states_[k][i] + h10 * h * slope_left_[k][i] + h01 * states_[k + 1][i] +
               h11 * h * slope_right_[k][i];
    }
    return out;
  }

 private:
  friend class Integrator;
  std::vector<double> times_;
  std::vector<State> states_;
  std::vector<State> slope_left_, slope_right_;  // per step k: f at both ends with the step's d
  DisturbanceSignal signal_;
  double tol_ = 0.0;
};

struct IntegrateOptions {
  double tol = 1e-9;
  std::size_t max_steps = 5'000'000;
  double blowup = 1e150;
};

/// Stop rule evaluated at each accepted node (t, x); integration ends at the first true.
using StopRule = std::function<bool(double, const State&)>;

class Integrator {
 public:
  Integrator(const UncertainSystem& sys, IntegrateOptions opt = {}) : sys_(sys), opt_(opt) {}

  [[nodiscard]] Trajectory run(const State& x0, const DisturbanceSignal& signal, double horizon,
                               const StopRule& stop = nullptr) const {
    namespace ode = boost::numeric::odeint;
    if (!(horizon > 0.0)) throw ConfigError("integration horizon must be positive");
    if (!(opt_.tol > 0.0)) throw ConfigError("integration tolerance must be positive");
    if (horizon > signal.horizon() * (1.0 + 1e-12)) throw RangeError("signal does not cover the horizon");
    if (x0.size() != sys_.n) throw ConfigError("initial state has the wrong dimension");

    Trajectory tr;
    tr.signal_ = signal;
    tr.tol_ = opt_.tol;
    tr.times_.push_back(0.0);
    tr.states_.push_back(x0);
    if (stop && stop(0.0, x0)) return tr;

    using Stepper = ode::runge_kutta_dopri5<State>;
    auto stepper = ode::make_controlled<Stepper>(opt_.tol, opt_.tol);
    State x = x0;
    double t = 0.0;
    double dt = std::min(horizon, 0.01);
    std::size_t steps = 0;

    for (std::size_t seg = signal.segment(0.0); t < horizon; ++seg) {
      const Disturbance& d = signal.values()[seg];
      const double seg_end =
          seg + 1 >= signal.values().size() ? horizon : std::min(horizon, signal.segment_end(seg));
      auto rhs = [&](const State& y, State& dy, double) { dy = sys_(d, y); };
      if (t >= seg_end) continue;
      stepper.reset();  // the FSAL derivative cache belongs to the previous d
      while (t < seg_end) {
        const bool clipped = t + dt >= seg_end;
        double trial = clipped ? seg_end - t : dt;
        const double t_before = t;
        const State x_before = x;
        ode::controlled_step_result res = stepper.try_step(rhs, x, t, trial);
        if (res == ode::fail) {
          dt = trial;
          if (dt < 1e-14 * std::max(1.0, std::abs(t)))
            throw DivergenceError("step size underflow at t=" + format_double(t), t, x);
          continue;
        }
        if (clipped && seg_end - t < 1e-13 * std::max(1.0, seg_end)) t = seg_end;
        if (!clipped || trial > dt) dt = trial;
        if (!all_finite(x) || norm(x) > opt_.blowup)
          throw DivergenceError("state blow-up at t=" + format_double(t), t_before, x_before);
        tr.times_.push_back(t);
        tr.states_.push_back(x);
        tr.slope_left_.push_back(sys_(d, x_before));
        tr.slope_right_.push_back(sys_(d, x));
        if (++steps > opt_.max_steps)
          throw DivergenceError("step cap reached at t=" + format_double(t), t, x);
        if (stop && stop(t, x)) return tr;
      }
    }
    return tr;
  }

 private:
  const UncertainSystem& sys_;
  IntegrateOptions opt_;
};

[[nodiscard]] inline Trajectory integrate(const UncertainSystem& sys, const State& x0, const DisturbanceSignal& signal,
                                          double horizon, double tol) {
  return Integrator(sys, {tol}).run(x0, signal, horizon);
}

/// (t_min, V_min) of V along the dense output on [a, b]; earliest time wins ties.
[[nodiscard]] inline std::pair<double, double> min_on_trajectory(const Trajectory& tr, const StateFunctional& V,
                                                                 double a, double b) {
  const double slack = 1e-12 * std::max(1.0, std::abs(tr.t_end()));
  if (a < tr.t0() - slack || b > tr.t_end() + slack || a > b)
    throw RangeError("window outside the trajectory range");
  b = std::min(b, tr.t_end());
  a = std::max(a, tr.t0());
  std::vector<double> grid = linear_grid(a, b, 1001);
  for (double t : tr.times()) {
    if (t > a && t < b) grid.push_back(t);
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  std::size_t best = 0;
  double best_v = V(tr.at(grid[0]));
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double v = V(tr.at(grid[k]));
    if (v < best_v) {
      best_v = v;
      best = k;
    }
  }
  double best_t = grid[best];
  const double lo = grid[best == 0 ? 0 : best - 1];
  const double hi = grid[std::min(best + 1, grid.size() - 1)];
  if (hi > lo) {
    const auto [t, v] = minimize_1d([&](double s) { return V(tr.at(s)); }, lo, hi);
    if (v < best_v) {
      best_v = v;
      best_t = t;
    }
  }
  return {best_t, best_v};
}

/// Earliest time with g(x(t)) >= 0, refined by bisection to 1e-9 * horizon.
[[nodiscard]] inline std::optional<double> first_crossing(const Trajectory& tr, const StateFunctional& g) {
  if (g(tr.states().front()) >= 0.0) return tr.t0();
  if (tr.size() < 2) return std::nullopt;
  std::vector<double> grid = linear_grid(tr.t0(), tr.t_end(), 1001);
  grid.insert(grid.end(), tr.times().begin(), tr.times().end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  const double tol = 1e-9 * std::max(tr.t_end() - tr.t0(), 1e-300);
  for (std::size_t k = 1; k < grid.size(); ++k) {
    if (g(tr.at(grid[k])) >= 0.0) {
      return bisect_predicate([&](double t) { return g(tr.at(t)) >= 0.0; }, grid[k - 1], grid[k], tol);
    }
  }
  return std::nullopt;
}

/// CSV with columns t, x_1..x_n, d_1..d_l[, V].
inline void write_trajectory_csv(std::ostream& os, const Trajectory& tr, const StateFunctional& V = nullptr) {
  const std::size_t n = tr.states().front().size();
  const std::size_t l = tr.signal().values().front().size();
  os << "t";
  for (std::size_t i = 1; i <= n; ++i) os << ",x_" << i;
  for (std::size_t j = 1; j <= l; ++j) os << ",d_" << j;
  if (V) os << ",V";
  os << "\n";
  for (std::size_t k = 0; k < tr.size(); ++k) {
    const double t = tr.times()[k];
    os << format_double(t);
    for (double v : tr.states()[k]) os << "," << format_double(v);
    const auto& d = tr.signal().at(std::min(t, tr.signal().horizon()));
    for (double v : d) os << "," << format_double(v);
    if (V) os << "," << format_double(V(tr.states()[k]));
    os << "\n";
  }
}

}  // namespace lyapcert
