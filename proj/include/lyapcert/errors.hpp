#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace lyapcert {

/// Argument outside the domain of a map (negative level, sqrt of a negative, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Requested value lies outside the range of a map or outside stored data.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// A constructive step (KL bound, dwell map, certificate factory) could not be completed.
class ConstructionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or contradictory configuration. Carries an optional 1-based line number.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  [[nodiscard]] int line() const noexcept { return line_; }

 private:
  int line_ = 0;
};

/// Adaptive quadrature hit a singular or non-finite integrand.
class QuadratureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Integration could not proceed (step underflow or blow-up). Keeps the last accepted point.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, double last_time, std::vector<double> last_state)
      : std::runtime_error(what), last_time_(last_time), last_state_(std::move(last_state)) {}
  [[nodiscard]] double last_time() const noexcept { return last_time_; }
  [[nodiscard]] const std::vector<double>& last_state() const noexcept { return last_state_; }

 private:
  double last_time_;
  std::vector<double> last_state_;
};

}  // namespace lyapcert
