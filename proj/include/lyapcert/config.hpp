#pragma once

// Flat key = value run configuration.
//
// File grammar: one "key = value" per line, '#' starts a comment, blank lines ignored,
// each key at most once. Command-line overrides use "key=value". Unknown keys are rejected.
// List values are ';'-separated. Gauges are written as "<kind> field=value ...":
//   linear coeff=3 | power coeff=1 exp=2 | constant value=0 | pwl points=0:0,1:2,3:5
// and a bare number c means "linear coeff=c".

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lyapcert/errors.hpp"
#include "lyapcert/gauge.hpp"
#include "lyapcert/numeric.hpp"

namespace lyapcert {

enum class KeyType { Real, Positive, NonNegative, Count, Text, Choice };

struct KeySpec {
  std::string name;
  KeyType type;
  std::string fallback;  // empty: no default
  std::vector<std::string> choices;
  std::string help;
};

[[nodiscard]] inline const std::vector<KeySpec>& key_table() {
  using K = KeyType;
  static const std::vector<KeySpec> table = {
      {"system", K::Choice, "example42", {"example41", "example42", "user"}, "built-in system or user"},
      {"f", K::Text, "", {}, "user field components in x1..xn, d1..dl, ';'-separated"},
      {"box", K::Text, "", {}, "user disturbance box lo:hi;lo:hi"},
      {"p", K::NonNegative, "", {}, "disturbance bound (example default if unset)"},
      {"c1", K::Text, "", {}, "c1 (number, or gauge for user general certificates)"},
      {"c2", K::Text, "", {}, "c2 (number, or gauge for user general certificates)"},
      {"lambda", K::Text, "", {}, "lambda (number, or gauge for user general certificates)"},
      {"mu", K::NonNegative, "", {}, "mu constant"},
      {"K", K::Positive, "1", {}, "slope bound |beta(x1)| <= K|x1| for the linear example41 form"},
      {"beta", K::Text, "x1", {}, "example41 beta(x1)"},
      {"beta_tilde", K::Text, "", {}, "example41 odd convex majorant of |beta|"},
      {"form", K::Choice, "general", {"general", "linear"}, "example41 certificate form"},
      {"cert", K::Choice, "classical", {"classical", "linear", "general"}, "user certificate kind"},
      {"V", K::Text, "", {}, "user Lyapunov function"},
      {"W", K::Text, "", {}, "user chain W0;W1;..."},
      {"rho", K::Text, "", {}, "rho gauge"},
      {"g", K::Text, "", {}, "g gauge"},
      {"g_tilde", K::Text, "", {}, "g_tilde gauge (min-form route)"},
      {"gamma", K::Text, "", {}, "gamma gauge"},
      {"b", K::Text, "", {}, "b0;b1;... gauges"},
      {"r", K::Text, "auto", {}, "dwell bound: auto or a constant"},
      {"K1", K::Positive, "", {}, "lower envelope K1|x|^2 <= V"},
      {"K2", K::Positive, "", {}, "upper envelope V <= K2|x|^2"},
      {"route", K::Choice, "auto", {"auto", "max", "min"}, "gamma route"},
      {"rho_rate", K::Positive, "2", {}, "classical auto-completion rate"},
      {"density", K::Count, "10000", {}, "pointwise samples"},
      {"v_min", K::Positive, "0.01", {}, "lowest sampled level"},
      {"v_max", K::Positive, "100", {}, "highest sampled level"},
      {"seed", K::Count, "1", {}, "base seed"},
      {"delta", K::Positive, "1e-09", {}, "relative strictness margin"},
      {"scalar_levels", K::Count, "1000", {}, "levels for scalar conditions"},
      {"near_zero_levels", K::Count, "100", {}, "extra levels below v_min"},
      {"tol", K::Positive, "1e-09", {}, "integrator tolerance"},
      {"horizon", K::Positive, "20", {}, "simulation horizon"},
      {"dwell", K::Positive, "1", {}, "signal dwell time"},
      {"strategy", K::Choice, "vertices", {"vertices", "uniform", "mixed"}, "signal strategy"},
      {"runs", K::Count, "10", {}, "Monte Carlo runs"},
      {"steps", K::Count, "10", {}, "contraction steps per run"},
      {"x0", K::Text, "", {}, "initial state x1;x2;... (random in the radius ball if unset)"},
      {"radius", K::Positive, "10", {}, "radius for random initial states"},
      {"c1_lo", K::Real, "2.5", {}, "optimize: c1 range"},
      {"c1_hi", K::Real, "3", {}, ""},
      {"c2_lo", K::Real, "2.5", {}, "optimize: c2 range"},
      {"c2_hi", K::Real, "3", {}, ""},
      {"lambda_lo", K::Real, "0.99", {}, "optimize: lambda range"},
      {"lambda_hi", K::Real, "1", {}, ""},
      {"resolution", K::Count, "48", {}, "optimize: grid points per axis"},
      {"refinements", K::Count, "3", {}, "optimize: zoom passes"},
      {"p_tol", K::Positive, "1e-07", {}, "optimize: bisection tolerance on p"},
      {"out", K::Text, "lyapcert_out", {}, "output directory"},
  };
  return table;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline bool parse_number(std::string_view s, double& out) {
  const std::string t = trim(s);
  if (t.empty()) return false;
  const char* first = t.data();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, t.data() + t.size(), out);
  return res.ec == std::errc() && res.ptr == t.data() + t.size() && std::isfinite(out);
}

inline double number_or_throw(std::string_view s, const std::string& what, int line = 0) {
  double v = 0.0;
  if (!parse_number(s, v)) throw ConfigError(what + ": '" + std::string(s) + "' is not a finite number", line);
  return v;
}

inline const KeySpec& spec_of(const std::string& key, int line) {
  for (const auto& k : key_table()) {
    if (k.name == key) return k;
  }
  throw ConfigError("unknown key '" + key + "'", line);
}

/// Type check and canonical spelling.
inline std::string canonical(const KeySpec& k, const std::string& raw, int line) {
  const std::string v = trim(raw);
  switch (k.type) {
    case KeyType::Real:
    case KeyType::Positive:
    case KeyType::NonNegative: {
      const double x = number_or_throw(v, k.name, line);
      if (k.type == KeyType::Positive && !(x > 0.0)) throw ConfigError(k.name + " must be positive", line);
      if (k.type == KeyType::NonNegative && !(x >= 0.0)) throw ConfigError(k.name + " must be nonnegative", line);
      return format_double(x);
    }
    case KeyType::Count: {
      std::size_t n = 0;
      const auto res = std::from_chars(v.data(), v.data() + v.size(), n);
      if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError(k.name + ": '" + v + "' is not a nonnegative integer", line);
      return std::to_string(n);
    }
    case KeyType::Choice:
      if (std::find(k.choices.begin(), k.choices.end(), v) == k.choices.end())
        throw ConfigError(k.name + ": '" + v + "' is not one of the allowed values", line);
      return v;
    case KeyType::Text: {
      // collapse runs of blanks so parse(emit(c)) == c
      std::string out;
      bool blank = false;
      for (char ch : v) {
        if (ch == ' ' || ch == '\t') {
          blank = true;
          continue;
        }
        if (blank && !out.empty()) out += ' ';
        blank = false;
        out += ch;
      }
      if (out.empty()) throw ConfigError(k.name + " must not be empty", line);
      return out;
    }
  }
  return v;
}

}  // namespace detail

class RunConfig {
 public:
  [[nodiscard]] static RunConfig parse(std::string_view text) {
    RunConfig c;
    std::istringstream in{std::string(text)};
    std::string line;
    int no = 0;
    while (std::getline(in, line)) {
      ++no;
      const auto hash = line.find('#');
      const std::string body = detail::trim(std::string_view(line).substr(0, hash));
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string::npos) throw ConfigError("expected 'key = value'", no);
      const std::string key = detail::trim(std::string_view(body).substr(0, eq));
      if (c.values_.count(key)) throw ConfigError("duplicate key '" + key + "'", no);
      c.set(key, body.substr(eq + 1), no);
    }
    return c;
  }

  /// Applies "key=value" overrides in order.
  void apply(const std::vector<std::string>& assignments) {
    for (const auto& a : assignments) {
      const auto eq = a.find('=');
      if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + a + "'");
      set(detail::trim(std::string_view(a).substr(0, eq)), a.substr(eq + 1));
    }
  }

  void set(const std::string& key, const std::string& value, int line = 0) {
    values_[key] = detail::canonical(detail::spec_of(key, line), value, line);
  }

  /// Explicitly set keys, sorted, one per line.
  [[nodiscard]] std::string emit() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

  [[nodiscard]] bool has(const std::string& key) const {
    (void)detail::spec_of(key, 0);
    return values_.count(key) > 0;
  }

  [[nodiscard]] std::string text(const std::string& key) const {
    const KeySpec& k = detail::spec_of(key, 0);
    if (auto it = values_.find(key); it != values_.end()) return it->second;
    if (k.fallback.empty()) throw ConfigError("missing required key '" + key + "'");
    return k.fallback;
  }

  [[nodiscard]] double real(const std::string& key) const { return detail::number_or_throw(text(key), key); }
  [[nodiscard]] double real_or(const std::string& key, double fallback) const {
    return has(key) ? real(key) : fallback;
  }
  [[nodiscard]] std::size_t count(const std::string& key) const { return std::stoull(text(key)); }

  [[nodiscard]] std::vector<double> reals(const std::string& key) const {
    std::vector<double> out;
    for (const auto& item : detail::split(text(key), ';')) out.push_back(detail::number_or_throw(item, key));
    return out;
  }
  [[nodiscard]] std::vector<std::string> texts(const std::string& key) const { return detail::split(text(key), ';'); }

  [[nodiscard]] const std::map<std::string, std::string>& values() const noexcept { return values_; }
  friend bool operator==(const RunConfig& a, const RunConfig& b) { return a.values_ == b.values_; }

 private:
  std::map<std::string, std::string> values_;
};

/// Gauge from "<kind> field=value ..." or a bare number.
[[nodiscard]] inline GaugeFunction parse_gauge(const std::string& text, const std::string& what = "gauge") {
  double bare = 0.0;
  if (detail::parse_number(text, bare)) return GaugeFunction::linear(bare);
  std::istringstream in(text);
  std::string kind, token;
  in >> kind;
  std::map<std::string, std::string> fields;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw ConfigError(what + ": expected field=value, got '" + token + "'");
    fields[token.substr(0, eq)] = token.substr(eq + 1);
  }
  auto num = [&](const std::string& f) {
    auto it = fields.find(f);
    if (it == fields.end()) throw ConfigError(what + ": " + kind + " needs " + f + "=");
    return detail::number_or_throw(it->second, what + "." + f);
  };
  auto expect = [&](std::initializer_list<const char*> allowed) {
    for (const auto& [f, v] : fields) {
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return f == a; }))
        throw ConfigError(what + ": unknown field '" + f + "' for " + kind);
    }
  };
  try {
    if (kind == "linear") {
      expect({"coeff"});
      return GaugeFunction::linear(num("coeff"));
    }
    if (kind == "power") {
      expect({"coeff", "exp"});
      return GaugeFunction::power(num("coeff"), num("exp"));
    }
    if (kind == "constant") {
      expect({"value"});
      return GaugeFunction::constant(num("value"));
    }
    if (kind == "pwl") {
      expect({"points"});
      auto it = fields.find("points");
      if (it == fields.end()) throw ConfigError(what + ": pwl needs points=");
      std::vector<std::pair<double, double>> pts;
      for (const auto& pair : detail::split(it->second, ',')) {
        const auto parts = detail::split(pair, ':');
        if (parts.size() != 2) throw ConfigError(what + ": pwl point '" + pair + "' is not x:y");
        pts.emplace_back(detail::number_or_throw(parts[0], what), detail::number_or_throw(parts[1], what));
      }
      return GaugeFunction::pwl(std::move(pts));
    }
  } catch (const DomainError& e) {
    throw ConfigError(what + ": " + e.what());
  }
  throw ConfigError(what + ": unknown gauge kind '" + kind + "'");
}

}  // namespace lyapcert
