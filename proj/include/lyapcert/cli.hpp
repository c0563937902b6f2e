#pragma once

// Command dispatch for the lyapcert tool: certify, simulate, discretize, optimize, report.
// Exit codes: 0 certified/pass, 1 FAIL, 2 inconclusive, 3 configuration error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "lyapcert/checker.hpp"
#include "lyapcert/config.hpp"
#include "lyapcert/discretize.hpp"
#include "lyapcert/examples.hpp"
#include "lyapcert/expr.hpp"
#include "lyapcert/simulate.hpp"
#include "lyapcert/system.hpp"

namespace lyapcert {

inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitInconclusive = 2;
inline constexpr int kExitConfig = 3;

[[nodiscard]] inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> names = {"certify", "simulate", "discretize", "optimize", "report"};
  return names;
}

/// System plus certificate as declared by a config, with any failed parameter precondition.
struct Setup {
  UncertainSystem sys;
  std::optional<Certificate> cert;
  std::optional<CheckEntry> precondition;  // FAIL entry for violated example parameter constraints
};

namespace detail {

inline double example42_default_p() { return std::sqrt(7.0 / 5.0) / 5.0; }

inline ScalarFn scalar_expression(const std::string& text) {
  const Expr e = Expr::parse(text, 1, 0);
  return [e](double x) { return e.eval(&x); };
}

inline double linear_coeff(const RunConfig& cfg, const std::string& key) {
  const auto g = parse_gauge(cfg.text(key), key);
  const auto c = g.linear_coefficient();
  if (!c) throw ConfigError(key + " must be linear for a linear-rate certificate");
  return *c;
}

inline std::vector<ScalarField> chain_fields(const RunConfig& cfg, std::size_t n) {
  std::vector<ScalarField> w;
  for (const auto& t : cfg.texts("W")) w.push_back(ScalarField::from_expression(t, n));
  return w;
}

inline GammaRoute route_from(const RunConfig& cfg) {
  const std::string r = cfg.text("route");
  if (r == "max") return GammaRoute::MaxForm;
  if (r == "min") return GammaRoute::MinForm;
  return GammaRoute::Auto;
}

inline Setup setup_example41(const RunConfig& cfg) {
  Setup s;
  Example41Input in;
  in.p = cfg.real_or("p", 1.0);
  in.c1 = cfg.has("c1") ? cfg.real("c1") : 0.5;
  in.lambda = cfg.has("lambda") ? cfg.real("lambda") : 0.5;
  in.label = cfg.text("beta");
  in.beta = scalar_expression(in.label);
  if (cfg.has("beta_tilde")) in.beta_tilde = scalar_expression(cfg.text("beta_tilde"));
  s.sys = example41_system(in.p, in.beta, in.label);
  if (cfg.text("form") == "linear") {
    s.cert = build_example41_linear(in.p, cfg.real("K"), in.c1, in.lambda);
  } else {
    s.cert = build_example41(in);
  }
  return s;
}

inline Setup setup_example42(const RunConfig& cfg) {
  Setup s;
  Example42Params P;
  P.p = cfg.real_or("p", example42_default_p());
  if (cfg.has("c1")) P.c1 = cfg.real("c1");
  if (cfg.has("c2")) P.c2 = cfg.real("c2");
  if (cfg.has("lambda")) P.lambda = cfg.real("lambda");
  if (cfg.has("mu")) P.mu = cfg.real("mu");
  s.sys = example42_system(P.p);
  try {
    check_example42(P);
  } catch (const ConstructionError& e) {
    CheckEntry entry;
    const double floor = example42_c2_floor(P.p);
    const std::string msg = e.what();
    if (msg.find("(4.12)") != std::string::npos) {
      entry.id = "4.12";
      const double bound = floor < 3.0 ? P.c2 : 3.0;
      entry.margin = bound - floor;
      entry.witness = Witness{{}, {}, floor, bound};
    } else {
      entry.id = "parameters";
      entry.margin = -1.0;
    }
    entry.status = Status::Fail;
    entry.strict = true;
    entry.note = msg;
    s.precondition = entry;
  }
  // witnesses for the pointwise conditions come from the same constants without the parameter checks
  try {
    s.cert = build_example42_unchecked(P);
  } catch (const DomainError& e) {
    if (!s.precondition) throw ConfigError(e.what());
  }
  return s;
}

inline UncertainSystem user_system(const RunConfig& cfg) {
  std::vector<Interval> box;
  if (cfg.has("box")) {
    for (const auto& item : cfg.texts("box")) {
      const auto parts = split(item, ':');
      if (parts.size() != 2) throw ConfigError("box: '" + item + "' is not lo:hi");
      box.push_back({number_or_throw(parts[0], "box"), number_or_throw(parts[1], "box")});
    }
  }
  return system_from_expressions(cfg.texts("f"), std::move(box), "user");
}

inline Setup setup_user(const RunConfig& cfg) {
  Setup s;
  s.sys = user_system(cfg);
  const std::size_t n = s.sys.n;
  if (!cfg.has("V")) return s;
  const ScalarField V = ScalarField::from_expression(cfg.text("V"), n);
  const std::string kind = cfg.text("cert");
  if (kind == "classical") {
    s.cert = auto_complete_classical(s.sys, V, cfg.real("rho_rate"));
    return s;
  }
  if (kind == "linear") {
    LinearRateCertificate c;
    c.name = "user-linear";
    c.V = V;
    c.W = chain_fields(cfg, n);
    c.rho = linear_coeff(cfg, "rho");
    c.c1 = linear_coeff(cfg, "c1");
    c.c2 = linear_coeff(cfg, "c2");
    c.g = linear_coeff(cfg, "g");
    c.gamma = linear_coeff(cfg, "gamma");
    c.lambda = linear_coeff(cfg, "lambda");
    c.mu = cfg.real_or("mu", 0.0);
    for (const auto& t : cfg.texts("b")) {
      const auto bi = parse_gauge(t, "b").linear_coefficient();
      if (!bi) throw ConfigError("b must be linear for a linear-rate certificate");
      c.b.push_back(*bi);
    }
    if (cfg.text("r") != "auto") c.r = number_or_throw(cfg.text("r"), "r");
    if (cfg.has("g_tilde")) c.g_tilde = linear_coeff(cfg, "g_tilde");
    if (cfg.has("K1") != cfg.has("K2")) throw ConfigError("K1 and K2 must be given together");
    if (cfg.has("K1")) c.envelope = std::make_pair(cfg.real("K1"), cfg.real("K2"));
    c.gamma_route = route_from(cfg);
    validate(c, n);
    s.cert = c;
    return s;
  }
  GeneralCertificate c;
  c.name = "user-general";
  c.V = V;
  c.W = chain_fields(cfg, n);
  c.rho = parse_gauge(cfg.text("rho"), "rho");
  c.c1 = parse_gauge(cfg.text("c1"), "c1");
  c.c2 = parse_gauge(cfg.text("c2"), "c2");
  c.g = parse_gauge(cfg.text("g"), "g");
  c.lambda = parse_gauge(cfg.text("lambda"), "lambda");
  c.gamma = parse_gauge(cfg.text("gamma"), "gamma");
  for (const auto& t : cfg.texts("b")) c.b.push_back(parse_gauge(t, "b"));
  if (cfg.has("g_tilde")) c.g_tilde = parse_gauge(cfg.text("g_tilde"), "g_tilde");
  if (cfg.has("mu")) c.mu = SmoothScalarMap::linear(cfg.real("mu"));
  if (cfg.text("r") != "auto") {
    const double r = number_or_throw(cfg.text("r"), "r");
    c.r = [r](double) { return r; };
    c.r_label = format_double(r);
  }
  c.gamma_route = route_from(cfg);
  validate(c, n);
  s.cert = c;
  return s;
}

inline SamplingOptions sampling_from(const RunConfig& cfg) {
  SamplingOptions o;
  o.density = cfg.count("density");
  o.v_min = cfg.real("v_min");
  o.v_max = cfg.real("v_max");
  o.seed = cfg.count("seed");
  o.delta = cfg.real("delta");
  o.scalar_levels = cfg.count("scalar_levels");
  o.near_zero_levels = cfg.count("near_zero_levels");
  validate(o);
  return o;
}

inline SignalStrategy strategy_from(const RunConfig& cfg) {
  const std::string s = cfg.text("strategy");
  if (s == "uniform") return SignalStrategy::Uniform;
  if (s == "mixed") return SignalStrategy::Mixed;
  return SignalStrategy::Vertices;
}

inline std::filesystem::path output_dir(const RunConfig& cfg) {
  std::filesystem::path dir(cfg.text("out"));
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << content;
}

/// Initial states: the configured x0 for every run, or seeded uniform points in the radius ball.
inline std::vector<State> initial_states(const RunConfig& cfg, std::size_t n, std::size_t runs) {
  if (cfg.has("x0")) {
    const auto x0 = cfg.reals("x0");
    if (x0.size() != n) throw ConfigError("x0 has " + std::to_string(x0.size()) + " entries, system has " +
                                          std::to_string(n));
    return std::vector<State>(runs, x0);
  }
  std::mt19937_64 rng(cfg.count("seed"));
  std::vector<State> out;
  for (std::size_t k = 0; k < runs; ++k) out.push_back(random_in_ball(n, cfg.real("radius"), rng));
  return out;
}

inline StateFunctional value_of(const Setup& s) {
  if (!s.cert) return nullptr;
  return std::visit([](const auto& c) { return StateFunctional(c.V.value); }, *s.cert);
}

inline int certify_command(const RunConfig& cfg, const Setup& s, std::ostream& out) {
  if (!s.cert) throw ConfigError("certify needs a certificate (set V for user systems)");
  Verdict v = certify(s.sys, *s.cert, sampling_from(cfg));
  if (s.precondition) {
    v.report.entries.insert(v.report.entries.begin(), *s.precondition);
    v.conclusion = Conclusion::Inconclusive;
    v.exponential.reset();
  }
  std::ostringstream csv, text;
  write_report_csv(csv, v.report);
  text << "system: " << s.sys.name << "\n";
  write_verdict_text(text, v);
  const auto dir = output_dir(cfg);
  write_file(dir / "report.csv", csv.str());
  write_file(dir / "verdict.txt", text.str());
  out << text.str();
  return v.exit_code();
}

inline int simulate_command(const RunConfig& cfg, const Setup& s, std::ostream& out) {
  const std::size_t runs = cfg.count("runs");
  if (runs == 0) throw ConfigError("runs must be positive");
  const auto x0s = initial_states(cfg, s.sys.n, runs);
  const double horizon = cfg.real("horizon");
  const StateFunctional V = value_of(s);
  const auto dir = output_dir(cfg);
  int code = kExitPass;
  for (std::size_t k = 0; k < runs; ++k) {
    const auto signal = sample_signal(s.sys, horizon, cfg.real("dwell"), strategy_from(cfg), cfg.count("seed") + k);
    std::ostringstream csv;
    try {
      const Trajectory tr = integrate(s.sys, x0s[k], signal, horizon, {cfg.real("tol")});
      write_trajectory_csv(csv, tr, V);
      out << "trajectory " << k << ": " << tr.size() << " nodes, t_end=" << format_double(tr.t_end()) << "\n";
    } catch (const DivergenceError& e) {
      out << "trajectory " << k << ": " << e.what() << "\n";
      code = kExitFail;
      continue;
    }
    write_file(dir / ("trajectory_" + std::to_string(k) + ".csv"), csv.str());
  }
  return code;
}

inline int discretize_command(const RunConfig& cfg, const Setup& s, std::ostream& out) {
  if (!s.cert) throw ConfigError("discretize needs a certificate (set V for user systems)");
  const std::size_t runs = cfg.count("runs"), steps = cfg.count("steps");
  if (runs == 0 || steps == 0) throw ConfigError("runs and steps must be positive");
  StateFunctional V;
  TimeMap T;
  GaugeFunction q;
  if (const auto* l = std::get_if<LinearRateCertificate>(&*s.cert)) {
    V = l->V.value;
    const double Tc = contraction_time(*l);
    T = [Tc](const State&) { return Tc; };
    q = GaugeFunction::linear(1.0 - l->lambda);
  } else {
    auto g = std::get<GeneralCertificate>(*s.cert);
    complete_dwell(g);
    V = g.V.value;
    T = [g](const State& x) { return contraction_time(g, x); };
    q = decrement_of(g.lambda);
  }
  const auto x0s = initial_states(cfg, s.sys.n, runs);
  std::vector<ContractionRun> all(runs);
  parallel_for(runs, [&](std::size_t k) {
    // the signal has to cover every contraction interval; 4 T(x0) per step leaves room for slower later steps
    const double span = std::max(cfg.real("horizon"), 4.0 * static_cast<double>(steps) * T(x0s[k]));
    try {
      const auto signal = sample_signal(s.sys, span, cfg.real("dwell"), strategy_from(cfg), cfg.count("seed") + k);
      all[k] = run_contraction(s.sys, V, T, q, x0s[k], signal, steps, {cfg.real("tol"), std::nullopt});
    } catch (const std::exception& e) {
      all[k].x0 = x0s[k];
      all[k].V = {V(x0s[k])};
      all[k].tau = {0.0};
      all[k].diverged = true;
      all[k].failure = e.what();
    }
  });
  const auto dir = output_dir(cfg);
  std::size_t passed = 0;
  for (std::size_t k = 0; k < runs; ++k) {
    std::ostringstream csv;
    write_run_csv(csv, all[k]);
    write_file(dir / ("run_" + std::to_string(k) + ".csv"), csv.str());
    if (all[k].all_pass()) ++passed;
    if (!all[k].failure.empty()) out << "run " << k << ": " << all[k].failure << "\n";
  }
  const EnvelopeReport env = decay_envelope(all, q);
  std::ostringstream csv;
  csv << "run,i,V_i,bound,ok\n";
  for (std::size_t k = 0; k < runs; ++k) {
    const auto bound = env.sigma.orbit(all[k].V.front(), all[k].V.size());
    for (std::size_t i = 0; i < all[k].V.size(); ++i) {
      csv << k << "," << i << "," << format_double(all[k].V[i]) << "," << format_double(bound[i]) << ","
          << (all[k].V[i] <= bound[i] ? 1 : 0) << "\n";
    }
  }
  write_file(dir / "envelope.csv", csv.str());
  out << "contraction runs passed: " << passed << "/" << runs << "\n";
  out << "envelope violations: " << env.violations.size() << ", max V_i/sigma(V_0,i) = " << format_double(env.max_ratio)
      << "\n";
  return passed == runs && env.conforms() ? kExitPass : kExitFail;
}

inline int optimize_command(const RunConfig& cfg, std::ostream& out) {
  SearchOptions o;
  o.c1 = {cfg.real("c1_lo"), cfg.real("c1_hi")};
  o.c2 = {cfg.real("c2_lo"), cfg.real("c2_hi")};
  o.lambda = {cfg.real("lambda_lo"), cfg.real("lambda_hi")};
  o.resolution = cfg.count("resolution");
  o.refinements = cfg.count("refinements");
  o.p_tol = cfg.real("p_tol");
  const SearchResult res = maximize_p(o);
  std::ostringstream csv;
  csv << "p,c1,c2,lambda,margin,feasible\n";
  for (const auto& r : res.frontier) {
    csv << format_double(r.p) << "," << format_double(r.c1) << "," << format_double(r.c2) << ","
        << format_double(r.lambda) << "," << format_double(r.margin) << "," << (r.feasible ? 1 : 0) << "\n";
  }
  write_file(output_dir(cfg) / "frontier.csv", csv.str());
  out << "p_best: " << format_double(res.p_best) << "\n";
  if (res.p_best > 0.0) {
    out << "c1: " << format_double(res.best.c1) << "\nc2: " << format_double(res.best.c2)
        << "\nlambda: " << format_double(res.best.lambda) << "\nmargin: " << format_double(res.best.margin) << "\n";
  }
  return res.p_best > 0.0 ? kExitPass : kExitInconclusive;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream f(path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(f, line);) lines.push_back(line);
  return lines;
}

/// Counts of a CSV column's values, header skipped.
inline std::map<std::string, std::size_t> column_counts(const std::vector<std::string>& lines, std::size_t col) {
  std::map<std::string, std::size_t> counts;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split(lines[i], ',');
    if (col < cells.size() && !cells[col].empty()) ++counts[cells[col]];
  }
  return counts;
}

inline int report_command(const RunConfig& cfg, std::ostream& out) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.text("out"));
  if (!fs::is_directory(dir)) throw ConfigError("no artifacts: " + dir.string() + " is not a directory");
  std::vector<fs::path> runs, trajectories;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("run_", 0) == 0) runs.push_back(e.path());
    if (name.rfind("trajectory_", 0) == 0) trajectories.push_back(e.path());
  }
  std::sort(runs.begin(), runs.end());
  std::sort(trajectories.begin(), trajectories.end());
  std::ostringstream s;
  int code = kExitPass;
  bool any = false;
  if (fs::exists(dir / "verdict.txt")) {
    any = true;
    const auto lines = read_lines(dir / "verdict.txt");
    s << "[certify]\n";
    for (const auto& l : lines) {
      if (l.rfind("  ", 0) != 0) s << l << "\n";
    }
    for (const auto& [status, n] : column_counts(read_lines(dir / "report.csv"), 1)) {
      s << status << ": " << n << "\n";
      if (status == "FAIL") code = kExitFail;
    }
    for (const auto& l : lines) {
      if (l.rfind("conclusion: inconclusive", 0) == 0 && code == kExitPass) code = kExitInconclusive;
    }
  }
  if (!trajectories.empty()) {
    any = true;
    s << "[simulate]\ntrajectories: " << trajectories.size() << "\n";
  }
  if (!runs.empty()) {
    any = true;
    std::size_t passed = 0;
    for (const auto& r : runs) {
      const auto counts = column_counts(read_lines(r), 5);
      if (!counts.count("0")) ++passed;
    }
    const auto env = column_counts(read_lines(dir / "envelope.csv"), 4);
    const std::size_t viol = env.count("0") ? env.at("0") : 0;
    s << "[discretize]\nruns passing: " << passed << "/" << runs.size() << "\nenvelope violations: " << viol << "\n";
    if (passed != runs.size() || viol) code = kExitFail;
  }
  if (fs::exists(dir / "frontier.csv")) {
    any = true;
    const auto lines = read_lines(dir / "frontier.csv");
    std::string best;
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const auto cells = split(lines[i], ',');
      if (cells.size() == 6 && cells[5] == "1" && (best.empty() || std::stod(cells[0]) > std::stod(best))) best = cells[0];
    }
    s << "[optimize]\nprobes: " << (lines.empty() ? 0 : lines.size() - 1) << "\np_best: " << (best.empty() ? "0" : best)
      << "\n";
  }
  if (!any) throw ConfigError("no artifacts found in " + dir.string());
  write_file(dir / "summary.txt", s.str());
  out << s.str();
  return code;
}

}  // namespace detail

[[nodiscard]] inline Setup build_setup(const RunConfig& cfg) {
  const std::string sys = cfg.text("system");
  if (sys == "example41") return detail::setup_example41(cfg);
  if (sys == "example42") return detail::setup_example42(cfg);
  return detail::setup_user(cfg);
}

/// Runs one command; configuration problems are reported on err with exit 3.
[[nodiscard]] inline int run(const std::string& command, const RunConfig& cfg, std::ostream& out = std::cout,
                             std::ostream& err = std::cerr) {
  try {
    if (command == "optimize") return detail::optimize_command(cfg, out);
    if (command == "report") return detail::report_command(cfg, out);
    if (command != "certify" && command != "simulate" && command != "discretize")
      throw ConfigError("unknown command '" + command + "'");
    const Setup s = build_setup(cfg);
    if (command == "certify") return detail::certify_command(cfg, s, out);
    if (command == "simulate") return detail::simulate_command(cfg, s, out);
    return detail::discretize_command(cfg, s, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ConstructionError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace lyapcert
