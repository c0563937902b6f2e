#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "lyapcert/cli.hpp"

using namespace lyapcert;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("lyapcert_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

RunConfig light(const fs::path& out, std::vector<std::string> extra) {
  RunConfig c;
  c.apply({"density=2500", "scalar_levels=300", "near_zero_levels=40", "out=" + out.string()});
  c.apply(extra);
  return c;
}

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(const std::string& command, const RunConfig& cfg) {
  std::ostringstream out, err;
  const int code = run(command, cfg, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST(Config, ParseEmitRoundTrip) {
  const auto c = RunConfig::parse("# comment\nsystem = example42\np = 0.25  # inline\ntol=1e-10\nf = -x1 ;  -x2\n");
  EXPECT_EQ(c.text("system"), "example42");
  EXPECT_DOUBLE_EQ(c.real("p"), 0.25);
  EXPECT_DOUBLE_EQ(c.real("tol"), 1e-10);
  EXPECT_EQ(c.texts("f").size(), 2u);
  const auto again = RunConfig::parse(c.emit());
  EXPECT_EQ(again, c);
  EXPECT_EQ(again.emit(), c.emit());
}

TEST(Config, FallbacksAndOverrides) {
  RunConfig c;
  EXPECT_EQ(c.text("system"), "example42");
  EXPECT_EQ(c.count("density"), 10000u);
  EXPECT_DOUBLE_EQ(c.real("delta"), 1e-9);
  c.apply({"density=500", "strategy=mixed"});
  EXPECT_EQ(c.count("density"), 500u);
  EXPECT_EQ(c.text("strategy"), "mixed");
  EXPECT_THROW((void)c.text("V"), ConfigError);
}

TEST(Config, ErrorsCarryLineNumbers) {
  try {
    (void)RunConfig::parse("system = example42\nbogus = 1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
  try {
    (void)RunConfig::parse("p = 0.1\n\np = 0.2\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 3);
  }
  EXPECT_THROW((void)RunConfig::parse("no equals sign\n"), ConfigError);
}

TEST(Config, ValueTypesValidated) {
  RunConfig c;
  EXPECT_THROW(c.set("tol", "-1"), ConfigError);
  EXPECT_THROW(c.set("p", "-0.5"), ConfigError);
  EXPECT_THROW(c.set("runs", "2.5"), ConfigError);
  EXPECT_THROW(c.set("strategy", "random"), ConfigError);
  EXPECT_THROW(c.set("density", "abc"), ConfigError);
  EXPECT_NO_THROW(c.set("p", "0"));
}

TEST(Config, ParseGauge) {
  EXPECT_DOUBLE_EQ(parse_gauge("2.5")(2.0), 5.0);
  EXPECT_DOUBLE_EQ(parse_gauge("linear coeff=3")(2.0), 6.0);
  EXPECT_DOUBLE_EQ(parse_gauge("power coeff=2 exp=3")(2.0), 16.0);
  EXPECT_DOUBLE_EQ(parse_gauge("constant value=4")(9.0), 4.0);
  EXPECT_DOUBLE_EQ(parse_gauge("pwl points=0:0,1:2,3:3")(2.0), 2.5);
  EXPECT_THROW((void)parse_gauge("power coeff=2"), ConfigError);
  EXPECT_THROW((void)parse_gauge("linear slope=2"), ConfigError);
  EXPECT_THROW((void)parse_gauge("cubic coeff=1"), ConfigError);
}

TEST(Cli, DefaultPointCertifies) {
  const auto dir = scratch("default");
  const auto r = run_cli("certify", light(dir, {}));
  EXPECT_EQ(r.code, kExitPass) << r.out << r.err;
  EXPECT_NE(r.out.find("URGES"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "report.csv"));
  EXPECT_TRUE(fs::exists(dir / "verdict.txt"));
}

TEST(Cli, InfeasibleBoxFailsWithWitness) {
  const auto dir = scratch("infeasible");
  const auto r = run_cli("certify", light(dir, {"p=0.75"}));
  EXPECT_EQ(r.code, kExitFail);
  const std::string csv = slurp(dir / "report.csv");
  EXPECT_NE(csv.find("4.12,FAIL"), std::string::npos);
  std::istringstream in(csv);
  bool witness = false;
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("3.29,FAIL", 0) == 0) witness = line.find(",,,") == std::string::npos;
  }
  EXPECT_TRUE(witness) << csv;
}

TEST(Cli, ReportsAreByteIdentical) {
  const auto a = scratch("repro_a"), b = scratch("repro_b");
  ASSERT_EQ(run_cli("certify", light(a, {"p=0.75"})).code, kExitFail);
  ASSERT_EQ(run_cli("certify", light(b, {"p=0.75"})).code, kExitFail);
  EXPECT_EQ(slurp(a / "report.csv"), slurp(b / "report.csv"));
  EXPECT_EQ(slurp(a / "verdict.txt"), slurp(b / "verdict.txt"));
}

TEST(Cli, ConfigErrorsExitThree) {
  const auto dir = scratch("config");
  RunConfig c = light(dir, {});
  c.set("system", "user");
  const auto r = run_cli("certify", c);  // no f
  EXPECT_EQ(r.code, kExitConfig);
  EXPECT_NE(r.err.find("config error"), std::string::npos);
  EXPECT_EQ(run_cli("report", light(scratch("empty"), {})).code, kExitConfig);
  EXPECT_EQ(run_cli("certify", light(dir, {"system=example42", "c1=3.5"})).code, kExitConfig);
}

TEST(Cli, UserSystem) {
  const auto dir = scratch("user");
  const auto r = run_cli("certify", light(dir, {"system=user", "f=-x1 + d1*x2; -x2", "box=-0.5:0.5", "V=x1^2 + x2^2"}));
  EXPECT_EQ(r.code, kExitPass) << r.out << r.err;
  EXPECT_NE(r.out.find("URGAS"), std::string::npos);
}

TEST(Cli, SimulateWritesTrajectories) {
  const auto dir = scratch("simulate");
  const auto r = run_cli("simulate", light(dir, {"runs=3", "horizon=5"}));
  EXPECT_EQ(r.code, kExitPass) << r.err;
  for (int k = 0; k < 3; ++k) EXPECT_TRUE(fs::exists(dir / ("trajectory_" + std::to_string(k) + ".csv")));
}

TEST(Cli, DiscretizeExample41) {
  const auto dir = scratch("discretize");
  const auto r = run_cli("discretize", light(dir, {"system=example41", "runs=5", "steps=5"}));
  EXPECT_EQ(r.code, kExitPass) << r.out << r.err;
  EXPECT_NE(r.out.find("5/5"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "envelope.csv"));
  const auto rep = run_cli("report", light(dir, {}));
  EXPECT_EQ(rep.code, kExitPass);
  EXPECT_NE(rep.out.find("runs passing: 5/5"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "summary.txt"));
}

TEST(Cli, OptimizeWritesFrontier) {
  const auto dir = scratch("optimize");
  const auto r = run_cli("optimize", light(dir, {"resolution=12", "refinements=1", "p_tol=1e-4"}));
  EXPECT_EQ(r.code, kExitPass) << r.err;
  const std::string csv = slurp(dir / "frontier.csv");
  EXPECT_EQ(csv.rfind("p,c1,c2,lambda,margin,feasible\n", 0), 0u);
  EXPECT_NE(r.out.find("p_best"), std::string::npos);
}

TEST(Cli, ReportAfterCertify) {
  const auto dir = scratch("report");
  ASSERT_EQ(run_cli("certify", light(dir, {"p=0.75"})).code, kExitFail);
  const auto r = run_cli("report", light(dir, {}));
  EXPECT_EQ(r.code, kExitFail);
  EXPECT_NE(r.out.find("FAIL"), std::string::npos);
}
