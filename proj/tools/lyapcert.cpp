// lyapcert <certify|simulate|discretize|optimize|report> [--config FILE] [--out DIR] [SYSTEM] [key=value ...]

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lyapcert/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Matrosov-chain certificate checker for uncertain systems"};
  std::string command, config_path, out_dir;
  std::vector<std::string> rest;
  app.add_option("command", command, "certify, simulate, discretize, optimize or report")
      ->required()
      ->check(CLI::IsMember(lyapcert::commands()));
  app.add_option("--config,-c", config_path, "config file (key = value per line)");
  app.add_option("--out,-o", out_dir, "output directory");
  app.add_option("args", rest, "optional system name followed by key=value overrides");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : lyapcert::kExitConfig;
  }

  lyapcert::RunConfig cfg;
  try {
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw lyapcert::ConfigError("cannot read " + config_path);
      std::stringstream buf;
      buf << f.rdbuf();
      cfg = lyapcert::RunConfig::parse(buf.str());
    }
    std::vector<std::string> assignments;
    for (std::size_t i = 0; i < rest.size(); ++i) {
      if (i == 0 && rest[i].find('=') == std::string::npos) {
        assignments.push_back("system=" + rest[i]);
      } else {
        assignments.push_back(rest[i]);
      }
    }
    if (!out_dir.empty()) assignments.push_back("out=" + out_dir);
    cfg.apply(assignments);
  } catch (const lyapcert::ConfigError& e) {
    std::cerr << "config error: " << (config_path.empty() ? "" : config_path + ": ") << e.what() << "\n";
    return lyapcert::kExitConfig;
  }
  return lyapcert::run(command, cfg);
}
