#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cabc/experiments.hpp"
#include "cabc/types.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

int run_config(const cabc::ExperimentConfig& c) {
  const cabc::ExperimentReport rep = cabc::run(c);
  std::cout << nlohmann::json{{"metrics", rep.metrics}, {"artifacts", rep.artifacts}}.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compressed absorbing boundary conditions for the 2-D Helmholtz equation"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run an experiment described by a JSON config");
  run->add_option("--config", config_path, "Config file")->required();

  int n = 16, w = 16;
  std::string medium = "uniform";
  auto* oracle = app.add_subcommand("oracle-check", "Compare the three DtN constructions");
  oracle->add_option("--n", n, "Grid size N");
  oracle->add_option("--w", w, "Absorbing layer width");
  oracle->add_option("--medium", medium, "Medium name");

  app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("version")) {
      std::cout << "cabc " << kVersion << "\n";
      return 0;
    }
    if (app.got_subcommand("oracle-check")) {
      nlohmann::json j = {{"experiment", "OracleCheck"}, {"N", n}, {"pml_width", w}, {"medium", medium}};
      return run_config(cabc::ExperimentConfig::from_json(j));
    }
    std::ifstream in(config_path);
    if (!in) throw cabc::ConfigError("cannot open config file '" + config_path + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::parse_error& e) {
      throw cabc::ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    return run_config(cabc::ExperimentConfig::from_json(j));
  } catch (const cabc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const cabc::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const cabc::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
