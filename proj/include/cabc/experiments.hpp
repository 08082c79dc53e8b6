#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace cabc {

enum class ExperimentKind {
  OracleCheck,
  ProbeBlocks,
  CondNumbers,
  PlrCompress,
  CompressedSolve,
  GrazingScan,
  ChebConvergence,
  SepExpansion,
  RankScan,
  PvsN
};

std::string experiment_name(ExperimentKind kind);
ExperimentKind experiment_from_name(const std::string& name);

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::OracleCheck;
  std::string medium = "uniform";
  std::map<std::string, double> medium_params;
  int N = 16;
  double omega = 0.0;  ///< 0: pollution rule
  int pml_width = 16;
  int strip_gap = 2;
  double pml_strength = 40.0;

  std::vector<int> p_schedule;
  int q = 10;
  int q_holdout = 4;
  double target = 1e-3;
  std::vector<double> targets;
  double eps_divisor = 25.0;
  int r_max = 0;
  bool dense_reference = true;
  std::vector<double> offsets;
  std::vector<double> source{0.5, 0.25};

  double k = 0.0;  ///< 0: 2 pi 51.2
  double r0 = 0.0;  ///< 0: 1/k
  std::vector<double> alphas{2.0, 0.5};
  std::vector<double> ks;
  std::vector<double> epsilons;
  std::vector<double> r0_over_h{1.0};
  std::string rank_source = "sampled";  ///< sampled kernel or layer stripping
  std::vector<int> Ns;

  std::uint64_t seed = 1;
  std::string output_dir = "out";
  std::string input_dir;  ///< PlrCompress: directory written by ProbeBlocks

  /// Unknown keys and out-of-range values raise ConfigError naming the field.
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  void validate() const;
};

struct ExperimentReport {
  nlohmann::json config;
  nlohmann::json metrics;
  double wall_time = 0.0;
  std::vector<std::string> artifacts;
};

/// Runs the experiment, writes CSV/JSON into the output directory (CABC_OUT
/// overrides the configured one) and report.json. NumericError from a stage
/// is rethrown with the stage name prepended.
ExperimentReport run(const ExperimentConfig& config);

/// Output directory after the CABC_OUT override.
std::string resolve_output_dir(const ExperimentConfig& config);

}  // namespace cabc
