#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "otblab/baselines.hpp"
#include "otblab/estimators.hpp"
#include "otblab/policy.hpp"
#include "otblab/rewards.hpp"

namespace otblab::harness {

struct PolicyConfig {
  PolicyShape shape;
  InitScheme init{InitScheme::Kind::Gaussian, 1.0, 0};
};

struct EstimatorConfig {
  EstimatorForm form = EstimatorForm::Causal;
  BaselineKind baseline = BaselineKind::Otb;
  double clip = 2.0;
  bool exclude_self = false;
};

struct RunConfig {
  int group_size = 8;
  int groups = 1;
  int steps = 500;
  double learning_rate = 1.0;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  int mc_batches = 2000;
  std::vector<int> sweep{2, 4, 8, 16};
};

struct OutputConfig {
  std::string dir = "out";
  bool svg = true;
  bool record_rollouts = true;
};

struct ExperimentConfig {
  PolicyConfig policy;
  RewardModel reward{TerminalTarget{}};
  EstimatorConfig estimator;
  RunConfig run;
  OutputConfig output;

  BaselineOptions baseline_options() const;
  EstimatorSpec estimator_spec() const;
};

/// Built-in default: |V| = 3, T_max = 5, target-token reward, N = 8, seeds 0..4.
ExperimentConfig default_config();

/// Parses a JSON document on top of the defaults. Missing keys keep their
/// default; unknown keys and invalid values throw Error.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

/// Throws Error on N < 2, non-positive learning rate, empty seed list, etc.
void validate(const ExperimentConfig& config);

/// Command-line overrides applied after loading.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> format;  // "csv" or "csv+svg"
};

void apply_overrides(ExperimentConfig& config, const Overrides& overrides);

}  // namespace otblab::harness
