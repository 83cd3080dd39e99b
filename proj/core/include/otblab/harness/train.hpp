#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "otblab/harness/config.hpp"
#include "otblab/harness/csv.hpp"
#include "otblab/trajectory_io.hpp"

namespace otblab::harness {

/// Row k: diagnostics of the batch drawn at the parameters before update k,
/// and the expected reward after update k. Diagnostics are averaged over the
/// groups of the batch.
struct TrainRow {
  int step = 0;
  std::uint64_t seed = 0;
  double expected_reward = 0.0;
  double grad_norm = 0.0;
  double p_total = 0.0;
  double signal = 0.0;
  double var_of_mean = 0.0;
  double p_total_tok = 0.0;
  double var_of_mean_tok = 0.0;
};

struct SeedRun {
  std::uint64_t seed = 0;
  double initial_expected_reward = 0.0;
  double optimal_expected_reward = 0.0;
  std::vector<TrainRow> rows;
  std::vector<LoggedTrajectory> rollouts;  // filled when recording
  CsvTable advantages;
  std::optional<int> diverged_at;  // step whose update produced non-finite parameters

  SeedRun();
};

/// Exact E[R] averaged over prompts, or a Monte-Carlo estimate beyond the
/// enumeration cap.
double policy_expected_reward(const Policy& policy, const RewardModel& reward, int t_max,
                              std::uint64_t seed, int step);

SeedRun train_seed(const ExperimentConfig& config, std::uint64_t seed);

struct RunRecord {
  std::vector<SeedRun> runs;  // in config seed order

  CsvTable table(const ExperimentConfig& config) const;
};

RunRecord train(const ExperimentConfig& config);

/// Writes train.csv, advantages.csv, rollouts.jsonl (when recording) and
/// train_reward.svg / train_variance.svg (csv+svg). Returns 1 if any seed
/// diverged.
int run_train(const ExperimentConfig& config);

}  // namespace otblab::harness
