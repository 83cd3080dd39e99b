#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "otblab/harness/config.hpp"
#include "otblab/harness/csv.hpp"

namespace otblab::harness {

/// One baseline on one seed. Exact columns use the population analogue of
/// the group baseline as a fixed baseline (e.g. E[R] for grpo, the exact OTB
/// schedule for otb); Monte-Carlo columns use the group estimator itself.
struct CompareRow {
  std::uint64_t seed = 0;
  std::string baseline;
  double exact_j = 0.0;
  double exact_variance = 0.0;
  double mc_var_of_mean = 0.0;      // mean over batches
  double mc_var_of_mean_tok = 0.0;  // mean over batches
  double mc_batch_variance = 0.0;   // sample variance of the batch-mean gradient
};

struct SweepRow {
  std::uint64_t seed = 0;
  std::string baseline;
  int group_size = 0;
  double mc_var_of_mean = 0.0;
  double mc_var_of_mean_tok = 0.0;
  double exact_variance_over_n = 0.0;
};

struct CompareReport {
  std::vector<CompareRow> rows;
  std::vector<SweepRow> sweep;

  CsvTable table() const;
  CsvTable sweep_table() const;
};

/// Baselines compared by default, in output order.
const std::vector<std::string>& compare_baselines();

CompareReport compare(const ExperimentConfig& config);

/// Writes compare.csv, compare_sweep.csv and, for csv+svg, compare_variance.svg
/// and compare_sweep.svg.
int run_compare(const ExperimentConfig& config);

}  // namespace otblab::harness
