#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "otblab/harness/config.hpp"
#include "otblab/harness/csv.hpp"

namespace otblab::harness {

struct VerifyOptions {
  /// Negative control: feed the stationarity check -B* instead of B*.
  bool negate_otb = false;
};

struct CheckResult {
  std::string check;
  std::uint64_t seed = 0;
  double residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct VerifyReport {
  std::vector<CheckResult> checks;

  bool all_passed() const;
  CsvTable table() const;  // check, seed, residual, tolerance, pass
};

/// Runs the oracle invariant suite on every configured seed (prompt 0).
VerifyReport run_checks(const ExperimentConfig& config, const VerifyOptions& options = {});

/// Writes <out>/verify.csv; returns 0 when every check passes, 1 otherwise.
int run_verify(const ExperimentConfig& config, const VerifyOptions& options = {});

}  // namespace otblab::harness
