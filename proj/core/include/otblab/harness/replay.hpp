#pragma once

#include <iosfwd>
#include <string>

#include "otblab/baselines.hpp"
#include "otblab/harness/csv.hpp"
#include "otblab/trajectory_io.hpp"

namespace otblab::harness {

/// seed, step, group, member, t, token, reward_to_go, baseline, advantage
CsvTable advantage_table();

void append_advantages(CsvTable& table, const LogKey& key, const GroupBatch& group,
                       const AdvantageTable& advantages);

/// Recomputes advantages from a JSONL rollout log. Consecutive lines sharing
/// (seed, step, group) form one group; only the logged probabilities are
/// used, so no policy is needed.
CsvTable replay_advantages(std::istream& log, BaselineKind kind, const BaselineOptions& options);

/// Reads `log_path` and writes <out_dir>/advantages.csv.
void run_replay(const std::string& log_path, BaselineKind kind, const BaselineOptions& options,
                const std::string& out_dir);

}  // namespace otblab::harness
