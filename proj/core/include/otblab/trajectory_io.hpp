#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "otblab/trajectory.hpp"

namespace otblab {

/// Position of a trajectory inside a recorded run. Lines sharing a key form
/// one group on replay.
struct LogKey {
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  std::int64_t group = 0;

  friend bool operator==(const LogKey&, const LogKey&) = default;
};

struct LoggedTrajectory {
  LogKey key;
  Trajectory trajectory;
};

/// One JSON object (no trailing newline) with keys seed, step, group,
/// prompt_id, tokens, rewards, probs, sumsq, energy and, when available,
/// dists and behavior_logprobs.
std::string to_json_line(const LoggedTrajectory& entry, bool include_dists = true);

/// Parses one line. Accepts either `dists` or the compact `probs` + `sumsq`
/// pair. Errors are prefixed with "line <n>: ".
LoggedTrajectory parse_json_line(const std::string& line, std::size_t line_number);

void write_jsonl(std::ostream& out, const std::vector<LoggedTrajectory>& entries,
                 bool include_dists = true);
std::vector<LoggedTrajectory> read_jsonl(std::istream& in);

}  // namespace otblab
