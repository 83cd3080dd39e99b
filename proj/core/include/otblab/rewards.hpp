#pragma once

#include <span>
#include <variant>
#include <vector>

#include "otblab/common.hpp"
#include "otblab/trajectory.hpp"

namespace otblab {

inline constexpr double kRewardBound = 10.0;

/// Terminal reward `value` if the response contains `target` anywhere.
struct TerminalTarget {
  Token target = 1;
  double value = 1.0;
};

/// Terminal reward `value` if `pattern` occurs as a contiguous run.
struct TerminalPattern {
  std::vector<Token> pattern;
  double value = 1.0;
};

/// r_t = table[y_t].
struct DensePerStep {
  std::vector<double> table;
};

/// Deterministic rule-based reward; all magnitudes are bounded by kRewardBound.
class RewardModel {
 public:
  using Rule = std::variant<TerminalTarget, TerminalPattern, DensePerStep>;

  explicit RewardModel(Rule rule);

  static RewardModel zero(int vocab);

  const Rule& rule() const { return rule_; }
  bool is_terminal() const;

  std::vector<double> score(std::span<const Token> tokens) const;

 private:
  Rule rule_;
};

/// Per-step rewards for a token sequence (length preserved).
std::vector<double> score_rewards(const RewardModel& model, std::span<const Token> tokens);

/// Writes score_rewards into every step of `traj`.
void apply_rewards(const RewardModel& model, Trajectory& traj);

/// G_t = sum_{k >= t} r_k.
std::vector<double> reward_to_go(std::span<const double> rewards);

/// Cumulative logit-gradient proxy W^_t = sum_{j <= t} w^_j.
std::vector<double> realized_energy_profile(const Trajectory& traj);

/// Per-step proxy w^_t.
std::vector<double> step_energies(const Trajectory& traj);

}  // namespace otblab
