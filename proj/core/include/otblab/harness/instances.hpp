#pragma once

#include <cstdint>
#include <vector>

#include "otblab/baselines.hpp"
#include "otblab/harness/config.hpp"
#include "otblab/policy.hpp"
#include "otblab/rewards.hpp"
#include "otblab/rng.hpp"

namespace otblab::harness {

// Tags mixed into a run seed to give each purpose its own Philox key.
inline constexpr std::uint64_t kRolloutTag = 0x726f6c6cULL;
inline constexpr std::uint64_t kMonteCarloTag = 0x6d63ULL;
inline constexpr std::uint64_t kRandomScheduleTag = 0x73636864ULL;
inline constexpr std::uint64_t kGroupTag = 0x67727570ULL;

struct Instance {
  Policy policy;
  RewardModel reward;
  int t_max = 0;
  std::uint64_t seed = 0;
};

/// Policy initialized with seed derive_seed(init.seed, run_seed).
Instance make_instance(const ExperimentConfig& config, std::uint64_t run_seed);

/// N on-policy responses with rewards applied and score factors attached.
/// When `with_behavior` is set each step also records its own log-prob as
/// the behavior log-prob, which makes TIS forms usable on-policy.
std::vector<ScoredTrajectory> sample_group(const Policy& policy, const RewardModel& reward,
                                           int prompt, std::size_t n, Philox& rng,
                                           bool with_behavior = false);

GroupBatch to_group(const std::vector<ScoredTrajectory>& members);

}  // namespace otblab::harness
