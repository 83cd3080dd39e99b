#include "otblab/harness/instances.hpp"

namespace otblab::harness {

Instance make_instance(const ExperimentConfig& config, std::uint64_t run_seed) {
  InitScheme init = config.policy.init;
  init.seed = derive_seed(init.seed, run_seed);
  return Instance{Policy::create(config.policy.shape, init), config.reward,
                  config.policy.shape.t_max, run_seed};
}

std::vector<ScoredTrajectory> sample_group(const Policy& policy, const RewardModel& reward,
                                           int prompt, std::size_t n, Philox& rng,
                                           bool with_behavior) {
  std::vector<ScoredTrajectory> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Trajectory traj = with_behavior
                          ? sample_off_policy(policy, policy, prompt, policy.t_max(), rng)
                          : sample_trajectory(policy, prompt, policy.t_max(), rng);
    apply_rewards(reward, traj);
    out.push_back(score_trajectory(policy, std::move(traj)));
  }
  return out;
}

GroupBatch to_group(const std::vector<ScoredTrajectory>& members) {
  GroupBatch group;
  if (!members.empty()) group.prompt_id = members.front().trajectory.prompt_id;
  for (const auto& m : members) group.members.push_back(m.trajectory);
  return group;
}

}  // namespace otblab::harness
