#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "otblab/grad_vec.hpp"
#include "otblab/policy.hpp"
#include "otblab/rewards.hpp"

namespace otblab {

inline constexpr std::size_t kEnumerationCap = 2'000'000;

struct EnumeratedPath {
  ScoredTrajectory path;
  double probability = 0.0;  // under the policy that generated the path
};

/// Every complete response of one prompt, in depth-first token order.
struct EnumeratedSpace {
  int prompt_id = 0;
  int t_max = 0;
  std::size_t param_count = 0;
  std::vector<EnumeratedPath> paths;

  double total_probability() const;
};

/// Number of complete responses of length <= t_max (EOS-pruned tree).
/// Saturates at UINT64_MAX.
std::uint64_t trajectory_count(int vocab, int t_max);

/// Throws "state space too large" when the count exceeds `cap`.
EnumeratedSpace enumerate(const Policy& policy, int prompt, int t_max,
                          std::size_t cap = kEnumerationCap);

/// Keeps the behavior policy's path probabilities and records them as
/// behavior log-probs, while distributions and score factors are replaced
/// by those of `target`.
EnumeratedSpace rescore_off_policy(const EnumeratedSpace& behavior_space, const Policy& target);

/// Per-path quantities shared by most oracle computations. Energies use the
/// true parameter-space norms ||s_t||^2, not the proxy.
struct PathStats {
  double probability = 0.0;
  std::vector<double> reward_to_go;  // G_t
  std::vector<double> step_energy;   // ||s_t||^2
  std::vector<double> energy;        // W_t
  double total_energy = 0.0;         // ||S(tau)||^2, cross terms included
};

std::vector<PathStats> path_stats(const EnumeratedSpace& space, const RewardModel& model);

/// Per-step baselines B_1..B_{t_max}; entry t-1 belongs to step t.
struct BaselineSchedule {
  std::vector<double> values;

  static BaselineSchedule constant(double value, int t_max);
  double at(std::size_t step) const { return values.at(step - 1); }
  std::size_t size() const { return values.size(); }
};

/// E[sum_t s_t G_t].
GradVec true_gradient(const EnumeratedSpace& space, const RewardModel& model);
/// E[R S].
GradVec true_gradient_noncausal(const EnumeratedSpace& space, const RewardModel& model);

double expected_reward(const EnumeratedSpace& space, const RewardModel& model);

/// Exact E[R] by a probability-only tree walk (no score functions).
double expected_reward(const Policy& policy, const RewardModel& model, int prompt, int t_max);

/// Best total reward over all complete responses (tree walk, no policy).
double optimal_expected_reward(const RewardModel& model, int vocab, int t_max);

/// E[R ||S||^2] / E[||S||^2]. Throws "zero-energy space".
double exact_ogb(const EnumeratedSpace& space, const RewardModel& model);

/// E[G_t W_t] / E[W_t] over paths alive at step t.
double exact_otb(const EnumeratedSpace& space, const RewardModel& model, std::size_t t);

/// E[G_t ||s_t||^2] / E[||s_t||^2] over paths alive at step t.
double exact_isolated_baseline(const EnumeratedSpace& space, const RewardModel& model,
                               std::size_t t);

/// E[G_t | y_<t = prefix] with t = |prefix| + 1.
double exact_value_baseline(const EnumeratedSpace& space, const RewardModel& model,
                            const std::vector<Token>& prefix);

/// V(prefix) for every prefix reachable by some path that continues past it.
class ValueTable {
 public:
  ValueTable(const EnumeratedSpace& space, const RewardModel& model);

  /// Throws for unreachable prefixes.
  double at(Prefix prefix) const;
  std::size_t size() const { return values_.size(); }

 private:
  std::map<std::vector<Token>, double> values_;
};

// Schedule builders. Steps nobody reaches get 0; steps whose survivors all
// carry zero weight fall back to the survivor mean of G_t.
BaselineSchedule otb_schedule(const EnumeratedSpace& space, const RewardModel& model);
BaselineSchedule isolated_schedule(const EnumeratedSpace& space, const RewardModel& model);
BaselineSchedule mean_schedule(const EnumeratedSpace& space, const RewardModel& model);

/// (sum_k E[G_k <s_k, s_t>]) / E[||s_t||^2]: the per-step baseline that keeps
/// cross-step score correlations, with the other steps' baselines dropped.
double cross_term_optimal_baseline(const EnumeratedSpace& space, const RewardModel& model,
                                   std::size_t t);

/// Same, keeping -B_k E[<s_k, s_t>] for k != t from `schedule`.
double cross_term_optimal_baseline(const EnumeratedSpace& space, const RewardModel& model,
                                   std::size_t t, const BaselineSchedule& schedule);

BaselineSchedule cross_term_schedule(const EnumeratedSpace& space, const RewardModel& model);

/// E[<g_c, s_t>] for the causal estimator under `schedule`; zero at a
/// variance-stationary schedule.
double stationarity_residual(const EnumeratedSpace& space, const RewardModel& model,
                             const BaselineSchedule& schedule, std::size_t t);

/// E[W_t (G_t - B_t)] for every step (dead paths contribute 0).
std::vector<double> otb_stationarity(const EnumeratedSpace& space, const RewardModel& model,
                                     const BaselineSchedule& schedule);

/// E[1{T >= t} W_t] for every step.
std::vector<double> expected_energy(const EnumeratedSpace& space, const RewardModel& model);

/// Per-step terms E[W_t (G_t - B_t)^2].
std::vector<double> objective_terms(const EnumeratedSpace& space, const RewardModel& model,
                                    const BaselineSchedule& schedule);
double objective_J(const EnumeratedSpace& space, const RewardModel& model,
                   const BaselineSchedule& schedule);

/// Baseline that may depend on the whole trajectory up to step t (1-based).
using StepBaseline = std::function<double(const Trajectory&, std::size_t t)>;
double objective_J(const EnumeratedSpace& space, const RewardModel& model,
                   const StepBaseline& baseline);

struct VarianceGap {
  double j_otb = 0.0;
  double j_ogb = 0.0;
  double term_a = 0.0;  // 2 sum_t E[W_t (G_t - B*_t)(B*_t - B_g)]
  double term_b = 0.0;  // sum_t E[W_t (B*_t - B_g)^2]
};

VarianceGap variance_gap(const EnumeratedSpace& space, const RewardModel& model);

struct Moments {
  GradVec mean;
  double second = 0.0;  // E||g||^2
  double variance() const { return second - mean.squared_norm(); }
};

using PathEstimator = std::function<GradVec(const ScoredTrajectory&)>;

Moments exact_moments(const EnumeratedSpace& space, const PathEstimator& estimator);
double exact_estimator_variance(const EnumeratedSpace& space, const PathEstimator& estimator);

struct ConvexDecomposition {
  double lhs = 0.0;    // centroid of G_t weighted by W_T
  double rhs = 0.0;    // alpha * centroid weighted by W_t + (1 - alpha) * mean G_t
  double alpha = 0.0;  // mean W_t / (mean W_t + mean W_{>t})
  double spread = 0.0; // max - min of W_{>t} across members
  bool homogeneous = false;
};

/// Members must all be alive at step t. Uses the proxy energies recorded on
/// the trajectories.
ConvexDecomposition convex_decomposition_check(const std::vector<Trajectory>& members,
                                               std::size_t t);

enum class SuffixEnergy {
  Uniform,        // uniform over non-EOS tokens: identical positive W_{>t}
  Deterministic,  // one-hot suffix: W_{>t} = 0
};

/// Group of `size` length-(t + suffix_len) responses with random dense
/// rewards whose energy after step t is identical across members. With
/// `deterministic_prefix` every step up to t is one-hot, so W_t = 0.
std::vector<Trajectory> homogeneous_group(int vocab, std::size_t t, std::size_t suffix_len,
                                          std::size_t size, SuffixEnergy suffix,
                                          bool deterministic_prefix, Philox& rng);

}  // namespace otblab
