#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "otblab/common.hpp"
#include "otblab/grad_vec.hpp"
#include "otblab/rng.hpp"
#include "otblab/trajectory.hpp"

namespace otblab {

enum class PolicyKind {
  /// One logit row per (prompt, full prefix). Score functions of different
  /// steps live on disjoint rows and are therefore orthogonal.
  TabularPrefix,
  /// z_t = W h(x, y_<t) with a shared weight matrix and unit-norm hashed
  /// features. Step scores are correlated through W.
  LinearSoftmax,
};

struct PolicyShape {
  PolicyKind kind = PolicyKind::TabularPrefix;
  int vocab = 3;
  int t_max = 5;
  int prompts = 1;
  int feature_dim = 8;  // LinearSoftmax only
  std::uint64_t feature_seed = 0;
};

struct InitScheme {
  enum class Kind { Zeros, Gaussian };
  Kind kind = Kind::Zeros;
  double sigma = 1.0;
  std::uint64_t seed = 0;
};

/// e_y - pi: gradient of log pi(y) with respect to the logits.
struct LogitDelta {
  std::vector<double> values;
  double squared_norm() const;
};

/// Factored score function s_t = J_t^T delta_t. For tabular policies J_t
/// selects one parameter row; for linear-softmax J_t^T delta = delta h^T.
struct ScoreFactor {
  LogitDelta delta;
  std::size_t row = 0;           // TabularPrefix
  std::vector<double> features;  // LinearSoftmax (empty for tabular)
};

/// Numerically stable softmax (max-subtracted).
std::vector<double> softmax(std::span<const double> logits);

LogitDelta logit_delta(std::span<const double> dist, Token token);

/// Closed-form logit-gradient proxy 1 - 2 pi(y) + ||pi||^2.
double proxy_from_stats(double token_prob, double prob_sumsq);
double proxy_norm(std::span<const double> dist, Token token);

/// <delta_k, delta_t> = 1[y_k = y_t] - pi_t(y_k) - pi_k(y_t) + <pi_k, pi_t>.
double logit_cross_term(std::span<const double> dist_k, Token token_k,
                        std::span<const double> dist_t, Token token_t);

/// <s_a, s_b> evaluated from the factors without materializing either vector.
double score_dot(const ScoreFactor& a, const ScoreFactor& b);

/// out += scale * s, where s is the dense score described by `factor`.
void accumulate_score(GradVec& out, const ScoreFactor& factor, double scale);

/// All EOS-free prefixes of length < t_max in the canonical (length, then
/// lexicographic) order used for tabular row indices.
std::vector<std::vector<Token>> all_prefixes(int vocab, int t_max);

class Policy {
 public:
  static Policy create(const PolicyShape& shape, const InitScheme& init);
  static Policy from_params(const PolicyShape& shape, std::vector<double> params);

  Policy with_params(std::vector<double> params) const;

  const PolicyShape& shape() const { return shape_; }
  PolicyKind kind() const { return shape_.kind; }
  int vocab() const { return shape_.vocab; }
  int t_max() const { return shape_.t_max; }
  std::size_t param_count() const { return params_.size(); }
  std::span<const double> params() const { return params_; }

  /// Tabular only: number of prefix contexts per prompt.
  std::size_t contexts_per_prompt() const { return contexts_per_prompt_; }

  /// Tabular only: parameter row of (prompt, prefix). Throws
  /// "uninitialized context" for prefixes that were never enumerated.
  std::size_t context_row(int prompt, Prefix prefix) const;

  /// LinearSoftmax only: unit-norm feature vector of (prompt, prefix).
  std::vector<double> features(int prompt, Prefix prefix) const;

  std::vector<double> logits(int prompt, Prefix prefix) const;
  std::vector<double> next_token_dist(int prompt, Prefix prefix) const;
  double log_prob(int prompt, Prefix prefix, Token token) const;

  ScoreFactor score_factor(int prompt, Prefix prefix, Token token) const;
  GradVec score_function(int prompt, Prefix prefix, Token token) const;
  LogitDelta logit_delta(int prompt, Prefix prefix, Token token) const;
  double proxy_norm(int prompt, Prefix prefix, Token token) const;

 private:
  Policy(PolicyShape shape, std::vector<double> params);
  void check_prefix(Prefix prefix) const;
  void check_token(Token token) const;

  PolicyShape shape_;
  std::vector<double> params_;
  std::size_t contexts_per_prompt_ = 0;
  std::vector<std::size_t> length_offsets_;  // tabular row offsets per prefix length
};

/// Rolls out one response: stops at EOS or after t_max tokens. Rewards are
/// left at zero; apply a RewardModel afterwards.
Trajectory sample_trajectory(const Policy& policy, int prompt, int t_max, Philox& rng);

/// Samples tokens from `behavior` and records the target policy's
/// distributions together with the behavior log-probabilities.
Trajectory sample_off_policy(const Policy& target, const Policy& behavior, int prompt, int t_max,
                             Philox& rng);

/// Trajectory paired with its per-step score factors under some policy.
struct ScoredTrajectory {
  Trajectory trajectory;
  std::vector<ScoreFactor> scores;
  std::size_t param_count = 0;

  std::size_t length() const { return trajectory.length(); }
};

/// Score factors of every step of `trajectory` under `policy`.
ScoredTrajectory score_trajectory(const Policy& policy, Trajectory trajectory);

/// Dense S(tau) = sum_t s_t.
GradVec total_score(const ScoredTrajectory& scored);

}  // namespace otblab
