#pragma once

#include <optional>
#include <vector>

#include "otblab/common.hpp"

namespace otblab {

/// One generation step. `token_prob` and `prob_sumsq` are always populated;
/// they are all the logit-gradient proxy needs. `dist` holds the full
/// next-token distribution when it was available (sampling, enumeration, or
/// a log that stored it) and is empty otherwise.
struct Step {
  Token token = kEos;
  double reward = 0.0;
  double token_prob = 1.0;   // pi(y_t | x, y_<t) under the training policy
  double prob_sumsq = 1.0;   // ||pi_t||^2
  std::vector<double> dist;  // pi_t, optional
  std::optional<double> behavior_logprob;
};

/// A response y_1..y_T for one prompt. The recorded probabilities belong to
/// the training policy; `behavior_logprob` (when present on every step) is
/// the rollout policy's log-probability of the same token.
struct Trajectory {
  int prompt_id = 0;
  std::vector<Step> steps;

  std::size_t length() const { return steps.size(); }
  std::vector<Token> tokens() const;
  std::vector<double> rewards() const;
  double total_reward() const;
  bool has_behavior_logprobs() const;

  /// Tokens y_1..y_{t-1} preceding 1-based step t.
  std::vector<Token> prefix_before(std::size_t step) const;

  /// Throws Error if lengths, EOS placement, or distributions are inconsistent.
  void validate(int t_max) const;
};

/// Fills token_prob / prob_sumsq from a full distribution.
Step make_step(Token token, std::vector<double> dist);

}  // namespace otblab
