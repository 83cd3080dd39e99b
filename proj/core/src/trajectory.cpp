#include "otblab/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace otblab {

std::vector<Token> Trajectory::tokens() const {
  std::vector<Token> out;
  out.reserve(steps.size());
  for (const Step& s : steps) out.push_back(s.token);
  return out;
}

std::vector<double> Trajectory::rewards() const {
  std::vector<double> out;
  out.reserve(steps.size());
  for (const Step& s : steps) out.push_back(s.reward);
  return out;
}

double Trajectory::total_reward() const {
  double total = 0.0;
  for (const Step& s : steps) total += s.reward;
  return total;
}

bool Trajectory::has_behavior_logprobs() const {
  if (steps.empty()) return false;
  for (const Step& s : steps) {
    if (!s.behavior_logprob) return false;
  }
  return true;
}

std::vector<Token> Trajectory::prefix_before(std::size_t step) const {
  std::vector<Token> out;
  const std::size_t n = std::min(step > 0 ? step - 1 : 0, steps.size());
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(steps[i].token);
  return out;
}

void Trajectory::validate(int t_max) const {
  if (steps.empty()) throw Error("trajectory is empty");
  if (static_cast<int>(steps.size()) > t_max) throw Error("trajectory longer than T_max");
  for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
    if (steps[i].token == kEos) throw Error("EOS before the final step");
  }
  if (steps.back().token != kEos && static_cast<int>(steps.size()) != t_max) {
    throw Error("trajectory ends without EOS before T_max");
  }
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const Step& s = steps[i];
    if (!(s.token_prob >= 0.0 && s.token_prob <= 1.0)) {
      throw Error("step " + std::to_string(i + 1) + ": token probability outside [0,1]");
    }
    if (s.dist.empty()) continue;
    double sum = 0.0;
    for (double p : s.dist) {
      if (!(p >= 0.0)) throw Error("step " + std::to_string(i + 1) + ": negative probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      throw Error("step " + std::to_string(i + 1) + ": distribution does not sum to 1");
    }
    if (s.token < 0 || static_cast<std::size_t>(s.token) >= s.dist.size()) {
      throw Error("step " + std::to_string(i + 1) + ": token outside vocabulary");
    }
  }
}

Step make_step(Token token, std::vector<double> dist) {
  Step s;
  s.token = token;
  s.token_prob = dist.at(static_cast<std::size_t>(token));
  double sumsq = 0.0;
  for (double p : dist) sumsq += p * p;
  s.prob_sumsq = sumsq;
  s.dist = std::move(dist);
  return s;
}

}  // namespace otblab
