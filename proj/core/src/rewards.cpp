#include "otblab/rewards.hpp"

#include <algorithm>
#include <cmath>

#include "otblab/policy.hpp"

namespace otblab {

namespace {

void check_bounded(double v) {
  if (!std::isfinite(v) || std::abs(v) > kRewardBound) {
    throw Error("reward magnitude must not exceed 10");
  }
}

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

RewardModel::RewardModel(Rule rule) : rule_(std::move(rule)) {
  std::visit(Overloaded{
                 [](const TerminalTarget& r) { check_bounded(r.value); },
                 [](const TerminalPattern& r) {
                   if (r.pattern.empty()) throw Error("reward pattern must be nonempty");
                   check_bounded(r.value);
                 },
                 [](const DensePerStep& r) {
                   if (r.table.empty()) throw Error("dense reward table must be nonempty");
                   for (double v : r.table) check_bounded(v);
                 },
             },
             rule_);
}

RewardModel RewardModel::zero(int vocab) {
  return RewardModel(DensePerStep{std::vector<double>(static_cast<std::size_t>(vocab), 0.0)});
}

bool RewardModel::is_terminal() const { return !std::holds_alternative<DensePerStep>(rule_); }

std::vector<double> RewardModel::score(std::span<const Token> tokens) const {
  if (tokens.empty()) throw Error("cannot score an empty response");
  std::vector<double> out(tokens.size(), 0.0);
  std::visit(Overloaded{
                 [&](const TerminalTarget& r) {
                   if (std::find(tokens.begin(), tokens.end(), r.target) != tokens.end()) {
                     out.back() = r.value;
                   }
                 },
                 [&](const TerminalPattern& r) {
                   if (std::search(tokens.begin(), tokens.end(), r.pattern.begin(),
                                   r.pattern.end()) != tokens.end()) {
                     out.back() = r.value;
                   }
                 },
                 [&](const DensePerStep& r) {
                   for (std::size_t i = 0; i < tokens.size(); ++i) {
                     const auto tok = static_cast<std::size_t>(tokens[i]);
                     if (tokens[i] < 0 || tok >= r.table.size()) {
                       throw Error("token outside the dense reward table");
                     }
                     out[i] = r.table[tok];
                   }
                 },
             },
             rule_);
  return out;
}

std::vector<double> score_rewards(const RewardModel& model, std::span<const Token> tokens) {
  return model.score(tokens);
}

void apply_rewards(const RewardModel& model, Trajectory& traj) {
  const std::vector<double> r = model.score(traj.tokens());
  for (std::size_t i = 0; i < r.size(); ++i) traj.steps[i].reward = r[i];
}

std::vector<double> reward_to_go(std::span<const double> rewards) {
  if (rewards.empty()) throw Error("reward_to_go of an empty sequence");
  std::vector<double> g(rewards.size());
  double acc = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    acc += rewards[i];
    g[i] = acc;
  }
  return g;
}

std::vector<double> step_energies(const Trajectory& traj) {
  std::vector<double> w;
  w.reserve(traj.steps.size());
  for (const Step& s : traj.steps) w.push_back(proxy_from_stats(s.token_prob, s.prob_sumsq));
  return w;
}

std::vector<double> realized_energy_profile(const Trajectory& traj) {
  std::vector<double> profile = step_energies(traj);
  double acc = 0.0;
  for (double& v : profile) {
    acc += v;
    v = acc;
  }
  return profile;
}

}  // namespace otblab
