#include "otblab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace otblab {

namespace {

constexpr double kZeroWeight = 1e-12;

bool alive(const PathStats& s, std::size_t t) { return s.reward_to_go.size() >= t; }

void check_step(const EnumeratedSpace& space, std::size_t t) {
  if (t < 1 || t > static_cast<std::size_t>(space.t_max)) {
    throw Error("step " + std::to_string(t) + " outside 1..T_max");
  }
}

// Survivor-restricted sums for a weighted centroid of G_t; `weight` picks
// the per-path weight at step t.
struct Centroid {
  double weighted_sum = 0.0;
  double weight = 0.0;
  double plain_sum = 0.0;
  double mass = 0.0;
};

template <class WeightFn>
Centroid centroid_at(const std::vector<PathStats>& stats, std::size_t t, WeightFn weight) {
  Centroid c;
  for (const PathStats& s : stats) {
    if (!alive(s, t)) continue;
    const double g = s.reward_to_go[t - 1];
    const double w = s.probability * weight(s, t);
    c.weighted_sum += w * g;
    c.weight += w;
    c.plain_sum += s.probability * g;
    c.mass += s.probability;
  }
  return c;
}

double energy_at(const PathStats& s, std::size_t t) { return s.energy[t - 1]; }
double step_energy_at(const PathStats& s, std::size_t t) { return s.step_energy[t - 1]; }

double strict_centroid(const Centroid& c, std::size_t t) {
  if (c.mass <= 0.0) throw Error("no surviving trajectory at step " + std::to_string(t));
  if (c.weight <= kZeroWeight * c.mass) throw Error("zero-energy space");
  return c.weighted_sum / c.weight;
}

double lenient_centroid(const Centroid& c) {
  if (c.mass <= 0.0) return 0.0;
  if (c.weight <= kZeroWeight * c.mass) return c.plain_sum / c.mass;
  return c.weighted_sum / c.weight;
}

template <class WeightFn>
BaselineSchedule schedule_from(const EnumeratedSpace& space, const RewardModel& model,
                               WeightFn weight) {
  const auto stats = path_stats(space, model);
  BaselineSchedule out;
  for (std::size_t t = 1; t <= static_cast<std::size_t>(space.t_max); ++t) {
    out.values.push_back(lenient_centroid(centroid_at(stats, t, weight)));
  }
  return out;
}

double schedule_value(const BaselineSchedule& schedule, std::size_t t) {
  if (schedule.size() < t) throw Error("baseline schedule shorter than the trajectory");
  return schedule.at(t);
}

}  // namespace

double EnumeratedSpace::total_probability() const {
  double total = 0.0;
  for (const auto& p : paths) total += p.probability;
  return total;
}

BaselineSchedule BaselineSchedule::constant(double value, int t_max) {
  return BaselineSchedule{std::vector<double>(static_cast<std::size_t>(t_max), value)};
}

std::uint64_t trajectory_count(int vocab, int t_max) {
  if (vocab < 2 || t_max < 1) throw Error("vocabulary must have at least 2 tokens and T_max >= 1");
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  const std::uint64_t branch = static_cast<std::uint64_t>(vocab - 1);
  auto mul = [&](std::uint64_t a, std::uint64_t b) -> std::uint64_t {
    if (a != 0 && b > kMax / a) return kMax;
    return a * b;
  };
  auto add = [&](std::uint64_t a, std::uint64_t b) -> std::uint64_t {
    return b > kMax - a ? kMax : a + b;
  };
  std::uint64_t total = 0;
  std::uint64_t alive = 1;  // (V-1)^{t-1} prefixes reach step t
  for (int t = 1; t < t_max; ++t) {
    total = add(total, alive);
    alive = mul(alive, branch);
  }
  return add(total, mul(alive, static_cast<std::uint64_t>(vocab)));
}

EnumeratedSpace enumerate(const Policy& policy, int prompt, int t_max, std::size_t cap) {
  if (t_max > policy.t_max()) throw Error("T_max exceeds the policy's context table");
  if (trajectory_count(policy.vocab(), t_max) > cap) throw Error("state space too large");

  EnumeratedSpace space;
  space.prompt_id = prompt;
  space.t_max = t_max;
  space.param_count = policy.param_count();

  std::vector<Token> prefix;
  std::vector<Step> steps;
  auto walk = [&](auto& self, double prob) -> void {
    const std::vector<double> dist = policy.next_token_dist(prompt, prefix);
    const bool last = static_cast<int>(prefix.size()) + 1 == t_max;
    for (Token v = 0; v < policy.vocab(); ++v) {
      const double p = prob * dist[static_cast<std::size_t>(v)];
      steps.push_back(make_step(v, dist));
      if (v == kEos || last) {
        Trajectory traj;
        traj.prompt_id = prompt;
        traj.steps = steps;
        space.paths.push_back({score_trajectory(policy, std::move(traj)), p});
      } else {
        prefix.push_back(v);
        self(self, p);
        prefix.pop_back();
      }
      steps.pop_back();
    }
  };
  walk(walk, 1.0);
  return space;
}

EnumeratedSpace rescore_off_policy(const EnumeratedSpace& behavior_space, const Policy& target) {
  EnumeratedSpace out;
  out.prompt_id = behavior_space.prompt_id;
  out.t_max = behavior_space.t_max;
  out.param_count = target.param_count();
  out.paths.reserve(behavior_space.paths.size());
  for (const EnumeratedPath& bp : behavior_space.paths) {
    const Trajectory& src = bp.path.trajectory;
    Trajectory traj;
    traj.prompt_id = src.prompt_id;
    std::vector<Token> prefix;
    for (const Step& s : src.steps) {
      Step step = make_step(s.token, target.next_token_dist(src.prompt_id, prefix));
      step.reward = s.reward;
      step.behavior_logprob = std::log(s.token_prob);
      traj.steps.push_back(std::move(step));
      prefix.push_back(s.token);
    }
    out.paths.push_back({score_trajectory(target, std::move(traj)), bp.probability});
  }
  return out;
}

std::vector<PathStats> path_stats(const EnumeratedSpace& space, const RewardModel& model) {
  std::vector<PathStats> out;
  out.reserve(space.paths.size());
  for (const EnumeratedPath& ep : space.paths) {
    const ScoredTrajectory& st = ep.path;
    PathStats s;
    s.probability = ep.probability;
    s.reward_to_go = reward_to_go(model.score(st.trajectory.tokens()));
    double acc = 0.0;
    for (std::size_t j = 0; j < st.scores.size(); ++j) {
      const double e = score_dot(st.scores[j], st.scores[j]);
      s.step_energy.push_back(e);
      acc += e;
      s.energy.push_back(acc);
      s.total_energy += e;
      for (std::size_t k = 0; k < j; ++k) s.total_energy += 2.0 * score_dot(st.scores[j], st.scores[k]);
    }
    out.push_back(std::move(s));
  }
  return out;
}

GradVec true_gradient(const EnumeratedSpace& space, const RewardModel& model) {
  GradVec g(space.param_count);
  for (const EnumeratedPath& ep : space.paths) {
    const auto G = reward_to_go(model.score(ep.path.trajectory.tokens()));
    for (std::size_t t = 0; t < ep.path.scores.size(); ++t) {
      accumulate_score(g, ep.path.scores[t], ep.probability * G[t]);
    }
  }
  return g;
}

GradVec true_gradient_noncausal(const EnumeratedSpace& space, const RewardModel& model) {
  GradVec g(space.param_count);
  for (const EnumeratedPath& ep : space.paths) {
    const auto r = model.score(ep.path.trajectory.tokens());
    double total = 0.0;
    for (double v : r) total += v;
    for (const ScoreFactor& f : ep.path.scores) accumulate_score(g, f, ep.probability * total);
  }
  return g;
}

double expected_reward(const EnumeratedSpace& space, const RewardModel& model) {
  double total = 0.0;
  for (const EnumeratedPath& ep : space.paths) {
    double r = 0.0;
    for (double v : model.score(ep.path.trajectory.tokens())) r += v;
    total += ep.probability * r;
  }
  return total;
}

double expected_reward(const Policy& policy, const RewardModel& model, int prompt, int t_max) {
  if (t_max > policy.t_max()) throw Error("T_max exceeds the policy's context table");
  if (trajectory_count(policy.vocab(), t_max) > kEnumerationCap) throw Error("state space too large");
  double total = 0.0;
  std::vector<Token> tokens;
  auto walk = [&](auto& self, double prob) -> void {
    const std::vector<double> dist = policy.next_token_dist(prompt, tokens);
    for (Token v = 0; v < policy.vocab(); ++v) {
      const double p = prob * dist[static_cast<std::size_t>(v)];
      tokens.push_back(v);
      if (v == kEos || static_cast<int>(tokens.size()) == t_max) {
        double r = 0.0;
        for (double x : model.score(tokens)) r += x;
        total += p * r;
      } else {
        self(self, p);
      }
      tokens.pop_back();
    }
  };
  walk(walk, 1.0);
  return total;
}

double optimal_expected_reward(const RewardModel& model, int vocab, int t_max) {
  if (trajectory_count(vocab, t_max) > kEnumerationCap) throw Error("state space too large");
  double best = -std::numeric_limits<double>::infinity();
  std::vector<Token> tokens;
  auto walk = [&](auto& self) -> void {
    for (Token v = 0; v < vocab; ++v) {
      tokens.push_back(v);
      if (v == kEos || static_cast<int>(tokens.size()) == t_max) {
        double r = 0.0;
        for (double x : model.score(tokens)) r += x;
        best = std::max(best, r);
      } else {
        self(self);
      }
      tokens.pop_back();
    }
  };
  walk(walk);
  return best;
}

double exact_ogb(const EnumeratedSpace& space, const RewardModel& model) {
  const auto stats = path_stats(space, model);
  double num = 0.0, den = 0.0;
  for (const PathStats& s : stats) {
    num += s.probability * s.reward_to_go.front() * s.total_energy;
    den += s.probability * s.total_energy;
  }
  if (den <= kZeroWeight) throw Error("zero-energy space");
  return num / den;
}

double exact_otb(const EnumeratedSpace& space, const RewardModel& model, std::size_t t) {
  check_step(space, t);
  return strict_centroid(centroid_at(path_stats(space, model), t, energy_at), t);
}

double exact_isolated_baseline(const EnumeratedSpace& space, const RewardModel& model,
                               std::size_t t) {
  check_step(space, t);
  return strict_centroid(centroid_at(path_stats(space, model), t, step_energy_at), t);
}

double exact_value_baseline(const EnumeratedSpace& space, const RewardModel& model,
                            const std::vector<Token>& prefix) {
  double num = 0.0, mass = 0.0;
  const std::size_t n = prefix.size();
  for (const EnumeratedPath& ep : space.paths) {
    const Trajectory& traj = ep.path.trajectory;
    if (traj.length() <= n) continue;
    bool match = true;
    for (std::size_t i = 0; i < n && match; ++i) match = traj.steps[i].token == prefix[i];
    if (!match) continue;
    const auto G = reward_to_go(model.score(traj.tokens()));
    num += ep.probability * G[n];
    mass += ep.probability;
  }
  if (!(mass > 0.0)) throw Error("unreachable prefix");
  return num / mass;
}

ValueTable::ValueTable(const EnumeratedSpace& space, const RewardModel& model) {
  std::map<std::vector<Token>, std::pair<double, double>> acc;
  for (const EnumeratedPath& ep : space.paths) {
    const Trajectory& traj = ep.path.trajectory;
    const auto G = reward_to_go(model.score(traj.tokens()));
    std::vector<Token> prefix;
    for (std::size_t t = 0; t < traj.length(); ++t) {
      auto& [num, mass] = acc[prefix];
      num += ep.probability * G[t];
      mass += ep.probability;
      prefix.push_back(traj.steps[t].token);
    }
  }
  for (const auto& [prefix, nm] : acc) {
    if (nm.second > 0.0) values_.emplace(prefix, nm.first / nm.second);
  }
}

double ValueTable::at(Prefix prefix) const {
  const auto it = values_.find(std::vector<Token>(prefix.begin(), prefix.end()));
  if (it == values_.end()) throw Error("unreachable prefix");
  return it->second;
}

BaselineSchedule otb_schedule(const EnumeratedSpace& space, const RewardModel& model) {
  return schedule_from(space, model, energy_at);
}

BaselineSchedule isolated_schedule(const EnumeratedSpace& space, const RewardModel& model) {
  return schedule_from(space, model, step_energy_at);
}

BaselineSchedule mean_schedule(const EnumeratedSpace& space, const RewardModel& model) {
  return schedule_from(space, model, [](const PathStats&, std::size_t) { return 1.0; });
}

namespace {

// Accumulates, for step t, sum_tau p * [G_k or (G_k - B_k)] <s_k, s_t> over
// k (split into the diagonal and the off-diagonal part) and p ||s_t||^2.
struct CrossSums {
  double diagonal = 0.0;      // E[G_t ||s_t||^2]
  double off_diagonal = 0.0;  // sum_{k != t} E[G_k <s_k, s_t>]
  double correction = 0.0;    // sum_{k != t} B_k E[<s_k, s_t>]
  double energy = 0.0;        // E[||s_t||^2]
};

CrossSums cross_sums(const EnumeratedSpace& space, const RewardModel& model, std::size_t t,
                     const BaselineSchedule* schedule) {
  CrossSums c;
  for (const EnumeratedPath& ep : space.paths) {
    const ScoredTrajectory& st = ep.path;
    if (st.length() < t) continue;
    const auto G = reward_to_go(model.score(st.trajectory.tokens()));
    const ScoreFactor& ft = st.scores[t - 1];
    for (std::size_t k = 1; k <= st.length(); ++k) {
      const double dot = score_dot(st.scores[k - 1], ft);
      if (k == t) {
        c.diagonal += ep.probability * G[k - 1] * dot;
        c.energy += ep.probability * dot;
      } else {
        c.off_diagonal += ep.probability * G[k - 1] * dot;
        if (schedule) c.correction += ep.probability * schedule_value(*schedule, k) * dot;
      }
    }
  }
  return c;
}

}  // namespace

double cross_term_optimal_baseline(const EnumeratedSpace& space, const RewardModel& model,
                                   std::size_t t) {
  check_step(space, t);
  const CrossSums c = cross_sums(space, model, t, nullptr);
  if (c.energy <= kZeroWeight) throw Error("zero denominator");
  return (c.diagonal + c.off_diagonal) / c.energy;
}

double cross_term_optimal_baseline(const EnumeratedSpace& space, const RewardModel& model,
                                   std::size_t t, const BaselineSchedule& schedule) {
  check_step(space, t);
  const CrossSums c = cross_sums(space, model, t, &schedule);
  if (c.energy <= kZeroWeight) throw Error("zero denominator");
  return (c.diagonal + c.off_diagonal - c.correction) / c.energy;
}

BaselineSchedule cross_term_schedule(const EnumeratedSpace& space, const RewardModel& model) {
  const BaselineSchedule fallback = mean_schedule(space, model);
  BaselineSchedule out;
  for (std::size_t t = 1; t <= static_cast<std::size_t>(space.t_max); ++t) {
    const CrossSums c = cross_sums(space, model, t, nullptr);
    out.values.push_back(c.energy <= kZeroWeight ? fallback.at(t)
                                                 : (c.diagonal + c.off_diagonal) / c.energy);
  }
  return out;
}

double stationarity_residual(const EnumeratedSpace& space, const RewardModel& model,
                             const BaselineSchedule& schedule, std::size_t t) {
  check_step(space, t);
  double total = 0.0;
  for (const EnumeratedPath& ep : space.paths) {
    const ScoredTrajectory& st = ep.path;
    if (st.length() < t) continue;
    const auto G = reward_to_go(model.score(st.trajectory.tokens()));
    for (std::size_t k = 1; k <= st.length(); ++k) {
      total += ep.probability * (G[k - 1] - schedule_value(schedule, k)) *
               score_dot(st.scores[k - 1], st.scores[t - 1]);
    }
  }
  return total;
}

std::vector<double> otb_stationarity(const EnumeratedSpace& space, const RewardModel& model,
                                     const BaselineSchedule& schedule) {
  std::vector<double> out(static_cast<std::size_t>(space.t_max), 0.0);
  for (const PathStats& s : path_stats(space, model)) {
    for (std::size_t t = 1; t <= s.reward_to_go.size(); ++t) {
      out[t - 1] += s.probability * s.energy[t - 1] *
                    (s.reward_to_go[t - 1] - schedule_value(schedule, t));
    }
  }
  return out;
}

std::vector<double> expected_energy(const EnumeratedSpace& space, const RewardModel& model) {
  std::vector<double> out(static_cast<std::size_t>(space.t_max), 0.0);
  for (const PathStats& s : path_stats(space, model)) {
    for (std::size_t t = 0; t < s.energy.size(); ++t) out[t] += s.probability * s.energy[t];
  }
  return out;
}

std::vector<double> objective_terms(const EnumeratedSpace& space, const RewardModel& model,
                                    const BaselineSchedule& schedule) {
  std::vector<double> out(static_cast<std::size_t>(space.t_max), 0.0);
  for (const PathStats& s : path_stats(space, model)) {
    for (std::size_t t = 1; t <= s.reward_to_go.size(); ++t) {
      const double a = s.reward_to_go[t - 1] - schedule_value(schedule, t);
      out[t - 1] += s.probability * s.energy[t - 1] * a * a;
    }
  }
  return out;
}

double objective_J(const EnumeratedSpace& space, const RewardModel& model,
                   const BaselineSchedule& schedule) {
  double total = 0.0;
  for (double v : objective_terms(space, model, schedule)) total += v;
  return total;
}

double objective_J(const EnumeratedSpace& space, const RewardModel& model,
                   const StepBaseline& baseline) {
  const auto stats = path_stats(space, model);
  double total = 0.0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    const PathStats& s = stats[i];
    for (std::size_t t = 1; t <= s.reward_to_go.size(); ++t) {
      const double a = s.reward_to_go[t - 1] - baseline(space.paths[i].path.trajectory, t);
      total += s.probability * s.energy[t - 1] * a * a;
    }
  }
  return total;
}

VarianceGap variance_gap(const EnumeratedSpace& space, const RewardModel& model) {
  const BaselineSchedule otb = otb_schedule(space, model);
  const double global = exact_ogb(space, model);
  VarianceGap gap;
  gap.j_otb = objective_J(space, model, otb);
  gap.j_ogb = objective_J(space, model, BaselineSchedule::constant(global, space.t_max));
  for (const PathStats& s : path_stats(space, model)) {
    for (std::size_t t = 1; t <= s.reward_to_go.size(); ++t) {
      const double w = s.probability * s.energy[t - 1];
      const double shift = otb.at(t) - global;
      gap.term_a += 2.0 * w * (s.reward_to_go[t - 1] - otb.at(t)) * shift;
      gap.term_b += w * shift * shift;
    }
  }
  return gap;
}

Moments exact_moments(const EnumeratedSpace& space, const PathEstimator& estimator) {
  Moments m{GradVec(space.param_count), 0.0};
  for (const EnumeratedPath& ep : space.paths) {
    const GradVec g = estimator(ep.path);
    m.mean.axpy(ep.probability, g);
    m.second += ep.probability * g.squared_norm();
  }
  return m;
}

double exact_estimator_variance(const EnumeratedSpace& space, const PathEstimator& estimator) {
  // Centered second moment; avoids the cancellation in E||g||^2 - ||E g||^2.
  std::vector<GradVec> values;
  values.reserve(space.paths.size());
  GradVec mean(space.param_count);
  for (const EnumeratedPath& ep : space.paths) {
    values.push_back(estimator(ep.path));
    mean.axpy(ep.probability, values.back());
  }
  double var = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    var += space.paths[i].probability * (values[i] - mean).squared_norm();
  }
  return var;
}

ConvexDecomposition convex_decomposition_check(const std::vector<Trajectory>& members,
                                               std::size_t t) {
  if (members.empty()) throw Error("empty group");
  ConvexDecomposition out;
  double g_sum = 0.0, gw_t = 0.0, w_t = 0.0, gw_total = 0.0, w_total = 0.0, w_future = 0.0;
  double f_min = std::numeric_limits<double>::infinity();
  double f_max = -f_min;
  for (const Trajectory& m : members) {
    if (m.length() < t) throw Error("group member ends before step t");
    const auto G = reward_to_go(m.rewards());
    const auto step = step_energies(m);
    const auto W = realized_energy_profile(m);
    double future = 0.0;
    for (std::size_t j = t; j < step.size(); ++j) future += step[j];
    const double g = G[t - 1];
    g_sum += g;
    gw_t += g * W[t - 1];
    w_t += W[t - 1];
    gw_total += g * W.back();
    w_total += W.back();
    w_future += future;
    f_min = std::min(f_min, future);
    f_max = std::max(f_max, future);
  }
  const double n = static_cast<double>(members.size());
  const double mean_g = g_sum / n;
  const double threshold = kZeroWeight;
  out.lhs = w_total > threshold ? gw_total / w_total : mean_g;
  const double causal = w_t > threshold ? gw_t / w_t : mean_g;
  const double denom = w_t + w_future;
  out.alpha = denom > threshold ? w_t / denom : 1.0;
  out.rhs = out.alpha * causal + (1.0 - out.alpha) * mean_g;
  out.spread = f_max - f_min;
  out.homogeneous = out.spread <= 1e-12 * std::max(1.0, std::abs(f_max));
  return out;
}

std::vector<Trajectory> homogeneous_group(int vocab, std::size_t t, std::size_t suffix_len,
                                          std::size_t size, SuffixEnergy suffix,
                                          bool deterministic_prefix, Philox& rng) {
  if (vocab < 3) throw Error("homogeneous groups need at least 2 non-EOS tokens");
  if (t < 1) throw Error("step must be at least 1");
  const std::size_t others = static_cast<std::size_t>(vocab - 1);
  auto non_eos = [&] { return static_cast<Token>(1 + rng.categorical(std::vector<double>(others, 1.0))); };
  auto one_hot = [&](Token tok) {
    std::vector<double> d(static_cast<std::size_t>(vocab), 0.0);
    d[static_cast<std::size_t>(tok)] = 1.0;
    return d;
  };

  std::vector<double> uniform(static_cast<std::size_t>(vocab), 1.0 / static_cast<double>(others));
  uniform[0] = 0.0;

  std::vector<Trajectory> group(size);
  for (Trajectory& traj : group) {
    for (std::size_t j = 0; j < t; ++j) {
      const Token tok = non_eos();
      std::vector<double> dist;
      if (deterministic_prefix) {
        dist = one_hot(tok);
      } else {
        std::vector<double> logits(static_cast<std::size_t>(vocab));
        logits[0] = -40.0;
        for (std::size_t v = 1; v < logits.size(); ++v) logits[v] = 1.5 * rng.normal();
        dist = softmax(logits);
      }
      traj.steps.push_back(make_step(tok, std::move(dist)));
    }
    for (std::size_t j = 0; j < suffix_len; ++j) {
      const Token tok = suffix == SuffixEnergy::Uniform ? non_eos() : Token{1};
      traj.steps.push_back(
          make_step(tok, suffix == SuffixEnergy::Uniform ? uniform : one_hot(tok)));
    }
    for (Step& s : traj.steps) s.reward = 2.0 * rng.uniform() - 1.0;
  }
  return group;
}

}  // namespace otblab
