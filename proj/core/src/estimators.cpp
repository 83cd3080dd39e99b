#include "otblab/estimators.hpp"

#include <cmath>

#include "otblab/rewards.hpp"

namespace otblab {

namespace {

void check_coverage(const ScoredTrajectory& scored, std::span<const double> baselines) {
  if (baselines.size() < scored.length()) {
    throw Error("baseline schedule shorter than the trajectory");
  }
}

Trajectory with_rewards(const RewardModel& model, Trajectory traj) {
  apply_rewards(model, traj);
  return traj;
}

}  // namespace

EstimatorForm parse_estimator_form(std::string_view name) {
  if (name == "noncausal") return EstimatorForm::NonCausal;
  if (name == "causal") return EstimatorForm::Causal;
  if (name == "causal_tis") return EstimatorForm::CausalTIS;
  throw Error("unknown estimator form '" + std::string(name) + "'");
}

std::string to_string(EstimatorForm form) {
  switch (form) {
    case EstimatorForm::NonCausal:
      return "noncausal";
    case EstimatorForm::Causal:
      return "causal";
    case EstimatorForm::CausalTIS:
      return "causal_tis";
  }
  return "unknown";
}

void accumulate_weighted_scores(GradVec& out, const ScoredTrajectory& scored,
                                std::span<const double> coef, double scale) {
  for (std::size_t t = 0; t < scored.scores.size(); ++t) {
    accumulate_score(out, scored.scores[t], scale * coef[t]);
  }
}

std::vector<double> score_coefficients(const Trajectory& traj, EstimatorForm form,
                                       std::span<const double> baselines, double clip) {
  if (baselines.size() < traj.length()) throw Error("baseline schedule shorter than the trajectory");
  const std::vector<double> g = reward_to_go(traj.rewards());
  std::vector<double> coef(g.size());
  switch (form) {
    case EstimatorForm::NonCausal:
      for (double& c : coef) c = g.front() - baselines[0];
      break;
    case EstimatorForm::Causal:
      for (std::size_t t = 0; t < g.size(); ++t) coef[t] = g[t] - baselines[t];
      break;
    case EstimatorForm::CausalTIS: {
      const std::vector<double> rho = clipped_ratios(traj, clip);
      for (std::size_t t = 0; t < g.size(); ++t) coef[t] = rho[t] * (g[t] - baselines[t]);
      break;
    }
  }
  return coef;
}

GradVec grad_noncausal(const ScoredTrajectory& scored, double baseline) {
  const double advantage = scored.trajectory.total_reward() - baseline;
  GradVec g(scored.param_count);
  for (const ScoreFactor& f : scored.scores) accumulate_score(g, f, advantage);
  return g;
}

GradVec grad_causal(const ScoredTrajectory& scored, std::span<const double> baselines) {
  check_coverage(scored, baselines);
  GradVec g(scored.param_count);
  accumulate_weighted_scores(
      g, scored, score_coefficients(scored.trajectory, EstimatorForm::Causal, baselines, 0.0), 1.0);
  return g;
}

GradVec grad_causal(const ScoredTrajectory& scored, const BaselineSchedule& schedule) {
  return grad_causal(scored, std::span<const double>(schedule.values));
}

GradVec grad_tis(const ScoredTrajectory& scored, std::span<const double> baselines, double clip) {
  check_coverage(scored, baselines);
  GradVec g(scored.param_count);
  accumulate_weighted_scores(
      g, scored, score_coefficients(scored.trajectory, EstimatorForm::CausalTIS, baselines, clip),
      1.0);
  return g;
}

GradVec grad_tis(const ScoredTrajectory& scored, const BaselineSchedule& schedule, double clip) {
  return grad_tis(scored, std::span<const double>(schedule.values), clip);
}

BatchEstimate estimate_batch(const std::vector<ScoredTrajectory>& members,
                             const EstimatorSpec& spec) {
  if (members.empty()) throw Error("empty group");
  GroupBatch group;
  group.prompt_id = members.front().trajectory.prompt_id;
  for (const auto& m : members) group.members.push_back(m.trajectory);

  BatchEstimate out;
  out.table = advantages(group, spec.baseline, spec.options);
  out.mean = GradVec(members.front().param_count);
  const double inv_n = 1.0 / static_cast<double>(members.size());
  for (std::size_t i = 0; i < members.size(); ++i) {
    GradVec g(members[i].param_count);
    accumulate_weighted_scores(g, members[i],
                               score_coefficients(members[i].trajectory, spec.form,
                                                  out.table.baselines[i], spec.options.tis_clip),
                               1.0);
    out.mean.axpy(inv_n, g);
    out.grads.push_back(std::move(g));
  }
  return out;
}

BatchDiagnostics batch_diagnostics(const GroupBatch& group, const AdvantageTable& table,
                                   const std::vector<GradVec>& grads) {
  group.validate();
  const std::size_t n = group.size();
  if (table.members() != n || grads.size() != n) throw Error("diagnostics inputs disagree on N");

  BatchDiagnostics d;
  GradVec mean(grads.front().size());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<double> w = step_energies(group.members[i]);
    const auto& a = table.advantages[i];
    double total_energy = 0.0;
    for (std::size_t t = 0; t < w.size(); ++t) {
      total_energy += w[t];
      d.p_total_tok += w[t] * a[t] * a[t];
    }
    d.p_total += total_energy * a.front() * a.front();
    mean.axpy(inv_n, grads[i]);
  }
  d.p_total *= inv_n;
  d.p_total_tok *= inv_n;
  d.signal = mean.squared_norm();
  d.grad_norm = std::sqrt(d.signal);
  const double dof = static_cast<double>(n - 1);
  d.var_of_mean = (d.p_total - d.signal) / dof;
  d.var_of_mean_tok = (d.p_total_tok - d.signal) / dof;
  return d;
}

PathEstimator causal_estimator(const RewardModel& model, BaselineSchedule schedule) {
  return [model, schedule = std::move(schedule)](const ScoredTrajectory& st) {
    ScoredTrajectory copy{with_rewards(model, st.trajectory), st.scores, st.param_count};
    return grad_causal(copy, schedule);
  };
}

PathEstimator noncausal_estimator(const RewardModel& model, double baseline) {
  return [model, baseline](const ScoredTrajectory& st) {
    ScoredTrajectory copy{with_rewards(model, st.trajectory), st.scores, st.param_count};
    return grad_noncausal(copy, baseline);
  };
}

PathEstimator tis_estimator(const RewardModel& model, BaselineSchedule schedule, double clip) {
  return [model, schedule = std::move(schedule), clip](const ScoredTrajectory& st) {
    ScoredTrajectory copy{with_rewards(model, st.trajectory), st.scores, st.param_count};
    return grad_tis(copy, schedule, clip);
  };
}

double exact_estimator_variance(const EnumeratedSpace& space, const RewardModel& model,
                                EstimatorForm form, const BaselineSchedule& schedule,
                                double clip) {
  switch (form) {
    case EstimatorForm::NonCausal:
      return exact_estimator_variance(space, noncausal_estimator(model, schedule.at(1)));
    case EstimatorForm::Causal:
      return exact_estimator_variance(space, causal_estimator(model, schedule));
    case EstimatorForm::CausalTIS:
      return exact_estimator_variance(space, tis_estimator(model, schedule, clip));
  }
  return 0.0;
}

double group_expectation_bias(const EstimatorSpec& spec, const EnumeratedSpace& space,
                              const RewardModel& model, std::size_t group_size,
                              std::size_t cap) {
  if (group_size < 2) throw Error("a group needs at least 2 members");
  const std::size_t m = space.paths.size();
  double tuples = 1.0;
  for (std::size_t i = 0; i < group_size; ++i) tuples *= static_cast<double>(m);
  if (tuples > static_cast<double>(cap)) throw Error("state space too large");

  // Distributions are not needed by any group statistic; dropping them keeps
  // the per-tuple copies cheap.
  std::vector<Trajectory> paths;
  paths.reserve(m);
  for (const EnumeratedPath& ep : space.paths) {
    Trajectory traj = with_rewards(model, ep.path.trajectory);
    for (Step& s : traj.steps) s.dist.clear();
    paths.push_back(std::move(traj));
  }

  GradVec expectation(space.param_count);
  std::vector<std::size_t> index(group_size, 0);
  GroupBatch group;
  group.prompt_id = space.prompt_id;
  group.members.resize(group_size);
  const double inv_n = 1.0 / static_cast<double>(group_size);
  while (true) {
    double prob = 1.0;
    for (std::size_t i = 0; i < group_size; ++i) {
      group.members[i] = paths[index[i]];
      prob *= space.paths[index[i]].probability;
    }
    if (prob > 0.0) {
      const auto baselines = baseline_values(group, spec.baseline, spec.options);
      for (std::size_t i = 0; i < group_size; ++i) {
        const auto coef = score_coefficients(group.members[i], spec.form, baselines[i],
                                             spec.options.tis_clip);
        accumulate_weighted_scores(expectation, space.paths[index[i]].path, coef, prob * inv_n);
      }
    }
    std::size_t k = 0;
    while (k < group_size && ++index[k] == m) index[k++] = 0;
    if (k == group_size) break;
  }
  return max_abs_diff(expectation, true_gradient(space, model));
}

}  // namespace otblab
