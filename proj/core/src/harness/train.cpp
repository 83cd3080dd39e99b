#include "otblab/harness/train.hpp"

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "otblab/estimators.hpp"
#include "otblab/harness/instances.hpp"
#include "otblab/harness/parallel.hpp"
#include "otblab/harness/replay.hpp"
#include "otblab/harness/svg.hpp"
#include "otblab/oracle.hpp"

namespace otblab::harness {

namespace {

constexpr std::size_t kMonteCarloRewardSamples = 4096;

bool needs_behavior(const EstimatorSpec& spec) {
  return spec.form == EstimatorForm::CausalTIS || spec.baseline == BaselineKind::OtbTis;
}

}  // namespace

SeedRun::SeedRun() : advantages(advantage_table()) {}

double policy_expected_reward(const Policy& policy, const RewardModel& reward, int t_max,
                              std::uint64_t seed, int step) {
  const int prompts = policy.shape().prompts;
  double total = 0.0;
  if (trajectory_count(policy.vocab(), t_max) <= kEnumerationCap) {
    for (int p = 0; p < prompts; ++p) total += expected_reward(policy, reward, p, t_max);
    return total / prompts;
  }
  Philox rng(derive_seed(seed, kMonteCarloTag), static_cast<std::uint64_t>(step));
  for (std::size_t i = 0; i < kMonteCarloRewardSamples; ++i) {
    Trajectory traj = sample_trajectory(policy, static_cast<int>(i % static_cast<std::size_t>(prompts)),
                                        t_max, rng);
    apply_rewards(reward, traj);
    total += traj.total_reward();
  }
  return total / static_cast<double>(kMonteCarloRewardSamples);
}

SeedRun train_seed(const ExperimentConfig& config, std::uint64_t seed) {
  Instance inst = make_instance(config, seed);
  Policy policy = inst.policy;
  const RewardModel& reward = inst.reward;
  const EstimatorSpec spec = config.estimator_spec();
  const int groups = config.run.groups;
  const auto n = static_cast<std::size_t>(config.run.group_size);
  const int prompts = policy.shape().prompts;
  const bool behavior = needs_behavior(spec);
  const double lr = config.run.learning_rate;
  if (!(lr >= 0.0)) throw Error("learning rate must be nonnegative");

  SeedRun run;
  run.seed = seed;
  run.initial_expected_reward = policy_expected_reward(policy, reward, inst.t_max, seed, 0);
  run.optimal_expected_reward = optimal_expected_reward(reward, policy.vocab(), inst.t_max);

  for (int step = 1; step <= config.run.steps; ++step) {
    GradVec update(policy.param_count());
    TrainRow row;
    row.step = step;
    row.seed = seed;
    for (int g = 0; g < groups; ++g) {
      const int prompt = g % prompts;
      Philox rng(derive_seed(seed, kRolloutTag),
                 static_cast<std::uint64_t>(step - 1) * static_cast<std::uint64_t>(groups) +
                     static_cast<std::uint64_t>(g));
      const auto members = sample_group(policy, reward, prompt, n, rng, behavior);

      EstimatorSpec group_spec = spec;
      std::optional<ValueTable> values;
      if (spec.baseline == BaselineKind::ValueOracle) {
        values.emplace(enumerate(policy, prompt, inst.t_max), reward);
        group_spec.options.oracle_baseline = [&values](int, Prefix prefix) { return values->at(prefix); };
      }
      const BatchEstimate est = estimate_batch(members, group_spec);
      const GroupBatch group = to_group(members);
      const BatchDiagnostics d = batch_diagnostics(group, est.table, est.grads);
      update.axpy(1.0 / groups, est.mean);
      row.grad_norm += d.grad_norm / groups;
      row.p_total += d.p_total / groups;
      row.signal += d.signal / groups;
      row.var_of_mean += d.var_of_mean / groups;
      row.p_total_tok += d.p_total_tok / groups;
      row.var_of_mean_tok += d.var_of_mean_tok / groups;

      const LogKey key{seed, step, g};
      append_advantages(run.advantages, key, group, est.table);
      if (config.output.record_rollouts) {
        for (const auto& m : members) run.rollouts.push_back({key, m.trajectory});
      }
    }

    std::vector<double> params(policy.params().begin(), policy.params().end());
    for (std::size_t i = 0; i < params.size(); ++i) params[i] += lr * update[i];
    if (!GradVec(params).all_finite()) {
      run.diverged_at = step;
      break;
    }
    policy = policy.with_params(std::move(params));
    row.expected_reward = policy_expected_reward(policy, reward, inst.t_max, seed, step);
    run.rows.push_back(row);
  }
  return run;
}

CsvTable RunRecord::table(const ExperimentConfig& config) const {
  CsvTable t({"step", "seed", "baseline", "N", "expected_reward", "grad_norm", "p_total", "signal",
              "var_of_mean", "p_total_tok", "var_of_mean_tok"});
  const std::string kind = to_string(config.estimator.baseline);
  for (const SeedRun& run : runs) {
    for (const TrainRow& r : run.rows) {
      t.append(CsvTable::Row()
                   .add(r.step)
                   .add(static_cast<unsigned long long>(r.seed))
                   .add(kind)
                   .add(config.run.group_size)
                   .add(r.expected_reward)
                   .add(r.grad_norm)
                   .add(r.p_total)
                   .add(r.signal)
                   .add(r.var_of_mean)
                   .add(r.p_total_tok)
                   .add(r.var_of_mean_tok));
    }
  }
  return t;
}

RunRecord train(const ExperimentConfig& config) {
  RunRecord record;
  record.runs.resize(config.run.seeds.size());
  parallel_for(config.run.seeds.size(),
               [&](std::size_t i) { record.runs[i] = train_seed(config, config.run.seeds[i]); });
  return record;
}

int run_train(const ExperimentConfig& config) {
  const RunRecord record = train(config);
  const std::filesystem::path dir(config.output.dir);
  record.table(config).write((dir / "train.csv").string());

  // One header, then every seed's rows in seed order.
  std::string adv_text = advantage_table().to_string();
  std::ostringstream jsonl;
  for (const SeedRun& run : record.runs) {
    const std::string text = run.advantages.to_string();
    adv_text += text.substr(text.find('\n') + 1);
    write_jsonl(jsonl, run.rollouts, false);
  }
  write_file((dir / "advantages.csv").string(), adv_text);
  if (config.output.record_rollouts) write_file((dir / "rollouts.jsonl").string(), jsonl.str());

  if (config.output.svg) {
    std::vector<Series> reward, variance;
    for (const SeedRun& run : record.runs) {
      Series r{"seed " + std::to_string(run.seed), {}, {}};
      Series v = r;
      for (const TrainRow& row : run.rows) {
        r.x.push_back(row.step);
        r.y.push_back(row.expected_reward);
        v.x.push_back(row.step);
        v.y.push_back(row.var_of_mean);
      }
      reward.push_back(std::move(r));
      variance.push_back(std::move(v));
    }
    const std::string kind = to_string(config.estimator.baseline);
    write_file((dir / "train_reward.svg").string(),
               line_chart(reward, {"Expected reward (" + kind + ")", "step", "E[R]"}));
    write_file((dir / "train_variance.svg").string(),
               line_chart(variance, {"Estimated variance of the mean (" + kind + ")", "step",
                                     "V", false, true}));
  }

  int status = 0;
  for (const SeedRun& run : record.runs) {
    if (run.diverged_at) {
      std::fprintf(stderr, "seed %llu diverged at step %d\n",
                   static_cast<unsigned long long>(run.seed), *run.diverged_at);
      status = 1;
    }
  }
  return status;
}

}  // namespace otblab::harness
