#include "otblab/harness/verify.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

#include "otblab/estimators.hpp"
#include "otblab/harness/instances.hpp"
#include "otblab/harness/parallel.hpp"
#include "otblab/oracle.hpp"

namespace otblab::harness {

namespace {

// Collects checks for one seed. `at_most` passes when residual <= tolerance,
// `positive` when residual > 0.
class Checks {
 public:
  explicit Checks(std::uint64_t seed) : seed_(seed) {}

  void at_most(const std::string& name, double residual, double tolerance) {
    out_.push_back({name, seed_, residual, tolerance, residual <= tolerance});
  }
  void positive(const std::string& name, double residual) {
    out_.push_back({name, seed_, residual, 0.0, residual > 0.0});
  }
  std::vector<CheckResult> take() { return std::move(out_); }

 private:
  std::uint64_t seed_;
  std::vector<CheckResult> out_;
};

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

std::vector<CheckResult> check_seed(const ExperimentConfig& config, std::uint64_t seed,
                                    const VerifyOptions& options) {
  Checks c(seed);
  const Instance inst = make_instance(config, seed);
  const Policy& policy = inst.policy;
  const RewardModel& reward = inst.reward;
  const bool tabular = policy.kind() == PolicyKind::TabularPrefix;
  const EnumeratedSpace space = enumerate(policy, 0, inst.t_max);
  const int t_max = inst.t_max;

  c.at_most("total_probability", std::abs(space.total_probability() - 1.0), 1e-10);
  c.at_most("trajectory_count",
            std::abs(static_cast<double>(space.paths.size()) -
                     static_cast<double>(trajectory_count(policy.vocab(), t_max))),
            0.0);

  double proxy_gap = 0.0;
  for (const auto& ep : space.paths) {
    for (std::size_t t = 0; t < ep.path.scores.size(); ++t) {
      const Step& s = ep.path.trajectory.steps[t];
      const double exact = score_dot(ep.path.scores[t], ep.path.scores[t]);
      proxy_gap = std::max(proxy_gap, std::abs(exact - proxy_from_stats(s.token_prob, s.prob_sumsq)));
    }
  }
  c.at_most("proxy_exactness", proxy_gap, 1e-12);

  double score_mean = 0.0;
  for (const auto& prefix : all_prefixes(policy.vocab(), t_max)) {
    const auto dist = policy.next_token_dist(0, prefix);
    GradVec acc(policy.param_count());
    for (Token v = 0; v < policy.vocab(); ++v) {
      accumulate_score(acc, policy.score_factor(0, prefix, v), dist[static_cast<std::size_t>(v)]);
    }
    score_mean = std::max(score_mean, acc.max_abs());
  }
  c.at_most("zero_mean_score", score_mean, 1e-12);

  const GradVec truth = true_gradient(space, reward);
  c.at_most("causal_equals_noncausal", max_abs_diff(truth, true_gradient_noncausal(space, reward)),
            1e-10);

  const BaselineSchedule otb = otb_schedule(space, reward);
  const BaselineSchedule isolated = isolated_schedule(space, reward);
  const BaselineSchedule mean = mean_schedule(space, reward);
  const double ogb = exact_ogb(space, reward);
  const BaselineSchedule ogb_const = BaselineSchedule::constant(ogb, t_max);
  const ValueTable values(space, reward);

  auto bias_of = [&](const PathEstimator& est) {
    return max_abs_diff(exact_moments(space, est).mean, truth);
  };
  c.at_most("unbiased_otb", bias_of(causal_estimator(reward, otb)), 1e-10);
  c.at_most("unbiased_ogb", bias_of(causal_estimator(reward, ogb_const)), 1e-10);
  c.at_most("unbiased_isolated", bias_of(causal_estimator(reward, isolated)), 1e-10);
  c.at_most("unbiased_mean", bias_of(causal_estimator(reward, mean)), 1e-10);
  const PathEstimator value_est = [&](const ScoredTrajectory& st) {
    ScoredTrajectory copy = st;
    apply_rewards(reward, copy.trajectory);
    const auto tokens = copy.trajectory.tokens();
    std::vector<double> b;
    for (std::size_t t = 0; t < tokens.size(); ++t) b.push_back(values.at(Prefix(tokens.data(), t)));
    return grad_causal(copy, b);
  };
  c.at_most("unbiased_value", bias_of(value_est), 1e-10);

  BaselineSchedule plugged = otb;
  if (options.negate_otb) {
    for (double& v : plugged.values) v = -v;
  }
  c.at_most("otb_stationarity", max_abs(otb_stationarity(space, reward, plugged)), 1e-10);

  const auto energy = expected_energy(space, reward);
  const double j_star = objective_J(space, reward, otb);
  double min_increase = std::numeric_limits<double>::infinity();
  for (std::size_t t = 1; t <= static_cast<std::size_t>(t_max); ++t) {
    if (!(energy[t - 1] > 0.0)) continue;
    for (double eps : {1e-3, 1e-1, 1.0}) {
      for (double sign : {-1.0, 1.0}) {
        BaselineSchedule moved = otb;
        moved.values[t - 1] += sign * eps;
        min_increase = std::min(min_increase, objective_J(space, reward, moved) - j_star);
      }
    }
  }
  c.positive("otb_perturbation", min_increase);

  const VarianceGap gap = variance_gap(space, reward);
  c.at_most("j_otb_le_j_ogb", gap.j_otb - gap.j_ogb, 1e-12);
  c.at_most("gap_equals_term_b", std::abs((gap.j_ogb - gap.j_otb) - gap.term_b), 1e-10);
  c.at_most("term_a_zero", std::abs(gap.term_a), 1e-10);

  const double var_ogb = exact_estimator_variance(space, noncausal_estimator(reward, ogb));
  double ogb_increase = std::numeric_limits<double>::infinity();
  for (double eps : {1e-3, 1e-1, 1.0}) {
    for (double sign : {-1.0, 1.0}) {
      ogb_increase = std::min(
          ogb_increase,
          exact_estimator_variance(space, noncausal_estimator(reward, ogb + sign * eps)) - var_ogb);
    }
  }
  c.positive("ogb_minimizes_noncausal_variance", ogb_increase);

  // Per-step schedules compared by exact causal variance.
  const BaselineSchedule cross = cross_term_schedule(space, reward);
  auto variance = [&](const BaselineSchedule& s) {
    return exact_estimator_variance(space, causal_estimator(reward, s));
  };
  std::vector<BaselineSchedule> rivals{otb, mean, ogb_const};
  Philox rng(derive_seed(seed, kRandomScheduleTag), 0);
  for (int k = 0; k < 50; ++k) {
    BaselineSchedule s = isolated;
    for (double& v : s.values) v += 0.5 * rng.normal();
    rivals.push_back(std::move(s));
  }
  const double var_cross = variance(cross);
  const double var_isolated = variance(isolated);
  double cross_excess = -std::numeric_limits<double>::infinity();
  double isolated_excess = -std::numeric_limits<double>::infinity();
  for (const auto& s : rivals) {
    const double v = variance(s);
    const double scale = std::max(1.0, std::abs(v)) * 1e-12;
    cross_excess = std::max(cross_excess, var_cross - v - scale);
    isolated_excess = std::max(isolated_excess, var_isolated - v - scale);
  }
  cross_excess = std::max(cross_excess, var_cross - var_isolated - std::max(1.0, var_isolated) * 1e-12);
  c.at_most("cross_term_min_variance", cross_excess, 0.0);

  double residual = 0.0, full_form_gap = 0.0;
  for (std::size_t t = 1; t <= static_cast<std::size_t>(t_max); ++t) {
    residual = std::max(residual, std::abs(stationarity_residual(space, reward, cross, t)));
    if (!(energy[t - 1] > 0.0)) continue;
    full_form_gap = std::max(full_form_gap,
                             std::abs(cross_term_optimal_baseline(space, reward, t) -
                                      cross_term_optimal_baseline(space, reward, t, otb)));
  }
  c.at_most("cross_term_stationarity", residual, 1e-10);
  c.at_most("cross_term_full_form", full_form_gap, 1e-10);

  if (tabular) {
    c.at_most("isolated_min_variance", isolated_excess, 0.0);
    double iso_gap = 0.0;
    for (std::size_t t = 1; t <= static_cast<std::size_t>(t_max); ++t) {
      iso_gap = std::max(iso_gap, std::abs(cross.at(t) - isolated.at(t)));
    }
    c.at_most("cross_term_equals_isolated", iso_gap, 1e-10);
    double additivity = 0.0;
    for (const PathStats& s : path_stats(space, reward)) {
      additivity = std::max(additivity, std::abs(s.total_energy - s.energy.back()));
    }
    c.at_most("total_energy_additivity", additivity, 1e-12);
  }

  if (policy.vocab() >= 3) {
    Philox grng(derive_seed(seed, kGroupTag), 0);
    struct Case {
      const char* name;
      SuffixEnergy suffix;
      bool det_prefix;
    };
    for (const Case& k : {Case{"convex_decomposition", SuffixEnergy::Uniform, false},
                          Case{"convex_decomposition_alpha1", SuffixEnergy::Deterministic, false},
                          Case{"convex_decomposition_alpha0", SuffixEnergy::Uniform, true}}) {
      const std::size_t t = 2;
      const auto group = homogeneous_group(policy.vocab(), t, 3, 6, k.suffix, k.det_prefix, grng);
      const ConvexDecomposition d = convex_decomposition_check(group, t);
      c.at_most(k.name, d.homogeneous ? std::abs(d.lhs - d.rhs) : 1.0, 1e-10);
    }
  }

  if (trajectory_count(policy.vocab(), t_max) <= 4096) {
    EstimatorSpec rloo{EstimatorForm::Causal, BaselineKind::Rloo, {}};
    c.at_most("rloo_group_bias", group_expectation_bias(rloo, space, reward, 2), 1e-10);
    EstimatorSpec fixed{EstimatorForm::Causal, BaselineKind::ValueOracle, {}};
    fixed.options.oracle_baseline = [&otb](int, Prefix prefix) { return otb.at(prefix.size() + 1); };
    c.at_most("otb_schedule_group_bias", group_expectation_bias(fixed, space, reward, 2), 1e-10);
  }

  const EnumeratedSpace self_space = rescore_off_policy(space, policy);
  double tis_gap = 0.0;
  for (std::size_t i = 0; i < space.paths.size(); ++i) {
    ScoredTrajectory on = space.paths[i].path;
    ScoredTrajectory off = self_space.paths[i].path;
    apply_rewards(reward, on.trajectory);
    apply_rewards(reward, off.trajectory);
    tis_gap = std::max(tis_gap, max_abs_diff(grad_tis(off, otb, 2.0), grad_causal(on, otb)));
  }
  c.at_most("tis_identical_policy", tis_gap, 1e-12);

  {
    Philox srng(derive_seed(seed, kMonteCarloTag), 0);
    const auto members = sample_group(policy, reward, 0, static_cast<std::size_t>(config.run.group_size), srng);
    const BatchEstimate est = estimate_batch(members, EstimatorSpec{});
    const BatchDiagnostics d = batch_diagnostics(to_group(members), est.table, est.grads);
    const double n1 = static_cast<double>(members.size() - 1);
    c.at_most("diagnostics_algebra", std::abs(d.var_of_mean * n1 + d.signal - d.p_total), 1e-12);
  }

  return c.take();
}

}  // namespace

bool VerifyReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& r) { return r.pass; });
}

CsvTable VerifyReport::table() const {
  CsvTable t({"check", "seed", "residual", "tolerance", "pass"});
  for (const CheckResult& r : checks) {
    t.append(CsvTable::Row().add(r.check).add(static_cast<unsigned long long>(r.seed))
                 .add(r.residual).add(r.tolerance).add(r.pass));
  }
  return t;
}

VerifyReport run_checks(const ExperimentConfig& config, const VerifyOptions& options) {
  const auto& seeds = config.run.seeds;
  std::vector<std::vector<CheckResult>> per_seed(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) { per_seed[i] = check_seed(config, seeds[i], options); });
  VerifyReport report;
  for (auto& v : per_seed) report.checks.insert(report.checks.end(), v.begin(), v.end());
  return report;
}

int run_verify(const ExperimentConfig& config, const VerifyOptions& options) {
  const VerifyReport report = run_checks(config, options);
  report.table().write((std::filesystem::path(config.output.dir) / "verify.csv").string());
  return report.all_passed() ? 0 : 1;
}

}  // namespace otblab::harness
