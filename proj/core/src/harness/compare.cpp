#include "otblab/harness/compare.hpp"

#include <cmath>
#include <filesystem>
#include <limits>
#include <map>

#include "otblab/estimators.hpp"
#include "otblab/harness/instances.hpp"
#include "otblab/harness/parallel.hpp"
#include "otblab/harness/svg.hpp"
#include "otblab/oracle.hpp"

namespace otblab::harness {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// "cross_term" has no group estimator; it only gets exact columns.
const std::vector<std::string> kCompared{"none", "grpo",         "rloo",         "opo",
                                         "ogb",  "otb",          "otb_isolated", "value_oracle",
                                         "cross_term"};
const std::vector<std::string> kSwept{"grpo", "ogb", "otb"};

struct Exact {
  const EnumeratedSpace& space;
  const RewardModel& reward;
  EstimatorForm form;
  ValueTable values;

  StepBaseline baseline_for(const std::string& name) const {
    auto constant = [](double c) { return StepBaseline([c](const Trajectory&, std::size_t) { return c; }); };
    auto schedule = [](BaselineSchedule s) {
      return StepBaseline([s = std::move(s)](const Trajectory&, std::size_t t) { return s.at(t); });
    };
    if (name == "none") return constant(0.0);
    if (name == "grpo" || name == "rloo") return constant(expected_reward(space, reward));
    if (name == "opo") {
      double num = 0.0, den = 0.0;
      for (const auto& ep : space.paths) {
        double r = 0.0;
        for (double v : reward.score(ep.path.trajectory.tokens())) r += v;
        const double len = static_cast<double>(ep.path.length());
        num += ep.probability * r * len;
        den += ep.probability * len;
      }
      return constant(num / den);
    }
    if (name == "ogb") return constant(exact_ogb(space, reward));
    if (name == "otb") return schedule(otb_schedule(space, reward));
    if (name == "otb_isolated") return schedule(isolated_schedule(space, reward));
    if (name == "cross_term") return schedule(cross_term_schedule(space, reward));
    if (name == "value_oracle") {
      return StepBaseline([this](const Trajectory& traj, std::size_t t) {
        const auto tokens = traj.tokens();
        return values.at(Prefix(tokens.data(), t - 1));
      });
    }
    throw Error("no exact analogue for baseline '" + name + "'");
  }

  double variance(const StepBaseline& b) const {
    const RewardModel model = reward;
    const EstimatorForm f = form;
    return exact_estimator_variance(space, [&b, model, f](const ScoredTrajectory& st) {
      ScoredTrajectory copy = st;
      apply_rewards(model, copy.trajectory);
      std::vector<double> row;
      for (std::size_t t = 1; t <= copy.length(); ++t) row.push_back(b(copy.trajectory, t));
      GradVec g(copy.param_count);
      accumulate_weighted_scores(g, copy, score_coefficients(copy.trajectory, f, row, 0.0), 1.0);
      return g;
    });
  }
};

struct MonteCarlo {
  double var_of_mean = 0.0;
  double var_of_mean_tok = 0.0;
  double batch_variance = 0.0;
};

MonteCarlo monte_carlo(const Policy& policy, const RewardModel& reward, const EstimatorSpec& spec,
                       std::size_t n, int batches, std::uint64_t seed) {
  MonteCarlo mc;
  GradVec sum(policy.param_count());
  double sum_sq = 0.0;
  for (int b = 0; b < batches; ++b) {
    // Same stream per batch index for every baseline: common random numbers.
    Philox rng(derive_seed(seed, kMonteCarloTag), static_cast<std::uint64_t>(b));
    const auto members = sample_group(policy, reward, 0, n, rng);
    const BatchEstimate est = estimate_batch(members, spec);
    const BatchDiagnostics d = batch_diagnostics(to_group(members), est.table, est.grads);
    mc.var_of_mean += d.var_of_mean;
    mc.var_of_mean_tok += d.var_of_mean_tok;
    sum += est.mean;
    sum_sq += est.mean.squared_norm();
  }
  const double k = static_cast<double>(batches);
  mc.var_of_mean /= k;
  mc.var_of_mean_tok /= k;
  mc.batch_variance = batches > 1 ? (sum_sq - sum.squared_norm() / k) / (k - 1.0) : kNaN;
  return mc;
}

struct SeedResult {
  std::vector<CompareRow> rows;
  std::vector<SweepRow> sweep;
};

SeedResult compare_seed(const ExperimentConfig& config, std::uint64_t seed) {
  const Instance inst = make_instance(config, seed);
  if (config.estimator.form == EstimatorForm::CausalTIS) {
    throw Error("compare runs on-policy; use the noncausal or causal form");
  }
  const EnumeratedSpace space = enumerate(inst.policy, 0, inst.t_max);
  const Exact exact{space, inst.reward, config.estimator.form, ValueTable(space, inst.reward)};

  auto spec_for = [&](const std::string& name) {
    EstimatorSpec spec{config.estimator.form, parse_baseline_kind(name), config.baseline_options()};
    if (spec.baseline == BaselineKind::ValueOracle) {
      spec.options.oracle_baseline = [&exact](int, Prefix prefix) { return exact.values.at(prefix); };
    }
    return spec;
  };

  SeedResult out;
  const auto n = static_cast<std::size_t>(config.run.group_size);
  for (const std::string& name : kCompared) {
    CompareRow row;
    row.seed = seed;
    row.baseline = name;
    const StepBaseline b = exact.baseline_for(name);
    row.exact_j = objective_J(space, inst.reward, b);
    row.exact_variance = exact.variance(b);
    if (name == "cross_term") {
      row.mc_var_of_mean = row.mc_var_of_mean_tok = row.mc_batch_variance = kNaN;
    } else {
      const MonteCarlo mc =
          monte_carlo(inst.policy, inst.reward, spec_for(name), n, config.run.mc_batches, seed);
      row.mc_var_of_mean = mc.var_of_mean;
      row.mc_var_of_mean_tok = mc.var_of_mean_tok;
      row.mc_batch_variance = mc.batch_variance;
    }
    out.rows.push_back(row);
  }
  for (const std::string& name : kSwept) {
    const double var = exact.variance(exact.baseline_for(name));
    for (int size : config.run.sweep) {
      const MonteCarlo mc = monte_carlo(inst.policy, inst.reward, spec_for(name),
                                        static_cast<std::size_t>(size), config.run.mc_batches, seed);
      out.sweep.push_back({seed, name, size, mc.var_of_mean, mc.var_of_mean_tok, var / size});
    }
  }
  return out;
}

}  // namespace

const std::vector<std::string>& compare_baselines() { return kCompared; }

CsvTable CompareReport::table() const {
  CsvTable t({"seed", "baseline", "exact_j", "exact_variance", "mc_var_of_mean",
              "mc_var_of_mean_tok", "mc_batch_variance"});
  for (const CompareRow& r : rows) {
    t.append(CsvTable::Row()
                 .add(static_cast<unsigned long long>(r.seed))
                 .add(r.baseline)
                 .add(r.exact_j)
                 .add(r.exact_variance)
                 .add(r.mc_var_of_mean)
                 .add(r.mc_var_of_mean_tok)
                 .add(r.mc_batch_variance));
  }
  return t;
}

CsvTable CompareReport::sweep_table() const {
  CsvTable t({"seed", "baseline", "N", "mc_var_of_mean", "mc_var_of_mean_tok",
              "exact_variance_over_n"});
  for (const SweepRow& r : sweep) {
    t.append(CsvTable::Row()
                 .add(static_cast<unsigned long long>(r.seed))
                 .add(r.baseline)
                 .add(r.group_size)
                 .add(r.mc_var_of_mean)
                 .add(r.mc_var_of_mean_tok)
                 .add(r.exact_variance_over_n));
  }
  return t;
}

CompareReport compare(const ExperimentConfig& config) {
  const auto& seeds = config.run.seeds;
  std::vector<SeedResult> per_seed(seeds.size());
  parallel_for(seeds.size(), [&](std::size_t i) { per_seed[i] = compare_seed(config, seeds[i]); });
  CompareReport report;
  for (auto& r : per_seed) {
    report.rows.insert(report.rows.end(), r.rows.begin(), r.rows.end());
    report.sweep.insert(report.sweep.end(), r.sweep.begin(), r.sweep.end());
  }
  return report;
}

int run_compare(const ExperimentConfig& config) {
  const CompareReport report = compare(config);
  const std::filesystem::path dir(config.output.dir);
  report.table().write((dir / "compare.csv").string());
  report.sweep_table().write((dir / "compare_sweep.csv").string());
  if (config.output.svg) {
    const double seeds = static_cast<double>(config.run.seeds.size());
    std::vector<double> bars(kCompared.size(), 0.0);
    for (const CompareRow& r : report.rows) {
      for (std::size_t k = 0; k < kCompared.size(); ++k) {
        if (kCompared[k] == r.baseline) bars[k] += r.exact_variance / seeds;
      }
    }
    write_file((dir / "compare_variance.svg").string(),
               bar_chart(kCompared, bars, {"Exact estimator variance (seed mean)", "baseline",
                                           "variance"}));
    std::vector<Series> lines;
    for (const std::string& name : kSwept) {
      Series s{name, {}, {}};
      for (int size : config.run.sweep) {
        double total = 0.0;
        for (const SweepRow& r : report.sweep) {
          if (r.baseline == name && r.group_size == size) total += r.mc_var_of_mean / seeds;
        }
        s.x.push_back(size);
        s.y.push_back(total);
      }
      lines.push_back(std::move(s));
    }
    write_file((dir / "compare_sweep.svg").string(),
               line_chart(lines, {"Estimated variance of the mean vs N", "N", "V", true, true}));
  }
  return 0;
}

}  // namespace otblab::harness
