#include "otblab/harness/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

namespace otblab::harness {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::string& section,
                    std::initializer_list<const char*> known) {
  if (!j.is_object()) throw Error("config: '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw Error("config: unknown key '" + section + "." + key + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

PolicyKind parse_policy_kind(const std::string& name) {
  if (name == "tabular") return PolicyKind::TabularPrefix;
  if (name == "linear_softmax") return PolicyKind::LinearSoftmax;
  throw Error("config: unknown policy kind '" + name + "'");
}

void parse_policy(const json& j, PolicyConfig& p) {
  reject_unknown(j, "policy",
                 {"kind", "vocab", "t_max", "prompts", "feature_dim", "feature_seed", "init"});
  if (j.contains("kind")) p.shape.kind = parse_policy_kind(j.at("kind").get<std::string>());
  read(j, "vocab", p.shape.vocab);
  read(j, "t_max", p.shape.t_max);
  read(j, "prompts", p.shape.prompts);
  read(j, "feature_dim", p.shape.feature_dim);
  read(j, "feature_seed", p.shape.feature_seed);
  if (j.contains("init")) {
    const json& init = j.at("init");
    reject_unknown(init, "policy.init", {"scheme", "sigma", "seed"});
    if (init.contains("scheme")) {
      const auto scheme = init.at("scheme").get<std::string>();
      if (scheme == "zeros") {
        p.init.kind = InitScheme::Kind::Zeros;
      } else if (scheme == "gaussian") {
        p.init.kind = InitScheme::Kind::Gaussian;
      } else {
        throw Error("config: unknown init scheme '" + scheme + "'");
      }
    }
    read(init, "sigma", p.init.sigma);
    read(init, "seed", p.init.seed);
  }
}

RewardModel parse_reward(const json& j) {
  if (!j.is_object()) throw Error("config: 'reward' must be an object");
  const std::string kind = j.value("kind", std::string("terminal_target"));
  if (kind == "terminal_target") {
    reject_unknown(j, "reward", {"kind", "target", "value"});
    TerminalTarget r;
    read(j, "target", r.target);
    read(j, "value", r.value);
    return RewardModel(r);
  }
  if (kind == "terminal_pattern") {
    reject_unknown(j, "reward", {"kind", "pattern", "value"});
    TerminalPattern r;
    read(j, "pattern", r.pattern);
    read(j, "value", r.value);
    return RewardModel(r);
  }
  if (kind == "dense") {
    reject_unknown(j, "reward", {"kind", "table"});
    DensePerStep r;
    read(j, "table", r.table);
    return RewardModel(r);
  }
  throw Error("config: unknown reward kind '" + kind + "'");
}

void parse_estimator(const json& j, EstimatorConfig& e) {
  reject_unknown(j, "estimator", {"form", "baseline", "clip", "exclude_self"});
  if (j.contains("form")) e.form = parse_estimator_form(j.at("form").get<std::string>());
  if (j.contains("baseline")) e.baseline = parse_baseline_kind(j.at("baseline").get<std::string>());
  read(j, "clip", e.clip);
  read(j, "exclude_self", e.exclude_self);
}

void parse_run(const json& j, RunConfig& r) {
  reject_unknown(j, "run",
                 {"group_size", "groups", "steps", "learning_rate", "seeds", "mc_batches", "sweep"});
  read(j, "group_size", r.group_size);
  read(j, "groups", r.groups);
  read(j, "steps", r.steps);
  read(j, "learning_rate", r.learning_rate);
  read(j, "seeds", r.seeds);
  read(j, "mc_batches", r.mc_batches);
  read(j, "sweep", r.sweep);
}

void set_format(OutputConfig& o, const std::string& format) {
  if (format == "csv") {
    o.svg = false;
  } else if (format == "csv+svg") {
    o.svg = true;
  } else {
    throw Error("unknown output format '" + format + "' (expected csv or csv+svg)");
  }
}

void parse_output(const json& j, OutputConfig& o) {
  reject_unknown(j, "output", {"dir", "format", "record_rollouts"});
  read(j, "dir", o.dir);
  if (j.contains("format")) set_format(o, j.at("format").get<std::string>());
  read(j, "record_rollouts", o.record_rollouts);
}

}  // namespace

BaselineOptions ExperimentConfig::baseline_options() const {
  BaselineOptions o;
  o.exclude_self = estimator.exclude_self;
  o.tis_clip = estimator.clip;
  return o;
}

EstimatorSpec ExperimentConfig::estimator_spec() const {
  return EstimatorSpec{estimator.form, estimator.baseline, baseline_options()};
}

ExperimentConfig default_config() { return ExperimentConfig{}; }

ExperimentConfig parse_config(const std::string& json_text) {
  ExperimentConfig c = default_config();
  try {
    const json j = json::parse(json_text);
    reject_unknown(j, "<root>", {"policy", "reward", "estimator", "run", "output"});
    if (j.contains("policy")) parse_policy(j.at("policy"), c.policy);
    if (j.contains("reward")) c.reward = parse_reward(j.at("reward"));
    if (j.contains("estimator")) parse_estimator(j.at("estimator"), c.estimator);
    if (j.contains("run")) parse_run(j.at("run"), c.run);
    if (j.contains("output")) parse_output(j.at("output"), c.output);
  } catch (const json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

void validate(const ExperimentConfig& c) {
  const PolicyShape& s = c.policy.shape;
  if (s.vocab < 2) throw Error("config: vocab must be at least 2");
  if (s.t_max < 1) throw Error("config: t_max must be at least 1");
  if (s.prompts < 1) throw Error("config: prompts must be at least 1");
  if (s.kind == PolicyKind::LinearSoftmax && s.feature_dim < 1) {
    throw Error("config: feature_dim must be at least 1");
  }
  if (!(c.policy.init.sigma >= 0.0)) throw Error("config: init sigma must be nonnegative");
  if (c.run.group_size < 2) throw Error("config: group_size must be at least 2");
  if (c.run.groups < 1) throw Error("config: groups must be at least 1");
  if (c.run.steps < 0) throw Error("config: steps must be nonnegative");
  if (!(c.run.learning_rate > 0.0) || !std::isfinite(c.run.learning_rate)) {
    throw Error("config: learning_rate must be positive");
  }
  if (c.run.seeds.empty()) throw Error("config: seeds must be nonempty");
  if (c.run.mc_batches < 1) throw Error("config: mc_batches must be at least 1");
  for (int n : c.run.sweep) {
    if (n < 2) throw Error("config: sweep group sizes must be at least 2");
  }
  if (!(c.estimator.clip > 0.0)) throw Error("config: clip must be positive");
}

void apply_overrides(ExperimentConfig& config, const Overrides& overrides) {
  if (overrides.seed) config.run.seeds = {*overrides.seed};
  if (overrides.out_dir) config.output.dir = *overrides.out_dir;
  if (overrides.format) set_format(config.output, *overrides.format);
}

}  // namespace otblab::harness
