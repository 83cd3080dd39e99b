// otblab: verify / compare / train / replay on tiny enumerable policies.

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "otblab/harness/compare.hpp"
#include "otblab/harness/config.hpp"
#include "otblab/harness/replay.hpp"
#include "otblab/harness/train.hpp"
#include "otblab/harness/verify.hpp"

namespace h = otblab::harness;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> format;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON experiment config (defaults when omitted)");
  cmd->add_option("--seed", f.seed, "run a single seed instead of the configured list");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--format", f.format, "csv or csv+svg")->check(CLI::IsMember({"csv", "csv+svg"}));
}

h::ExperimentConfig resolve(const CommonFlags& f) {
  h::ExperimentConfig c = f.config.empty() ? h::default_config() : h::load_config(f.config);
  h::apply_overrides(c, {f.seed, f.out, f.format});
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Policy-gradient baseline laboratory"};
  app.require_subcommand(1);

  CommonFlags verify_flags, compare_flags, train_flags;
  auto* verify = app.add_subcommand("verify", "run the exact-oracle invariant suite");
  add_common(verify, verify_flags);
  auto* compare = app.add_subcommand("compare", "compare baselines by exact and sampled variance");
  add_common(compare, compare_flags);
  auto* train = app.add_subcommand("train", "on-policy gradient ascent with diagnostics");
  add_common(train, train_flags);

  std::string log_path, baseline = "otb", replay_out = ".";
  double clip = 2.0;
  bool exclude_self = false;
  auto* replay = app.add_subcommand("replay", "recompute advantages from a rollout log");
  replay->add_option("--log", log_path, "rollouts.jsonl written by train")->required();
  replay->add_option("--baseline", baseline, "baseline kind");
  replay->add_option("--clip", clip, "TIS clip for otb_tis");
  replay->add_flag("--exclude-self", exclude_self, "leave each member out of its own baseline");
  replay->add_option("--out", replay_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*verify) {
      const int status = h::run_verify(resolve(verify_flags));
      if (status != 0) std::fprintf(stderr, "verify: some checks failed (see verify.csv)\n");
      return status;
    }
    if (*compare) return h::run_compare(resolve(compare_flags));
    if (*train) return h::run_train(resolve(train_flags));
    if (*replay) {
      otblab::BaselineOptions options;
      options.tis_clip = clip;
      options.exclude_self = exclude_self;
      h::run_replay(log_path, otblab::parse_baseline_kind(baseline), options, replay_out);
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "otblab: %s\n", e.what());
    return 2;
  }
  return 0;
}
