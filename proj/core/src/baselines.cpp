#include "otblab/baselines.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

#include "otblab/policy.hpp"
#include "otblab/rewards.hpp"

namespace otblab {

namespace {

constexpr double kZeroWeight = 1e-12;
constexpr double kLogProbFloor = -50.0;

constexpr std::array<std::pair<BaselineKind, std::string_view>, 9> kNames{{
    {BaselineKind::None, "none"},
    {BaselineKind::Grpo, "grpo"},
    {BaselineKind::Rloo, "rloo"},
    {BaselineKind::Opo, "opo"},
    {BaselineKind::Ogb, "ogb"},
    {BaselineKind::Otb, "otb"},
    {BaselineKind::OtbIsolated, "otb_isolated"},
    {BaselineKind::OtbTis, "otb_tis"},
    {BaselineKind::ValueOracle, "value_oracle"},
}};

bool skipped(std::optional<std::size_t> exclude, std::size_t i) {
  return exclude && *exclude == i;
}

// Weighted mean of `value(i)` over members accepted by `use(i)`, falling
// back to the plain mean when the weights vanish and to 0 when nobody is
// accepted.
template <class Use, class Value, class Weight>
double centroid(std::size_t n, Use use, Value value, Weight weight) {
  double num = 0.0, den = 0.0, plain = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!use(i)) continue;
    const double v = value(i);
    const double w = weight(i);
    num += w * v;
    den += w;
    plain += v;
    ++count;
  }
  if (count == 0) return 0.0;
  if (den <= kZeroWeight) return plain / static_cast<double>(count);
  return num / den;
}

double reward_to_go_at(const Trajectory& traj, std::size_t t) {
  double g = 0.0;
  for (std::size_t k = t - 1; k < traj.steps.size(); ++k) g += traj.steps[k].reward;
  return g;
}

template <class Profile>
double step_centroid(const GroupBatch& group, std::size_t t, std::optional<std::size_t> exclude,
                     Profile profile) {
  if (t < 1) throw Error("steps are 1-based");
  const auto& m = group.members;
  return centroid(
      m.size(), [&](std::size_t i) { return !skipped(exclude, i) && m[i].length() >= t; },
      [&](std::size_t i) { return reward_to_go_at(m[i], t); },
      [&](std::size_t i) { return profile(m[i], t); });
}

}  // namespace

void GroupBatch::validate() const {
  if (members.size() < 2) throw Error("a group needs at least 2 members");
  for (const Trajectory& m : members) {
    if (m.prompt_id != prompt_id) throw Error("group members must share the prompt id");
    if (m.steps.empty()) throw Error("group member is empty");
  }
}

BaselineKind parse_baseline_kind(std::string_view name) {
  for (const auto& [kind, text] : kNames) {
    if (text == name) return kind;
  }
  throw Error("unknown baseline kind '" + std::string(name) + "'");
}

std::string to_string(BaselineKind kind) {
  for (const auto& [k, text] : kNames) {
    if (k == kind) return std::string(text);
  }
  return "unknown";
}

const std::vector<BaselineKind>& all_baseline_kinds() {
  static const std::vector<BaselineKind> kinds = [] {
    std::vector<BaselineKind> out;
    for (const auto& entry : kNames) out.push_back(entry.first);
    return out;
  }();
  return kinds;
}

bool is_token_level(BaselineKind kind) {
  switch (kind) {
    case BaselineKind::Otb:
    case BaselineKind::OtbIsolated:
    case BaselineKind::OtbTis:
    case BaselineKind::ValueOracle:
      return true;
    default:
      return false;
  }
}

double grpo_baseline(const GroupBatch& group) {
  group.validate();
  double total = 0.0;
  for (const Trajectory& m : group.members) total += m.total_reward();
  return total / static_cast<double>(group.size());
}

double rloo_baseline(const GroupBatch& group, std::size_t member) {
  group.validate();
  if (member >= group.size()) throw Error("member index out of range");
  double total = 0.0;
  for (std::size_t i = 0; i < group.size(); ++i) {
    if (i != member) total += group.members[i].total_reward();
  }
  return total / static_cast<double>(group.size() - 1);
}

namespace {

double opo_impl(const GroupBatch& group, std::optional<std::size_t> exclude) {
  const auto& m = group.members;
  return centroid(
      m.size(), [&](std::size_t i) { return !skipped(exclude, i); },
      [&](std::size_t i) { return m[i].total_reward(); },
      [&](std::size_t i) { return static_cast<double>(m[i].length()); });
}

}  // namespace

double opo_length_baseline(const GroupBatch& group) {
  group.validate();
  return opo_impl(group, std::nullopt);
}

double ogb_hat(const GroupBatch& group, std::optional<std::size_t> exclude) {
  group.validate();
  const auto& m = group.members;
  return centroid(
      m.size(), [&](std::size_t i) { return !skipped(exclude, i); },
      [&](std::size_t i) { return m[i].total_reward(); },
      [&](std::size_t i) { return realized_energy_profile(m[i]).back(); });
}

double otb_hat(const GroupBatch& group, std::size_t t, std::optional<std::size_t> exclude) {
  group.validate();
  return step_centroid(group, t, exclude, [](const Trajectory& traj, std::size_t step) {
    double w = 0.0;
    for (std::size_t j = 0; j < step; ++j) {
      w += proxy_from_stats(traj.steps[j].token_prob, traj.steps[j].prob_sumsq);
    }
    return w;
  });
}

double otb_isolated_hat(const GroupBatch& group, std::size_t t,
                        std::optional<std::size_t> exclude) {
  group.validate();
  return step_centroid(group, t, exclude, [](const Trajectory& traj, std::size_t step) {
    const Step& s = traj.steps[step - 1];
    return proxy_from_stats(s.token_prob, s.prob_sumsq);
  });
}

double otb_tis_hat(const GroupBatch& group, std::size_t t, double clip,
                   std::optional<std::size_t> exclude) {
  group.validate();
  if (!(clip > 0.0)) throw Error("TIS clip must be positive");
  for (const Trajectory& m : group.members) {
    if (!m.has_behavior_logprobs()) throw Error("missing behavior log-probabilities");
  }
  return step_centroid(group, t, exclude, [clip](const Trajectory& traj, std::size_t step) {
    return tis_energy_profile(traj, clip)[step - 1];
  });
}

std::vector<double> clipped_ratios(const Trajectory& traj, double clip) {
  if (!traj.has_behavior_logprobs()) throw Error("missing behavior log-probabilities");
  std::vector<double> out;
  out.reserve(traj.steps.size());
  for (const Step& s : traj.steps) {
    const double behavior = std::max(*s.behavior_logprob, kLogProbFloor);
    out.push_back(std::min(clip, std::exp(std::log(s.token_prob) - behavior)));
  }
  return out;
}

std::vector<double> tis_energy_profile(const Trajectory& traj, double clip) {
  const std::vector<double> rho = clipped_ratios(traj, clip);
  std::vector<double> out;
  out.reserve(rho.size());
  double acc = 0.0;
  for (std::size_t j = 0; j < rho.size(); ++j) {
    const Step& s = traj.steps[j];
    acc += rho[j] * rho[j] * proxy_from_stats(s.token_prob, s.prob_sumsq);
    out.push_back(acc);
  }
  return out;
}

std::size_t AdvantageTable::width() const {
  std::size_t w = 0;
  for (const auto& row : advantages) w = std::max(w, row.size());
  return w;
}

std::vector<std::vector<double>> baseline_values(const GroupBatch& group, BaselineKind kind,
                                                 const BaselineOptions& options) {
  group.validate();
  const std::size_t n = group.size();
  std::vector<std::vector<double>> out(n);

  auto exclusion = [&](std::size_t i) -> std::optional<std::size_t> {
    if (options.exclude_self) return i;
    return std::nullopt;
  };

  if (!is_token_level(kind)) {
    for (std::size_t i = 0; i < n; ++i) {
      double b = 0.0;
      switch (kind) {
        case BaselineKind::None:
          break;
        case BaselineKind::Grpo:
          b = options.exclude_self ? rloo_baseline(group, i) : grpo_baseline(group);
          break;
        case BaselineKind::Rloo:
          b = rloo_baseline(group, i);
          break;
        case BaselineKind::Opo:
          b = opo_impl(group, exclusion(i));
          break;
        case BaselineKind::Ogb:
          b = ogb_hat(group, exclusion(i));
          break;
        default:
          break;
      }
      out[i].assign(group.members[i].length(), b);
    }
    return out;
  }

  if (kind == BaselineKind::ValueOracle) {
    if (!options.oracle_baseline) throw Error("value_oracle baseline needs an oracle");
    for (std::size_t i = 0; i < n; ++i) {
      const Trajectory& m = group.members[i];
      const std::vector<Token> tokens = m.tokens();
      for (std::size_t t = 1; t <= m.length(); ++t) {
        out[i].push_back(options.oracle_baseline(group.prompt_id, Prefix(tokens.data(), t - 1)));
      }
    }
    return out;
  }

  auto step_value = [&](std::size_t t, std::optional<std::size_t> exclude) {
    switch (kind) {
      case BaselineKind::Otb:
        return otb_hat(group, t, exclude);
      case BaselineKind::OtbIsolated:
        return otb_isolated_hat(group, t, exclude);
      default:
        return otb_tis_hat(group, t, options.tis_clip, exclude);
    }
  };

  std::size_t width = 0;
  for (const Trajectory& m : group.members) width = std::max(width, m.length());
  if (options.exclude_self) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 1; t <= group.members[i].length(); ++t) {
        out[i].push_back(step_value(t, i));
      }
    }
  } else {
    std::vector<double> shared;
    for (std::size_t t = 1; t <= width; ++t) shared.push_back(step_value(t, std::nullopt));
    for (std::size_t i = 0; i < n; ++i) {
      out[i].assign(shared.begin(), shared.begin() + static_cast<std::ptrdiff_t>(group.members[i].length()));
    }
  }
  return out;
}

AdvantageTable advantages(const GroupBatch& group, BaselineKind kind,
                          const BaselineOptions& options) {
  AdvantageTable table;
  table.baselines = baseline_values(group, kind, options);
  const bool token_level = is_token_level(kind);
  for (std::size_t i = 0; i < group.size(); ++i) {
    const Trajectory& m = group.members[i];
    const std::vector<double> g = reward_to_go(m.rewards());
    const double total = g.front();
    std::vector<double> adv(g.size());
    for (std::size_t t = 0; t < g.size(); ++t) {
      adv[t] = (token_level ? g[t] : total) - table.baselines[i][t];
    }
    table.reward_to_go.push_back(g);
    table.advantages.push_back(std::move(adv));
  }
  return table;
}

}  // namespace otblab
