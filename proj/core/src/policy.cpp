#include "otblab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace otblab {

namespace {

constexpr std::size_t kMaxTabularContexts = 10'000'000;
constexpr std::uint64_t kFeatureStream = 0xFEA7u;
constexpr std::uint64_t kInitStream = 0x1417u;

std::uint64_t prefix_hash(std::uint64_t seed, int prompt, Prefix prefix) {
  std::uint64_t h = mix64(seed ^ mix64(static_cast<std::uint64_t>(prompt) + 1));
  h = mix64(h ^ (0xA5A5ull + prefix.size()));
  for (Token t : prefix) h = mix64(h ^ (static_cast<std::uint64_t>(t) + 0x100));
  return h;
}

}  // namespace

double LogitDelta::squared_norm() const {
  double acc = 0.0;
  for (double v : values) acc += v * v;
  return acc;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw Error("softmax of an empty vector");
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

LogitDelta logit_delta(std::span<const double> dist, Token token) {
  if (token < 0 || static_cast<std::size_t>(token) >= dist.size()) {
    throw Error("token outside vocabulary");
  }
  LogitDelta d;
  d.values.resize(dist.size());
  for (std::size_t v = 0; v < dist.size(); ++v) d.values[v] = -dist[v];
  d.values[static_cast<std::size_t>(token)] += 1.0;
  return d;
}

double proxy_from_stats(double token_prob, double prob_sumsq) {
  // Exact value is ||e_y - pi||^2 >= 0; clamp rounding below zero.
  return std::max(0.0, 1.0 - 2.0 * token_prob + prob_sumsq);
}

double proxy_norm(std::span<const double> dist, Token token) {
  if (token < 0 || static_cast<std::size_t>(token) >= dist.size()) {
    throw Error("token outside vocabulary");
  }
  double sumsq = 0.0;
  for (double p : dist) sumsq += p * p;
  return proxy_from_stats(dist[static_cast<std::size_t>(token)], sumsq);
}

double logit_cross_term(std::span<const double> dist_k, Token token_k,
                        std::span<const double> dist_t, Token token_t) {
  if (dist_k.size() != dist_t.size()) throw Error("vocabulary size mismatch");
  const auto n = dist_k.size();
  if (token_k < 0 || token_t < 0 || static_cast<std::size_t>(token_k) >= n ||
      static_cast<std::size_t>(token_t) >= n) {
    throw Error("token outside vocabulary");
  }
  double overlap = 0.0;
  for (std::size_t v = 0; v < n; ++v) overlap += dist_k[v] * dist_t[v];
  const double same = token_k == token_t ? 1.0 : 0.0;
  return same - dist_t[static_cast<std::size_t>(token_k)] -
         dist_k[static_cast<std::size_t>(token_t)] + overlap;
}

double score_dot(const ScoreFactor& a, const ScoreFactor& b) {
  const auto& da = a.delta.values;
  const auto& db = b.delta.values;
  if (da.size() != db.size()) throw Error("score factors from different vocabularies");
  double delta_dot = 0.0;
  for (std::size_t v = 0; v < da.size(); ++v) delta_dot += da[v] * db[v];
  if (a.features.empty() && b.features.empty()) {
    return a.row == b.row ? delta_dot : 0.0;
  }
  if (a.features.size() != b.features.size()) throw Error("score factors from different policies");
  double feature_dot = 0.0;
  for (std::size_t j = 0; j < a.features.size(); ++j) feature_dot += a.features[j] * b.features[j];
  return delta_dot * feature_dot;
}

void accumulate_score(GradVec& out, const ScoreFactor& factor, double scale) {
  const auto& delta = factor.delta.values;
  const std::size_t vocab = delta.size();
  if (factor.features.empty()) {
    const std::size_t base = factor.row * vocab;
    if (base + vocab > out.size()) throw Error("score row outside parameter vector");
    for (std::size_t v = 0; v < vocab; ++v) out[base + v] += scale * delta[v];
    return;
  }
  const std::size_t dim = factor.features.size();
  if (vocab * dim != out.size()) throw Error("score shape does not match parameter vector");
  for (std::size_t v = 0; v < vocab; ++v) {
    const double dv = scale * delta[v];
    if (dv == 0.0) continue;
    for (std::size_t j = 0; j < dim; ++j) out[v * dim + j] += dv * factor.features[j];
  }
}

std::vector<std::vector<Token>> all_prefixes(int vocab, int t_max) {
  std::vector<std::vector<Token>> out;
  out.emplace_back();
  std::size_t level_begin = 0;
  for (int len = 1; len < t_max; ++len) {
    const std::size_t level_end = out.size();
    for (std::size_t i = level_begin; i < level_end; ++i) {
      for (Token tok = 1; tok < vocab; ++tok) {
        std::vector<Token> next = out[i];
        next.push_back(tok);
        out.push_back(std::move(next));
      }
    }
    level_begin = level_end;
  }
  return out;
}

Policy::Policy(PolicyShape shape, std::vector<double> params)
    : shape_(shape), params_(std::move(params)) {}

Policy Policy::create(const PolicyShape& shape, const InitScheme& init) {
  if (shape.vocab < 2) throw Error("vocabulary must contain at least 2 tokens");
  if (shape.t_max < 1) throw Error("T_max must be at least 1");
  if (shape.prompts < 1) throw Error("at least one prompt is required");
  if (shape.kind == PolicyKind::LinearSoftmax && shape.feature_dim < 1) {
    throw Error("feature_dim must be positive");
  }

  Policy p(shape, {});
  std::size_t count = 0;
  if (shape.kind == PolicyKind::TabularPrefix) {
    const std::size_t branch = static_cast<std::size_t>(shape.vocab - 1);
    std::size_t level = 1;
    p.length_offsets_.push_back(0);
    for (int len = 0; len < shape.t_max; ++len) {
      count += level;
      if (count > kMaxTabularContexts) throw Error("tabular context table too large");
      p.length_offsets_.push_back(count);
      level *= branch;
    }
    p.contexts_per_prompt_ = count;
    count = count * static_cast<std::size_t>(shape.prompts) * static_cast<std::size_t>(shape.vocab);
  } else {
    count = static_cast<std::size_t>(shape.vocab) * static_cast<std::size_t>(shape.feature_dim);
  }

  p.params_.assign(count, 0.0);
  if (init.kind == InitScheme::Kind::Gaussian) {
    if (!(init.sigma >= 0.0) || !std::isfinite(init.sigma)) throw Error("init sigma must be >= 0");
    Philox rng(init.seed, kInitStream);
    for (double& v : p.params_) v = init.sigma * rng.normal();
  }
  return p;
}

Policy Policy::from_params(const PolicyShape& shape, std::vector<double> params) {
  return create(shape, InitScheme{}).with_params(std::move(params));
}

Policy Policy::with_params(std::vector<double> params) const {
  if (params.size() != params_.size()) throw Error("parameter vector has the wrong length");
  for (double v : params) {
    if (!std::isfinite(v)) throw Error("non-finite policy parameter");
  }
  Policy p = *this;
  p.params_ = std::move(params);
  return p;
}

void Policy::check_prefix(Prefix prefix) const {
  if (static_cast<int>(prefix.size()) >= shape_.t_max) {
    throw Error("prefix length must be below T_max");
  }
}

void Policy::check_token(Token token) const {
  if (token < 0 || token >= shape_.vocab) throw Error("token outside vocabulary");
}

std::size_t Policy::context_row(int prompt, Prefix prefix) const {
  if (shape_.kind != PolicyKind::TabularPrefix) throw Error("context_row requires a tabular policy");
  if (prompt < 0 || prompt >= shape_.prompts) throw Error("uninitialized context");
  if (static_cast<int>(prefix.size()) >= shape_.t_max) throw Error("uninitialized context");
  const std::size_t branch = static_cast<std::size_t>(shape_.vocab - 1);
  std::size_t index = 0;
  for (Token t : prefix) {
    if (t <= kEos || t >= shape_.vocab) throw Error("uninitialized context");
    index = index * branch + static_cast<std::size_t>(t - 1);
  }
  return static_cast<std::size_t>(prompt) * contexts_per_prompt_ + length_offsets_[prefix.size()] +
         index;
}

std::vector<double> Policy::features(int prompt, Prefix prefix) const {
  if (shape_.kind != PolicyKind::LinearSoftmax) throw Error("features require a linear-softmax policy");
  if (prompt < 0 || prompt >= shape_.prompts) throw Error("unknown prompt");
  check_prefix(prefix);
  for (Token t : prefix) check_token(t);
  Philox rng(prefix_hash(shape_.feature_seed, prompt, prefix), kFeatureStream);
  std::vector<double> h(static_cast<std::size_t>(shape_.feature_dim));
  double norm2 = 0.0;
  while (norm2 == 0.0) {
    norm2 = 0.0;
    for (double& v : h) {
      v = rng.normal();
      norm2 += v * v;
    }
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& v : h) v *= inv;
  return h;
}

std::vector<double> Policy::logits(int prompt, Prefix prefix) const {
  const std::size_t vocab = static_cast<std::size_t>(shape_.vocab);
  if (shape_.kind == PolicyKind::TabularPrefix) {
    const std::size_t row = context_row(prompt, prefix);
    return {params_.begin() + static_cast<std::ptrdiff_t>(row * vocab),
            params_.begin() + static_cast<std::ptrdiff_t>((row + 1) * vocab)};
  }
  const std::vector<double> h = features(prompt, prefix);
  const std::size_t dim = h.size();
  std::vector<double> z(vocab, 0.0);
  for (std::size_t v = 0; v < vocab; ++v) {
    double acc = 0.0;
    for (std::size_t j = 0; j < dim; ++j) acc += params_[v * dim + j] * h[j];
    z[v] = acc;
  }
  return z;
}

std::vector<double> Policy::next_token_dist(int prompt, Prefix prefix) const {
  return softmax(logits(prompt, prefix));
}

double Policy::log_prob(int prompt, Prefix prefix, Token token) const {
  check_token(token);
  const std::vector<double> z = logits(prompt, prefix);
  const double top = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double v : z) total += std::exp(v - top);
  return z[static_cast<std::size_t>(token)] - top - std::log(total);
}

ScoreFactor Policy::score_factor(int prompt, Prefix prefix, Token token) const {
  check_token(token);
  ScoreFactor f;
  f.delta = otblab::logit_delta(next_token_dist(prompt, prefix), token);
  if (shape_.kind == PolicyKind::TabularPrefix) {
    f.row = context_row(prompt, prefix);
  } else {
    f.features = features(prompt, prefix);
  }
  return f;
}

GradVec Policy::score_function(int prompt, Prefix prefix, Token token) const {
  GradVec g(param_count());
  accumulate_score(g, score_factor(prompt, prefix, token), 1.0);
  return g;
}

LogitDelta Policy::logit_delta(int prompt, Prefix prefix, Token token) const {
  check_token(token);
  return otblab::logit_delta(next_token_dist(prompt, prefix), token);
}

double Policy::proxy_norm(int prompt, Prefix prefix, Token token) const {
  check_token(token);
  return otblab::proxy_norm(next_token_dist(prompt, prefix), token);
}

Trajectory sample_trajectory(const Policy& policy, int prompt, int t_max, Philox& rng) {
  if (t_max < 1) throw Error("T_max must be at least 1");
  if (t_max > policy.t_max()) throw Error("T_max exceeds the policy's context table");
  Trajectory traj;
  traj.prompt_id = prompt;
  std::vector<Token> prefix;
  for (int t = 0; t < t_max; ++t) {
    std::vector<double> dist = policy.next_token_dist(prompt, prefix);
    const Token tok = static_cast<Token>(rng.categorical(dist));
    traj.steps.push_back(make_step(tok, std::move(dist)));
    if (tok == kEos) break;
    prefix.push_back(tok);
  }
  return traj;
}

Trajectory sample_off_policy(const Policy& target, const Policy& behavior, int prompt, int t_max,
                             Philox& rng) {
  if (target.vocab() != behavior.vocab()) throw Error("vocabulary size mismatch");
  if (t_max < 1) throw Error("T_max must be at least 1");
  if (t_max > target.t_max() || t_max > behavior.t_max()) {
    throw Error("T_max exceeds the policy's context table");
  }
  Trajectory traj;
  traj.prompt_id = prompt;
  std::vector<Token> prefix;
  for (int t = 0; t < t_max; ++t) {
    const std::vector<double> rollout = behavior.next_token_dist(prompt, prefix);
    const Token tok = static_cast<Token>(rng.categorical(rollout));
    Step step = make_step(tok, target.next_token_dist(prompt, prefix));
    step.behavior_logprob = behavior.log_prob(prompt, prefix, tok);
    traj.steps.push_back(std::move(step));
    if (tok == kEos) break;
    prefix.push_back(tok);
  }
  return traj;
}

ScoredTrajectory score_trajectory(const Policy& policy, Trajectory trajectory) {
  ScoredTrajectory out;
  out.param_count = policy.param_count();
  out.scores.reserve(trajectory.steps.size());
  std::vector<Token> prefix;
  for (const Step& s : trajectory.steps) {
    out.scores.push_back(policy.score_factor(trajectory.prompt_id, prefix, s.token));
    prefix.push_back(s.token);
  }
  out.trajectory = std::move(trajectory);
  return out;
}

GradVec total_score(const ScoredTrajectory& scored) {
  GradVec g(scored.param_count);
  for (const ScoreFactor& f : scored.scores) accumulate_score(g, f, 1.0);
  return g;
}

}  // namespace otblab
