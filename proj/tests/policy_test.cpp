#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include "otblab/policy.hpp"
#include "support/property.hpp"

namespace otblab {
namespace {

using testing::for_all;
using testing::Gen;

PolicyShape tabular(int vocab, int t_max) {
  PolicyShape s;
  s.vocab = vocab;
  s.t_max = t_max;
  return s;
}

PolicyShape linear(int vocab, int t_max, int dim, std::uint64_t feature_seed = 11) {
  PolicyShape s;
  s.kind = PolicyKind::LinearSoftmax;
  s.vocab = vocab;
  s.t_max = t_max;
  s.feature_dim = dim;
  s.feature_seed = feature_seed;
  return s;
}

// Random prefix of non-EOS tokens with length below t_max.
std::vector<Token> random_prefix(Gen& gen, const Policy& p) {
  std::vector<Token> prefix;
  const int len = gen.integer(0, p.t_max() - 1);
  for (int i = 0; i < len; ++i) prefix.push_back(static_cast<Token>(gen.integer(1, p.vocab() - 1)));
  return prefix;
}

TEST(Softmax, ZeroLogitsGiveUniform) {
  const std::vector<double> z(4, 0.0);
  for (double p : softmax(z)) EXPECT_DOUBLE_EQ(p, 0.25);
}

TEST(Softmax, HandExample) {
  const std::vector<double> z{std::log(3.0), 0.0, 0.0};
  const auto p = softmax(z);
  const auto ref = testing::naive_softmax(z);
  const std::vector<double> hand{0.6, 0.2, 0.2};
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(p[i], ref[i], 1e-12);
    EXPECT_NEAR(p[i], hand[i], 1e-12);
  }
}

TEST(Softmax, ShiftInvariant) {
  for_all(50, 1, [](Gen& gen, int) {
    auto z = gen.vec(static_cast<std::size_t>(gen.integer(2, 6)), 2.0);
    const auto base = softmax(z);
    const double c = gen.uniform(-50.0, 50.0);
    for (double& v : z) v += c;
    const auto shifted = softmax(z);
    for (std::size_t i = 0; i < z.size(); ++i) EXPECT_NEAR(base[i], shifted[i], 1e-12);
  });
}

TEST(Softmax, SumsToOneAndSurvivesLargeLogits) {
  for_all(50, 2, [](Gen& gen, int) {
    auto z = gen.vec(static_cast<std::size_t>(gen.integer(2, 6)), 300.0);
    const auto p = softmax(z);
    double total = 0.0;
    for (double v : p) {
      ASSERT_TRUE(std::isfinite(v));
      ASSERT_GE(v, 0.0);
      total += v;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
  });
}

TEST(Policy, ZeroInitIsUniform) {
  const Policy p = Policy::create(tabular(3, 3), InitScheme{});
  const std::vector<Token> prefix{2, 1};
  for (double v : p.next_token_dist(0, prefix)) EXPECT_DOUBLE_EQ(v, 1.0 / 3.0);
}

TEST(Policy, UnknownContextThrows) {
  const Policy p = Policy::create(tabular(3, 3), InitScheme{});
  const std::vector<Token> with_eos{0};
  const std::vector<Token> too_long{1, 1, 1};
  const std::vector<Token> bad_token{5};
  EXPECT_THROW(p.next_token_dist(0, with_eos), Error);
  EXPECT_THROW(p.next_token_dist(0, too_long), Error);
  EXPECT_THROW(p.next_token_dist(0, bad_token), Error);
  EXPECT_THROW(p.next_token_dist(1, {}), Error);
  try {
    p.next_token_dist(0, with_eos);
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "uninitialized context");
  }
}

TEST(Policy, CreateRejectsBadShapes) {
  EXPECT_THROW(Policy::create(tabular(1, 3), InitScheme{}), Error);
  EXPECT_THROW(Policy::create(tabular(3, 0), InitScheme{}), Error);
  EXPECT_THROW(Policy::create(linear(3, 3, 0), InitScheme{}), Error);
  const Policy p = Policy::create(tabular(3, 2), InitScheme{});
  EXPECT_THROW(p.with_params(std::vector<double>(2, 0.0)), Error);
  std::vector<double> nan_params(p.param_count(), 0.0);
  nan_params[0] = std::nan("");
  EXPECT_THROW(p.with_params(nan_params), Error);
}

TEST(Policy, TabularLayout) {
  // V=3, T=3: prefixes (), 1, 2, 11, 12, 21, 22 -> 7 rows of 3 logits.
  const Policy p = Policy::create(tabular(3, 3), InitScheme{});
  EXPECT_EQ(p.contexts_per_prompt(), 7u);
  EXPECT_EQ(p.param_count(), 21u);
  const auto prefixes = all_prefixes(3, 3);
  ASSERT_EQ(prefixes.size(), 7u);
  for (std::size_t i = 0; i < prefixes.size(); ++i) EXPECT_EQ(p.context_row(0, prefixes[i]), i);
}

TEST(Policy, GaussianInitIsSeeded) {
  const InitScheme init{InitScheme::Kind::Gaussian, 1.0, 77};
  const Policy a = Policy::create(tabular(3, 4), init);
  const Policy b = Policy::create(tabular(3, 4), init);
  const Policy c = Policy::create(tabular(3, 4), InitScheme{InitScheme::Kind::Gaussian, 1.0, 78});
  EXPECT_TRUE(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
  EXPECT_FALSE(std::equal(a.params().begin(), a.params().end(), c.params().begin()));
}

TEST(ScoreFunction, SaturatedTokenGivesZeroVector) {
  const Policy base = Policy::create(tabular(3, 2), InitScheme{});
  std::vector<double> params(base.param_count(), 0.0);
  params[1] = 800.0;  // root row strongly prefers token 1
  const Policy p = base.with_params(params);
  const GradVec s = p.score_function(0, {}, 1);
  EXPECT_EQ(s.max_abs(), 0.0);
}

TEST(ScoreFunction, TabularTouchesOnlyItsRow) {
  Gen gen(5);
  const Policy p = testing::random_policy(gen, tabular(3, 3));
  const std::vector<Token> prefix{2};
  const GradVec s = p.score_function(0, prefix, 1);
  const std::size_t row = p.context_row(0, prefix);
  const auto pi = p.next_token_dist(0, prefix);
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i / 3 == row) {
      const std::size_t v = i % 3;
      EXPECT_NEAR(s[i], (v == 1 ? 1.0 : 0.0) - pi[v], 1e-15);
    } else {
      EXPECT_EQ(s[i], 0.0);
    }
  }
}

TEST(ScoreFunction, ZeroMeanUnderPolicy) {
  for (PolicyKind kind : {PolicyKind::TabularPrefix, PolicyKind::LinearSoftmax}) {
    for_all(30, 3, [kind](Gen& gen, int) {
      const PolicyShape shape = testing::random_shape(gen, kind);
      const Policy p = testing::random_policy(gen, shape, 1.5);
      const auto prefix = random_prefix(gen, p);
      const auto pi = p.next_token_dist(0, prefix);
      GradVec acc(p.param_count());
      for (Token v = 0; v < p.vocab(); ++v) acc.axpy(pi[v], p.score_function(0, prefix, v));
      EXPECT_LE(acc.max_abs(), 1e-12);
    });
  }
}

TEST(ScoreFunction, TabularProxyIsExact) {
  for_all(50, 4, [](Gen& gen, int) {
    const Policy p = testing::random_policy(gen, testing::random_shape(gen, PolicyKind::TabularPrefix), 2.0);
    const auto prefix = random_prefix(gen, p);
    const Token tok = static_cast<Token>(gen.integer(0, p.vocab() - 1));
    EXPECT_NEAR(p.score_function(0, prefix, tok).squared_norm(), p.proxy_norm(0, prefix, tok), 1e-12);
  });
}

TEST(ScoreFunction, TabularDifferentPrefixesAreOrthogonal) {
  for_all(30, 5, [](Gen& gen, int) {
    PolicyShape shape = testing::random_shape(gen, PolicyKind::TabularPrefix);
    shape.t_max = std::max(shape.t_max, 2);
    const Policy p = testing::random_policy(gen, shape);
    const auto a = random_prefix(gen, p);
    auto b = random_prefix(gen, p);
    if (a == b) b = a.empty() ? std::vector<Token>{1} : std::vector<Token>{};
    const GradVec sa = p.score_function(0, a, static_cast<Token>(gen.integer(0, p.vocab() - 1)));
    const GradVec sb = p.score_function(0, b, static_cast<Token>(gen.integer(0, p.vocab() - 1)));
    EXPECT_EQ(sa.dot(sb), 0.0);
  });
}

TEST(ScoreFunction, LinearRankOneNorm) {
  for_all(30, 6, [](Gen& gen, int) {
    const Policy p = testing::random_policy(gen, testing::random_shape(gen, PolicyKind::LinearSoftmax));
    const auto prefix = random_prefix(gen, p);
    const Token tok = static_cast<Token>(gen.integer(0, p.vocab() - 1));
    const auto h = p.features(0, prefix);
    double h2 = 0.0;
    for (double v : h) h2 += v * v;
    const double delta2 = p.logit_delta(0, prefix, tok).squared_norm();
    const double frob = p.score_function(0, prefix, tok).norm();
    EXPECT_NEAR(h2, 1.0, 1e-12);
    EXPECT_NEAR(frob, std::sqrt(delta2) * std::sqrt(h2), 1e-12);
    EXPECT_NEAR(frob, std::sqrt(delta2), 1e-12);
  });
}

TEST(ScoreFunction, MatchesFiniteDifferences) {
  const double h = 1e-5;
  for (PolicyKind kind : {PolicyKind::TabularPrefix, PolicyKind::LinearSoftmax}) {
    for_all(5, 7, [&](Gen& gen, int) {
      const Policy p = testing::random_policy(gen, testing::random_shape(gen, kind));
      const auto prefix = random_prefix(gen, p);
      const Token tok = static_cast<Token>(gen.integer(0, p.vocab() - 1));
      const GradVec s = p.score_function(0, prefix, tok);
      const std::vector<double> theta(p.params().begin(), p.params().end());
      for (int d = 0; d < 20; ++d) {
        GradVec dir(gen.vec(theta.size(), 1.0));
        dir *= 1.0 / dir.norm();
        std::vector<double> up = theta, down = theta;
        for (std::size_t i = 0; i < theta.size(); ++i) {
          up[i] += h * dir[i];
          down[i] -= h * dir[i];
        }
        const double fd = (p.with_params(up).log_prob(0, prefix, tok) -
                           p.with_params(down).log_prob(0, prefix, tok)) /
                          (2.0 * h);
        EXPECT_NEAR(fd, s.dot(dir), 1e-6);
      }
    });
  }
}

TEST(ScoreFunction, FactoredDotMatchesDense) {
  for (PolicyKind kind : {PolicyKind::TabularPrefix, PolicyKind::LinearSoftmax}) {
    for_all(30, 8, [&](Gen& gen, int) {
      const Policy p = testing::random_policy(gen, testing::random_shape(gen, kind));
      const auto a = random_prefix(gen, p);
      const auto b = random_prefix(gen, p);
      const Token ta = static_cast<Token>(gen.integer(0, p.vocab() - 1));
      const Token tb = static_cast<Token>(gen.integer(0, p.vocab() - 1));
      const double dense_dot = p.score_function(0, a, ta).dot(p.score_function(0, b, tb));
      EXPECT_NEAR(score_dot(p.score_factor(0, a, ta), p.score_factor(0, b, tb)), dense_dot, 1e-12);
    });
  }
}

TEST(LogitDelta, Examples) {
  const std::vector<double> one_hot{0.0, 1.0, 0.0};
  for (double v : logit_delta(one_hot, 1).values) EXPECT_EQ(v, 0.0);
  const std::vector<double> uniform{0.5, 0.5};
  const auto d = logit_delta(uniform, 0).values;
  EXPECT_DOUBLE_EQ(d[0], 0.5);
  EXPECT_DOUBLE_EQ(d[1], -0.5);
}

TEST(LogitDelta, EntriesSumToZero) {
  for_all(50, 9, [](Gen& gen, int) {
    const int v = gen.integer(2, 6);
    const auto d = logit_delta(gen.simplex(v), static_cast<Token>(gen.integer(0, v - 1))).values;
    EXPECT_NEAR(std::accumulate(d.begin(), d.end(), 0.0), 0.0, 1e-12);
  });
}

TEST(Proxy, Examples) {
  const std::vector<double> one_hot{0.0, 0.0, 1.0};
  EXPECT_EQ(proxy_norm(one_hot, 2), 0.0);
  const std::vector<double> uniform{0.5, 0.5};
  EXPECT_DOUBLE_EQ(proxy_norm(uniform, 0), 0.5);
  EXPECT_DOUBLE_EQ(proxy_norm(uniform, 1), 0.5);
  const std::vector<double> elsewhere{1e-9, 1.0 - 1e-9};
  EXPECT_GT(proxy_norm(elsewhere, 0), 1.0);
}

TEST(Proxy, MatchesBruteForceAndRange) {
  for_all(100, 10, [](Gen& gen, int) {
    const int v = gen.integer(2, 6);
    const auto pi = gen.simplex(v);
    const Token tok = static_cast<Token>(gen.integer(0, v - 1));
    double brute = 0.0;
    for (int k = 0; k < v; ++k) {
      const double e = (k == tok ? 1.0 : 0.0) - pi[k];
      brute += e * e;
    }
    const double w = proxy_norm(pi, tok);
    EXPECT_NEAR(w, brute, 1e-12);
    EXPECT_GE(w, 0.0);
    EXPECT_LT(w, 2.0);
  });
}

TEST(CrossTerm, Examples) {
  Gen gen(11);
  const auto pi = gen.simplex(4);
  EXPECT_NEAR(logit_cross_term(pi, 2, pi, 2), proxy_norm(pi, 2), 1e-12);
  const std::vector<double> a{0.0, 1.0, 0.0}, b{0.0, 0.0, 1.0};
  EXPECT_EQ(logit_cross_term(a, 1, b, 2), 0.0);
  const std::vector<double> short_dist{0.5, 0.5};
  EXPECT_THROW(logit_cross_term(a, 1, short_dist, 0), Error);
}

TEST(CrossTerm, MatchesExplicitDot) {
  for_all(100, 12, [](Gen& gen, int) {
    const int v = gen.integer(2, 6);
    const auto pk = gen.simplex(v), pt = gen.simplex(v);
    const Token yk = static_cast<Token>(gen.integer(0, v - 1));
    const Token yt = static_cast<Token>(gen.integer(0, v - 1));
    double brute = 0.0;
    for (int i = 0; i < v; ++i) {
      brute += ((i == yk ? 1.0 : 0.0) - pk[i]) * ((i == yt ? 1.0 : 0.0) - pt[i]);
    }
    EXPECT_NEAR(logit_cross_term(pk, yk, pt, yt), brute, 1e-12);
  });
}

TEST(Sampling, ForcedEosStopsAtStepOne) {
  const Policy base = Policy::create(tabular(3, 4), InitScheme{});
  std::vector<double> params(base.param_count(), 0.0);
  params[0] = 800.0;
  const Policy p = base.with_params(params);
  Philox rng(1, 0);
  for (int i = 0; i < 20; ++i) {
    const Trajectory t = sample_trajectory(p, 0, 4, rng);
    ASSERT_EQ(t.length(), 1u);
    EXPECT_EQ(t.steps[0].token, kEos);
  }
}

TEST(Sampling, SeedDeterminesTrajectory) {
  Gen gen(13);
  const Policy p = testing::random_policy(gen, tabular(4, 5));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Philox a(seed, 3), b(seed, 3);
    const Trajectory x = sample_trajectory(p, 0, 5, a);
    const Trajectory y = sample_trajectory(p, 0, 5, b);
    ASSERT_EQ(x.tokens(), y.tokens());
    for (std::size_t i = 0; i < x.length(); ++i) ASSERT_EQ(x.steps[i].dist, y.steps[i].dist);
  }
}

TEST(Sampling, RecordsDistributionsAndPathProbability) {
  for_all(20, 14, [](Gen& gen, int c) {
    const auto inst = testing::random_instance(gen, c % 2 ? PolicyKind::LinearSoftmax
                                                          : PolicyKind::TabularPrefix);
    Philox rng(static_cast<std::uint64_t>(c), 0);
    const Trajectory t = sample_trajectory(inst.policy, 0, inst.t_max, rng);
    t.validate(inst.t_max);
    double log_p = 0.0, prod = 1.0;
    for (std::size_t k = 0; k < t.length(); ++k) {
      const auto prefix = t.prefix_before(k + 1);
      EXPECT_EQ(t.steps[k].dist, inst.policy.next_token_dist(0, prefix));
      log_p += inst.policy.log_prob(0, prefix, t.steps[k].token);
      prod *= t.steps[k].token_prob;
    }
    EXPECT_NEAR(prod, std::exp(log_p), 1e-12);
  });
}

TEST(Sampling, FirstTokenFrequenciesWithinThreeSigma) {
  Gen gen(15);
  const Policy p = testing::random_policy(gen, tabular(4, 3));
  const auto pi = p.next_token_dist(0, {});
  std::vector<int> counts(4, 0);
  Philox rng(99, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[sample_trajectory(p, 0, 3, rng).steps[0].token];
  for (int v = 0; v < 4; ++v) {
    const double sd = std::sqrt(pi[v] * (1.0 - pi[v]) / n);
    EXPECT_NEAR(counts[v] / double(n), pi[v], 3.0 * sd) << "token " << v;
  }
}

TEST(Sampling, OffPolicyRecordsBehaviorLogprobs) {
  Gen gen(16);
  const Policy target = testing::random_policy(gen, tabular(3, 3));
  const Policy behavior = testing::random_policy(gen, tabular(3, 3));
  Philox rng(4, 4);
  const Trajectory t = sample_off_policy(target, behavior, 0, 3, rng);
  ASSERT_TRUE(t.has_behavior_logprobs());
  for (std::size_t k = 0; k < t.length(); ++k) {
    const auto prefix = t.prefix_before(k + 1);
    EXPECT_EQ(*t.steps[k].behavior_logprob, behavior.log_prob(0, prefix, t.steps[k].token));
    EXPECT_EQ(t.steps[k].dist, target.next_token_dist(0, prefix));
  }
}

TEST(ScoredTrajectory, TotalScoreIsSumOfSteps) {
  Gen gen(17);
  const Policy p = testing::random_policy(gen, linear(3, 4, 5));
  Philox rng(2, 2);
  const ScoredTrajectory st = score_trajectory(p, sample_trajectory(p, 0, 4, rng));
  GradVec sum(p.param_count());
  for (std::size_t k = 0; k < st.length(); ++k) {
    sum += p.score_function(0, st.trajectory.prefix_before(k + 1), st.trajectory.steps[k].token);
  }
  EXPECT_LE(max_abs_diff(sum, total_score(st)), 1e-14);
}

}  // namespace
}  // namespace otblab
