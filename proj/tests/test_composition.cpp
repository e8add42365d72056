#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

#include "metric_grouper/composition.hpp"
#include "test_util.hpp"

namespace mg = metric_grouper;
using mg::Vector;

namespace {

Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }

Vector random_vector(std::mt19937& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> g(0, scale);
  Vector v(n);
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

mg::WordVectorTable table_of(std::initializer_list<std::pair<const char*, Vector>> entries) {
  mg::WordVectorTable t(static_cast<int>(entries.begin()->second.size()), mg::UnknownPolicy::kZeroVector);
  for (const auto& [k, v] : entries) t.insert(k, v);
  return t;
}

}  // namespace

TEST(Attention, IdenticalContextIsUniform) {
  std::mt19937 rng(1);
  for (int n : {1, 2, 5, 9}) {
    const Vector e = random_vector(rng, 3);
    std::vector<Vector> ctx(n, e);
    mg::AttentionParams params{random_vector(rng, 6)};
    const auto w = mg::attention_weights(ctx, random_vector(rng, 3), params);
    ASSERT_EQ(w.size(), n);
    for (int i = 0; i < n; ++i) EXPECT_EQ(w[i], 1.0 / n);
  }
}

TEST(Attention, ZeroWaIsUniform) {
  std::mt19937 rng(2);
  std::vector<Vector> ctx;
  for (int i = 0; i < 7; ++i) ctx.push_back(random_vector(rng, 4));
  const auto w = mg::attention_weights(ctx, random_vector(rng, 4), mg::AttentionParams::zeros(4));
  for (int i = 0; i < 7; ++i) EXPECT_EQ(w[i], 1.0 / 7);
}

TEST(Attention, TwoScalarContexts) {
  std::vector<Vector> ctx{Vector::Constant(1, 1.0), Vector::Constant(1, 2.0)};
  mg::AttentionParams params{v2(1, 0)};
  const auto w = mg::attention_weights(ctx, Vector::Constant(1, 1.0), params);
  const double e1 = std::exp(1.0), e2 = std::exp(2.0);
  EXPECT_NEAR(w[0], e1 / (e1 + e2), 1e-15);
  EXPECT_NEAR(w[1], e2 / (e1 + e2), 1e-15);
  EXPECT_NEAR(w[0], 0.2689, 1e-4);
  EXPECT_NEAR(w[1], 0.7311, 1e-4);
}

TEST(Attention, Errors) {
  std::vector<Vector> ctx{v2(1, 0)};
  EXPECT_THROW(mg::attention_weights(ctx, v2(1, 1), mg::AttentionParams::zeros(3)), mg::DimensionMismatchError);
  std::vector<Vector> bad{v2(1, 0), Vector::Zero(3)};
  EXPECT_THROW(mg::attention_weights(bad, v2(1, 1), mg::AttentionParams::zeros(2)), mg::DimensionMismatchError);
  EXPECT_THROW(mg::attention_weights({}, v2(1, 1), mg::AttentionParams::zeros(2)), mg::EmptyContextError);
}

TEST(AttentionProperty, NormalizedEquivariantAndMatchesNaiveSoftmax) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    const int d = 1 + static_cast<int>(rng() % 6);
    const int n = 1 + static_cast<int>(rng() % 8);
    std::vector<Vector> ctx;
    for (int i = 0; i < n; ++i) ctx.push_back(random_vector(rng, d));
    const Vector p = random_vector(rng, d);
    mg::AttentionParams params{random_vector(rng, 2 * d)};
    const auto w = mg::attention_weights(ctx, p, params);
    EXPECT_NEAR(w.sum(), 1.0, 1e-12);
    EXPECT_GE(w.minCoeff(), 0.0);

    // Naive softmax without max subtraction.
    Vector naive(n);
    for (int i = 0; i < n; ++i) {
      Vector ep(2 * d);
      ep << ctx[i], p;
      naive[i] = std::exp(params.w_a.dot(ep));
    }
    naive /= naive.sum();
    EXPECT_LT((naive - w).cwiseAbs().maxCoeff(), 1e-12);

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Vector> shuffled;
    for (int i : perm) shuffled.push_back(ctx[i]);
    const auto ws = mg::attention_weights(shuffled, p, params);
    for (int i = 0; i < n; ++i) EXPECT_NEAR(ws[i], w[perm[i]], 1e-14);
    const auto a = mg::compose_vectors(ctx, p, params, mg::CompositionMode::kAttention);
    const auto b = mg::compose_vectors(shuffled, p, params, mg::CompositionMode::kAttention);
    EXPECT_LT((a.x - b.x).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Compose, BaselineReductions) {
  std::vector<Vector> ctx{v2(1, 0), v2(0, 1)};
  const Vector p = v2(2, 2);
  const auto params = mg::AttentionParams::zeros(2);
  auto x = [&](mg::CompositionMode m) { return mg::compose_vectors(ctx, p, params, m).x; };
  EXPECT_EQ(x(mg::CompositionMode::kAvg), (Vector(4) << 0.5, 0.5, 2, 2).finished());
  EXPECT_EQ(x(mg::CompositionMode::kMin), (Vector(4) << 0, 0, 2, 2).finished());
  EXPECT_EQ(x(mg::CompositionMode::kMax), (Vector(4) << 1, 1, 2, 2).finished());
  EXPECT_EQ(x(mg::CompositionMode::kAttention), (Vector(4) << 0.5, 0.5, 2, 2).finished());
  EXPECT_EQ(x(mg::CompositionMode::kAp), p);
  const auto att = mg::compose_vectors(ctx, p, params, mg::CompositionMode::kAttention);
  ASSERT_TRUE(att.attention_weights.has_value());
  EXPECT_EQ(att.attention_weights->size(), 2);
}

TEST(Compose, ApIgnoresContext) {
  auto table = table_of({{"picture", v2(0.3, -0.7)}, {"sharp", v2(1, 2)}, {"loud", v2(-4, 5)}});
  mg::AttentionParams params{Vector::Ones(4)};
  mg::AspectSample a{"picture", {"sharp", "picture"}, {0}};
  mg::AspectSample b{"picture", {"loud", "loud", "picture"}, {1}};
  const auto xa = mg::compose(a, table, params, mg::CompositionMode::kAp).x;
  const auto xb = mg::compose(b, table, params, mg::CompositionMode::kAp).x;
  ASSERT_EQ(xa.size(), 2);
  EXPECT_EQ(0, std::memcmp(xa.data(), xb.data(), sizeof(double) * 2));
  mg::AspectSample empty{"picture", {}, {}};
  EXPECT_NO_THROW(mg::compose(empty, table, params, mg::CompositionMode::kAp));
  EXPECT_THROW(mg::compose(empty, table, params, mg::CompositionMode::kAvg), mg::EmptyContextError);
}

TEST(Compose, UnknownPolicyChangesContextLength) {
  auto table = table_of({{"picture", v2(1, 1)}, {"sharp", v2(2, 0)}});
  mg::AspectSample s{"picture", {"sharp", "zzz", "picture"}, {0}};
  const auto zero = mg::compose(s, table, mg::AttentionParams::zeros(2), mg::CompositionMode::kAttention);
  EXPECT_EQ(zero.attention_weights->size(), 3);
  EXPECT_NEAR(zero.x[0], 1.0, 1e-15);  // (2 + 0 + 1) / 3
  table.set_unknown_policy(mg::UnknownPolicy::kSkipToken);
  const auto skip = mg::compose(s, table, mg::AttentionParams::zeros(2), mg::CompositionMode::kAttention);
  EXPECT_EQ(skip.attention_weights->size(), 2);
  EXPECT_NEAR(skip.x[0], 1.5, 1e-15);
  mg::AspectSample all_unknown{"picture", {"zzz"}, {0}};
  EXPECT_THROW(mg::compose(all_unknown, table, mg::AttentionParams::zeros(2), mg::CompositionMode::kAvg),
               mg::EmptyContextError);
}

TEST(ComposeTestPhrase, ConcatenatesSentencesInCorpusOrder) {
  auto corpus = mg::parse_corpus(
      "{\"tokens\":[\"sharp\",\"picture\",\"ok\"],\"mentions\":[{\"phrase\":\"picture\",\"start\":1,\"end\":2}]}\n"
      "{\"tokens\":[\"loud\",\"sound\"],\"mentions\":[{\"phrase\":\"sound\",\"start\":1,\"end\":2}]}\n"
      "{\"tokens\":[\"the\",\"picture\",\"is\",\"bright\"],\"mentions\":[{\"phrase\":\"picture\",\"start\":1,"
      "\"end\":2}]}\n");
  const auto s = mg::test_sample("picture", corpus);
  EXPECT_EQ(s.context_tokens.size(), 7u);
  EXPECT_EQ(s.source, (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(s.context_tokens.front(), "sharp");
  EXPECT_EQ(s.context_tokens.back(), "bright");

  const auto table = mg::load_word_vectors(testutil::fixture("vectors.txt"));
  std::mt19937 rng(4);
  mg::AttentionParams params{random_vector(rng, 16)};
  const auto c = mg::compose_test_phrase("picture", corpus, table, params, mg::CompositionMode::kAttention);
  EXPECT_EQ(c.attention_weights->size(), 7);
  // One mentioning sentence: same as composing that single sample.
  const auto one = mg::compose_test_phrase("sound", corpus, table, params, mg::CompositionMode::kAttention);
  const auto direct = mg::compose({"sound", {"loud", "sound"}, {1}}, table, params, mg::CompositionMode::kAttention);
  EXPECT_EQ(one.x, direct.x);
  EXPECT_THROW(mg::test_sample("volume", corpus), mg::UnknownPhraseError);
}

TEST(ComposeTestPhrase, PhraseTermCancelsInTheSoftmax) {
  // The score is linear in [e; p], so w_a's phrase half shifts every score
  // equally. A shared context therefore yields identical weights.
  auto corpus = mg::parse_corpus(
      "{\"tokens\":[\"sharp\",\"picture\",\"and\",\"loud\",\"sound\"],\"mentions\":[{\"phrase\":\"picture\","
      "\"start\":1,\"end\":2},{\"phrase\":\"sound\",\"start\":4,\"end\":5}]}\n");
  const auto table = mg::load_word_vectors(testutil::fixture("vectors.txt"));
  std::mt19937 rng(5);
  mg::AttentionParams params{random_vector(rng, 16)};
  const auto a = mg::compose_test_phrase("picture", corpus, table, params, mg::CompositionMode::kAttention);
  const auto b = mg::compose_test_phrase("sound", corpus, table, params, mg::CompositionMode::kAttention);
  EXPECT_LT((*a.attention_weights - *b.attention_weights).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_GT((a.x.tail(8) - b.x.tail(8)).cwiseAbs().maxCoeff(), 0.1);
  // Context words do move the weights.
  EXPECT_GT(a.attention_weights->maxCoeff() - a.attention_weights->minCoeff(), 1e-6);
}

TEST(ComposeBackward, MatchesFiniteDifferencesInEveryMode) {
  std::mt19937 rng(6);
  const double h = 1e-6;
  for (auto mode : {mg::CompositionMode::kAttention, mg::CompositionMode::kAvg, mg::CompositionMode::kMin,
                    mg::CompositionMode::kMax, mg::CompositionMode::kAp}) {
    for (int trial = 0; trial < 20; ++trial) {
      const int d = 1 + static_cast<int>(rng() % 4);
      const int n = 1 + static_cast<int>(rng() % 5);
      std::vector<Vector> ctx;
      for (int i = 0; i < n; ++i) ctx.push_back(random_vector(rng, d));
      Vector p = random_vector(rng, d);
      mg::AttentionParams params{random_vector(rng, 2 * d)};
      const Vector r = random_vector(rng, mg::composed_dim(mode, d));  // loss = r . x
      mg::CompositionTrace trace;
      mg::compose_vectors(ctx, p, params, mode, &trace);
      const auto g = mg::compose_backward(trace, params, r);
      auto loss = [&] { return r.dot(mg::compose_vectors(ctx, p, params, mode).x); };
      auto check = [&](double& slot, double analytic) {
        const double keep = slot;
        slot = keep + h;
        const double up = loss();
        slot = keep - h;
        const double down = loss();
        slot = keep;
        EXPECT_NEAR(analytic, (up - down) / (2 * h), 1e-6) << mg::to_string(mode);
      };
      for (int k = 0; k < d; ++k) check(p[k], g.phrase[k]);
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < d; ++k) check(ctx[i][k], g.context[i][k]);
      }
      if (mode == mg::CompositionMode::kAttention) {
        for (int k = 0; k < 2 * d; ++k) check(params.w_a[k], g.w_a[k]);
        // Softmax is shift invariant, so the phrase half of W_a gets no gradient.
        EXPECT_LT(g.w_a.tail(d).cwiseAbs().maxCoeff(), 1e-12);
      }
    }
  }
}
