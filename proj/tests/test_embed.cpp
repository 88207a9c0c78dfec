#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "milkit/concept.hpp"
#include "milkit/embed.hpp"
#include "milkit/evaluation.hpp"
#include "milkit/synth.hpp"
#include "test_util.hpp"

using namespace milkit;
using namespace milkit::testing;

namespace {

double test_auc(const TrainedModel& model, const MILDataset& test) {
  std::vector<Label> labels;
  for (const Bag& b : test.bags()) labels.push_back(*b.label);
  const auto scores = model.score_all(test);
  return compute_auc(scores, labels).auc;
}

GeneratorSpec small_spec(GeneratorKind kind, std::uint64_t seed) {
  GeneratorSpec s;
  s.kind = kind;
  s.dim = 20;
  s.bags_per_class = 30;
  s.instances_per_bag = 20;
  s.seed = seed;
  return s;
}

}  // namespace

TEST(MeanInstTest, Examples) {
  EXPECT_EQ(embed_mean_inst(make_bag("a", {{0, 0}, {2, 2}})), (Instance{1, 1}));
  EXPECT_EQ(embed_mean_inst(make_bag("a", {{3, -1, 2}})), (Instance{3, -1, 2}));
  std::mt19937_64 rng(1);
  const Bag b = random_bag(rng, "b", 50, 4);
  for (std::size_t j = 0; j < 4; ++j) {
    long double s = 0.0L;
    for (const Instance& x : b.instances) s += x[j];
    EXPECT_NEAR(embed_mean_inst(b)[j], static_cast<double>(s / 50.0L), 1e-12);
  }
}

TEST(ExtremesTest, Examples) {
  EXPECT_EQ(embed_extremes(make_bag("a", {{0, 5}, {2, 1}})), (Instance{0, 1, 2, 5}));
  EXPECT_EQ(embed_extremes(make_bag("a", {{4, 7}})), (Instance{4, 7, 4, 7}));
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const Bag b = random_bag(rng, "b", 1 + t % 7, 3);
    const Instance e = embed_extremes(b);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_LE(e[j], e[3 + j]);
  }
}

TEST(EmbedTest, PermutationInvariant) {
  std::mt19937_64 rng(3);
  Bag b = random_bag(rng, "b", 9, 3);
  const Instance m = embed_mean_inst(b), e = embed_extremes(b);
  std::reverse(b.instances.begin(), b.instances.end());
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(embed_mean_inst(b)[j], m[j], 1e-12);
  EXPECT_EQ(embed_extremes(b), e);
}

TEST(CodebookTest, DistinctPointsBecomeCenters) {
  const std::vector<Instance> pts{{0, 0}, {5, 5}, {-3, 2}, {0, 0}, {5, 5}, {-3, 2}};
  const Codebook cb = build_codebook(pts, 3, 7);
  std::vector<Instance> centers = cb.centers;
  std::sort(centers.begin(), centers.end());
  EXPECT_EQ(centers, (std::vector<Instance>{{-3, 2}, {0, 0}, {5, 5}}));
  EXPECT_EQ(cb.inertia_trace.back(), 0.0);
}

TEST(CodebookTest, SingleWordIsGlobalMean) {
  std::mt19937_64 rng(4);
  std::vector<Instance> pts;
  for (int i = 0; i < 30; ++i) pts.push_back(random_vector(rng, 3));
  const Codebook cb = build_codebook(pts, 1, 1);
  const Instance mean = embed_mean_inst(make_bag("all", pts));
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(cb.centers[0][j], mean[j], 1e-12);
}

TEST(CodebookTest, TwoBlobsRecovered) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    const std::size_t per = 100;
    std::vector<Instance> pts;
    Instance mean_a(2, 0.0), mean_b(2, 0.0);
    for (std::size_t i = 0; i < 2 * per; ++i) {
      const double c = i % 2 == 0 ? -10.0 : 10.0;
      Instance x{c + g(rng), g(rng)};
      Instance& m = i % 2 == 0 ? mean_a : mean_b;
      for (std::size_t j = 0; j < 2; ++j) m[j] += x[j] / per;
      pts.push_back(x);
    }
    Codebook cb = build_codebook(pts, 2, seed);
    std::sort(cb.centers.begin(), cb.centers.end());
    const double se = 3.0 / std::sqrt(static_cast<double>(per));
    for (std::size_t j = 0; j < 2; ++j) {
      EXPECT_NEAR(cb.centers[0][j], mean_a[j], se);
      EXPECT_NEAR(cb.centers[1][j], mean_b[j], se);
    }
  }
}

TEST(CodebookTest, InertiaNonincreasingAndSeeded) {
  std::mt19937_64 rng(5);
  std::vector<Instance> pts;
  for (int i = 0; i < 200; ++i) pts.push_back(random_vector(rng, 4));
  const Codebook a = build_codebook(pts, 8, 11);
  for (std::size_t t = 1; t < a.inertia_trace.size(); ++t) EXPECT_LE(a.inertia_trace[t], a.inertia_trace[t - 1]);
  EXPECT_EQ(build_codebook(pts, 8, 11).centers, a.centers);
  EXPECT_THROW(build_codebook(pts, 201, 1), Error);
  EXPECT_THROW(build_codebook(pts, 0, 1), Error);
}

TEST(BowTest, HistogramProperties) {
  Codebook cb;
  cb.centers = {{0, 0}, {10, 10}, {0, 0}};
  EXPECT_EQ(embed_bow(make_bag("a", {{1, 0}, {0, 1}, {-1, 0}}), cb), (Instance{1, 0, 0}));
  EXPECT_THROW(embed_bow(make_bag("a", {{1, 0, 0}}), cb), Error);

  std::mt19937_64 rng(6);
  std::vector<Instance> pts;
  for (int i = 0; i < 100; ++i) pts.push_back(random_vector(rng, 3));
  const Codebook learned = build_codebook(pts, 6, 2);
  for (int t = 0; t < 20; ++t) {
    const Bag b = random_bag(rng, "b", 1 + t, 3);
    const Instance h = embed_bow(b, learned);
    // Brute-force assignment.
    Instance expected(6, 0.0);
    for (const Instance& x : b.instances) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < 6; ++c) {
        double dc = 0.0, db = 0.0;
        for (std::size_t j = 0; j < 3; ++j) {
          dc += (x[j] - learned.centers[c][j]) * (x[j] - learned.centers[c][j]);
          db += (x[j] - learned.centers[best][j]) * (x[j] - learned.centers[best][j]);
        }
        if (dc < db) best = c;
      }
      expected[best] += 1.0 / static_cast<double>(b.size());
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < 6; ++c) {
      EXPECT_NEAR(h[c], expected[c], 1e-12);
      EXPECT_GE(h[c], 0.0);
      sum += h[c];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(MilesTest, Examples) {
  const std::vector<Instance> protos{{0, 0}, {1, 2}, {-1, 1}, {3, 0}};
  const Bag b = make_bag("b", {{0, 0}, {2, 2}, {-1, 0}});
  const double sigma = 1.5;
  const Instance e = embed_miles(b, protos, sigma);
  ASSERT_EQ(e.size(), 4u);
  EXPECT_EQ(e[0], 1.0);
  // Hand-computed nearest squared distances: 0, 1, 1, 5.
  EXPECT_NEAR(e[1], std::exp(-1.0 / 2.25), 1e-12);
  EXPECT_NEAR(e[2], std::exp(-1.0 / 2.25), 1e-12);
  EXPECT_NEAR(e[3], std::exp(-5.0 / 2.25), 1e-12);
  const Instance far = embed_miles(make_bag("f", {{1e3, 1e3}}), protos, 1.0);
  for (double v : far) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(embed_miles(b, protos, 0.0), Error);
}

TEST(MilesTest, MedianDistance) {
  const std::vector<Instance> pts{{0}, {1}, {3}};
  // Pairwise distances 1, 3, 2.
  EXPECT_DOUBLE_EQ(median_pairwise_distance(pts), 2.0);
  const std::vector<Instance> four{{0}, {1}, {3}, {7}};
  // 1, 3, 7, 2, 6, 4 -> middle pair 3 and 4.
  EXPECT_DOUBLE_EQ(median_pairwise_distance(four), 3.5);
}

TEST(DissimilarityTest, MatchesScalarOps) {
  std::mt19937_64 rng(7);
  const MILDataset protos = random_dataset(rng, 6, 3);
  const Instance self = embed_dissimilarity(protos[2], protos.bags(), BagMeasure::MeanMin);
  ASSERT_EQ(self.size(), 6u);
  EXPECT_EQ(self[2], 0.0);
  const Bag q = random_bag(rng, "q", 4, 3);
  for (BagMeasure m : {BagMeasure::MeanMin, BagMeasure::Emd}) {
    const Instance e = embed_dissimilarity(q, protos.bags(), m);
    for (std::size_t r = 0; r < 6; ++r) EXPECT_EQ(e[r], bag_distance(q, protos[r], m));
  }
}

TEST(EmbedClassifierTest, CacheGivesSameScores) {
  const GeneratedSplits s = generate_splits(small_spec(GeneratorKind::Distribution, 3));
  EmbedCache cache;
  for (EmbeddingKind kind : {EmbeddingKind::MeanInst, EmbeddingKind::Bow, EmbeddingKind::Miles,
                             EmbeddingKind::DissimMeanMin, EmbeddingKind::DissimEmd}) {
    const HyperPoint hp{{"words", 10}, {"p", 2}, {"C", 1}, {"k", 3}};
    for (EmbedHead head : {EmbedHead::Svm, EmbedHead::Knn}) {
      const auto plain = train_embed_classifier(s.train.dataset, kind, head, hp, 9);
      const auto cached = train_embed_classifier(s.train.dataset, kind, head, hp, 9, &cache);
      EXPECT_EQ(plain->score_all(s.test.dataset), cached->score_all(s.test.dataset)) << to_string(kind);
      EXPECT_EQ(cached->score_all(s.test.dataset), cached->score_all(s.test.dataset));
    }
  }
}

TEST(EmbedClassifierTest, CodebookIgnoresTestBags) {
  // The fitted model depends on training bags only: scoring one test set
  // before another must not change the scores of either.
  const GeneratedSplits s = generate_splits(small_spec(GeneratorKind::Distribution, 4));
  const HyperPoint hp{{"words", 8}, {"p", 1}, {"C", 1}};
  const auto a = train_embed_classifier(s.train.dataset, EmbeddingKind::Bow, EmbedHead::Svm, hp, 1);
  const auto before = a->score_all(s.test.dataset);
  a->score_all(s.validation.dataset);
  EXPECT_EQ(a->score_all(s.test.dataset), before);
  const auto b = train_embed_classifier(s.train.dataset, EmbeddingKind::Bow, EmbedHead::Svm, hp, 1);
  EXPECT_EQ(b->score_all(s.test.dataset), before);
}

TEST(EmbedClassifierTest, MeanInstSeparatesDistributionShift) {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const GeneratedSplits s = generate_splits(small_spec(GeneratorKind::Distribution, seed));
    const auto m = train_embed_classifier(s.train.dataset, EmbeddingKind::MeanInst, EmbedHead::Svm,
                                          HyperPoint{{"p", 1}, {"C", 1}}, seed);
    total += test_auc(*m, s.test.dataset);
  }
  EXPECT_GT(total / 10.0, 0.9);
}

TEST(EmbedClassifierTest, MatchedMeansDefeatMeanInstButNotMiSvm) {
  double mean_inst = 0.0, misvm = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    GeneratorSpec spec = small_spec(GeneratorKind::Concept, seed);
    spec.match_means = true;
    spec.witness_rate = 0.2;
    const GeneratedSplits s = generate_splits(spec);
    const auto m = train_embed_classifier(s.train.dataset, EmbeddingKind::MeanInst, EmbedHead::Svm,
                                          HyperPoint{{"p", 1}, {"C", 1}}, seed);
    mean_inst += test_auc(*m, s.test.dataset);
    misvm += test_auc(train_misvm(s.train.dataset, PolyKernel{2, 1.0 / 20.0}, 1.0, FusionRule(FusionKind::NoisyOr)),
                      s.test.dataset);
  }
  EXPECT_GE(mean_inst / 10.0, 0.4);
  EXPECT_LE(mean_inst / 10.0, 0.65);
  EXPECT_GT(misvm / 10.0, 0.8);
}

TEST(EmbedClassifierTest, DissimilaritySvmBeatsKnn) {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const GeneratedSplits s = generate_splits(small_spec(GeneratorKind::Distribution, seed));
    EmbedCache cache;
    const auto svm = train_embed_classifier(s.train.dataset, EmbeddingKind::DissimMeanMin, EmbedHead::Svm,
                                            HyperPoint{{"p", 1}, {"C", 1}}, seed, &cache);
    const auto knn = train_embed_classifier(s.train.dataset, EmbeddingKind::DissimMeanMin, EmbedHead::Knn,
                                            HyperPoint{{"k", 5}}, seed, &cache);
    wins += test_auc(*svm, s.test.dataset) >= test_auc(*knn, s.test.dataset) ? 1 : 0;
  }
  EXPECT_GE(wins, 6);
}

TEST(EmbedClassifierTest, BadArgumentsThrow) {
  std::mt19937_64 rng(8);
  const MILDataset ds = random_dataset(rng, 6, 2);
  EXPECT_THROW(train_embed_classifier(ds, EmbeddingKind::MeanInst, EmbedHead::Knn, HyperPoint{{"k", 7}}, 0), Error);
  EXPECT_THROW(train_embed_classifier(ds, EmbeddingKind::Bow, EmbedHead::Svm, HyperPoint{{"p", 1}}, 0), Error);
  EXPECT_THROW(embedding_kind_from_string("fisher"), Error);
}
