#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include "milkit/fusion.hpp"
#include "test_util.hpp"

namespace milkit {
namespace {

constexpr double kTinyEps = 1e-300;

// Direct evaluation of the two fusion formulas, no log-domain tricks.
double noisy_or_direct(const std::vector<double>& p) {
  double prod = 1.0;
  for (double v : p) prod *= 1.0 - v;
  return (1.0 - prod) / prod;
}

double average_direct(const std::vector<double>& p) {
  double s = 0.0;
  for (double v : p) s += v / (1.0 - v);
  return s / static_cast<double>(p.size());
}

bool close_rel(double a, double b, double tol) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

TEST(FuseNoisyOr, WorkedValues) {
  EXPECT_NEAR(fuse_noisy_or(std::vector<double>{0.5}).value(), 1.0, 1e-12);
  EXPECT_NEAR(fuse_noisy_or(std::vector<double>{0.0, 0.0}, 1e-15).value(), 0.0, 1e-12);
  EXPECT_NEAR(fuse_noisy_or(std::vector<double>{0.2, 0.5}).value(), 1.5, 1e-12);
}

TEST(FuseAverage, WorkedValues) {
  EXPECT_NEAR(fuse_average(std::vector<double>{0.5, 0.5}).value(), 1.0, 1e-12);
  EXPECT_NEAR(fuse_average(std::vector<double>{0.3}).value(), 0.3 / 0.7, 1e-12);
  EXPECT_NEAR(fuse_average(std::vector<double>{0.2, 0.5}).value(), 0.625, 1e-12);
}

TEST(Fusion, MatchesDirectArithmetic) {
  std::mt19937_64 rng(100);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  std::uniform_int_distribution<int> len(1, 8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> p(len(rng));
    for (double& v : p) v = u(rng);
    EXPECT_TRUE(close_rel(fuse_noisy_or(p).value(), noisy_or_direct(p), 1e-12));
    EXPECT_TRUE(close_rel(fuse_average(p).value(), average_direct(p), 1e-12));
  }
}

TEST(Fusion, SingleInstanceRulesAgree) {
  for (double p : {0.0, 0.1, 0.5, 0.77, 1.0}) {
    const std::vector<double> v{p};
    EXPECT_NEAR(fuse_noisy_or(v).log_odds(), fuse_average(v).log_odds(), 1e-9);
  }
}

TEST(Fusion, SaturatesAtCertainty) {
  const ScoreRatio s = fuse_noisy_or(std::vector<double>{1.0, 1.0, 1.0}, kTinyEps);
  EXPECT_TRUE(std::isfinite(s.value()));
  EXPECT_GT(s.value(), 1e300);
  EXPECT_TRUE(std::isfinite(fuse_average(std::vector<double>{1.0}).value()));
}

TEST(Fusion, MonotoneAndPermutationInvariant) {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> p(1 + trial % 6);
    for (double& v : p) v = u(rng);
    for (const FusionRule rule : {FusionRule(FusionKind::NoisyOr), FusionRule(FusionKind::Average)}) {
      const double base = fuse(rule, p).value();
      std::vector<double> bumped = p;
      const std::size_t k = trial % p.size();
      bumped[k] = std::min(1.0, bumped[k] + 0.1 * u(rng));
      EXPECT_GE(fuse(rule, bumped).value(), base);
      std::vector<double> perm = p;
      std::shuffle(perm.begin(), perm.end(), rng);
      EXPECT_TRUE(close_rel(fuse(rule, perm).value(), base, 1e-12));
    }
  }
}

TEST(Fusion, RejectsEmptyAndBadInput) {
  EXPECT_THROW(fuse_noisy_or(std::vector<double>{}), Error);
  EXPECT_THROW(fuse_average(std::vector<double>{}), Error);
  EXPECT_THROW(fuse_average(std::vector<double>{1.5}), Error);
  EXPECT_THROW(FusionRule(FusionKind::Average, 0.5), Error);
}

TEST(PropagateLabels, InstancesInheritBagLabel) {
  const MILDataset one({testing::make_bag("p", {{1.0}, {2.0}, {3.0}}, Label::Positive)}, 1);
  const LabeledVectors a = propagate_labels(one);
  ASSERT_EQ(a.size(), 3u);
  for (Label l : a.y) EXPECT_EQ(l, Label::Positive);

  std::mt19937_64 rng(1);
  const MILDataset two({testing::random_bag(rng, "a", 50, 3, Label::Positive),
                        testing::random_bag(rng, "b", 50, 3, Label::Negative)},
                       3);
  const LabeledVectors b = propagate_labels(two);
  EXPECT_EQ(b.size(), 100u);
  EXPECT_EQ(std::count(b.y.begin(), b.y.end(), Label::Negative), 50);

  EXPECT_EQ(propagate_labels(MILDataset({}, 3)).size(), 0u);
  const MILDataset unlabeled({testing::make_bag("u", {{1.0}}, std::nullopt)}, 1);
  EXPECT_THROW(propagate_labels(unlabeled), Error);
}

TEST(SimpleMil, ConstantInstancesGiveConsistentRanking) {
  // Every bag holds copies of one vector; both rules are then monotone in
  // the shared instance posterior and must rank bags identically.
  std::vector<Bag> train;
  for (int i = 0; i < 10; ++i) {
    const double v = i;
    train.push_back(testing::make_bag("b" + std::to_string(i), {{v}, {v}, {v}},
                                      i >= 5 ? Label::Positive : Label::Negative));
  }
  const MILDataset ds(std::move(train), 1);
  const auto noisy = train_simplemil(ds, SimpleBase::Logistic, FusionRule(FusionKind::NoisyOr), {{"C", 1.0}});
  const auto avg = train_simplemil(ds, SimpleBase::Logistic, FusionRule(FusionKind::Average), {{"C", 1.0}});
  for (int i = 0; i + 1 < 10; ++i) {
    const auto lo = testing::make_bag("q", {{double(i)}, {double(i)}});
    const auto hi = testing::make_bag("q", {{double(i + 1)}, {double(i + 1)}});
    EXPECT_EQ(noisy->score(lo) < noisy->score(hi), avg->score(lo) < avg->score(hi));
  }
}

TEST(SimpleMil, SingleClassIsAnError) {
  const MILDataset ds({testing::make_bag("a", {{1.0}}), testing::make_bag("b", {{2.0}})}, 1);
  EXPECT_THROW(train_simplemil(ds, SimpleBase::Logistic, FusionRule(), {{"C", 1.0}}), Error);
  EXPECT_THROW(train_simplemil(ds, SimpleBase::Knn, FusionRule(), {{"k", 1.0}}), Error);
}

}  // namespace
}  // namespace milkit
