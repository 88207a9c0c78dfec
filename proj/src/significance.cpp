#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "milkit/evaluation.hpp"

namespace milkit {

namespace {

double mean(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double covariance(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2) return 0.0;
  const double ma = mean(a), mb = mean(b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
  return s / static_cast<double>(a.size() - 1);
}

struct Placements {
  std::vector<double> positive;  // fraction of negatives ranked below each positive
  std::vector<double> negative;  // fraction of positives ranked above each negative
};

Placements placements(std::span<const double> scores, std::span<const Label> labels) {
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) (is_positive(labels[i]) ? pos : neg).push_back(scores[i]);
  std::vector<double> pos_sorted = pos, neg_sorted = neg;
  std::sort(pos_sorted.begin(), pos_sorted.end());
  std::sort(neg_sorted.begin(), neg_sorted.end());

  Placements out;
  const auto n_pos = static_cast<double>(pos.size());
  const auto n_neg = static_cast<double>(neg.size());
  for (double s : pos) {
    const auto lo = std::lower_bound(neg_sorted.begin(), neg_sorted.end(), s);
    const auto hi = std::upper_bound(lo, neg_sorted.end(), s);
    out.positive.push_back((static_cast<double>(lo - neg_sorted.begin()) + 0.5 * static_cast<double>(hi - lo)) / n_neg);
  }
  for (double s : neg) {
    const auto lo = std::lower_bound(pos_sorted.begin(), pos_sorted.end(), s);
    const auto hi = std::upper_bound(lo, pos_sorted.end(), s);
    out.negative.push_back((static_cast<double>(pos_sorted.end() - hi) + 0.5 * static_cast<double>(hi - lo)) / n_pos);
  }
  return out;
}

SignificanceResult from_z(double diff, double variance, SignificanceTest test, double alpha) {
  SignificanceResult r;
  r.test = test;
  r.alpha = alpha;
  if (!(variance > 0.0)) {
    if (diff == 0.0) {
      r.degenerate = true;
      r.statistic = 0.0;
      r.p_value = 1.0;
    } else {
      r.statistic = std::copysign(std::numeric_limits<double>::infinity(), diff);
      r.p_value = 0.0;
    }
    return r;
  }
  r.statistic = diff / std::sqrt(variance);
  return r;
}

}  // namespace

std::string to_string(SignificanceTest test) {
  return test == SignificanceTest::DelongPaired ? "delong_paired" : "t_dependent";
}

SignificanceResult delong_test(std::span<const double> scores_a, std::span<const double> scores_b,
                               std::span<const Label> labels, double alpha) {
  if (scores_a.size() != labels.size() || scores_b.size() != labels.size()) {
    throw Error("DeLong test needs both score vectors aligned with the labels");
  }
  const bool has_pos = std::find(labels.begin(), labels.end(), Label::Positive) != labels.end();
  const bool has_neg = std::find(labels.begin(), labels.end(), Label::Negative) != labels.end();
  if (!has_pos || !has_neg) throw Error("DeLong test needs both classes");

  const Placements a = placements(scores_a, labels);
  const Placements b = placements(scores_b, labels);
  const double auc_a = mean(a.positive);
  const double auc_b = mean(b.positive);
  const auto m = static_cast<double>(a.positive.size());
  const auto n = static_cast<double>(a.negative.size());

  const double s10 = covariance(a.positive, a.positive) + covariance(b.positive, b.positive) -
                     2.0 * covariance(a.positive, b.positive);
  const double s01 = covariance(a.negative, a.negative) + covariance(b.negative, b.negative) -
                     2.0 * covariance(a.negative, b.negative);
  const double variance = s10 / m + s01 / n;

  SignificanceResult r = from_z(auc_a - auc_b, variance, SignificanceTest::DelongPaired, alpha);
  if (variance > 0.0) r.p_value = std::erfc(std::abs(r.statistic) / std::sqrt(2.0));
  r.p_value = std::clamp(r.p_value, 0.0, 1.0);
  return r;
}

SignificanceResult dependent_ttest(std::span<const double> aucs_a, std::span<const double> aucs_b, double alpha) {
  if (aucs_a.size() != aucs_b.size()) throw Error("t-test needs equal-length samples");
  if (aucs_a.size() < 2) throw Error("t-test needs at least two pairs");
  std::vector<double> diff(aucs_a.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = aucs_a[i] - aucs_b[i];
  const double n = static_cast<double>(diff.size());
  const double d_mean = mean(diff);
  const double d_var = covariance(diff, diff);

  SignificanceResult r = from_z(d_mean, d_var / n, SignificanceTest::TDependent, alpha);
  if (d_var > 0.0) {
    const boost::math::students_t dist(n - 1.0);
    r.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.statistic)));
  }
  r.p_value = std::clamp(r.p_value, 0.0, 1.0);
  return r;
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  return std::sqrt(covariance(v, v));
}

}  // namespace milkit
