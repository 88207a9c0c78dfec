#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "log_math.hpp"
#include "milkit/concept.hpp"

namespace milkit {

using detail::log1mexp;
using detail::softplus;

MilBoostModel::MilBoostModel(std::vector<Stump> stumps, std::vector<double> alphas)
    : stumps_(std::move(stumps)), alphas_(std::move(alphas)) {}

double MilBoostModel::instance_score(std::span<const double> x) const {
  double f = 0.0;
  for (std::size_t t = 0; t < stumps_.size(); ++t) f += alphas_[t] * stumps_[t](x);
  return f;
}

ScoreRatio MilBoostModel::score(const Bag& bag) const {
  if (bag.instances.empty()) throw Error("cannot score an empty bag");
  // -log prod(1 - p_k) with p_k = sigmoid(F_k); the odds are expm1 of it.
  double t = 0.0;
  for (const Instance& x : bag.instances) t += softplus(instance_score(x));
  return ScoreRatio::from_log_odds(t + log1mexp(t));
}

std::string MilBoostModel::describe() const {
  std::ostringstream os;
  os << "milboost(rounds=" << stumps_.size() << ")";
  return os.str();
}

double milboost_log_likelihood(const MILDataset& ds, const std::vector<std::vector<double>>& F) {
  double total = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    double t = 0.0;
    for (double f : F[i]) t += softplus(f);
    total += is_positive(*ds[i].label) ? log1mexp(t) : -t;
  }
  return total;
}

namespace {

struct FeatureIndex {
  std::vector<std::size_t> order;   // instance ids sorted by feature value
  std::vector<double> sorted;       // feature values in that order
  std::vector<double> thresholds;
};

}  // namespace

MilBoostModel train_milboost(const MILDataset& ds, const MilBoostOptions& options) {
  if (options.rounds < 0) throw Error("MILBoost rounds must be nonnegative");
  if (options.thresholds_per_feature == 0) throw Error("MILBoost needs at least one threshold per feature");
  if (!ds.all_labeled()) throw Error("MILBoost needs labeled bags");
  if (ds.count(Label::Positive) == 0 || ds.count(Label::Negative) == 0) {
    throw Error("MILBoost needs positive and negative bags");
  }

  std::vector<const Instance*> xs;
  std::vector<std::size_t> bag_of;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (const Instance& x : ds[i].instances) {
      xs.push_back(&x);
      bag_of.push_back(i);
    }
  }
  const std::size_t n = xs.size();
  const std::size_t d = ds.dim();

  std::vector<FeatureIndex> features(d);
  for (std::size_t j = 0; j < d; ++j) {
    FeatureIndex& fi = features[j];
    fi.order.resize(n);
    std::iota(fi.order.begin(), fi.order.end(), 0);
    std::stable_sort(fi.order.begin(), fi.order.end(),
                     [&](std::size_t a, std::size_t b) { return (*xs[a])[j] < (*xs[b])[j]; });
    for (std::size_t k : fi.order) fi.sorted.push_back((*xs[k])[j]);
    const std::size_t q = options.thresholds_per_feature;
    for (std::size_t t = 0; t < q; ++t) {
      const double v = fi.sorted[(t + 1) * n / (q + 1)];
      if (v < fi.sorted.back() && (fi.thresholds.empty() || v > fi.thresholds.back())) fi.thresholds.push_back(v);
    }
  }

  std::vector<std::vector<double>> F(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) F[i].assign(ds[i].instances.size(), 0.0);

  std::vector<Stump> stumps;
  std::vector<double> alphas;
  std::vector<double> likelihood{milboost_log_likelihood(ds, F)};
  std::vector<std::vector<std::vector<double>>> weight_trace;

  std::vector<double> w(n);
  for (int round = 0; round < options.rounds; ++round) {
    // w = dL/dF: p / expm1(T) in positive bags, -p in negative bags.
    std::vector<std::vector<double>> bag_w(ds.size());
    std::size_t idx = 0;
    double w_abs = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      double t = 0.0;
      for (double f : F[i]) t += softplus(f);
      for (double f : F[i]) {
        const double p = sigmoid(f);
        w[idx] = is_positive(*ds[i].label) ? p / std::expm1(t) : -p;
        w_abs += std::abs(w[idx]);
        bag_w[i].push_back(w[idx]);
        ++idx;
      }
    }
    weight_trace.push_back(std::move(bag_w));
    if (!(w_abs > 0.0)) break;

    // Stump maximizing sum_k w_k h(x_k).
    const double w_total = std::accumulate(w.begin(), w.end(), 0.0);
    Stump best;
    double best_gain = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const FeatureIndex& fi = features[j];
      double below = 0.0;
      std::size_t pos = 0;
      for (double th : fi.thresholds) {
        while (pos < n && fi.sorted[pos] <= th) below += w[fi.order[pos++]];
        const double corr = (w_total - below) - below;
        if (std::abs(corr) > best_gain) {
          best_gain = std::abs(corr);
          best = Stump{j, th, corr > 0.0 ? 1 : -1};
        }
      }
    }
    if (best_gain <= 1e-12 * w_abs) break;

    std::vector<double> h(n);
    for (std::size_t k = 0; k < n; ++k) h[k] = best(*xs[k]);
    auto objective = [&](double alpha) {
      double total = 0.0;
      std::size_t k = 0;
      for (std::size_t i = 0; i < ds.size(); ++i) {
        double t = 0.0;
        for (double f : F[i]) t += softplus(f + alpha * h[k++]);
        total += is_positive(*ds[i].label) ? log1mexp(t) : -t;
      }
      return total;
    };

    // Bracket by doubling, then golden-section search on [0, hi].
    const double base = likelihood.back();
    double best_alpha = 0.0, best_value = base;
    auto consider = [&](double a) {
      const double v = objective(a);
      if (v > best_value) {
        best_value = v;
        best_alpha = a;
      }
      return v;
    };
    double hi = 1.0;
    double prev = consider(0.5);
    while (hi < 1e6) {
      const double v = consider(hi);
      if (!(v > prev)) break;
      prev = v;
      hi *= 2.0;
    }
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = 0.0, b = hi;
    double c = b - phi * (b - a), e = a + phi * (b - a);
    double fc = consider(c), fe = consider(e);
    for (int it = 0; it < 80 && b - a > 1e-10 * (1.0 + b); ++it) {
      if (fc >= fe) {
        b = e;
        e = c;
        fe = fc;
        c = b - phi * (b - a);
        fc = consider(c);
      } else {
        a = c;
        c = e;
        fc = fe;
        e = a + phi * (b - a);
        fe = consider(e);
      }
    }
    // Only rounds that raise the likelihood are kept.
    if (!(best_value > base)) break;

    std::size_t k = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      for (double& f : F[i]) f += best_alpha * h[k++];
    }
    stumps.push_back(best);
    alphas.push_back(best_alpha);
    likelihood.push_back(best_value);
  }

  MilBoostModel model(std::move(stumps), std::move(alphas));
  model.likelihood_trace = std::move(likelihood);
  model.weight_trace = std::move(weight_trace);
  return model;
}

}  // namespace milkit
