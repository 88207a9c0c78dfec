#include "milkit/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <variant>

namespace milkit {

namespace {

double clamp_posterior(double p, double epsilon) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error("instance posterior outside [0,1]");
  return std::clamp(p, epsilon, 1.0 - epsilon);
}

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw Error("fusion epsilon must lie in (0, 0.5)");
}

}  // namespace

FusionRule::FusionRule(FusionKind k, double eps) : kind(k), epsilon(eps) { check_epsilon(eps); }

std::string to_string(FusionKind kind) {
  return kind == FusionKind::NoisyOr ? "noisy-or" : "average";
}

ScoreRatio fuse_noisy_or(std::span<const double> posteriors, double epsilon) {
  if (posteriors.empty()) throw Error("cannot fuse an empty posterior list");
  check_epsilon(epsilon);
  // log prod(1 - p_k); the odds are 1/q - 1 = expm1(-log q).
  double log_q = 0.0;
  for (double p : posteriors) log_q += std::log1p(-clamp_posterior(p, epsilon));
  return ScoreRatio(std::expm1(-log_q));
}

ScoreRatio fuse_average(std::span<const double> posteriors, double epsilon) {
  if (posteriors.empty()) throw Error("cannot fuse an empty posterior list");
  check_epsilon(epsilon);
  double sum = 0.0;
  for (double p : posteriors) {
    const double c = clamp_posterior(p, epsilon);
    sum += c / (1.0 - c);
  }
  return ScoreRatio(sum / static_cast<double>(posteriors.size()));
}

ScoreRatio fuse(const FusionRule& rule, std::span<const double> posteriors) {
  return rule.kind == FusionKind::NoisyOr ? fuse_noisy_or(posteriors, rule.epsilon)
                                          : fuse_average(posteriors, rule.epsilon);
}

LabeledVectors propagate_labels(const MILDataset& ds) {
  LabeledVectors out;
  out.x.reserve(ds.total_instances());
  out.y.reserve(ds.total_instances());
  for (const Bag& bag : ds.bags()) {
    if (!bag.label) throw Error("bag '" + bag.id + "' is unlabeled");
    for (const Instance& x : bag.instances) out.push_back(x, *bag.label);
  }
  return out;
}

namespace {

class SimpleMilModel final : public TrainedModel {
 public:
  using Base = std::variant<LogisticModel, KnnModel>;

  SimpleMilModel(Standardizer standardizer, Base base, FusionRule rule)
      : standardizer_(std::move(standardizer)), base_(std::move(base)), rule_(rule) {}

  ScoreRatio score(const Bag& bag) const override {
    std::vector<double> posteriors;
    posteriors.reserve(bag.size());
    for (const Instance& x : bag.instances) {
      const Instance z = standardizer_.transform(x);
      posteriors.push_back(std::visit([&](const auto& m) { return predict_posterior(m, z); }, base_));
    }
    return fuse(rule_, posteriors);
  }

  std::string describe() const override {
    std::ostringstream os;
    os << "simplemil(" << (std::holds_alternative<LogisticModel>(base_) ? "logistic" : "knn") << ", "
       << to_string(rule_.kind) << ")";
    return os.str();
  }

 private:
  Standardizer standardizer_;
  Base base_;
  FusionRule rule_;
};

}  // namespace

ModelPtr train_simplemil(const MILDataset& ds, SimpleBase base, FusionRule rule, const HyperPoint& hyper) {
  LabeledVectors data = propagate_labels(ds);
  if (data.size() == 0) throw Error("SimpleMIL needs training instances");
  const bool has_pos = std::find(data.y.begin(), data.y.end(), Label::Positive) != data.y.end();
  const bool has_neg = std::find(data.y.begin(), data.y.end(), Label::Negative) != data.y.end();
  if (!has_pos || !has_neg) throw Error("propagated instance labels contain a single class");

  Standardizer standardizer = Standardizer::fit(data.x);
  data.x = standardizer.transform_all(data.x);

  if (base == SimpleBase::Logistic) {
    LogisticModel model = train_logistic(data, hyper.get("C"));
    return std::make_shared<SimpleMilModel>(std::move(standardizer), std::move(model), rule);
  }
  const double k = hyper.get("k");
  if (!(k >= 1.0)) throw Error("k-NN needs k >= 1");
  KnnModel model = fit_knn(std::move(data), static_cast<std::size_t>(k));
  return std::make_shared<SimpleMilModel>(std::move(standardizer), std::move(model), rule);
}

}  // namespace milkit
