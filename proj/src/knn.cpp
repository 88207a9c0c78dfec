#include <algorithm>
#include <cmath>

#include "milkit/base_learners.hpp"

namespace milkit {

Standardizer Standardizer::fit(std::span<const Instance> data) {
  if (data.empty()) throw Error("cannot fit a standardizer on no data");
  const std::size_t d = data.front().size();
  Standardizer s;
  s.mean_.assign(d, 0.0);
  s.scale_.assign(d, 0.0);
  for (const Instance& x : data) {
    for (std::size_t j = 0; j < d; ++j) s.mean_[j] += x[j];
  }
  const double n = static_cast<double>(data.size());
  for (double& m : s.mean_) m /= n;
  for (const Instance& x : data) {
    for (std::size_t j = 0; j < d; ++j) {
      const double c = x[j] - s.mean_[j];
      s.scale_[j] += c * c;
    }
  }
  for (double& v : s.scale_) {
    v = std::sqrt(v / n);
    if (!(v > 1e-12)) v = 1.0;
  }
  return s;
}

Standardizer Standardizer::identity(std::size_t dim) {
  Standardizer s;
  s.mean_.assign(dim, 0.0);
  s.scale_.assign(dim, 1.0);
  return s;
}

Instance Standardizer::transform(std::span<const double> x) const {
  if (x.size() != mean_.size()) throw Error("dimension mismatch in standardizer");
  Instance out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean_[j]) / scale_[j];
  return out;
}

std::vector<Instance> Standardizer::transform_all(std::span<const Instance> data) const {
  std::vector<Instance> out;
  out.reserve(data.size());
  for (const Instance& x : data) out.push_back(transform(x));
  return out;
}

KnnModel fit_knn(LabeledVectors data, std::size_t k) {
  if (data.x.size() != data.y.size()) throw Error("feature/label count mismatch");
  if (k == 0 || k > data.size()) {
    throw Error("k-NN needs 1 <= k <= " + std::to_string(data.size()) + ", got " + std::to_string(k));
  }
  return KnnModel{k, std::move(data.x), std::move(data.y)};
}

double predict_posterior(const KnnModel& model, std::span<const double> x) {
  // Neighbours are ordered by (distance, label); equal-distance ties therefore
  // resolve the same way for any ordering of the reference set.
  std::vector<std::pair<double, int>> dist;
  dist.reserve(model.reference.size());
  for (std::size_t i = 0; i < model.reference.size(); ++i) {
    const Instance& r = model.reference[i];
    if (r.size() != x.size()) throw Error("dimension mismatch in k-NN prediction");
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double c = r[j] - x[j];
      s += c * c;
    }
    dist.emplace_back(s, to_int(model.labels[i]));
  }
  const auto kth = dist.begin() + static_cast<std::ptrdiff_t>(model.k);
  std::partial_sort(dist.begin(), kth, dist.end());
  const auto positives = std::count_if(dist.begin(), kth, [](const auto& p) { return p.second > 0; });
  return static_cast<double>(positives) / static_cast<double>(model.k);
}

}  // namespace milkit
