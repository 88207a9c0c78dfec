#include "milkit/embed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "milkit/base_learners.hpp"

namespace milkit {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double r = a[j] - b[j];
    s += r * r;
  }
  return s;
}

void check_nonempty(const Bag& bag) {
  if (bag.instances.empty()) throw Error("bag '" + bag.id + "' has no instances");
}

}  // namespace

Instance embed_mean_inst(const Bag& bag) {
  check_nonempty(bag);
  Instance m(bag.dim(), 0.0);
  for (const Instance& x : bag.instances)
    for (std::size_t j = 0; j < m.size(); ++j) m[j] += x[j];
  for (double& v : m) v /= static_cast<double>(bag.size());
  return m;
}

Instance embed_extremes(const Bag& bag) {
  check_nonempty(bag);
  const std::size_t d = bag.dim();
  Instance out(2 * d);
  for (std::size_t j = 0; j < d; ++j) {
    out[j] = out[d + j] = bag.instances.front()[j];
    for (const Instance& x : bag.instances) {
      out[j] = std::min(out[j], x[j]);
      out[d + j] = std::max(out[d + j], x[j]);
    }
  }
  return out;
}

std::size_t nearest_center(const Codebook& cb, std::span<const double> x) {
  if (x.size() != cb.dim()) throw Error("instance dimension does not match the codebook");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < cb.size(); ++c) {
    const double d = squared_distance(x, cb.centers[c]);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

Codebook build_codebook(std::span<const Instance> instances, std::size_t words, std::uint64_t seed,
                        int max_iterations) {
  const std::size_t n = instances.size();
  if (words == 0) throw Error("codebook needs at least one word");
  if (words > n) {
    throw Error("codebook of " + std::to_string(words) + " words needs at least as many instances, got " +
                std::to_string(n));
  }
  const std::size_t d = instances.front().size();

  // k-means++ seeding.
  Codebook cb;
  std::mt19937_64 rng(seed);
  std::vector<bool> chosen(n, false);
  std::size_t first = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  cb.centers.push_back(instances[first]);
  chosen[first] = true;
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(instances[i], cb.centers[0]);
  while (cb.centers.size() < words) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = n;
    if (total > 0.0) {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] <= 0.0) continue;
        pick = i;
        r -= d2[i];
        if (r < 0.0) break;
      }
    } else {
      // Fewer distinct points than words: reuse the first unchosen instance.
      for (pick = 0; chosen[pick]; ++pick) {
      }
    }
    chosen[pick] = true;
    cb.centers.push_back(instances[pick]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(instances[i], cb.centers.back()));
  }

  // Lloyd iterations.
  std::vector<std::size_t> assign(n, words);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = nearest_center(cb, instances[i]);
      inertia += squared_distance(instances[i], cb.centers[c]);
      changed |= c != assign[i];
      assign[i] = c;
    }
    cb.inertia_trace.push_back(inertia);
    if (!changed) break;
    std::vector<Instance> sum(words, Instance(d, 0.0));
    std::vector<std::size_t> count(words, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) sum[assign[i]][j] += instances[i][j];
      ++count[assign[i]];
    }
    for (std::size_t c = 0; c < words; ++c) {
      if (count[c] == 0) continue;
      for (std::size_t j = 0; j < d; ++j) cb.centers[c][j] = sum[c][j] / static_cast<double>(count[c]);
    }
  }
  return cb;
}

Instance embed_bow(const Bag& bag, const Codebook& cb) {
  check_nonempty(bag);
  Instance h(cb.size(), 0.0);
  for (const Instance& x : bag.instances) h[nearest_center(cb, x)] += 1.0;
  for (double& v : h) v /= static_cast<double>(bag.size());
  return h;
}

Instance embed_miles(const Bag& bag, std::span<const Instance> prototypes, double sigma) {
  check_nonempty(bag);
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error("MILES sigma must be positive and finite");
  const double inv = 1.0 / (sigma * sigma);
  Instance out(prototypes.size());
  for (std::size_t m = 0; m < prototypes.size(); ++m) {
    if (prototypes[m].size() != bag.dim()) throw Error("prototype dimension does not match the bag");
    double best = std::numeric_limits<double>::infinity();
    for (const Instance& x : bag.instances) best = std::min(best, squared_distance(x, prototypes[m]));
    out[m] = std::exp(-best * inv);
  }
  return out;
}

double median_pairwise_distance(std::span<const Instance> instances, std::size_t max_points) {
  if (instances.size() < 2) throw Error("median pairwise distance needs two instances");
  max_points = std::max<std::size_t>(max_points, 2);
  const std::size_t stride = (instances.size() + max_points - 1) / max_points;
  std::vector<const Instance*> pts;
  for (std::size_t i = 0; i < instances.size(); i += stride) pts.push_back(&instances[i]);
  std::vector<double> d;
  d.reserve(pts.size() * (pts.size() - 1) / 2);
  for (std::size_t a = 0; a < pts.size(); ++a)
    for (std::size_t b = a + 1; b < pts.size(); ++b) d.push_back(squared_distance(*pts[a], *pts[b]));
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  if (d.size() % 2 == 1) return std::sqrt(*mid);
  return 0.5 * (std::sqrt(*mid) + std::sqrt(*std::max_element(d.begin(), mid)));
}

Instance embed_dissimilarity(const Bag& bag, std::span<const Bag> prototypes, BagMeasure measure) {
  Instance out(prototypes.size());
  for (std::size_t m = 0; m < prototypes.size(); ++m) out[m] = bag_distance(bag, prototypes[m], measure);
  return out;
}

// ---------------------------------------------------------------------------

std::string to_string(EmbeddingKind kind) {
  switch (kind) {
    case EmbeddingKind::MeanInst: return "mean_inst";
    case EmbeddingKind::Extremes: return "extremes";
    case EmbeddingKind::Bow: return "bow";
    case EmbeddingKind::Miles: return "miles";
    case EmbeddingKind::DissimMeanMin: return "dissim_meanmin";
    case EmbeddingKind::DissimEmd: return "dissim_emd";
  }
  throw Error("unknown embedding kind");
}

EmbeddingKind embedding_kind_from_string(const std::string& s) {
  for (EmbeddingKind k : {EmbeddingKind::MeanInst, EmbeddingKind::Extremes, EmbeddingKind::Bow, EmbeddingKind::Miles,
                          EmbeddingKind::DissimMeanMin, EmbeddingKind::DissimEmd}) {
    if (to_string(k) == s) return k;
  }
  throw Error("unknown embedding '" + s + "'");
}

std::string to_string(EmbedHead head) { return head == EmbedHead::Svm ? "svm" : "knn"; }

namespace {

bool is_dissimilarity(EmbeddingKind kind) {
  return kind == EmbeddingKind::DissimMeanMin || kind == EmbeddingKind::DissimEmd;
}

BagMeasure measure_of(EmbeddingKind kind) {
  return kind == EmbeddingKind::DissimEmd ? BagMeasure::Emd : BagMeasure::MeanMin;
}

// Symmetric measures are always evaluated with the smaller id first, so the
// cached and uncached paths see the same floating-point value.
double oriented_distance(const Bag& a, const Bag& b, BagMeasure m) {
  if (is_symmetric(m) && b.id < a.id) return bag_distance(b, a, m);
  return bag_distance(a, b, m);
}

}  // namespace

double EmbedCache::distance(const Bag& a, const Bag& b, BagMeasure measure) {
  const bool swap = is_symmetric(measure) && b.id < a.id;
  const std::string key = to_string(measure) + '\x1f' + (swap ? b.id : a.id) + '\x1f' + (swap ? a.id : b.id);
  {
    std::lock_guard lock(mutex_);
    if (auto it = distances_.find(key); it != distances_.end()) return it->second;
  }
  const double v = oriented_distance(a, b, measure);
  std::lock_guard lock(mutex_);
  distances_.emplace(key, v);
  return v;
}

std::shared_ptr<const std::vector<double>> EmbedCache::nearest_sq(const Bag& query, const Bag& proto) {
  const std::string key = query.id + '\x1f' + proto.id;
  {
    std::lock_guard lock(mutex_);
    if (auto it = nearest_.find(key); it != nearest_.end()) return it->second;
  }
  auto v = std::make_shared<std::vector<double>>(proto.size(), std::numeric_limits<double>::infinity());
  for (std::size_t m = 0; m < proto.size(); ++m)
    for (const Instance& x : query.instances) (*v)[m] = std::min((*v)[m], squared_distance(x, proto.instances[m]));
  std::lock_guard lock(mutex_);
  return nearest_.emplace(key, std::move(v)).first->second;
}

std::shared_ptr<const FittedEmbedding> EmbedCache::find_embedding(const std::string& key) {
  std::lock_guard lock(mutex_);
  auto it = embeddings_.find(key);
  return it == embeddings_.end() ? nullptr : it->second;
}

std::shared_ptr<const FittedEmbedding> EmbedCache::store_embedding(const std::string& key,
                                                                   std::shared_ptr<const FittedEmbedding> e) {
  std::lock_guard lock(mutex_);
  return embeddings_.emplace(key, std::move(e)).first->second;
}

/// Embedding artifacts fitted on one training set. With a cache, embedded
/// bags are memoized by id.
class FittedEmbedding {
 public:
  FittedEmbedding(EmbeddingKind kind, EmbedCache* cache) : kind_(kind), cache_(cache) {}

  EmbeddingKind kind_;
  EmbedCache* cache_;
  Codebook codebook_;
  std::vector<Bag> prototypes_;
  std::vector<Instance> proto_instances_;
  double sigma_ = 1.0;

  Instance embed(const Bag& bag) const {
    if (!cache_) return compute(bag);
    {
      std::lock_guard lock(mutex_);
      if (auto it = memo_.find(bag.id); it != memo_.end()) return it->second;
    }
    Instance v = compute(bag);
    std::lock_guard lock(mutex_);
    return memo_.emplace(bag.id, std::move(v)).first->second;
  }

 private:
  Instance compute(const Bag& bag) const {
    switch (kind_) {
      case EmbeddingKind::MeanInst: return embed_mean_inst(bag);
      case EmbeddingKind::Extremes: return embed_extremes(bag);
      case EmbeddingKind::Bow: return embed_bow(bag, codebook_);
      case EmbeddingKind::Miles: {
        if (!cache_) return embed_miles(bag, proto_instances_, sigma_);
        check_nonempty(bag);
        Instance out;
        out.reserve(proto_instances_.size());
        const double inv = 1.0 / (sigma_ * sigma_);
        for (const Bag& p : prototypes_) {
          for (double d2 : *cache_->nearest_sq(bag, p)) out.push_back(std::exp(-d2 * inv));
        }
        return out;
      }
      case EmbeddingKind::DissimMeanMin:
      case EmbeddingKind::DissimEmd: {
        const BagMeasure m = measure_of(kind_);
        Instance out(prototypes_.size());
        for (std::size_t r = 0; r < prototypes_.size(); ++r) {
          out[r] = cache_ ? cache_->distance(bag, prototypes_[r], m) : oriented_distance(bag, prototypes_[r], m);
        }
        return out;
      }
    }
    throw Error("unknown embedding kind");
  }

  mutable std::mutex mutex_;
  mutable std::map<std::string, Instance> memo_;
};

namespace {

std::shared_ptr<const FittedEmbedding> fit_embedding(const MILDataset& ds, EmbeddingKind kind, const HyperPoint& hyper,
                                                     std::uint64_t seed, EmbedCache* cache) {
  std::string key;
  if (cache) {
    std::ostringstream os;
    os << to_string(kind) << '|' << seed;
    if (kind == EmbeddingKind::Bow) os << "|w=" << hyper.get("words");
    if (kind == EmbeddingKind::Miles && hyper.has("sigma")) os << "|s=" << format_double(hyper.get("sigma"));
    for (const Bag& b : ds.bags()) os << '\x1f' << b.id;
    key = os.str();
    if (auto hit = cache->find_embedding(key)) return hit;
  }

  auto e = std::make_shared<FittedEmbedding>(kind, cache);
  std::vector<Instance> all;
  if (kind == EmbeddingKind::Bow || kind == EmbeddingKind::Miles) {
    all.reserve(ds.total_instances());
    for (const Bag& b : ds.bags()) all.insert(all.end(), b.instances.begin(), b.instances.end());
  }
  if (kind == EmbeddingKind::Bow) {
    const double words = hyper.get("words");
    if (!(words >= 1.0)) throw Error("bow needs words >= 1");
    e->codebook_ = build_codebook(all, static_cast<std::size_t>(words), seed);
  } else if (kind == EmbeddingKind::Miles) {
    e->sigma_ = hyper.has("sigma") ? hyper.get("sigma") : median_pairwise_distance(all);
    if (!(e->sigma_ > 0.0)) throw Error("MILES sigma must be positive (training instances may all coincide)");
    e->prototypes_ = ds.bags();
    e->proto_instances_ = std::move(all);
  } else if (is_dissimilarity(kind)) {
    e->prototypes_ = ds.bags();
  }
  if (cache) return cache->store_embedding(key, std::move(e));
  return e;
}

class EmbedSvmModel final : public TrainedModel {
 public:
  EmbedSvmModel(std::shared_ptr<const FittedEmbedding> e, Standardizer st, SvmModel svm)
      : embedding_(std::move(e)), standardizer_(std::move(st)), svm_(std::move(svm)) {}

  ScoreRatio score(const Bag& bag) const override {
    return ScoreRatio::from_log_odds(predict_decision(svm_, standardizer_.transform(embedding_->embed(bag))));
  }

  std::string describe() const override {
    std::ostringstream os;
    os << to_string(embedding_->kind_) << "+svm(p=" << svm_.kernel.degree << ", C=" << svm_.C
       << ", sv=" << svm_.support_vectors.size() << ")";
    return os.str();
  }

 private:
  std::shared_ptr<const FittedEmbedding> embedding_;
  Standardizer standardizer_;
  SvmModel svm_;
};

class EmbedKnnModel final : public TrainedModel {
 public:
  EmbedKnnModel(std::shared_ptr<const FittedEmbedding> e, Standardizer st, KnnModel knn)
      : embedding_(std::move(e)), standardizer_(std::move(st)), knn_(std::move(knn)) {}

  ScoreRatio score(const Bag& bag) const override {
    return ScoreRatio::from_probability(predict_posterior(knn_, standardizer_.transform(embedding_->embed(bag))));
  }

  std::string describe() const override {
    return to_string(embedding_->kind_) + "+knn(k=" + std::to_string(knn_.k) + ")";
  }

 private:
  std::shared_ptr<const FittedEmbedding> embedding_;
  Standardizer standardizer_;
  KnnModel knn_;
};

/// k nearest training bags by dissimilarity; ties go to the lowest index.
class DissimKnnModel final : public TrainedModel {
 public:
  DissimKnnModel(std::shared_ptr<const FittedEmbedding> e, std::vector<Label> labels, std::size_t k)
      : embedding_(std::move(e)), labels_(std::move(labels)), k_(k) {}

  ScoreRatio score(const Bag& bag) const override {
    const Instance d = embedding_->embed(bag);
    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_), order.end(),
                      [&](std::size_t a, std::size_t b) { return d[a] < d[b] || (d[a] == d[b] && a < b); });
    std::size_t pos = 0;
    for (std::size_t r = 0; r < k_; ++r) pos += is_positive(labels_[order[r]]) ? 1 : 0;
    return ScoreRatio::from_probability(static_cast<double>(pos) / static_cast<double>(k_));
  }

  std::string describe() const override {
    return to_string(embedding_->kind_) + "+knn(k=" + std::to_string(k_) + ")";
  }

 private:
  std::shared_ptr<const FittedEmbedding> embedding_;
  std::vector<Label> labels_;
  std::size_t k_;
};

}  // namespace

ModelPtr train_embed_classifier(const MILDataset& ds, EmbeddingKind kind, EmbedHead head, const HyperPoint& hyper,
                                std::uint64_t seed, EmbedCache* cache) {
  if (ds.empty()) throw Error("embedding classifier needs training bags");
  if (!ds.all_labeled()) throw Error("embedding classifier needs labeled bags");
  auto embedding = fit_embedding(ds, kind, hyper, seed, cache);

  std::vector<Label> labels;
  for (const Bag& b : ds.bags()) labels.push_back(*b.label);

  if (head == EmbedHead::Knn) {
    const double kv = hyper.get("k");
    if (!(kv >= 1.0) || kv > static_cast<double>(ds.size())) {
      throw Error("k-NN needs 1 <= k <= " + std::to_string(ds.size()));
    }
    const auto k = static_cast<std::size_t>(kv);
    if (is_dissimilarity(kind)) return std::make_shared<DissimKnnModel>(std::move(embedding), std::move(labels), k);
  }

  std::vector<Instance> x;
  x.reserve(ds.size());
  for (const Bag& b : ds.bags()) x.push_back(embedding->embed(b));
  Standardizer st = Standardizer::fit(x);
  LabeledVectors data{st.transform_all(x), labels};

  if (head == EmbedHead::Knn) {
    KnnModel knn = fit_knn(std::move(data), static_cast<std::size_t>(hyper.get("k")));
    return std::make_shared<EmbedKnnModel>(std::move(embedding), std::move(st), std::move(knn));
  }
  const double degree = hyper.get("p");
  if (!(degree >= 1.0)) throw Error("polynomial degree p must be >= 1");
  const PolyKernel kernel{static_cast<int>(degree), 1.0 / static_cast<double>(std::max<std::size_t>(1, data.dim())),
                          1.0};
  SvmModel svm = train_svm(data, kernel, hyper.get("C"));
  return std::make_shared<EmbedSvmModel>(std::move(embedding), std::move(st), std::move(svm));
}

}  // namespace milkit
