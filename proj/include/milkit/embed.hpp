#ifndef MILKIT_EMBED_HPP
#define MILKIT_EMBED_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "milkit/bag_metrics.hpp"
#include "milkit/model.hpp"

namespace milkit {

/// Per-feature mean of the instances.
Instance embed_mean_inst(const Bag& bag);
/// Per-feature minima followed by per-feature maxima (length 2d).
Instance embed_extremes(const Bag& bag);

struct Codebook {
  std::vector<Instance> centers;
  /// Inertia after every assignment step; nonincreasing.
  std::vector<double> inertia_trace;

  std::size_t size() const { return centers.size(); }
  std::size_t dim() const { return centers.empty() ? 0 : centers.front().size(); }
};

/// k-means with k-means++ seeding. Stops when assignments repeat or after
/// `max_iterations` Lloyd steps. Empty clusters keep their previous center.
Codebook build_codebook(std::span<const Instance> instances, std::size_t words, std::uint64_t seed,
                        int max_iterations = 100);

/// Index of the nearest center; ties go to the lowest index.
std::size_t nearest_center(const Codebook& cb, std::span<const double> x);

/// Fraction of the bag's instances assigned to each word.
Instance embed_bow(const Bag& bag, const Codebook& cb);

/// Component m: max_k exp(-||x_k - p_m||^2 / sigma^2).
Instance embed_miles(const Bag& bag, std::span<const Instance> prototypes, double sigma);

/// Median Euclidean distance over instance pairs. Sets larger than
/// `max_points` are thinned to every ceil(n / max_points)-th instance.
double median_pairwise_distance(std::span<const Instance> instances, std::size_t max_points = 2000);

/// Dissimilarities d(bag, R_m) to each prototype bag.
Instance embed_dissimilarity(const Bag& bag, std::span<const Bag> prototypes, BagMeasure measure);

// ---------------------------------------------------------------------------
// Embedding classifiers

enum class EmbeddingKind { MeanInst, Extremes, Bow, Miles, DissimMeanMin, DissimEmd };
enum class EmbedHead { Svm, Knn };

std::string to_string(EmbeddingKind kind);
EmbeddingKind embedding_kind_from_string(const std::string& s);
std::string to_string(EmbedHead head);

class FittedEmbedding;

/// Memo shared by trainings over one collection of bags: bag-pair distances,
/// nearest-instance distances, and fitted embeddings keyed by training set.
/// Keys are bag ids, so within one cache an id must always name the same bag.
/// Thread-safe.
class EmbedCache {
 public:
  double distance(const Bag& a, const Bag& b, BagMeasure measure);
  /// For every instance p of `proto`: min_k ||x_k - p||^2 over the query.
  std::shared_ptr<const std::vector<double>> nearest_sq(const Bag& query, const Bag& proto);

  std::shared_ptr<const FittedEmbedding> find_embedding(const std::string& key);
  std::shared_ptr<const FittedEmbedding> store_embedding(const std::string& key,
                                                         std::shared_ptr<const FittedEmbedding> e);

 private:
  std::mutex mutex_;
  std::map<std::string, double> distances_;
  std::map<std::string, std::shared_ptr<const std::vector<double>>> nearest_;
  std::map<std::string, std::shared_ptr<const FittedEmbedding>> embeddings_;
};

/// Fits the embedding artifacts (codebook, prototypes, sigma) on `ds`, then
/// the head on the embedded training bags.
///
/// Grid keys: "words" (bow), optional "sigma" (miles; default is the median
/// pairwise training-instance distance), "p" (degree) and "C" (svm head), "k"
/// (knn head). SVM heads see standardized features and a polynomial kernel
/// scaled by 1/dim; the score is the decision value as log-odds. The knn
/// head on dissimilarity embeddings picks the k training bags of smallest
/// dissimilarity; on other embeddings it is Euclidean k-NN on standardized
/// features. Its score is the positive fraction of the neighbours.
ModelPtr train_embed_classifier(const MILDataset& ds, EmbeddingKind kind, EmbedHead head, const HyperPoint& hyper,
                                std::uint64_t seed, EmbedCache* cache = nullptr);

}  // namespace milkit

#endif  // MILKIT_EMBED_HPP
