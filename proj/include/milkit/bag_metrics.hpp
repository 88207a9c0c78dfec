#ifndef MILKIT_BAG_METRICS_HPP
#define MILKIT_BAG_METRICS_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "milkit/model.hpp"

namespace milkit {

/// meanmin and EMD use squared Euclidean ground distance, Hausdorff plain
/// Euclidean.
enum class BagMeasure { MeanMin, Emd, Hausdorff };

std::string to_string(BagMeasure m);
BagMeasure bag_measure_from_string(const std::string& s);
bool is_symmetric(BagMeasure m);

/// Flows between the instances of two bags, row-major (rows x cols).
struct TransportPlan {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> flows;

  double at(std::size_t k, std::size_t l) const { return flows[k * cols + l]; }
};

struct EmdResult {
  double cost = 0.0;
  TransportPlan plan;
};

/// Exact optimal transport between uniform marginals 1/rows and 1/cols for a
/// dense cost matrix (transportation simplex on integer-scaled masses).
EmdResult solve_transport(const std::vector<std::vector<double>>& cost);

/// (1/n_i) sum_k min_l ||x_ik - x_jl||^2. Not symmetric.
double dist_meanmin(const Bag& a, const Bag& b);
EmdResult dist_emd(const Bag& a, const Bag& b);
double dist_hausdorff(const Bag& a, const Bag& b);

double bag_distance(const Bag& a, const Bag& b, BagMeasure m);

struct DistanceMatrix {
  std::vector<std::string> row_ids;
  std::vector<std::string> col_ids;
  /// Row-major.
  std::vector<double> values;

  std::size_t rows() const { return row_ids.size(); }
  std::size_t cols() const { return col_ids.size(); }
  double at(std::size_t i, std::size_t j) const { return values[i * col_ids.size() + j]; }
};

DistanceMatrix pairwise_matrix(const std::vector<Bag>& a, const std::vector<Bag>& b, BagMeasure m,
                               std::size_t workers = 1);

/// CSV with a header row of column ids and the row id in the first column.
void write_distance_csv(const DistanceMatrix& matrix, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Citation-kNN

class CitationKnnModel : public TrainedModel {
 public:
  CitationKnnModel(std::vector<Bag> train, std::vector<Label> labels, std::vector<std::vector<double>> sorted_neighbors,
                   std::size_t k_ref, std::size_t k_cite);

  /// Fraction of positive labels among the references and citers of the bag.
  ScoreRatio score(const Bag& bag) const override;
  std::string describe() const override;

  /// Positive fraction itself, in [0, 1].
  double positive_fraction(const Bag& bag) const;

 private:
  std::vector<Bag> train_;
  std::vector<Label> labels_;
  // For each training bag, its Hausdorff distances to the other training
  // bags in ascending order.
  std::vector<std::vector<double>> sorted_neighbors_;
  std::size_t k_ref_;
  std::size_t k_cite_;
};

/// Hausdorff distance throughout. Ties among references go to the lowest
/// training index; a training bag cites the query when fewer than k_cite of
/// its other training bags are at distance <= its distance to the query.
CitationKnnModel train_citation_knn(const MILDataset& ds, std::size_t k_ref, std::size_t k_cite,
                                    std::size_t workers = 1);

}  // namespace milkit

#endif  // MILKIT_BAG_METRICS_HPP
