#ifndef MILKIT_EVALUATION_HPP
#define MILKIT_EVALUATION_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "milkit/model.hpp"

namespace milkit {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocResult {
  double auc = 0.5;
  /// Monotone staircase from (0,0) to (1,1); one point per distinct score.
  std::vector<RocPoint> points;
  std::vector<double> scores;
  std::vector<Label> labels;
};

/// Mann-Whitney AUC (ties count one half) and the ROC staircase.
/// Scores are compared by value, so any monotone transform of the odds
/// (e.g. log-odds) yields the same result.
RocResult compute_auc(std::span<const double> scores, std::span<const Label> labels);
RocResult compute_auc(std::span<const ScoreRatio> scores, std::span<const Label> labels);

void write_roc_csv(const std::filesystem::path& path, const RocResult& roc);

enum class SignificanceTest { DelongPaired, TDependent };

struct SignificanceResult {
  double statistic = 0.0;
  double p_value = 1.0;
  SignificanceTest test = SignificanceTest::DelongPaired;
  double alpha = 0.05;
  /// Zero variance and zero difference: no evidence either way, p = 1.
  bool degenerate = false;

  bool significant() const { return p_value < alpha; }
};

std::string to_string(SignificanceTest test);

/// Paired DeLong test for two correlated AUCs on the same labelled cases;
/// two-sided p from the standard normal.
SignificanceResult delong_test(std::span<const double> scores_a, std::span<const double> scores_b,
                               std::span<const Label> labels, double alpha = 0.05);

/// Paired t-test on per-repeat AUCs with n-1 degrees of freedom.
SignificanceResult dependent_ttest(std::span<const double> aucs_a, std::span<const double> aucs_b,
                                   double alpha = 0.05);

// ---------------------------------------------------------------------------
// Model-selection protocol

using TrainFn = std::function<ModelPtr(const MILDataset& train, const HyperPoint& point, std::uint64_t seed)>;

struct ClassifierSpec {
  std::string name;
  std::vector<HyperPoint> grid;
  TrainFn train;
};

struct ProtocolOptions {
  std::size_t subsample_repeats = 10;
  double subsample_fraction = 0.5;
  std::size_t workers = 1;
  /// Called with every dataset a model is trained on.
  std::function<void(const MILDataset&)> on_train;
};

struct ProtocolReport {
  std::string classifier;
  HyperPoint best;
  double auc_val = 0.0;
  double auc_test = 0.0;
  /// Scores of the selected model, kept for paired tests and ROC export.
  std::vector<double> val_scores;
  std::vector<double> test_scores;
  std::vector<Label> val_labels;
  std::vector<Label> test_labels;
  std::vector<double> grid_val_aucs;
  std::vector<HyperPoint> subsample_best;
  std::vector<double> subsample_aucs;
  double subsample_mean = 0.0;
  double subsample_std = 0.0;
};

/// Grid search on `train` selected by validation AUC (first grid point wins
/// ties), test AUC for the selection, then repeated 50% bag subsampling of
/// `train` with per-repeat reselection on validation.
ProtocolReport run_protocol(const MILDataset& train, const MILDataset& val, const MILDataset& test,
                            const ClassifierSpec& spec, std::uint64_t seed,
                            const ProtocolOptions& options = {});

/// Fixed key order; scores are omitted.
nlohmann::ordered_json to_json(const ProtocolReport& report);

/// Sample standard deviation (n - 1).
double sample_std(std::span<const double> v);

}  // namespace milkit

#endif  // MILKIT_EVALUATION_HPP
