#ifndef MILKIT_EXPERIMENT_HPP
#define MILKIT_EXPERIMENT_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "milkit/evaluation.hpp"
#include "milkit/fusion.hpp"
#include "milkit/synth.hpp"

namespace milkit {

/// Invalid experiment configuration. The message names the offending field
/// or the line of a JSON syntax error.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct ClassifierRequest {
  std::string name;
  /// Row name in place of `name`, so one classifier can appear twice.
  std::string label;
  /// Only for classifiers with a fusion rule; one table row per rule.
  std::vector<FusionKind> fusions;
  /// Registry grid with the configured axes replaced.
  std::vector<GridAxis> grid;
  double time_budget_seconds = 0.0;
};

struct ExperimentConfig {
  std::optional<GeneratorSpec> generate;
  /// False when the generator spec has no seed of its own; it then uses `seed`.
  bool generator_seeded = false;
  /// Split name ("train", "train_sub", "validation", "test") to file.
  std::map<std::string, std::filesystem::path> files;
  std::vector<ClassifierRequest> classifiers;
  std::vector<std::pair<std::string, std::string>> compare;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "milkit-results";
  std::size_t workers = 1;
  std::size_t subsample_repeats = 10;
  double subsample_fraction = 0.5;
  double alpha = 0.05;
};

/// Relative paths are resolved against `base_dir`.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

struct ResultRow {
  std::string name;
  std::optional<ProtocolReport> report;
  std::string error;
  /// Best in the column or not significantly worse than the best.
  bool best_val = false;
  bool best_test = false;
  bool best_subsample = false;
};

struct ResultBlock {
  /// "train" or "train_sub".
  std::string training_set;
  std::size_t training_bags = 0;
  std::vector<ResultRow> rows;
};

struct PairComparison {
  std::string training_set;
  std::string a;
  std::string b;
  std::optional<SignificanceResult> val;
  std::optional<SignificanceResult> test;
  std::optional<SignificanceResult> subsample;
};

struct ExperimentResult {
  std::vector<ResultBlock> blocks;
  std::vector<PairComparison> comparisons;
  bool any_failed() const;
};

/// Row names in table order: label (or classifier name), plus "/noisy-or" or
/// "/average" for fused classifiers.
std::vector<std::string> row_names(const ExperimentConfig& config);

/// Loads or generates the data, runs every row through the protocol and
/// marks the table. Data problems raise ConfigError; classifier failures
/// are recorded in their row. Progress goes to `log` when given.
ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

/// AUC x 100 with one decimal; '*' marks best or not significantly worse.
std::string format_table(const ExperimentResult& result, double alpha = 0.05);

/// results.txt, results.json, significance.json, reports/<set>/<row>.json
/// and roc/<set>/<row>_{val,test}.csv under `dir`.
void write_artifacts(const ExperimentResult& result, const ExperimentConfig& config,
                     const std::filesystem::path& dir);

}  // namespace milkit

#endif  // MILKIT_EXPERIMENT_HPP
