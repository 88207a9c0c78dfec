#ifndef MILKIT_REGISTRY_HPP
#define MILKIT_REGISTRY_HPP

#include <optional>
#include <string>
#include <vector>

#include "milkit/embed.hpp"
#include "milkit/evaluation.hpp"
#include "milkit/fusion.hpp"

namespace milkit {

struct ClassifierEntry {
  std::string name;
  /// Default hyperparameter grid.
  std::vector<GridAxis> grid;
  /// Runs once per fusion rule (noisy-or and average by default).
  bool uses_fusion = false;
  /// Left out of the default suite; must be requested explicitly.
  bool opt_in = false;
};

const std::vector<ClassifierEntry>& classifier_catalog();
/// Throws Error for unknown names.
const ClassifierEntry& find_classifier(const std::string& name);

/// e.g. "citation-knn kR in {1,5,10} kC in {1,5,10}".
std::string describe(const ClassifierEntry& entry);
std::vector<std::string> list_classifiers();

struct TrainerContext {
  EmbedCache* cache = nullptr;
  /// EM-DD wall-clock budget per training; 0 disables it.
  double time_budget_seconds = 0.0;
};

/// Training function for run_protocol. `fusion` is required exactly when the
/// classifier uses a fusion rule.
TrainFn make_trainer(const std::string& name, std::optional<FusionKind> fusion, const TrainerContext& context);

/// Shortest decimal that round-trips, e.g. 0.01 or 10.
std::string format_short(double v);

}  // namespace milkit

#endif  // MILKIT_REGISTRY_HPP
