#ifndef MILKIT_FUSION_HPP
#define MILKIT_FUSION_HPP

#include <span>
#include <string>

#include "milkit/base_learners.hpp"
#include "milkit/model.hpp"

namespace milkit {

enum class FusionKind { NoisyOr, Average };

/// Combination rule for instance posteriors. Posteriors are clamped into
/// [epsilon, 1 - epsilon] before fusing.
struct FusionRule {
  FusionKind kind = FusionKind::Average;
  double epsilon = 1e-12;

  FusionRule() = default;
  explicit FusionRule(FusionKind k, double eps = 1e-12);
};

std::string to_string(FusionKind kind);

/// Bag odds under the "at least one positive instance" rule:
/// (1 - prod(1 - p_k)) / prod(1 - p_k).
ScoreRatio fuse_noisy_or(std::span<const double> posteriors, double epsilon = 1e-12);

/// Bag odds as the mean of instance odds p_k / (1 - p_k).
ScoreRatio fuse_average(std::span<const double> posteriors, double epsilon = 1e-12);

ScoreRatio fuse(const FusionRule& rule, std::span<const double> posteriors);

/// Every instance inherits its bag's label.
LabeledVectors propagate_labels(const MILDataset& ds);

enum class SimpleBase { Logistic, Knn };

/// Instance classifier trained on propagated labels, bag score by fusion.
/// Reads "C" (logistic) or "k" (k-NN) from the grid point.
ModelPtr train_simplemil(const MILDataset& ds, SimpleBase base, FusionRule rule,
                         const HyperPoint& hyper);

}  // namespace milkit

#endif  // MILKIT_FUSION_HPP
