#ifndef MILKIT_CONCEPT_HPP
#define MILKIT_CONCEPT_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "milkit/base_learners.hpp"
#include "milkit/fusion.hpp"
#include "milkit/model.hpp"

namespace milkit {

/// Concept location t with per-feature scales s (s > 0).
struct ConceptPoint {
  std::vector<double> t;
  std::vector<double> s;

  /// sum_j s_j^2 (x_j - t_j)^2
  double distance(std::span<const double> x) const;
};

/// log DD(t): positive bags contribute log(1 - prod_k (1 - exp(-d_ik))),
/// negative bags sum_k log(1 - exp(-d_ik)). May be -inf.
double log_diverse_density(const ConceptPoint& point, const MILDataset& ds);

/// exp(log_diverse_density), in [0, 1].
double diverse_density(const ConceptPoint& point, const MILDataset& ds);

// ---------------------------------------------------------------------------
// EM-DD

struct EmddOptions {
  /// Fraction of positive-bag instances used as starting points.
  double init_fraction = 0.1;
  int max_em_iterations = 50;
  int max_mstep_iterations = 200;
  /// M-step stops once an accepted step improves the objective by less.
  double tolerance = 1e-8;
  /// Wall-clock budget in seconds; 0 disables it. Starts not yet begun when
  /// the budget runs out are skipped, which makes results timing dependent.
  double time_budget_seconds = 0.0;
  std::size_t workers = 1;
};

struct EmddStart {
  std::size_t bag = 0;
  std::size_t instance = 0;
  /// Full log DD after each EM iteration; nondecreasing.
  std::vector<double> log_dd_trace;
  ConceptPoint point;
};

class EmddModel : public TrainedModel {
 public:
  EmddModel(ConceptPoint point, double log_dd, std::vector<EmddStart> starts);

  /// Odds of max_k exp(-d(x_k)).
  ScoreRatio score(const Bag& bag) const override;
  std::string describe() const override;

  const ConceptPoint& concept_point() const { return point_; }
  double log_dd() const { return log_dd_; }
  const std::vector<EmddStart>& starts() const { return starts_; }

 private:
  ConceptPoint point_;
  double log_dd_;
  std::vector<EmddStart> starts_;
};

EmddModel train_emdd(const MILDataset& ds, std::uint64_t seed, const EmddOptions& options = {});

// ---------------------------------------------------------------------------
// miSVM

struct MiSvmOptions {
  int max_iterations = 50;
  SvmOptions svm;
};

class MiSvmModel : public TrainedModel {
 public:
  MiSvmModel(Standardizer standardizer, SvmModel svm, FusionRule rule, std::vector<std::vector<Label>> imputed,
             int iterations, bool converged);

  ScoreRatio score(const Bag& bag) const override;
  std::string describe() const override;

  double instance_decision(std::span<const double> x) const;
  /// Final imputed instance labels, aligned with the training bags.
  const std::vector<std::vector<Label>>& imputed_labels() const { return imputed_; }
  int iterations() const { return iterations_; }
  bool converged() const { return converged_; }
  const SvmModel& svm() const { return svm_; }

 private:
  Standardizer standardizer_;
  SvmModel svm_;
  FusionRule rule_;
  std::vector<std::vector<Label>> imputed_;
  int iterations_;
  bool converged_;
};

/// Features are standardized on the training instances.
MiSvmModel train_misvm(const MILDataset& ds, PolyKernel kernel, double C, FusionRule rule,
                       const MiSvmOptions& options = {});

// ---------------------------------------------------------------------------
// MILBoost

/// h(x) = polarity if x[feature] > threshold, else -polarity.
struct Stump {
  std::size_t feature = 0;
  double threshold = 0.0;
  int polarity = 1;

  double operator()(std::span<const double> x) const { return x[feature] > threshold ? polarity : -polarity; }
};

struct MilBoostOptions {
  int rounds = 100;
  std::size_t thresholds_per_feature = 32;
};

class MilBoostModel : public TrainedModel {
 public:
  MilBoostModel(std::vector<Stump> stumps, std::vector<double> alphas);

  /// Noisy-or over sigmoid(F(x_k)).
  ScoreRatio score(const Bag& bag) const override;
  std::string describe() const override;

  double instance_score(std::span<const double> x) const;
  const std::vector<Stump>& stumps() const { return stumps_; }
  const std::vector<double>& alphas() const { return alphas_; }

  /// Training log-likelihood before round 1 and after every accepted round.
  std::vector<double> likelihood_trace;
  /// Instance weights dL/dF used to pick each round's stump.
  std::vector<std::vector<std::vector<double>>> weight_trace;

 private:
  std::vector<Stump> stumps_;
  std::vector<double> alphas_;
};

/// Bag log-likelihood of instance scores F under the noisy-or model.
double milboost_log_likelihood(const MILDataset& ds, const std::vector<std::vector<double>>& F);

MilBoostModel train_milboost(const MILDataset& ds, const MilBoostOptions& options = {});

}  // namespace milkit

#endif  // MILKIT_CONCEPT_HPP
