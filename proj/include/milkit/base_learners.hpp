#ifndef MILKIT_BASE_LEARNERS_HPP
#define MILKIT_BASE_LEARNERS_HPP

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "milkit/core.hpp"

namespace milkit {

/// Vectors with binary labels; the training input of every base learner.
struct LabeledVectors {
  std::vector<Instance> x;
  std::vector<Label> y;

  std::size_t size() const { return x.size(); }
  std::size_t dim() const { return x.empty() ? 0 : x.front().size(); }
  void push_back(Instance v, Label l) {
    x.push_back(std::move(v));
    y.push_back(l);
  }
};

/// Per-feature affine map to zero mean and unit variance.
///
/// Statistics come from the training data only; constant features keep a
/// unit scale so they map to zero.
class Standardizer {
 public:
  Standardizer() = default;
  static Standardizer fit(std::span<const Instance> data);
  static Standardizer identity(std::size_t dim);

  Instance transform(std::span<const double> x) const;
  std::vector<Instance> transform_all(std::span<const Instance> data) const;
  std::size_t dim() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  const std::vector<double>& scale() const { return scale_; }

 private:
  std::vector<double> mean_;
  std::vector<double> scale_;
};

// ---------------------------------------------------------------------------
// Logistic regression

struct LogisticOptions {
  double gradient_tolerance = 1e-6;
  int max_iterations = 2000;
  int history = 10;
};

struct LogisticModel {
  std::vector<double> weights;
  double bias = 0.0;
  double C = 1.0;
  /// Objective value after each accepted optimizer step (first entry is the
  /// starting point).
  std::vector<double> loss_trace;
  double gradient_norm = 0.0;
  bool converged = false;
};

/// Sum of logistic losses plus ||w||^2 / (2C); the bias is not penalized.
/// Fills `grad` (size dim + 1, bias last) when non-null.
double logistic_objective(const LabeledVectors& data, double C, std::span<const double> weights,
                          double bias, std::vector<double>* grad = nullptr);

LogisticModel train_logistic(const LabeledVectors& data, double C,
                             const LogisticOptions& options = {});

// ---------------------------------------------------------------------------
// k nearest neighbours

struct KnnModel {
  std::size_t k = 1;
  std::vector<Instance> reference;
  std::vector<Label> labels;
};

KnnModel fit_knn(LabeledVectors data, std::size_t k);

// ---------------------------------------------------------------------------
// Polynomial-kernel SVM

struct PolyKernel {
  int degree = 1;
  double scale = 1.0;
  double offset = 1.0;

  double operator()(std::span<const double> a, std::span<const double> b) const;
};

/// Kernel rows over a fixed training set, computed on demand and cached.
///
/// The whole matrix is materialized when it fits the memory budget; larger
/// sets keep a bounded number of rows.
class KernelRows {
 public:
  KernelRows(std::span<const Instance> data, PolyKernel kernel,
             std::size_t budget_bytes = std::size_t{256} << 20);

  std::size_t size() const { return data_.size(); }
  double diag(std::size_t i) const { return diag_[i]; }
  std::span<const double> row(std::size_t i) const;
  const PolyKernel& kernel() const { return kernel_; }

 private:
  std::span<const Instance> data_;
  PolyKernel kernel_;
  std::vector<double> diag_;
  std::size_t max_rows_;
  mutable std::vector<std::vector<double>> rows_;
  mutable std::vector<std::size_t> resident_;
  mutable std::size_t next_evict_ = 0;
};

struct SvmOptions {
  double tolerance = 1e-3;
  long max_iterations = 1'000'000;
};

struct SvmModel {
  PolyKernel kernel;
  double C = 1.0;
  std::vector<Instance> support_vectors;
  std::vector<double> alpha;        ///< one per support vector, in (0, C]
  std::vector<Label> sv_labels;
  double bias = 0.0;
  long iterations = 0;
  bool converged = false;
};

/// Dual solution over the full training set, before support-vector pruning.
struct SvmDual {
  std::vector<double> alpha;
  double bias = 0.0;
  long iterations = 0;
  bool converged = false;
};

/// SMO on a precomputed kernel; `labels` align with the kernel rows.
SvmDual solve_svm_dual(const KernelRows& kernel, std::span<const Label> labels, double C,
                       const SvmOptions& options = {});

SvmModel train_svm(const LabeledVectors& data, PolyKernel kernel, double C,
                   const SvmOptions& options = {});

/// Packs the nonzero multipliers of a dual solution into a model.
SvmModel make_svm_model(std::span<const Instance> data, std::span<const Label> labels,
                        const SvmDual& dual, PolyKernel kernel, double C);

/// Dual objective sum(alpha) - 0.5 sum_ij alpha_i alpha_j y_i y_j K_ij.
double svm_dual_objective(const KernelRows& kernel, std::span<const Label> labels,
                          std::span<const double> alpha);

double predict_decision(const SvmModel& model, std::span<const double> x);

// ---------------------------------------------------------------------------
// Posteriors p(z=1|x)

double predict_posterior(const LogisticModel& model, std::span<const double> x);
double predict_posterior(const KnnModel& model, std::span<const double> x);
/// Fixed logistic link 1 / (1 + exp(-f(x))) on the decision value.
double predict_posterior(const SvmModel& model, std::span<const double> x);

double sigmoid(double v);

}  // namespace milkit

#endif  // MILKIT_BASE_LEARNERS_HPP
