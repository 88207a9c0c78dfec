#include <algorithm>
#include <cmath>
#include <limits>

#include "milkit/base_learners.hpp"

namespace milkit {

double PolyKernel::operator()(std::span<const double> a, std::span<const double> b) const {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  const double base = scale * s + offset;
  double out = 1.0;
  for (int p = 0; p < degree; ++p) out *= base;
  return out;
}

KernelRows::KernelRows(std::span<const Instance> data, PolyKernel kernel, std::size_t budget_bytes)
    : data_(data), kernel_(kernel), rows_(data.size()) {
  if (kernel_.degree < 1) throw Error("polynomial kernel degree must be >= 1");
  diag_.resize(data_.size());
  for (std::size_t i = 0; i < data_.size(); ++i) {
    diag_[i] = kernel_(data_[i], data_[i]);
    if (!std::isfinite(diag_[i])) throw Error("kernel matrix has non-finite entries");
  }
  const std::size_t row_bytes = std::max<std::size_t>(1, data_.size() * sizeof(double));
  max_rows_ = std::max<std::size_t>(2, budget_bytes / row_bytes);
}

std::span<const double> KernelRows::row(std::size_t i) const {
  if (rows_[i].empty() && !data_.empty()) {
    if (resident_.size() >= max_rows_) {
      rows_[resident_[next_evict_]].clear();
      rows_[resident_[next_evict_]].shrink_to_fit();
      resident_[next_evict_] = i;
      next_evict_ = (next_evict_ + 1) % resident_.size();
    } else {
      resident_.push_back(i);
    }
    auto& r = rows_[i];
    r.resize(data_.size());
    for (std::size_t k = 0; k < data_.size(); ++k) {
      r[k] = kernel_(data_[i], data_[k]);
      if (!std::isfinite(r[k])) throw Error("kernel matrix has non-finite entries");
    }
  }
  return rows_[i];
}

SvmDual solve_svm_dual(const KernelRows& kernel, std::span<const Label> labels, double C,
                       const SvmOptions& options) {
  const std::size_t n = kernel.size();
  if (labels.size() != n) throw Error("label count does not match kernel size");
  if (!(C > 0.0)) throw Error("SVM regularization C must be positive");
  bool has_pos = false, has_neg = false;
  for (Label l : labels) (is_positive(l) ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) throw Error("SVM training data must contain both classes");

  constexpr double kTau = 1e-12;
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = to_int(labels[i]);

  SvmDual dual;
  std::vector<double>& alpha = dual.alpha;
  alpha.assign(n, 0.0);
  std::vector<double> grad(n, -1.0);  // gradient of 0.5 a'Qa - e'a
  std::vector<double> row_i(n);

  auto in_up = [&](std::size_t t) {
    return (y[t] > 0 && alpha[t] < C) || (y[t] < 0 && alpha[t] > 0);
  };
  auto in_low = [&](std::size_t t) {
    return (y[t] < 0 && alpha[t] < C) || (y[t] > 0 && alpha[t] > 0);
  };

  long iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    // i: maximal KKT violator; j: second-order gain among the opposite set.
    double g_max = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (in_up(t) && -y[t] * grad[t] > g_max) {
        g_max = -y[t] * grad[t];
        i = t;
      }
    }
    double g_min = std::numeric_limits<double>::infinity();
    std::size_t j = n;
    double best_gain = std::numeric_limits<double>::infinity();
    if (i < n) {
      const auto ki = kernel.row(i);
      std::copy(ki.begin(), ki.end(), row_i.begin());
    }
    for (std::size_t t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -y[t] * grad[t];
      g_min = std::min(g_min, v);
      if (i < n && v < g_max) {
        const double b = g_max - v;
        double a = kernel.diag(i) + kernel.diag(t) - 2.0 * row_i[t];
        if (a <= 0.0) a = kTau;
        const double gain = -(b * b) / a;
        if (gain < best_gain) {
          best_gain = gain;
          j = t;
        }
      }
    }
    if (i == n || j == n || g_max - g_min < options.tolerance) {
      dual.converged = true;
      break;
    }

    const auto row_j = kernel.row(j);
    const double old_ai = alpha[i], old_aj = alpha[j];
    // Q_ij = y_i y_j K_ij
    const double q_ij = y[i] * y[j] * row_i[j];
    if (y[i] != y[j]) {
      double quad = kernel.diag(i) + kernel.diag(j) + 2.0 * q_ij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = diff; }
      } else {
        if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = -diff; }
      }
      if (diff > 0) {
        if (alpha[i] > C) { alpha[i] = C; alpha[j] = C - diff; }
      } else {
        if (alpha[j] > C) { alpha[j] = C; alpha[i] = C + diff; }
      }
    } else {
      double quad = kernel.diag(i) + kernel.diag(j) - 2.0 * q_ij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) { alpha[i] = C; alpha[j] = sum - C; }
      } else {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = sum; }
      }
      if (sum > C) {
        if (alpha[j] > C) { alpha[j] = C; alpha[i] = sum - C; }
      } else {
        if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = sum; }
      }
    }

    const double d_ai = alpha[i] - old_ai, d_aj = alpha[j] - old_aj;
    for (std::size_t t = 0; t < n; ++t) {
      grad[t] += y[t] * (y[i] * row_i[t] * d_ai + y[j] * row_j[t] * d_aj);
    }
  }
  dual.iterations = iter;

  // Bias from free multipliers, else the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= C) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      free_sum += yg;
    }
  }
  const double rho = n_free > 0 ? free_sum / static_cast<double>(n_free) : (ub + lb) / 2.0;
  dual.bias = -rho;
  return dual;
}

double svm_dual_objective(const KernelRows& kernel, std::span<const Label> labels,
                          std::span<const double> alpha) {
  double linear = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    linear += alpha[i];
    if (alpha[i] == 0.0) continue;
    const auto row = kernel.row(i);
    for (std::size_t j = 0; j < alpha.size(); ++j) {
      quad += alpha[i] * alpha[j] * to_int(labels[i]) * to_int(labels[j]) * row[j];
    }
  }
  return linear - 0.5 * quad;
}

SvmModel make_svm_model(std::span<const Instance> data, std::span<const Label> labels,
                        const SvmDual& dual, PolyKernel kernel, double C) {
  SvmModel model;
  model.kernel = kernel;
  model.C = C;
  model.bias = dual.bias;
  model.iterations = dual.iterations;
  model.converged = dual.converged;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (dual.alpha[i] > 0.0) {
      model.support_vectors.push_back(data[i]);
      model.alpha.push_back(dual.alpha[i]);
      model.sv_labels.push_back(labels[i]);
    }
  }
  return model;
}

SvmModel train_svm(const LabeledVectors& data, PolyKernel kernel, double C, const SvmOptions& options) {
  if (data.x.size() != data.y.size()) throw Error("feature/label count mismatch");
  const KernelRows rows(data.x, kernel);
  const SvmDual dual = solve_svm_dual(rows, data.y, C, options);
  return make_svm_model(data.x, data.y, dual, kernel, C);
}

double predict_decision(const SvmModel& model, std::span<const double> x) {
  double f = model.bias;
  for (std::size_t i = 0; i < model.support_vectors.size(); ++i) {
    const Instance& sv = model.support_vectors[i];
    if (sv.size() != x.size()) throw Error("dimension mismatch in SVM prediction");
    f += model.alpha[i] * to_int(model.sv_labels[i]) * model.kernel(sv, x);
  }
  return f;
}

double predict_posterior(const SvmModel& model, std::span<const double> x) {
  return sigmoid(predict_decision(model, x));
}

}  // namespace milkit
