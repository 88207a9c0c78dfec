#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "milkit/base_learners.hpp"

namespace milkit {

namespace {

// log(1 + exp(-m)) without overflow.
double softplus_neg(double m) {
  return m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

void check_training_input(const LabeledVectors& data) {
  if (data.x.size() != data.y.size()) throw Error("feature/label count mismatch");
  bool has_pos = false, has_neg = false;
  for (Label l : data.y) (is_positive(l) ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) throw Error("training data must contain both classes");
  const std::size_t d = data.dim();
  for (const Instance& x : data.x) {
    if (x.size() != d) throw Error("inconsistent feature dimension in training data");
    for (double v : x) {
      if (!std::isfinite(v)) throw Error("non-finite feature value in training data");
    }
  }
}

}  // namespace

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double logistic_objective(const LabeledVectors& data, double C, std::span<const double> weights,
                          double bias, std::vector<double>* grad) {
  const std::size_t d = weights.size();
  double loss = 0.5 * dot(weights, weights) / C;
  if (grad) {
    grad->assign(d + 1, 0.0);
    for (std::size_t j = 0; j < d; ++j) (*grad)[j] = weights[j] / C;
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double y = to_int(data.y[i]);
    const double margin = y * (dot(weights, data.x[i]) + bias);
    loss += softplus_neg(margin);
    if (grad) {
      const double g = -y * sigmoid(-margin);
      for (std::size_t j = 0; j < d; ++j) (*grad)[j] += g * data.x[i][j];
      (*grad)[d] += g;
    }
  }
  return loss;
}

LogisticModel train_logistic(const LabeledVectors& data, double C, const LogisticOptions& options) {
  if (!(C > 0.0)) throw Error("logistic regularization C must be positive");
  check_training_input(data);

  const std::size_t d = data.dim();
  const std::size_t n_params = d + 1;
  std::vector<double> theta(n_params, 0.0);
  std::vector<double> grad;

  auto objective = [&](const std::vector<double>& p, std::vector<double>* g) {
    return logistic_objective(data, C, std::span(p.data(), d), p[d], g);
  };

  LogisticModel model;
  model.C = C;
  double f = objective(theta, &grad);
  model.loss_trace.push_back(f);

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  std::vector<double> direction(n_params), candidate(n_params), cand_grad;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const double gnorm = std::sqrt(dot(grad, grad));
    model.gradient_norm = gnorm;
    if (gnorm <= options.gradient_tolerance) {
      model.converged = true;
      break;
    }

    // Two-loop recursion for the L-BFGS direction.
    std::vector<double> q = grad;
    std::vector<double> alphas(s_hist.size());
    for (std::size_t m = s_hist.size(); m-- > 0;) {
      alphas[m] = rho_hist[m] * dot(s_hist[m], q);
      for (std::size_t j = 0; j < n_params; ++j) q[j] -= alphas[m] * y_hist[m][j];
    }
    double gamma = 1.0 / std::max(gnorm, 1.0);
    if (!s_hist.empty()) gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
    for (double& v : q) v *= gamma;
    for (std::size_t m = 0; m < s_hist.size(); ++m) {
      const double beta = rho_hist[m] * dot(y_hist[m], q);
      for (std::size_t j = 0; j < n_params; ++j) q[j] += (alphas[m] - beta) * s_hist[m][j];
    }
    for (std::size_t j = 0; j < n_params; ++j) direction[j] = -q[j];

    double slope = dot(grad, direction);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t j = 0; j < n_params; ++j) direction[j] = -grad[j] / std::max(gnorm, 1.0);
      slope = dot(grad, direction);
    }

    // Armijo backtracking keeps the objective strictly decreasing.
    double step = 1.0;
    double f_new = f;
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      for (std::size_t j = 0; j < n_params; ++j) candidate[j] = theta[j] + step * direction[j];
      f_new = objective(candidate, &cand_grad);
      if (f_new <= f + 1e-4 * step * slope && f_new < f) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    std::vector<double> s(n_params), yv(n_params);
    for (std::size_t j = 0; j < n_params; ++j) {
      s[j] = candidate[j] - theta[j];
      yv[j] = cand_grad[j] - grad[j];
    }
    const double sy = dot(s, yv);
    if (sy > 1e-12 * std::sqrt(dot(s, s) * dot(yv, yv))) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(yv));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > options.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    theta.swap(candidate);
    grad.swap(cand_grad);
    f = f_new;
    model.loss_trace.push_back(f);
  }
  model.gradient_norm = std::sqrt(dot(grad, grad));
  model.converged = model.gradient_norm <= options.gradient_tolerance;
  model.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(d));
  model.bias = theta[d];
  return model;
}

double predict_posterior(const LogisticModel& model, std::span<const double> x) {
  if (x.size() != model.weights.size()) throw Error("dimension mismatch in logistic prediction");
  return sigmoid(dot(model.weights, x) + model.bias);
}

}  // namespace milkit
