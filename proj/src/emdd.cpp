#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "log_math.hpp"
#include "milkit/concept.hpp"
#include "milkit/parallel.hpp"

namespace milkit {

using detail::log1mexp;

double ConceptPoint::distance(std::span<const double> x) const {
  double d = 0.0;
  for (std::size_t j = 0; j < t.size(); ++j) {
    const double r = s[j] * (x[j] - t[j]);
    d += r * r;
  }
  return d;
}

namespace {

void check_point(const ConceptPoint& point, std::size_t dim) {
  if (point.t.size() != dim || point.s.size() != dim) throw Error("concept point dimension does not match the data");
}

double log_positive_factor(const ConceptPoint& point, const Bag& bag) {
  double log_q = 0.0;  // log prod_k (1 - p_k)
  for (const Instance& x : bag.instances) log_q += log1mexp(point.distance(x));
  return log1mexp(-log_q);
}

double log_negative_factor(const ConceptPoint& point, const Bag& bag) {
  double s = 0.0;
  for (const Instance& x : bag.instances) s += log1mexp(point.distance(x));
  return s;
}

}  // namespace

double log_diverse_density(const ConceptPoint& point, const MILDataset& ds) {
  check_point(point, ds.dim());
  double total = 0.0;
  for (const Bag& bag : ds.bags()) {
    if (!bag.label) throw Error("diverse density needs labeled bags");
    total += is_positive(*bag.label) ? log_positive_factor(point, bag) : log_negative_factor(point, bag);
  }
  return total;
}

double diverse_density(const ConceptPoint& point, const MILDataset& ds) {
  return std::exp(log_diverse_density(point, ds));
}

namespace {

/// Parameters (t, v) with s = exp(v); the M-step optimizes over these.
struct Params {
  std::vector<double> t;
  std::vector<double> v;

  ConceptPoint point() const {
    ConceptPoint p{t, std::vector<double>(v.size())};
    for (std::size_t j = 0; j < v.size(); ++j) p.s[j] = std::exp(v[j]);
    return p;
  }
};

struct Selected {
  const Instance* x;
  bool positive;
};

/// DD with each positive bag reduced to its E-step instance.
double mstep_objective(const Params& p, const std::vector<Selected>& sel, std::vector<double>* grad) {
  const std::size_t d = p.t.size();
  std::vector<double> w(d);
  for (std::size_t j = 0; j < d; ++j) w[j] = std::exp(2.0 * p.v[j]);
  if (grad) grad->assign(2 * d, 0.0);
  double f = 0.0;
  for (const Selected& s : sel) {
    double dist = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double r = (*s.x)[j] - p.t[j];
      dist += w[j] * r * r;
    }
    // d(objective)/d(dist): -1 for positives, 1/expm1(dist) for negatives.
    double g;
    if (s.positive) {
      f -= dist;
      g = -1.0;
    } else {
      f += log1mexp(dist);
      g = 1.0 / std::expm1(dist);
    }
    if (grad) {
      for (std::size_t j = 0; j < d; ++j) {
        const double r = (*s.x)[j] - p.t[j];
        (*grad)[j] += g * (-2.0 * w[j] * r);
        (*grad)[d + j] += g * (2.0 * w[j] * r * r);
      }
    }
  }
  return f;
}

Params mstep(Params p, const std::vector<Selected>& sel, const EmddOptions& opt) {
  const std::size_t d = p.t.size();
  std::vector<double> grad;
  double f = mstep_objective(p, sel, &grad);
  double step = 1.0;
  for (int it = 0; it < opt.max_mstep_iterations; ++it) {
    double g2 = 0.0;
    for (double g : grad) g2 += g * g;
    if (!(g2 > 0.0) || !std::isfinite(g2)) break;
    bool accepted = false;
    Params q = p;
    double fq = f;
    for (int halving = 0; halving < 60; ++halving) {
      for (std::size_t j = 0; j < d; ++j) {
        q.t[j] = p.t[j] + step * grad[j];
        q.v[j] = p.v[j] + step * grad[d + j];
      }
      fq = mstep_objective(q, sel, nullptr);
      if (std::isfinite(fq) && fq >= f + 1e-4 * step * g2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    const double gain = fq - f;
    p = std::move(q);
    f = mstep_objective(p, sel, &grad);
    step *= 2.0;
    if (gain < opt.tolerance) break;
  }
  return p;
}

std::vector<std::size_t> e_step(const ConceptPoint& point, const MILDataset& ds) {
  std::vector<std::size_t> pick(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < ds[i].instances.size(); ++k) {
      const double dist = point.distance(ds[i].instances[k]);
      if (dist < best) {
        best = dist;
        pick[i] = k;
      }
    }
  }
  return pick;
}

EmddStart run_start(const MILDataset& ds, std::size_t bag, std::size_t inst, const std::vector<double>& v0,
                    const EmddOptions& opt) {
  EmddStart out;
  out.bag = bag;
  out.instance = inst;
  Params p{ds[bag].instances[inst], v0};
  double current = log_diverse_density(p.point(), ds);
  out.log_dd_trace.push_back(current);
  std::vector<std::size_t> previous;
  for (int it = 0; it < opt.max_em_iterations; ++it) {
    const std::vector<std::size_t> pick = e_step(p.point(), ds);
    if (pick == previous) break;
    std::vector<Selected> sel;
    sel.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (is_positive(*ds[i].label)) {
        sel.push_back({&ds[i].instances[pick[i]], true});
      } else {
        // Negative bags have no hidden choice: every instance is negative.
        for (const Instance& x : ds[i].instances) sel.push_back({&x, false});
      }
    }
    Params next = mstep(p, sel, opt);
    const double value = log_diverse_density(next.point(), ds);
    // A step that lowers the full DD is discarded and the start ends.
    if (!(value >= current)) break;
    p = std::move(next);
    current = value;
    out.log_dd_trace.push_back(current);
    previous = pick;
  }
  out.point = p.point();
  return out;
}

}  // namespace

EmddModel::EmddModel(ConceptPoint point, double log_dd, std::vector<EmddStart> starts)
    : point_(std::move(point)), log_dd_(log_dd), starts_(std::move(starts)) {}

ScoreRatio EmddModel::score(const Bag& bag) const {
  if (bag.instances.empty()) throw Error("cannot score an empty bag");
  double best = std::numeric_limits<double>::infinity();
  for (const Instance& x : bag.instances) best = std::min(best, point_.distance(x));
  // p = exp(-d); odds = p / (1 - p)
  return ScoreRatio::from_log_odds(-best - log1mexp(best));
}

std::string EmddModel::describe() const {
  std::ostringstream os;
  os << "emdd(log_dd=" << log_dd_ << ", starts=" << starts_.size() << ")";
  return os.str();
}

EmddModel train_emdd(const MILDataset& ds, std::uint64_t seed, const EmddOptions& options) {
  if (!(options.init_fraction > 0.0 && options.init_fraction <= 1.0)) {
    throw Error("EM-DD init fraction must lie in (0, 1]");
  }
  if (!ds.all_labeled()) throw Error("EM-DD needs labeled bags");
  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (!is_positive(*ds[i].label)) continue;
    for (std::size_t k = 0; k < ds[i].instances.size(); ++k) candidates.emplace_back(i, k);
  }
  if (candidates.empty()) throw Error("EM-DD needs at least one positive bag");

  std::mt19937_64 rng(seed);
  std::shuffle(candidates.begin(), candidates.end(), rng);
  const auto n_starts = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(options.init_fraction * static_cast<double>(candidates.size()))));
  candidates.resize(n_starts);

  // Initial scales: inverse per-feature spread of all instances.
  const std::size_t d = ds.dim();
  std::vector<double> mean(d, 0.0), sq(d, 0.0);
  double count = 0.0;
  for (const Bag& b : ds.bags()) {
    for (const Instance& x : b.instances) {
      for (std::size_t j = 0; j < d; ++j) {
        mean[j] += x[j];
        sq[j] += x[j] * x[j];
      }
      count += 1.0;
    }
  }
  std::vector<double> v0(d, 0.0);
  for (std::size_t j = 0; j < d; ++j) {
    const double m = mean[j] / count;
    const double var = sq[j] / count - m * m;
    if (var > 1e-12) v0[j] = -0.5 * std::log(var);
  }

  const auto begin = std::chrono::steady_clock::now();
  std::vector<std::optional<EmddStart>> results(n_starts);
  parallel_for(n_starts, options.workers, [&](std::size_t s) {
    if (s > 0 && options.time_budget_seconds > 0.0) {
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - begin;
      if (elapsed.count() > options.time_budget_seconds) return;
    }
    results[s] = run_start(ds, candidates[s].first, candidates[s].second, v0, options);
  });

  std::vector<EmddStart> starts;
  std::size_t best = 0;
  for (auto& r : results) {
    if (!r) continue;
    starts.push_back(std::move(*r));
    if (starts.back().log_dd_trace.back() > starts[best].log_dd_trace.back()) best = starts.size() - 1;
  }
  ConceptPoint point = starts[best].point;
  const double log_dd = starts[best].log_dd_trace.back();
  return EmddModel(std::move(point), log_dd, std::move(starts));
}

}  // namespace milkit
