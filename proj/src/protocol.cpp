#include <cmath>
#include <limits>
#include <unordered_set>

#include "milkit/evaluation.hpp"
#include "milkit/parallel.hpp"

namespace milkit {

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::vector<Label> labels_of(const MILDataset& ds) {
  std::vector<Label> out;
  out.reserve(ds.size());
  for (const Bag& b : ds.bags()) {
    if (!b.label) throw Error("evaluation bag '" + b.id + "' is unlabeled");
    out.push_back(*b.label);
  }
  return out;
}

std::vector<double> odds_of(const TrainedModel& model, const MILDataset& ds) {
  std::vector<double> out;
  out.reserve(ds.size());
  for (const Bag& b : ds.bags()) out.push_back(model.score(b).value());
  return out;
}

void check_disjoint(const MILDataset& train, const MILDataset& val, const MILDataset& test) {
  std::unordered_set<std::string> seen;
  for (const MILDataset* ds : {&train, &val, &test}) {
    std::unordered_set<std::string> local;
    for (const Bag& b : ds->bags()) {
      if (seen.count(b.id)) throw Error("split leakage: bag id '" + b.id + "' appears in two splits");
      local.insert(b.id);
    }
    seen.insert(local.begin(), local.end());
  }
}

struct GridOutcome {
  double val_auc = std::numeric_limits<double>::quiet_NaN();
  ModelPtr model;
  std::string error;
};

/// Index of the best validation AUC; the earliest grid point wins ties.
std::size_t select_best(const std::vector<GridOutcome>& outcomes, const std::string& classifier) {
  std::size_t best = outcomes.size();
  for (std::size_t g = 0; g < outcomes.size(); ++g) {
    if (std::isnan(outcomes[g].val_auc)) continue;
    if (best == outcomes.size() || outcomes[g].val_auc > outcomes[best].val_auc) best = g;
  }
  if (best == outcomes.size()) {
    throw Error(classifier + ": every grid point failed (" + outcomes.front().error + ")");
  }
  return best;
}

}  // namespace

ProtocolReport run_protocol(const MILDataset& train, const MILDataset& val, const MILDataset& test,
                            const ClassifierSpec& spec, std::uint64_t seed, const ProtocolOptions& options) {
  if (spec.grid.empty()) throw Error(spec.name + ": hyperparameter grid is empty");
  if (!spec.train) throw Error(spec.name + ": no training function");
  check_disjoint(train, val, test);

  const std::vector<Label> val_labels = labels_of(val);
  const std::vector<Label> test_labels = labels_of(test);
  const std::size_t n_grid = spec.grid.size();
  const std::size_t repeats = options.subsample_repeats;

  // Row 0 is the full training set; rows 1..repeats are the subsamples.
  std::vector<MILDataset> train_sets;
  train_sets.push_back(train);
  for (std::size_t r = 0; r < repeats; ++r) {
    train_sets.push_back(split_subsample(train, options.subsample_fraction, derive_seed(seed, 1000 + r)));
  }

  std::vector<std::vector<GridOutcome>> outcomes(train_sets.size(), std::vector<GridOutcome>(n_grid));
  parallel_for(train_sets.size() * n_grid, options.workers, [&](std::size_t task) {
    const std::size_t row = task / n_grid, g = task % n_grid;
    if (options.on_train) options.on_train(train_sets[row]);
    GridOutcome& out = outcomes[row][g];
    try {
      out.model = spec.train(train_sets[row], spec.grid[g], derive_seed(seed, row));
      out.val_auc = compute_auc(odds_of(*out.model, val), val_labels).auc;
    } catch (const Error& e) {
      out.error = e.what();
      out.model.reset();
    }
  });

  ProtocolReport report;
  report.classifier = spec.name;
  report.val_labels = val_labels;
  report.test_labels = test_labels;
  for (const GridOutcome& o : outcomes[0]) report.grid_val_aucs.push_back(o.val_auc);

  const std::size_t best = select_best(outcomes[0], spec.name);
  report.best = spec.grid[best];
  report.auc_val = outcomes[0][best].val_auc;
  report.val_scores = odds_of(*outcomes[0][best].model, val);
  report.test_scores = odds_of(*outcomes[0][best].model, test);
  report.auc_test = compute_auc(report.test_scores, test_labels).auc;

  for (std::size_t r = 1; r < train_sets.size(); ++r) {
    const std::size_t b = select_best(outcomes[r], spec.name);
    report.subsample_best.push_back(spec.grid[b]);
    report.subsample_aucs.push_back(compute_auc(odds_of(*outcomes[r][b].model, test), test_labels).auc);
  }
  if (!report.subsample_aucs.empty()) {
    double sum = 0.0;
    for (double a : report.subsample_aucs) sum += a;
    report.subsample_mean = sum / static_cast<double>(report.subsample_aucs.size());
    report.subsample_std = sample_std(report.subsample_aucs);
  }
  return report;
}

nlohmann::ordered_json to_json(const ProtocolReport& report) {
  auto point_json = [](const HyperPoint& p) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [k, v] : p.values()) j[k] = v;
    return j;
  };
  auto number_or_null = [](double v) {
    return std::isnan(v) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v);
  };
  nlohmann::ordered_json j;
  j["classifier"] = report.classifier;
  j["best_params"] = point_json(report.best);
  j["auc_val"] = report.auc_val;
  j["auc_test"] = report.auc_test;
  j["grid_val_aucs"] = nlohmann::ordered_json::array();
  for (double a : report.grid_val_aucs) j["grid_val_aucs"].push_back(number_or_null(a));
  nlohmann::ordered_json sub;
  sub["repeats"] = report.subsample_aucs.size();
  sub["aucs"] = report.subsample_aucs;
  sub["best_params"] = nlohmann::ordered_json::array();
  for (const HyperPoint& p : report.subsample_best) sub["best_params"].push_back(point_json(p));
  sub["mean"] = report.subsample_mean;
  sub["std"] = report.subsample_std;
  j["subsample"] = sub;
  return j;
}

}  // namespace milkit
