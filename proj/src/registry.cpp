#include "milkit/registry.hpp"

#include <charconv>
#include <cmath>

#include "milkit/bag_metrics.hpp"
#include "milkit/concept.hpp"

namespace milkit {

namespace {

const std::vector<double> kC{0.01, 0.1, 1, 10};
const std::vector<double> kDegree{1, 2};

std::vector<GridAxis> svm_grid() { return {{"p", kDegree}, {"C", kC}}; }

std::size_t as_count(const HyperPoint& hp, const std::string& key) {
  const double v = hp.get(key);
  if (!(v >= 0.0) || v != std::floor(v)) throw Error(key + " must be a nonnegative integer");
  return static_cast<std::size_t>(v);
}

PolyKernel scaled_kernel(const HyperPoint& hp, std::size_t dim) {
  const std::size_t p = as_count(hp, "p");
  if (p == 0) throw Error("polynomial degree must be >= 1");
  return PolyKernel{static_cast<int>(p), 1.0 / static_cast<double>(std::max<std::size_t>(dim, 1)), 1.0};
}

}  // namespace

std::string format_short(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

const std::vector<ClassifierEntry>& classifier_catalog() {
  static const std::vector<ClassifierEntry> catalog{
      {"simplemil-logistic", {{"C", kC}}, true, false},
      {"simplemil-knn", {{"k", {25, 35, 45}}}, true, false},
      {"emdd", {{"init_fraction", {0.1}}}, false, true},
      {"misvm", svm_grid(), true, false},
      {"milboost", {{"rounds", {100}}}, false, false},
      {"citation-knn", {{"kR", {1, 5, 10}}, {"kC", {1, 5, 10}}}, false, false},
      {"mean-inst", svm_grid(), false, false},
      {"extremes", svm_grid(), false, false},
      {"bow", {{"words", {50, 100, 200}}, {"p", kDegree}, {"C", kC}}, false, false},
      {"miles", svm_grid(), false, false},
      {"meanmin-svm", svm_grid(), false, false},
      {"meanmin-knn", {{"k", {1, 5, 10}}}, false, false},
      {"emd-svm", svm_grid(), false, false},
      {"emd-knn", {{"k", {1, 5, 10}}}, false, false},
  };
  return catalog;
}

const ClassifierEntry& find_classifier(const std::string& name) {
  for (const ClassifierEntry& e : classifier_catalog()) {
    if (e.name == name) return e;
  }
  throw Error("unknown classifier '" + name + "' (see `milkit list`)");
}

std::string describe(const ClassifierEntry& entry) {
  std::string line = entry.name;
  for (const GridAxis& axis : entry.grid) {
    line += " " + axis.name + " in {";
    for (std::size_t i = 0; i < axis.values.size(); ++i) line += (i ? "," : "") + format_short(axis.values[i]);
    line += "}";
  }
  if (entry.uses_fusion) line += " fusion in {noisy-or,average}";
  if (entry.opt_in) line += " (opt-in, honours time_budget)";
  return line;
}

std::vector<std::string> list_classifiers() {
  std::vector<std::string> out;
  for (const ClassifierEntry& e : classifier_catalog()) out.push_back(describe(e));
  return out;
}

TrainFn make_trainer(const std::string& name, std::optional<FusionKind> fusion, const TrainerContext& context) {
  const ClassifierEntry& entry = find_classifier(name);
  if (entry.uses_fusion != fusion.has_value()) {
    throw Error(entry.uses_fusion ? "classifier '" + name + "' needs a fusion rule"
                                  : "classifier '" + name + "' takes no fusion rule");
  }
  const FusionRule rule = fusion ? FusionRule(*fusion) : FusionRule();
  EmbedCache* cache = context.cache;

  if (name == "simplemil-logistic" || name == "simplemil-knn") {
    const SimpleBase base = name == "simplemil-knn" ? SimpleBase::Knn : SimpleBase::Logistic;
    return [base, rule](const MILDataset& ds, const HyperPoint& hp, std::uint64_t) {
      return train_simplemil(ds, base, rule, hp);
    };
  }
  if (name == "emdd") {
    const double budget = context.time_budget_seconds;
    return [budget](const MILDataset& ds, const HyperPoint& hp, std::uint64_t seed) -> ModelPtr {
      EmddOptions opt;
      opt.init_fraction = hp.get_or("init_fraction", opt.init_fraction);
      opt.time_budget_seconds = budget;
      return std::make_shared<EmddModel>(train_emdd(ds, seed, opt));
    };
  }
  if (name == "misvm") {
    return [rule](const MILDataset& ds, const HyperPoint& hp, std::uint64_t) -> ModelPtr {
      return std::make_shared<MiSvmModel>(train_misvm(ds, scaled_kernel(hp, ds.dim()), hp.get("C"), rule));
    };
  }
  if (name == "milboost") {
    return [](const MILDataset& ds, const HyperPoint& hp, std::uint64_t) -> ModelPtr {
      MilBoostOptions opt;
      opt.rounds = static_cast<int>(as_count(hp, "rounds"));
      return std::make_shared<MilBoostModel>(train_milboost(ds, opt));
    };
  }
  if (name == "citation-knn") {
    return [](const MILDataset& ds, const HyperPoint& hp, std::uint64_t) -> ModelPtr {
      return std::make_shared<CitationKnnModel>(train_citation_knn(ds, as_count(hp, "kR"), as_count(hp, "kC")));
    };
  }

  EmbeddingKind kind = EmbeddingKind::MeanInst;
  EmbedHead head = EmbedHead::Svm;
  if (name == "extremes") kind = EmbeddingKind::Extremes;
  else if (name == "bow") kind = EmbeddingKind::Bow;
  else if (name == "miles") kind = EmbeddingKind::Miles;
  else if (name.starts_with("meanmin-")) kind = EmbeddingKind::DissimMeanMin;
  else if (name.starts_with("emd-")) kind = EmbeddingKind::DissimEmd;
  if (name.ends_with("-knn")) head = EmbedHead::Knn;
  return [kind, head, cache](const MILDataset& ds, const HyperPoint& hp, std::uint64_t seed) {
    return train_embed_classifier(ds, kind, head, hp, seed, cache);
  };
}

}  // namespace milkit
