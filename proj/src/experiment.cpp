#include "milkit/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "milkit/embed.hpp"
#include "milkit/parallel.hpp"
#include "milkit/registry.hpp"

namespace milkit {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw ConfigError("field '" + field + "': " + what);
}

void check_keys(const json& j, const std::string& field, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(field, "expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      fail(field.empty() ? key : field + "." + key, "unknown field");
    }
  }
}

std::string join(const std::string& parent, const std::string& key) { return parent.empty() ? key : parent + "." + key; }

template <typename T>
T get_as(const json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    fail(field, std::string("wrong type (") + j.type_name() + ")");
  }
}

std::uint64_t get_count(const json& j, const std::string& field) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0)) {
    fail(field, "expected a nonnegative integer");
  }
  return j.get<std::uint64_t>();
}

double get_number(const json& j, const std::string& field) {
  if (!j.is_number()) fail(field, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(field, "expected a finite number");
  return v;
}

FusionKind fusion_from_string(const std::string& s, const std::string& field) {
  if (s == "noisy-or") return FusionKind::NoisyOr;
  if (s == "average") return FusionKind::Average;
  fail(field, "unknown fusion rule '" + s + "' (expected noisy-or or average)");
}

std::vector<std::string> allowed_axes(const ClassifierEntry& entry) {
  std::vector<std::string> out;
  for (const GridAxis& a : entry.grid) out.push_back(a.name);
  if (entry.name == "miles") out.push_back("sigma");
  return out;
}

ClassifierRequest default_request(const ClassifierEntry& entry) {
  ClassifierRequest r;
  r.name = entry.name;
  r.label = entry.name;
  r.grid = entry.grid;
  if (entry.uses_fusion) r.fusions = {FusionKind::NoisyOr, FusionKind::Average};
  return r;
}

ClassifierRequest parse_classifier(const json& j, const std::string& field) {
  if (j.is_string()) {
    try {
      return default_request(find_classifier(j.get<std::string>()));
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      fail(field, e.what());
    }
  }
  check_keys(j, field, {"name", "label", "fusion", "grid", "time_budget"});
  if (!j.contains("name")) fail(join(field, "name"), "missing");
  const std::string name = get_as<std::string>(j.at("name"), join(field, "name"));
  const ClassifierEntry* entry = nullptr;
  try {
    entry = &find_classifier(name);
  } catch (const Error& e) {
    fail(join(field, "name"), e.what());
  }
  ClassifierRequest r = default_request(*entry);
  if (j.contains("label")) {
    r.label = get_as<std::string>(j.at("label"), join(field, "label"));
    if (r.label.empty() || r.label.find_first_of("/\\") != std::string::npos) {
      fail(join(field, "label"), "must be nonempty and free of slashes");
    }
  }

  if (j.contains("fusion")) {
    const std::string f = join(field, "fusion");
    if (!entry->uses_fusion) fail(f, "classifier '" + name + "' has no fusion rule");
    r.fusions.clear();
    const json& v = j.at("fusion");
    if (v.is_string()) {
      r.fusions.push_back(fusion_from_string(v.get<std::string>(), f));
    } else if (v.is_array() && !v.empty()) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string fi = f + "[" + std::to_string(i) + "]";
        const FusionKind k = fusion_from_string(get_as<std::string>(v[i], fi), fi);
        if (std::find(r.fusions.begin(), r.fusions.end(), k) != r.fusions.end()) fail(fi, "repeated fusion rule");
        r.fusions.push_back(k);
      }
    } else {
      fail(f, "expected a fusion rule or a nonempty list of them");
    }
  }

  if (j.contains("grid")) {
    const std::string g = join(field, "grid");
    const json& grid = j.at("grid");
    if (!grid.is_object()) fail(g, "expected an object of axis -> values");
    const std::vector<std::string> axes = allowed_axes(*entry);
    for (const auto& [axis, values] : grid.items()) {
      const std::string fa = g + "." + axis;
      if (std::find(axes.begin(), axes.end(), axis) == axes.end()) {
        std::string known;
        for (const std::string& a : axes) known += (known.empty() ? "" : ", ") + a;
        fail(fa, "not an axis of '" + name + "' (axes: " + known + ")");
      }
      std::vector<double> vals;
      if (values.is_array()) {
        if (values.empty()) fail(fa, "grid axis must not be empty");
        for (std::size_t i = 0; i < values.size(); ++i) {
          vals.push_back(get_number(values[i], fa + "[" + std::to_string(i) + "]"));
        }
      } else {
        vals.push_back(get_number(values, fa));
      }
      auto it = std::find_if(r.grid.begin(), r.grid.end(), [&](const GridAxis& a) { return a.name == axis; });
      if (it != r.grid.end()) it->values = vals;
      else r.grid.push_back({axis, vals});
    }
  }

  if (j.contains("time_budget")) {
    const std::string f = join(field, "time_budget");
    if (name != "emdd") fail(f, "only emdd takes a time budget");
    r.time_budget_seconds = get_number(j.at("time_budget"), f);
    if (r.time_budget_seconds < 0.0) fail(f, "must be >= 0");
  }
  return r;
}

std::string row_name(const std::string& classifier, std::optional<FusionKind> fusion) {
  return fusion ? classifier + "/" + to_string(*fusion) : classifier;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t upto = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw ConfigError("line " + std::to_string(line) + ": invalid JSON (" + e.what() + ")");
  }
  check_keys(root, "", {"seed", "output_dir", "workers", "subsample_repeats", "subsample_fraction", "alpha",
                        "dataset", "classifiers", "compare"});
  auto resolve = [&](const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };

  ExperimentConfig c;
  if (root.contains("seed")) c.seed = get_count(root.at("seed"), "seed");
  if (root.contains("output_dir")) c.output_dir = resolve(get_as<std::string>(root.at("output_dir"), "output_dir"));
  if (root.contains("workers")) {
    c.workers = get_count(root.at("workers"), "workers");
    if (c.workers == 0) fail("workers", "must be >= 1");
  }
  if (root.contains("subsample_repeats")) {
    c.subsample_repeats = get_count(root.at("subsample_repeats"), "subsample_repeats");
    if (c.subsample_repeats < 2) fail("subsample_repeats", "must be >= 2");
  }
  if (root.contains("subsample_fraction")) {
    c.subsample_fraction = get_number(root.at("subsample_fraction"), "subsample_fraction");
    if (!(c.subsample_fraction > 0.0 && c.subsample_fraction <= 1.0)) fail("subsample_fraction", "must lie in (0, 1]");
  }
  if (root.contains("alpha")) {
    c.alpha = get_number(root.at("alpha"), "alpha");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) fail("alpha", "must lie in (0, 1)");
  }

  if (!root.contains("dataset")) fail("dataset", "missing");
  const json& ds = root.at("dataset");
  check_keys(ds, "dataset", {"generate", "train", "train_sub", "validation", "test"});
  if (ds.contains("generate")) {
    if (ds.size() != 1) fail("dataset", "use either 'generate' or split files, not both");
    json spec = ds.at("generate");
    if (!spec.is_object()) fail("dataset.generate", "expected an object");
    c.generator_seeded = spec.contains("seed");
    try {
      c.generate = generator_spec_from_json(spec);
      c.generate->validate();
    } catch (const json::exception& e) {
      fail("dataset.generate", e.what());
    } catch (const Error& e) {
      fail("dataset.generate", e.what());
    }
  } else {
    for (const char* split : {"train", "train_sub", "validation", "test"}) {
      if (ds.contains(split)) c.files[split] = resolve(get_as<std::string>(ds.at(split), std::string("dataset.") + split));
    }
    if (!c.files.count("validation")) fail("dataset.validation", "missing");
    if (!c.files.count("test")) fail("dataset.test", "missing");
    if (!c.files.count("train") && !c.files.count("train_sub")) fail("dataset.train", "missing (or give train_sub)");
  }

  if (root.contains("classifiers")) {
    const json& list = root.at("classifiers");
    if (!list.is_array() || list.empty()) fail("classifiers", "expected a nonempty list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      c.classifiers.push_back(parse_classifier(list[i], "classifiers[" + std::to_string(i) + "]"));
    }
  } else {
    for (const ClassifierEntry& e : classifier_catalog()) {
      if (!e.opt_in) c.classifiers.push_back(default_request(e));
    }
  }
  const std::vector<std::string> rows = row_names(c);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (std::find(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(i), rows[i]) != rows.begin() + i) {
      fail("classifiers", "row '" + rows[i] + "' is requested twice");
    }
  }

  if (root.contains("compare")) {
    const json& pairs = root.at("compare");
    if (!pairs.is_array()) fail("compare", "expected a list of [a, b] pairs");
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const std::string f = "compare[" + std::to_string(i) + "]";
      if (!pairs[i].is_array() || pairs[i].size() != 2) fail(f, "expected a pair [a, b]");
      std::string ab[2];
      for (int k = 0; k < 2; ++k) {
        const std::string fk = f + "[" + std::to_string(k) + "]";
        std::string n = get_as<std::string>(pairs[i][k], fk);
        if (std::find(rows.begin(), rows.end(), n) == rows.end()) {
          // A fused classifier name alone is accepted when it has one row.
          std::vector<std::string> matches;
          for (const std::string& r : rows)
            if (r.rfind(n + "/", 0) == 0) matches.push_back(r);
          if (matches.size() != 1) fail(fk, "no table row named '" + n + "'");
          n = matches.front();
        }
        ab[k] = n;
      }
      c.compare.emplace_back(ab[0], ab[1]);
    }
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config(buf.str(), path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::vector<std::string> row_names(const ExperimentConfig& config) {
  std::vector<std::string> out;
  for (const ClassifierRequest& r : config.classifiers) {
    if (r.fusions.empty()) out.push_back(r.label);
    for (FusionKind f : r.fusions) out.push_back(row_name(r.label, f));
  }
  return out;
}

bool ExperimentResult::any_failed() const {
  for (const ResultBlock& b : blocks)
    for (const ResultRow& r : b.rows)
      if (!r.report) return true;
  return false;
}

namespace {

struct Splits {
  std::vector<std::pair<std::string, MILDataset>> train_sets;
  MILDataset validation;
  MILDataset test;
};

Splits load_splits(const ExperimentConfig& config) {
  Splits s;
  if (config.generate) {
    GeneratorSpec spec = *config.generate;
    if (!config.generator_seeded) spec.seed = config.seed;
    GeneratedSplits g = generate_splits(spec);
    s.train_sets.emplace_back("train", std::move(g.train.dataset));
    s.validation = std::move(g.validation.dataset);
    s.test = std::move(g.test.dataset);
    return s;
  }
  auto load = [&](const std::string& split) {
    const std::filesystem::path& p = config.files.at(split);
    try {
      return load_dataset(p, format_from_path(p));
    } catch (const Error& e) {
      throw ConfigError("dataset." + split + " (" + p.string() + "): " + e.what());
    }
  };
  for (const char* split : {"train_sub", "train"}) {
    if (config.files.count(split)) s.train_sets.emplace_back(split, load(split));
  }
  s.validation = load("validation");
  s.test = load("test");
  return s;
}

/// Flags every row that is best in a column or not significantly worse.
void mark_block(ResultBlock& block, double alpha) {
  std::vector<ResultRow*> ok;
  for (ResultRow& r : block.rows)
    if (r.report) ok.push_back(&r);
  if (ok.empty()) return;
  auto best_of = [&](auto metric) {
    ResultRow* best = ok.front();
    for (ResultRow* r : ok)
      if (metric(*r) > metric(*best)) best = r;
    return best;
  };
  const ResultRow* bv = best_of([](const ResultRow& r) { return r.report->auc_val; });
  const ResultRow* bt = best_of([](const ResultRow& r) { return r.report->auc_test; });
  const ResultRow* bs = best_of([](const ResultRow& r) { return r.report->subsample_mean; });
  for (ResultRow* r : ok) {
    const ProtocolReport& p = *r->report;
    r->best_val = p.auc_val >= bv->report->auc_val ||
                  !delong_test(p.val_scores, bv->report->val_scores, p.val_labels, alpha).significant();
    r->best_test = p.auc_test >= bt->report->auc_test ||
                   !delong_test(p.test_scores, bt->report->test_scores, p.test_labels, alpha).significant();
    r->best_subsample = p.subsample_mean >= bs->report->subsample_mean ||
                        !dependent_ttest(p.subsample_aucs, bs->report->subsample_aucs, alpha).significant();
  }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log) {
  Splits splits = load_splits(config);
  std::mutex log_mutex;
  auto say = [&](const std::string& msg) {
    if (!log) return;
    std::lock_guard lock(log_mutex);
    *log << "[milkit] " << msg << std::endl;
  };

  struct RowPlan {
    std::string name;
    const ClassifierRequest* request;
    std::optional<FusionKind> fusion;
  };
  std::vector<RowPlan> plan;
  for (const ClassifierRequest& r : config.classifiers) {
    if (r.fusions.empty()) plan.push_back({r.label, &r, std::nullopt});
    for (FusionKind f : r.fusions) plan.push_back({row_name(r.label, f), &r, f});
  }

  ExperimentResult result;
  for (auto& [set_name, train] : splits.train_sets) {
    ResultBlock block;
    block.training_set = set_name;
    block.training_bags = train.size();
    block.rows.resize(plan.size());
    EmbedCache cache;
    ProtocolOptions options;
    options.subsample_repeats = config.subsample_repeats;
    options.subsample_fraction = config.subsample_fraction;

    parallel_for(plan.size(), config.workers, [&](std::size_t i) {
      const RowPlan& row = plan[i];
      ResultRow& out = block.rows[i];
      out.name = row.name;
      const auto start = std::chrono::steady_clock::now();
      try {
        TrainerContext ctx;
        ctx.cache = &cache;
        ctx.time_budget_seconds = row.request->time_budget_seconds;
        const ClassifierSpec spec{row.name, make_grid(row.request->grid), make_trainer(row.request->name, row.fusion, ctx)};
        out.report = run_protocol(train, splits.validation, splits.test, spec, config.seed, options);
      } catch (const std::exception& e) {
        out.error = e.what();
      }
      const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
      char secs[32];
      std::snprintf(secs, sizeof(secs), "%.1f", took.count());
      say(set_name + " " + row.name + (out.report ? " done" : " FAILED: " + out.error) + " (" + secs + " s)");
    });
    mark_block(block, config.alpha);
    result.blocks.push_back(std::move(block));
  }

  for (const ResultBlock& block : result.blocks) {
    for (const auto& [a, b] : config.compare) {
      PairComparison cmp{block.training_set, a, b, {}, {}, {}};
      auto find = [&](const std::string& n) -> const ResultRow& {
        return *std::find_if(block.rows.begin(), block.rows.end(), [&](const ResultRow& r) { return r.name == n; });
      };
      const ResultRow& ra = find(a);
      const ResultRow& rb = find(b);
      if (ra.report && rb.report) {
        const ProtocolReport& pa = *ra.report;
        const ProtocolReport& pb = *rb.report;
        cmp.val = delong_test(pa.val_scores, pb.val_scores, pa.val_labels, config.alpha);
        cmp.test = delong_test(pa.test_scores, pb.test_scores, pa.test_labels, config.alpha);
        cmp.subsample = dependent_ttest(pa.subsample_aucs, pb.subsample_aucs, config.alpha);
      }
      result.comparisons.push_back(std::move(cmp));
    }
  }
  return result;
}

namespace {

std::string fixed1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", v);
  return buf;
}

std::string pad_right(std::string s, std::size_t w) {
  if (s.size() < w) s.append(w - s.size(), ' ');
  return s;
}

std::string pad_left(const std::string& s, std::size_t w) {
  return s.size() < w ? std::string(w - s.size(), ' ') + s : s;
}

std::string file_stem(const std::string& row) {
  std::string s = row;
  std::replace(s.begin(), s.end(), '/', '_');
  return s;
}

nlohmann::ordered_json significance_json(const std::optional<SignificanceResult>& r) {
  if (!r) return nullptr;
  nlohmann::ordered_json j;
  j["test"] = to_string(r->test);
  j["statistic"] = std::isfinite(r->statistic) ? nlohmann::ordered_json(r->statistic)
                                                : nlohmann::ordered_json(r->statistic > 0 ? "inf" : "-inf");
  j["p_value"] = r->p_value;
  j["alpha"] = r->alpha;
  j["significant"] = r->significant();
  return j;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

}  // namespace

std::string format_table(const ExperimentResult& result, double alpha) {
  std::size_t w = 10;
  for (const ResultBlock& b : result.blocks)
    for (const ResultRow& r : b.rows) w = std::max(w, r.name.size());

  std::ostringstream os;
  for (std::size_t bi = 0; bi < result.blocks.size(); ++bi) {
    const ResultBlock& b = result.blocks[bi];
    if (bi) os << '\n';
    os << "Trained on " << b.training_set << " (" << b.training_bags << " bags)\n";
    os << pad_right("Classifier", w) << "  " << pad_left("AUC val", 7) << "  " << pad_left("AUC test", 8) << "  "
       << pad_left("10x AUC test", 13) << '\n';
    os << std::string(w, '-') << "  " << std::string(7, '-') << "  " << std::string(8, '-') << "  "
       << std::string(13, '-') << '\n';
    for (const ResultRow& r : b.rows) {
      os << pad_right(r.name, w) << "  ";
      if (!r.report) {
        std::string msg = r.error;
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        os << "ERROR: " << msg << '\n';
        continue;
      }
      const ProtocolReport& p = *r.report;
      const std::string sub = fixed1(100.0 * p.subsample_mean) + " (" + pad_left(fixed1(100.0 * p.subsample_std), 4) + ")";
      os << pad_left(fixed1(100.0 * p.auc_val) + (r.best_val ? "*" : " "), 7) << "  "
         << pad_left(fixed1(100.0 * p.auc_test) + (r.best_test ? "*" : " "), 8) << "  "
         << pad_left(sub + (r.best_subsample ? "*" : " "), 13) << '\n';
    }
  }
  os << "\nAUC x 100. * = best in column or not significantly worse (DeLong for val/test, dependent t-test over "
        "subsamples, alpha = "
     << format_short(alpha) << ").\n";
  return os.str();
}

void write_artifacts(const ExperimentResult& result, const ExperimentConfig& config,
                     const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_text(dir / "results.txt", format_table(result, config.alpha));

  nlohmann::ordered_json all;
  all["seed"] = config.seed;
  all["alpha"] = config.alpha;
  all["blocks"] = nlohmann::ordered_json::array();
  for (const ResultBlock& b : result.blocks) {
    const fs::path reports = dir / "reports" / b.training_set;
    const fs::path roc = dir / "roc" / b.training_set;
    fs::create_directories(reports);
    fs::create_directories(roc);
    nlohmann::ordered_json jb;
    jb["training_set"] = b.training_set;
    jb["training_bags"] = b.training_bags;
    jb["rows"] = nlohmann::ordered_json::array();
    for (const ResultRow& r : b.rows) {
      nlohmann::ordered_json jr;
      jr["row"] = r.name;
      if (!r.report) {
        jr["error"] = r.error;
      } else {
        const ProtocolReport& p = *r.report;
        const nlohmann::ordered_json report = to_json(p);
        write_text(reports / (file_stem(r.name) + ".json"), report.dump(2) + "\n");
        write_roc_csv(roc / (file_stem(r.name) + "_val.csv"), compute_auc(p.val_scores, p.val_labels));
        write_roc_csv(roc / (file_stem(r.name) + "_test.csv"), compute_auc(p.test_scores, p.test_labels));
        jr["marks"] = {{"val", r.best_val}, {"test", r.best_test}, {"subsample", r.best_subsample}};
        jr["report"] = report;
      }
      jb["rows"].push_back(std::move(jr));
    }
    all["blocks"].push_back(std::move(jb));
  }
  write_text(dir / "results.json", all.dump(2) + "\n");

  nlohmann::ordered_json sig = nlohmann::ordered_json::array();
  for (const PairComparison& c : result.comparisons) {
    nlohmann::ordered_json j;
    j["training_set"] = c.training_set;
    j["a"] = c.a;
    j["b"] = c.b;
    j["val"] = significance_json(c.val);
    j["test"] = significance_json(c.test);
    j["subsample"] = significance_json(c.subsample);
    sig.push_back(std::move(j));
  }
  write_text(dir / "significance.json", sig.dump(2) + "\n");
}

}  // namespace milkit
