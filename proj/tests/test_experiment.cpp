#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "milkit/experiment.hpp"
#include "milkit/registry.hpp"
#include "test_util.hpp"

namespace milkit {
namespace {

using testing::TempDir;

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool listed(const std::string& line) {
  const auto lines = list_classifiers();
  return std::any_of(lines.begin(), lines.end(), [&](const std::string& l) { return l.find(line) != std::string::npos; });
}

TEST(Registry, ListShowsDefaultGrids) {
  EXPECT_TRUE(listed("simplemil-knn k in {25,35,45}"));
  EXPECT_TRUE(listed("bow words in {50,100,200}"));
  EXPECT_TRUE(listed("citation-knn kR in {1,5,10} kC in {1,5,10}"));
  EXPECT_TRUE(listed("simplemil-logistic C in {0.01,0.1,1,10}"));
  EXPECT_TRUE(listed("misvm p in {1,2} C in {0.01,0.1,1,10}"));
  EXPECT_EQ(list_classifiers().size(), classifier_catalog().size());
}

TEST(Registry, UnknownNameAndFusionMismatch) {
  EXPECT_THROW(find_classifier("svm-of-doom"), Error);
  EXPECT_THROW(make_trainer("simplemil-logistic", std::nullopt, {}), Error);
  EXPECT_THROW(make_trainer("mean-inst", FusionKind::Average, {}), Error);
  EXPECT_NO_THROW(make_trainer("mean-inst", std::nullopt, {}));
}

TEST(Registry, FormatShort) {
  EXPECT_EQ(format_short(0.01), "0.01");
  EXPECT_EQ(format_short(10), "10");
  EXPECT_EQ(format_short(0.1), "0.1");
}

const char* kGenerated = R"("dataset": {"generate": {"kind": "distribution", "dim": 5, "bags_per_class": 12,
                                                      "instances_per_bag": 8}})";

std::string config_with(const std::string& classifiers, const std::string& extra = "") {
  return std::string("{\"seed\": 3, ") + kGenerated + ", \"classifiers\": " + classifiers +
         (extra.empty() ? "" : ", " + extra) + "}";
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, DefaultsAndDefaultSuite) {
  const ExperimentConfig c = parse_config(std::string("{") + kGenerated + "}");
  EXPECT_EQ(c.seed, 0u);
  EXPECT_EQ(c.workers, 1u);
  EXPECT_EQ(c.subsample_repeats, 10u);
  EXPECT_FALSE(c.generator_seeded);
  const auto rows = row_names(c);
  EXPECT_EQ(std::count(rows.begin(), rows.end(), "emdd"), 0);
  EXPECT_EQ(std::count(rows.begin(), rows.end(), "simplemil-knn/noisy-or"), 1);
  EXPECT_EQ(std::count(rows.begin(), rows.end(), "simplemil-knn/average"), 1);
  EXPECT_EQ(std::count(rows.begin(), rows.end(), "emd-svm"), 1);
}

TEST(Config, ClassifierEntries) {
  const ExperimentConfig c = parse_config(config_with(
      R"(["citation-knn",
          {"name": "misvm", "fusion": "average", "grid": {"C": [1, 10]}},
          {"name": "miles", "grid": {"sigma": 2.5}},
          {"name": "emdd", "time_budget": 30}])"));
  ASSERT_EQ(c.classifiers.size(), 4u);
  EXPECT_EQ(row_names(c), (std::vector<std::string>{"citation-knn", "misvm/average", "miles", "emdd"}));
  const auto& misvm = c.classifiers[1].grid;
  ASSERT_EQ(misvm.size(), 2u);
  EXPECT_EQ(misvm[0].name, "p");
  EXPECT_EQ(misvm[0].values, (std::vector<double>{1, 2}));
  EXPECT_EQ(misvm[1].values, (std::vector<double>{1, 10}));
  EXPECT_EQ(c.classifiers[2].grid.back().name, "sigma");
  EXPECT_EQ(c.classifiers[3].time_budget_seconds, 30.0);
}

TEST(Config, ErrorsNameTheField) {
  EXPECT_NE(config_error(config_with(R"(["mean-inst"])", R"("sed": 1)")).find("'sed'"), std::string::npos);
  EXPECT_NE(config_error(config_with(R"(["nope"])")).find("classifiers[0]"), std::string::npos);
  EXPECT_NE(config_error(config_with(R"([{"name": "bow", "grid": {"words": []}}])")).find("classifiers[0].grid.words"),
            std::string::npos);
  EXPECT_NE(config_error(config_with(R"([{"name": "bow", "grid": {"k": [3]}}])")).find("not an axis"),
            std::string::npos);
  EXPECT_NE(config_error(config_with(R"([{"name": "bow", "fusion": "average"}])")).find("classifiers[0].fusion"),
            std::string::npos);
  EXPECT_NE(config_error(config_with(R"([{"name": "misvm", "fusion": "max"}])")).find("unknown fusion"),
            std::string::npos);
  EXPECT_NE(config_error(config_with(R"(["mean-inst", "mean-inst"])")).find("twice"), std::string::npos);
  EXPECT_NE(config_error(config_with(R"(["mean-inst"])", R"("compare": [["mean-inst", "bow"]])")).find("compare[0][1]"),
            std::string::npos);
  EXPECT_NE(config_error(config_with(R"(["mean-inst"])", R"("workers": 0)")).find("'workers'"), std::string::npos);
  EXPECT_NE(config_error(R"({"classifiers": ["mean-inst"]})").find("'dataset'"), std::string::npos);
  EXPECT_NE(config_error(R"({"dataset": {"train": "a.csv", "test": "b.csv"}})").find("dataset.validation"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"dataset": {"generate": {"kind": "concept", "dim": 0}}})").find("dataset.generate"),
            std::string::npos);
  EXPECT_NE(config_error(config_with(R"([{"name": "mean-inst", "time_budget": 3}])")).find("only emdd"),
            std::string::npos);
}

TEST(Config, ShippedExampleParses) {
  const ExperimentConfig c = load_config(std::filesystem::path(MILKIT_SOURCE_DIR) / "configs/quickstart.json");
  EXPECT_EQ(row_names(c).size(), 8u);
  EXPECT_EQ(c.compare.size(), 2u);
}

TEST(Config, SyntaxErrorReportsLine) {
  EXPECT_NE(config_error("{\n  \"seed\": 1,\n  \"dataset\": {\n    oops\n}").find("line 4"), std::string::npos);
  EXPECT_NE(config_error("{\"seed\": 1,}").find("line 1"), std::string::npos);
}

TEST(Config, CompareAcceptsSingleFusionShorthand) {
  const ExperimentConfig c = parse_config(config_with(
      R"([{"name": "simplemil-logistic", "fusion": ["average"]}, "mean-inst"])",
      R"("compare": [["simplemil-logistic", "mean-inst"]])"));
  ASSERT_EQ(c.compare.size(), 1u);
  EXPECT_EQ(c.compare[0].first, "simplemil-logistic/average");
  // Two fusion rows make the bare name ambiguous.
  EXPECT_FALSE(config_error(config_with(R"(["simplemil-logistic", "mean-inst"])",
                                        R"("compare": [["simplemil-logistic", "mean-inst"]])"))
                   .empty());
}

TEST(Config, RelativePathsFollowConfigDirectory) {
  TempDir dir;
  const auto cfg = dir.path() / "exp.json";
  std::ofstream(cfg) << R"({"output_dir": "res", "dataset": {"train": "d/tr.csv", "validation": "/abs/va.csv",
                         "test": "te.csv"}, "classifiers": ["mean-inst"]})";
  const ExperimentConfig c = load_config(cfg);
  EXPECT_EQ(c.files.at("train"), dir.path() / "d/tr.csv");
  EXPECT_EQ(c.files.at("validation"), std::filesystem::path("/abs/va.csv"));
  EXPECT_EQ(c.output_dir, dir.path() / "res");
}

TEST(Experiment, MinimalRunHasOneRowAndThreeColumns) {
  const ExperimentConfig c = parse_config(config_with(R"([{"name": "simplemil-logistic", "fusion": "average"}])"));
  const ExperimentResult r = run_experiment(c);
  ASSERT_EQ(r.blocks.size(), 1u);
  ASSERT_EQ(r.blocks[0].rows.size(), 1u);
  EXPECT_FALSE(r.any_failed());
  const std::string table = format_table(r);
  std::istringstream in(table);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  ASSERT_GE(lines.size(), 4u);
  EXPECT_EQ(lines[0], "Trained on train (24 bags)");
  EXPECT_NE(lines[1].find("AUC val"), std::string::npos);
  EXPECT_NE(lines[1].find("AUC test"), std::string::npos);
  EXPECT_NE(lines[1].find("10x AUC test"), std::string::npos);
  // name, val, test, mean, (std); a one-digit std is padded to "( 5.7)"
  std::istringstream row(lines[3]);
  std::vector<std::string> cells;
  for (std::string cell; row >> cell;) cells.push_back(cell);
  ASSERT_GE(cells.size(), 5u) << lines[3];
  EXPECT_EQ(lines[3].back(), '*');
  EXPECT_EQ(cells[0], "simplemil-logistic/average");
  const ProtocolReport& p = *r.blocks[0].rows[0].report;
  char expect[32];
  std::snprintf(expect, sizeof(expect), "%.1f*", 100.0 * p.auc_val);
  EXPECT_EQ(cells[1], expect);  // a lone row is always the best
  std::snprintf(expect, sizeof(expect), "%.1f*", 100.0 * p.auc_test);
  EXPECT_EQ(cells[2], expect);
}

TEST(Experiment, IdenticalClassifiersAreBothFlagged) {
  const ExperimentConfig c = parse_config(config_with(
      R"([{"name": "citation-knn", "label": "cknn-a"}, {"name": "citation-knn", "label": "cknn-b"},
          {"name": "mean-inst", "grid": {"p": [1], "C": [0.01]}}])",
      R"("compare": [["cknn-a", "cknn-b"]])"));
  const ExperimentResult r = run_experiment(c);
  const auto& rows = r.blocks[0].rows;
  ASSERT_EQ(rows.size(), 3u);
  ASSERT_TRUE(rows[0].report && rows[1].report);
  EXPECT_EQ(rows[0].report->auc_test, rows[1].report->auc_test);
  EXPECT_EQ(rows[0].best_val, rows[1].best_val);
  EXPECT_EQ(rows[0].best_test, rows[1].best_test);
  EXPECT_EQ(rows[0].best_subsample, rows[1].best_subsample);
  ASSERT_EQ(r.comparisons.size(), 1u);
  EXPECT_EQ(r.comparisons[0].test->p_value, 1.0);
  EXPECT_EQ(r.comparisons[0].subsample->p_value, 1.0);

  // Only the two identical rows: each is the best.
  const ExperimentConfig pair = parse_config(config_with(
      R"([{"name": "citation-knn", "label": "cknn-a"}, {"name": "citation-knn", "label": "cknn-b"}])"));
  for (const ResultRow& row : run_experiment(pair).blocks[0].rows) {
    EXPECT_TRUE(row.best_val && row.best_test && row.best_subsample) << row.name;
  }
}

TEST(Experiment, FailingRowIsIsolated) {
  const ExperimentConfig c = parse_config(config_with(
      R"([{"name": "simplemil-knn", "fusion": "average", "grid": {"k": [100000]}}, "meanmin-knn"])"));
  const ExperimentResult r = run_experiment(c);
  ASSERT_EQ(r.blocks[0].rows.size(), 2u);
  EXPECT_FALSE(r.blocks[0].rows[0].report);
  EXPECT_NE(r.blocks[0].rows[0].error.find("k-NN"), std::string::npos);
  EXPECT_TRUE(r.blocks[0].rows[1].report);
  EXPECT_TRUE(r.blocks[0].rows[1].best_test);
  EXPECT_TRUE(r.any_failed());
  EXPECT_NE(format_table(r).find("simplemil-knn/average  ERROR: "), std::string::npos);
}

TEST(Experiment, TableIndependentOfWorkerCount) {
  ExperimentConfig c = parse_config(config_with(
      R"(["simplemil-logistic", "citation-knn", {"name": "bow", "grid": {"words": [4]}}, "meanmin-knn"])"));
  const std::string serial = format_table(run_experiment(c));
  c.workers = 3;
  EXPECT_EQ(format_table(run_experiment(c)), serial);
  EXPECT_EQ(format_table(run_experiment(c)), serial);
}

TEST(Experiment, FileDatasetsGiveOneBlockPerTrainingSet) {
  TempDir dir;
  GeneratorSpec spec;
  spec.kind = GeneratorKind::Distribution;
  spec.dim = 4;
  spec.bags_per_class = 10;
  spec.instances_per_bag = 6;
  spec.seed = 9;
  const GeneratedSplits s = generate_splits(spec);
  save_dataset(s.train.dataset, dir.path() / "train.csv", FileFormat::Csv);
  save_dataset(split_subsample(s.train.dataset, 0.5, 1), dir.path() / "sub.jsonl", FileFormat::Jsonl);
  save_dataset(s.validation.dataset, dir.path() / "val.csv", FileFormat::Csv);
  save_dataset(s.test.dataset, dir.path() / "test.csv", FileFormat::Csv);
  std::ofstream(dir.path() / "exp.json") << R"({"dataset": {"train": "train.csv", "train_sub": "sub.jsonl",
      "validation": "val.csv", "test": "test.csv"}, "classifiers": ["meanmin-knn"], "output_dir": "out"})";
  const ExperimentConfig c = load_config(dir.path() / "exp.json");
  const ExperimentResult r = run_experiment(c);
  ASSERT_EQ(r.blocks.size(), 2u);
  EXPECT_EQ(r.blocks[0].training_set, "train_sub");
  EXPECT_EQ(r.blocks[0].training_bags, 10u);
  EXPECT_EQ(r.blocks[1].training_set, "train");
  EXPECT_EQ(r.blocks[1].training_bags, 20u);

  write_artifacts(r, c, c.output_dir);
  for (const char* f : {"results.txt", "results.json", "significance.json", "reports/train/meanmin-knn.json",
                        "reports/train_sub/meanmin-knn.json", "roc/train/meanmin-knn_val.csv",
                        "roc/train_sub/meanmin-knn_test.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(c.output_dir / f)) << f;
  }
  EXPECT_EQ(read_file(c.output_dir / "results.txt"), format_table(r));
  EXPECT_EQ(read_file(c.output_dir / "roc/train/meanmin-knn_val.csv").rfind("fpr,tpr\n", 0), 0u);
}

TEST(Experiment, MissingDataFileIsAConfigError) {
  const ExperimentConfig c = parse_config(
      R"({"dataset": {"train": "/nonexistent/a.csv", "validation": "b.csv", "test": "c.csv"}})");
  EXPECT_THROW(run_experiment(c), ConfigError);
}

// --- command line -----------------------------------------------------------

int run_cli(const std::string& args) {
  const int status = std::system((std::string(MILKIT_BINARY) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  const auto p = dir.path();
  std::ofstream(p / "ok.json") << config_with(R"(["meanmin-knn"])", R"("output_dir": "out")");
  std::ofstream(p / "bad.json") << config_with(R"(["meanmin-knn"])", R"("colour": "red")");
  std::ofstream(p / "partial.json") << config_with(R"([{"name": "meanmin-knn", "grid": {"k": [1000]}}, "meanmin-svm"])",
                                                   R"("output_dir": "out2")");
  EXPECT_EQ(run_cli("list"), 0);
  EXPECT_EQ(run_cli("run " + (p / "ok.json").string()), 0);
  EXPECT_TRUE(std::filesystem::exists(p / "out/results.txt"));
  EXPECT_EQ(run_cli("run " + (p / "bad.json").string()), 1);
  EXPECT_EQ(run_cli("run " + (p / "missing.json").string()), 1);
  EXPECT_EQ(run_cli("run " + (p / "partial.json").string()), 2);
  EXPECT_EQ(run_cli("frobnicate"), 1);
}

TEST(Cli, RunTwiceIsByteIdentical) {
  TempDir dir;
  const auto p = dir.path();
  std::ofstream(p / "exp.json") << config_with(R"(["simplemil-logistic", "citation-knn"])");
  ASSERT_EQ(run_cli("run " + (p / "exp.json").string() + " -o " + (p / "a").string()), 0);
  ASSERT_EQ(run_cli("run " + (p / "exp.json").string() + " -o " + (p / "b").string() + " --workers 2"), 0);
  EXPECT_EQ(read_file(p / "a/results.txt"), read_file(p / "b/results.txt"));
  EXPECT_EQ(read_file(p / "a/results.json"), read_file(p / "b/results.json"));
  ASSERT_EQ(run_cli("run " + (p / "exp.json").string() + " -o " + (p / "c").string() + " --seed 4"), 0);
  EXPECT_NE(read_file(p / "a/results.txt"), read_file(p / "c/results.txt"));
}

TEST(Cli, GenThenDist) {
  TempDir dir;
  const auto p = dir.path();
  std::ofstream(p / "spec.json") << R"({"kind": "concept", "dim": 3, "bags_per_class": 3, "instances_per_bag": 4,
                                         "seed": 5})";
  ASSERT_EQ(run_cli("gen " + (p / "spec.json").string() + " -o " + (p / "data").string()), 0);
  for (const char* f : {"train.csv", "validation.csv", "test.csv", "train_instances.csv", "spec.json"}) {
    EXPECT_TRUE(std::filesystem::exists(p / "data" / f)) << f;
  }
  ASSERT_EQ(run_cli("dist " + (p / "data/train.csv").string() + " --measure emd -o " + (p / "m.csv").string()), 0);
  const std::string csv = read_file(p / "m.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);  // header + 6 bags
  EXPECT_EQ(run_cli("dist " + (p / "data/train.csv").string() + " --measure cosine -o " + (p / "m.csv").string()), 1);
  EXPECT_EQ(run_cli("gen " + (p / "nope.json").string() + " -o " + (p / "x").string()), 1);
}

}  // namespace
}  // namespace milkit

namespace milkit {
namespace {

TEST(Experiment, DefaultSuiteFlagsMeanInstOnDistributionData) {
  int flagged = 0;
  for (int seed = 0; seed < 10; ++seed) {
    ExperimentConfig c = parse_config(R"({"subsample_repeats": 3, "dataset": {"generate": {"kind": "distribution",
        "dim": 10, "bags_per_class": 15, "instances_per_bag": 10}}})");
    c.seed = static_cast<std::uint64_t>(seed);
    const ExperimentResult r = run_experiment(c);
    ASSERT_FALSE(r.any_failed()) << format_table(r);
    for (const ResultRow& row : r.blocks[0].rows) {
      if (row.name == "mean-inst") flagged += row.best_test;
    }
  }
  EXPECT_GE(flagged, 6);
}

}  // namespace
}  // namespace milkit
