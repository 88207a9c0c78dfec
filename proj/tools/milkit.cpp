#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "milkit/bag_metrics.hpp"
#include "milkit/experiment.hpp"
#include "milkit/registry.hpp"
#include "milkit/synth.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kPartialFailure = 2;

/// MILKIT_WORKERS, if set to a positive integer.
std::optional<std::size_t> env_workers() {
  const char* raw = std::getenv("MILKIT_WORKERS");
  if (!raw || !*raw) return std::nullopt;
  char* end = nullptr;
  const long long v = std::strtoll(raw, &end, 10);
  if (*end != '\0' || v < 1) throw milkit::ConfigError("MILKIT_WORKERS must be a positive integer, got '" + std::string(raw) + "'");
  return static_cast<std::size_t>(v);
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, std::optional<std::string> output_dir,
            std::optional<std::size_t> workers, bool quiet) {
  milkit::ExperimentConfig config;
  try {
    config = milkit::load_config(config_path);
    if (const auto w = env_workers()) config.workers = *w;
  } catch (const milkit::Error& e) {
    std::cerr << "milkit: " << e.what() << '\n';
    return kConfigError;
  }
  if (seed) config.seed = *seed;
  if (output_dir) config.output_dir = *output_dir;
  if (workers) {
    if (*workers == 0) {
      std::cerr << "milkit: --workers must be >= 1\n";
      return kConfigError;
    }
    config.workers = *workers;
  }

  milkit::ExperimentResult result;
  try {
    result = milkit::run_experiment(config, quiet ? nullptr : &std::cerr);
  } catch (const milkit::ConfigError& e) {
    std::cerr << "milkit: " << e.what() << '\n';
    return kConfigError;
  }
  try {
    milkit::write_artifacts(result, config, config.output_dir);
  } catch (const std::exception& e) {
    std::cerr << "milkit: " << e.what() << '\n';
    return kConfigError;
  }
  std::cout << milkit::format_table(result, config.alpha);
  std::cout << "results written to " << config.output_dir.string() << '\n';
  return result.any_failed() ? kPartialFailure : kOk;
}

int cmd_list() {
  for (const std::string& line : milkit::list_classifiers()) std::cout << line << '\n';
  return kOk;
}

int cmd_gen(const std::string& spec_path, const std::string& out, const std::string& format_name) {
  namespace fs = std::filesystem;
  milkit::GeneratorSpec spec;
  try {
    std::ifstream in(spec_path);
    if (!in) throw milkit::ConfigError("cannot open spec '" + spec_path + "'");
    spec = milkit::generator_spec_from_json(nlohmann::json::parse(in));
    spec.validate();
  } catch (const std::exception& e) {
    std::cerr << "milkit: " << spec_path << ": " << e.what() << '\n';
    return kConfigError;
  }
  const milkit::FileFormat format = format_name == "jsonl" ? milkit::FileFormat::Jsonl : milkit::FileFormat::Csv;
  const std::string ext = format_name == "jsonl" ? ".jsonl" : ".csv";
  try {
    const milkit::GeneratedSplits splits = milkit::generate_splits(spec);
    fs::create_directories(out);
    const std::pair<const char*, const milkit::GeneratedData*> parts[] = {
        {"train", &splits.train}, {"validation", &splits.validation}, {"test", &splits.test}};
    for (const auto& [name, data] : parts) {
      milkit::save_dataset(data->dataset, fs::path(out) / (std::string(name) + ext), format);
      milkit::write_instance_labels(fs::path(out) / (std::string(name) + "_instances.csv"), data->dataset,
                                    data->truth);
    }
    nlohmann::ordered_json meta = milkit::generator_spec_to_json(spec);
    if (!splits.train.concept_center.empty()) meta["concept_center"] = splits.train.concept_center;
    std::ofstream(fs::path(out) / "spec.json") << meta.dump(2) << '\n';
  } catch (const std::exception& e) {
    std::cerr << "milkit: " << e.what() << '\n';
    return kConfigError;
  }
  std::cout << "wrote train, validation and test splits (" << ext << ") to " << out << '\n';
  return kOk;
}

int cmd_dist(const std::string& bags_path, const std::string& measure_name, const std::string& out,
             std::optional<std::size_t> workers) {
  try {
    const milkit::BagMeasure measure = milkit::bag_measure_from_string(measure_name);
    const milkit::MILDataset ds = milkit::load_dataset(bags_path, milkit::format_from_path(bags_path));
    std::size_t w = workers.value_or(env_workers().value_or(1));
    if (w == 0) w = 1;
    const milkit::DistanceMatrix m = milkit::pairwise_matrix(ds.bags(), ds.bags(), measure, w);
    milkit::write_distance_csv(m, out);
  } catch (const std::exception& e) {
    std::cerr << "milkit: " << e.what() << '\n';
    return kConfigError;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"milkit: multiple-instance learning benchmark toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::size_t> workers;
  bool quiet = false;
  CLI::App* run = app.add_subcommand("run", "Run an experiment config and print the results table");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--seed", seed, "Override the config seed");
  run->add_option("-o,--output-dir", output_dir, "Override the output directory");
  run->add_option("-j,--workers", workers, "Concurrent classifier rows (overrides MILKIT_WORKERS)");
  run->add_flag("-q,--quiet", quiet, "No progress on stderr");

  app.add_subcommand("list", "List classifiers and their default grids");

  std::string spec_path;
  std::string gen_out;
  std::string gen_format = "csv";
  CLI::App* gen = app.add_subcommand("gen", "Generate train/validation/test splits from a generator spec");
  gen->add_option("spec", spec_path, "Generator spec (JSON)")->required();
  gen->add_option("-o,--output", gen_out, "Output directory")->required();
  gen->add_option("--format", gen_format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));

  std::string bags_path;
  std::string measure = "emd";
  std::string dist_out;
  std::optional<std::size_t> dist_workers;
  CLI::App* dist = app.add_subcommand("dist", "Pairwise bag distance matrix");
  dist->add_option("bags", bags_path, "Bag file (csv or jsonl)")->required();
  dist->add_option("--measure", measure, "meanmin, emd or hausdorff")
      ->check(CLI::IsMember({"meanmin", "emd", "hausdorff"}));
  dist->add_option("-o,--output", dist_out, "Output CSV")->required();
  dist->add_option("-j,--workers", dist_workers, "Worker threads (overrides MILKIT_WORKERS)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (run->parsed()) return cmd_run(config_path, seed, output_dir, workers, quiet);
    if (gen->parsed()) return cmd_gen(spec_path, gen_out, gen_format);
    if (dist->parsed()) return cmd_dist(bags_path, measure, dist_out, dist_workers);
    return cmd_list();
  } catch (const std::exception& e) {
    std::cerr << "milkit: " << e.what() << '\n';
    return kConfigError;
  }
}
