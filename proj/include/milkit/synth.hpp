#ifndef MILKIT_SYNTH_HPP
#define MILKIT_SYNTH_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "milkit/core.hpp"

namespace milkit {

enum class GeneratorKind {
  /// Positive bags hold witness draws around a planted concept center.
  Concept,
  /// Every instance of a positive bag comes from a shifted background.
  Distribution,
  /// Instances are concatenated 41-bin histograms; witnesses are left-skewed.
  Histogram,
};

std::string to_string(GeneratorKind kind);
GeneratorKind generator_kind_from_string(const std::string& s);

inline constexpr std::size_t kHistogramBins = 41;

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::Concept;
  std::size_t dim = 20;
  std::size_t bags_per_class = 100;
  std::size_t instances_per_bag = 50;
  /// Fraction of a positive bag's instances replaced by witnesses (concept and
  /// histogram kinds); the count is rounded up.
  double witness_rate = 0.1;
  /// Euclidean length of the positive-class mean shift, in units of sigma
  /// (distribution kind). For histogram kind: shift of the non-witness
  /// histogram peak in positive bags, in units of the peak width.
  double shift = 0.5;
  double sigma = 1.0;
  /// Distance of the concept center from the background mean, in sigma.
  double concept_distance = 4.0;
  /// Concept kind: offset the non-witness instances of positive bags so both
  /// classes have the same expected bag mean.
  bool match_means = false;
  std::uint64_t seed = 0;
  std::string id_prefix = "bag";

  void validate() const;
};

/// Ground-truth instance labels (+1 witness / -1 otherwise), per bag.
struct InstanceLabels {
  std::vector<std::vector<int>> z;
};

struct GeneratedData {
  MILDataset dataset;
  InstanceLabels truth;
  /// Planted concept center (concept kind); empty otherwise.
  std::vector<double> concept_center;
};

GeneratedData generate(const GeneratorSpec& spec);

/// Unit direction along which concept centers and distribution shifts lie.
std::vector<double> signal_direction(std::size_t dim);

struct GeneratedSplits {
  GeneratedData train;
  GeneratedData validation;
  GeneratedData test;
};

/// Three independent draws of `spec` with disjoint bag ids ("tr-", "va-",
/// "te-" prefixes) and distinct derived seeds.
GeneratedSplits generate_splits(const GeneratorSpec& spec);

/// Mean bin index of one histogram block.
double histogram_mean_bin(std::span<const double> block);

void write_instance_labels(const std::filesystem::path& path, const MILDataset& ds,
                           const InstanceLabels& labels);

GeneratorSpec generator_spec_from_json(const nlohmann::json& j);
nlohmann::ordered_json generator_spec_to_json(const GeneratorSpec& spec);

}  // namespace milkit

#endif  // MILKIT_SYNTH_HPP
