#include "milkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace milkit {

namespace {

constexpr double kNormalPeakBin = 24.0;
constexpr double kWitnessPeakBin = 12.0;
constexpr double kHistogramConcentration = 60.0;

std::vector<double> histogram_mean_shape(double peak, double width) {
  std::vector<double> m(kHistogramBins);
  for (std::size_t b = 0; b < kHistogramBins; ++b) {
    const double t = (static_cast<double>(b) - peak) / width;
    m[b] = std::exp(-0.5 * t * t) + 1e-3;
  }
  const double total = std::accumulate(m.begin(), m.end(), 0.0);
  for (double& v : m) v /= total;
  return m;
}

void append_dirichlet(std::mt19937_64& rng, const std::vector<double>& mean, Instance& out) {
  std::vector<double> draw(mean.size());
  double total = 0.0;
  for (std::size_t b = 0; b < mean.size(); ++b) {
    std::gamma_distribution<double> gamma(kHistogramConcentration * mean[b], 1.0);
    draw[b] = gamma(rng);
    total += draw[b];
  }
  for (double v : draw) out.push_back(v / total);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

std::string to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::Concept: return "concept";
    case GeneratorKind::Distribution: return "distribution";
    case GeneratorKind::Histogram: return "histogram";
  }
  return "concept";
}

GeneratorKind generator_kind_from_string(const std::string& s) {
  if (s == "concept") return GeneratorKind::Concept;
  if (s == "distribution") return GeneratorKind::Distribution;
  if (s == "histogram") return GeneratorKind::Histogram;
  throw Error("unknown generator kind '" + s + "'");
}

void GeneratorSpec::validate() const {
  if (dim == 0 || bags_per_class == 0 || instances_per_bag == 0) {
    throw Error("generator counts (dim, bags_per_class, instances_per_bag) must be positive");
  }
  if (!(witness_rate > 0.0 && witness_rate <= 1.0)) throw Error("witness_rate must lie in (0, 1]");
  if (!(sigma > 0.0)) throw Error("sigma must be positive");
  if (!(shift >= 0.0)) throw Error("shift must be nonnegative");
  if (!(concept_distance >= 0.0)) throw Error("concept_distance must be nonnegative");
  if (kind == GeneratorKind::Histogram && dim % kHistogramBins != 0) {
    throw Error("histogram kind needs dim to be a multiple of 41");
  }
  if (kind == GeneratorKind::Concept && match_means &&
      static_cast<std::size_t>(std::ceil(witness_rate * instances_per_bag)) >= instances_per_bag) {
    throw Error("match_means needs at least one non-witness instance per positive bag");
  }
}

std::vector<double> signal_direction(std::size_t dim) {
  return std::vector<double>(dim, 1.0 / std::sqrt(static_cast<double>(dim)));
}

GeneratedData generate(const GeneratorSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  const std::size_t d = spec.dim;
  const std::size_t n = spec.instances_per_bag;
  const auto witnesses =
      static_cast<std::size_t>(std::ceil(spec.witness_rate * static_cast<double>(n) - 1e-12));
  const std::vector<double> u = signal_direction(d);

  GeneratedData out;
  std::vector<double> positive_background(d, 0.0);
  if (spec.kind == GeneratorKind::Concept) {
    out.concept_center.resize(d);
    for (std::size_t j = 0; j < d; ++j) out.concept_center[j] = spec.concept_distance * spec.sigma * u[j];
    if (spec.match_means) {
      const double factor = static_cast<double>(witnesses) / static_cast<double>(n - witnesses);
      for (std::size_t j = 0; j < d; ++j) positive_background[j] = -factor * out.concept_center[j];
    }
  } else if (spec.kind == GeneratorKind::Distribution) {
    for (std::size_t j = 0; j < d; ++j) positive_background[j] = spec.shift * spec.sigma * u[j];
  }

  auto gaussian = [&](const std::vector<double>& mean) {
    Instance x(d);
    for (std::size_t j = 0; j < d; ++j) x[j] = mean[j] + spec.sigma * normal(rng);
    return x;
  };
  const std::vector<double> zero(d, 0.0);

  const double width = 3.0 * spec.sigma;
  const auto normal_shape = histogram_mean_shape(kNormalPeakBin, width);
  const auto witness_shape = histogram_mean_shape(kWitnessPeakBin, width);
  const auto shifted_shape = histogram_mean_shape(kNormalPeakBin - spec.shift * width, width);
  auto histogram = [&](const std::vector<double>& shape) {
    Instance x;
    x.reserve(d);
    for (std::size_t block = 0; block < d / kHistogramBins; ++block) append_dirichlet(rng, shape, x);
    return x;
  };

  std::vector<Bag> bags;
  bags.reserve(2 * spec.bags_per_class);
  for (std::size_t i = 0; i < 2 * spec.bags_per_class; ++i) {
    // Classes alternate so any prefix of the dataset is balanced.
    const Label label = i % 2 == 0 ? Label::Positive : Label::Negative;
    Bag bag{spec.id_prefix + std::to_string(i), {}, label};
    std::vector<int> z(n, -1);
    for (std::size_t k = 0; k < n; ++k) {
      const bool witness = label == Label::Positive && k < witnesses && spec.kind != GeneratorKind::Distribution;
      if (witness) z[k] = 1;
      switch (spec.kind) {
        case GeneratorKind::Concept:
          bag.instances.push_back(witness ? gaussian(out.concept_center)
                                          : gaussian(label == Label::Positive ? positive_background : zero));
          break;
        case GeneratorKind::Distribution:
          bag.instances.push_back(gaussian(label == Label::Positive ? positive_background : zero));
          break;
        case GeneratorKind::Histogram:
          bag.instances.push_back(histogram(witness ? witness_shape
                                                    : (label == Label::Positive ? shifted_shape : normal_shape)));
          break;
      }
    }
    // Witnesses are not always the leading instances.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    Bag shuffled{bag.id, {}, bag.label};
    std::vector<int> z_shuffled(n);
    for (std::size_t k = 0; k < n; ++k) {
      shuffled.instances.push_back(std::move(bag.instances[order[k]]));
      z_shuffled[k] = z[order[k]];
    }
    bags.push_back(std::move(shuffled));
    out.truth.z.push_back(std::move(z_shuffled));
  }
  out.dataset = MILDataset(std::move(bags), d);
  return out;
}

GeneratedSplits generate_splits(const GeneratorSpec& spec) {
  auto draw = [&](std::uint64_t salt, const char* prefix, SplitTag tag) {
    GeneratorSpec s = spec;
    s.seed = mix_seed(spec.seed, salt);
    s.id_prefix = std::string(prefix) + spec.id_prefix;
    GeneratedData g = generate(s);
    g.dataset = g.dataset.with_split(tag);
    return g;
  };
  return GeneratedSplits{draw(0, "tr-", SplitTag::Train), draw(1, "va-", SplitTag::Validation),
                         draw(2, "te-", SplitTag::Test)};
}

double histogram_mean_bin(std::span<const double> block) {
  double total = 0.0, weighted = 0.0;
  for (std::size_t b = 0; b < block.size(); ++b) {
    total += block[b];
    weighted += static_cast<double>(b) * block[b];
  }
  return weighted / total;
}

void write_instance_labels(const std::filesystem::path& path, const MILDataset& ds,
                           const InstanceLabels& labels) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "bag_id,instance_index,z\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t k = 0; k < labels.z[i].size(); ++k) {
      out << ds[i].id << ',' << k << ',' << labels.z[i][k] << '\n';
    }
  }
}

GeneratorSpec generator_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error("generator spec must be a JSON object");
  GeneratorSpec s;
  static const std::vector<std::string> known{"kind", "dim", "bags_per_class", "instances_per_bag",
                                              "witness_rate", "shift", "sigma", "concept_distance",
                                              "match_means", "seed", "id_prefix"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw Error("generator spec: unknown field '" + key + "'");
    }
  }
  try {
    if (j.contains("kind")) s.kind = generator_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("dim")) s.dim = j.at("dim").get<std::size_t>();
    if (j.contains("bags_per_class")) s.bags_per_class = j.at("bags_per_class").get<std::size_t>();
    if (j.contains("instances_per_bag")) s.instances_per_bag = j.at("instances_per_bag").get<std::size_t>();
    if (j.contains("witness_rate")) s.witness_rate = j.at("witness_rate").get<double>();
    if (j.contains("shift")) s.shift = j.at("shift").get<double>();
    if (j.contains("sigma")) s.sigma = j.at("sigma").get<double>();
    if (j.contains("concept_distance")) s.concept_distance = j.at("concept_distance").get<double>();
    if (j.contains("match_means")) s.match_means = j.at("match_means").get<bool>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("id_prefix")) s.id_prefix = j.at("id_prefix").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("generator spec: ") + e.what());
  }
  s.validate();
  return s;
}

nlohmann::ordered_json generator_spec_to_json(const GeneratorSpec& s) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(s.kind);
  j["dim"] = s.dim;
  j["bags_per_class"] = s.bags_per_class;
  j["instances_per_bag"] = s.instances_per_bag;
  j["witness_rate"] = s.witness_rate;
  j["shift"] = s.shift;
  j["sigma"] = s.sigma;
  j["concept_distance"] = s.concept_distance;
  j["match_means"] = s.match_means;
  j["seed"] = s.seed;
  j["id_prefix"] = s.id_prefix;
  return j;
}

}  // namespace milkit
