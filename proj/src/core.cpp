#include "milkit/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <unordered_set>

namespace milkit {

std::string to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::Train: return "train";
    case SplitTag::TrainSub: return "train_sub";
    case SplitTag::Validation: return "validation";
    case SplitTag::Test: return "test";
    case SplitTag::Unsplit: return "unsplit";
  }
  return "unsplit";
}

SplitTag split_tag_from_string(const std::string& s) {
  if (s == "train") return SplitTag::Train;
  if (s == "train_sub") return SplitTag::TrainSub;
  if (s == "validation") return SplitTag::Validation;
  if (s == "test") return SplitTag::Test;
  if (s == "unsplit") return SplitTag::Unsplit;
  throw Error("unknown split tag '" + s + "'");
}

MILDataset::MILDataset(std::vector<Bag> bags, std::size_t dim, SplitTag tag)
    : bags_(std::move(bags)), dim_(dim), tag_(tag) {
  if (dim_ == 0) throw Error("dataset dimension must be positive");
  std::unordered_set<std::string> ids;
  for (const Bag& bag : bags_) {
    if (!ids.insert(bag.id).second) throw Error("duplicate bag id '" + bag.id + "'");
    if (bag.instances.empty()) throw Error("bag '" + bag.id + "' has no instances");
    for (const Instance& x : bag.instances) {
      if (x.size() != dim_) {
        throw Error("bag '" + bag.id + "': instance dimension " + std::to_string(x.size()) +
                    " != dataset dimension " + std::to_string(dim_));
      }
      for (double v : x) {
        if (!std::isfinite(v)) throw Error("bag '" + bag.id + "': non-finite feature value");
      }
    }
  }
}

MILDataset MILDataset::from_bags(std::vector<Bag> bags, SplitTag tag) {
  if (bags.empty() || bags.front().instances.empty()) {
    throw Error("cannot infer dimension from an empty bag list");
  }
  const std::size_t d = bags.front().instances.front().size();
  return MILDataset(std::move(bags), d, tag);
}

MILDataset MILDataset::with_split(SplitTag tag) const {
  MILDataset out = *this;
  out.tag_ = tag;
  return out;
}

std::size_t MILDataset::count(Label label) const {
  return static_cast<std::size_t>(std::count_if(
      bags_.begin(), bags_.end(), [&](const Bag& b) { return b.label == label; }));
}

std::size_t MILDataset::total_instances() const {
  return std::accumulate(bags_.begin(), bags_.end(), std::size_t{0},
                         [](std::size_t acc, const Bag& b) { return acc + b.size(); });
}

bool MILDataset::all_labeled() const {
  return std::all_of(bags_.begin(), bags_.end(), [](const Bag& b) { return b.label.has_value(); });
}

ScoreRatio::ScoreRatio(double odds) {
  if (std::isnan(odds) || odds < 0.0) throw Error("score ratio must be a nonnegative number");
  value_ = std::min(odds, std::numeric_limits<double>::max());
}

ScoreRatio ScoreRatio::from_probability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw Error("probability outside [0,1]");
  if (p == 1.0) return ScoreRatio(std::numeric_limits<double>::infinity());
  return ScoreRatio(p / (1.0 - p));
}

ScoreRatio ScoreRatio::from_log_odds(double log_odds) {
  if (std::isnan(log_odds)) throw Error("log odds is NaN");
  return ScoreRatio(std::exp(log_odds));
}

double ScoreRatio::log_odds() const { return std::log(value_); }

double ScoreRatio::probability() const {
  if (saturated()) return 1.0;
  return value_ / (1.0 + value_);
}

bool ScoreRatio::saturated() const { return value_ == std::numeric_limits<double>::max(); }

MILDataset split_subsample(const MILDataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error("subsample fraction must lie in (0,1]");

  std::vector<std::size_t> positives, negatives, unlabeled;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& label = ds[i].label;
    if (!label) unlabeled.push_back(i);
    else if (is_positive(*label)) positives.push_back(i);
    else negatives.push_back(i);
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> keep;
  for (auto* stratum : {&positives, &negatives, &unlabeled}) {
    const auto take = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(stratum->size())));
    std::shuffle(stratum->begin(), stratum->end(), rng);
    keep.insert(keep.end(), stratum->begin(), stratum->begin() + static_cast<std::ptrdiff_t>(take));
  }
  if (keep.empty()) throw Error("subsample is empty; increase the fraction");
  std::sort(keep.begin(), keep.end());

  std::vector<Bag> bags;
  bags.reserve(keep.size());
  for (std::size_t i : keep) bags.push_back(ds[i]);
  return MILDataset(std::move(bags), ds.dim(), ds.split());
}

}  // namespace milkit
