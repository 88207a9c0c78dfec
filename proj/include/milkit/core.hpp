#ifndef MILKIT_CORE_HPP
#define MILKIT_CORE_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace milkit {

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the 1-based line number of the offending row.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class Label : int { Negative = -1, Positive = 1 };

inline int to_int(Label l) { return static_cast<int>(l); }
inline bool is_positive(Label l) { return l == Label::Positive; }

using Instance = std::vector<double>;

struct Bag {
  std::string id;
  std::vector<Instance> instances;
  std::optional<Label> label;

  std::size_t size() const { return instances.size(); }
  std::size_t dim() const { return instances.empty() ? 0 : instances.front().size(); }

  friend bool operator==(const Bag&, const Bag&) = default;
};

enum class SplitTag { Train, TrainSub, Validation, Test, Unsplit };

std::string to_string(SplitTag tag);
SplitTag split_tag_from_string(const std::string& s);

/// Immutable, validated collection of bags sharing one feature dimension.
///
/// Construction checks that every bag is nonempty, every instance has the
/// dataset dimension and finite entries, and bag ids are unique.
class MILDataset {
 public:
  MILDataset() = default;
  MILDataset(std::vector<Bag> bags, std::size_t dim, SplitTag tag = SplitTag::Unsplit);

  /// Infers the dimension from the first instance; an empty bag list needs
  /// the explicit-dimension constructor.
  static MILDataset from_bags(std::vector<Bag> bags, SplitTag tag = SplitTag::Unsplit);

  const std::vector<Bag>& bags() const { return bags_; }
  const Bag& operator[](std::size_t i) const { return bags_[i]; }
  std::size_t size() const { return bags_.size(); }
  bool empty() const { return bags_.empty(); }
  std::size_t dim() const { return dim_; }
  SplitTag split() const { return tag_; }

  MILDataset with_split(SplitTag tag) const;

  std::size_t count(Label label) const;
  std::size_t total_instances() const;
  bool all_labeled() const;

  friend bool operator==(const MILDataset&, const MILDataset&) = default;

 private:
  std::vector<Bag> bags_;
  std::size_t dim_ = 0;
  SplitTag tag_ = SplitTag::Unsplit;
};

/// Bag-level posterior odds p(y=1|B)/p(y=-1|B).
///
/// Overflowing odds saturate at the largest finite double and report
/// saturated() == true; ordering stays usable for ranking.
class ScoreRatio {
 public:
  ScoreRatio() = default;
  explicit ScoreRatio(double odds);

  static ScoreRatio from_probability(double p);
  static ScoreRatio from_log_odds(double log_odds);

  double value() const { return value_; }
  double log_odds() const;
  double probability() const;
  bool saturated() const;

  friend auto operator<=>(const ScoreRatio&, const ScoreRatio&) = default;

 private:
  double value_ = 1.0;
};

/// Shortest form that round-trips (17 significant digits, %g style).
std::string format_double(double v);

enum class FileFormat { Csv, Jsonl };

FileFormat format_from_path(const std::filesystem::path& path);

MILDataset load_dataset(const std::filesystem::path& path, FileFormat format);
void save_dataset(const MILDataset& ds, const std::filesystem::path& path, FileFormat format);

/// Stratified bag-level subsample without replacement.
///
/// Each label stratum (positive, negative, unlabeled) keeps
/// round(fraction * stratum size) bags; bag order of the source is kept.
MILDataset split_subsample(const MILDataset& ds, double fraction, std::uint64_t seed);

}  // namespace milkit

#endif  // MILKIT_CORE_HPP
