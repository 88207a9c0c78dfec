#ifndef MILKIT_MODEL_HPP
#define MILKIT_MODEL_HPP

#include <initializer_list>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "milkit/core.hpp"

namespace milkit {

/// A fitted bag classifier. Implementations are immutable after training and
/// safe to score from several threads.
class TrainedModel {
 public:
  virtual ~TrainedModel() = default;
  virtual ScoreRatio score(const Bag& bag) const = 0;
  virtual std::string describe() const = 0;

  std::vector<ScoreRatio> score_all(const MILDataset& ds) const;
};

using ModelPtr = std::shared_ptr<const TrainedModel>;

/// One point of a hyperparameter grid: named values in declaration order.
class HyperPoint {
 public:
  HyperPoint() = default;
  HyperPoint(std::initializer_list<std::pair<std::string, double>> values) : values_(values) {}

  void set(const std::string& name, double value);
  bool has(const std::string& name) const;
  double get(const std::string& name) const;
  double get_or(const std::string& name, double fallback) const;
  const std::vector<std::pair<std::string, double>>& values() const { return values_; }
  std::string to_string() const;

  friend bool operator==(const HyperPoint&, const HyperPoint&) = default;

 private:
  std::vector<std::pair<std::string, double>> values_;
};

struct GridAxis {
  std::string name;
  std::vector<double> values;
};

/// Cartesian product; the first axis varies slowest.
std::vector<HyperPoint> make_grid(const std::vector<GridAxis>& axes);

}  // namespace milkit

#endif  // MILKIT_MODEL_HPP
