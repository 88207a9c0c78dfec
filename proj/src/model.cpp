#include "milkit/model.hpp"

#include <algorithm>
#include <sstream>

namespace milkit {

std::vector<ScoreRatio> TrainedModel::score_all(const MILDataset& ds) const {
  std::vector<ScoreRatio> out;
  out.reserve(ds.size());
  for (const Bag& bag : ds.bags()) out.push_back(score(bag));
  return out;
}

void HyperPoint::set(const std::string& name, double value) {
  for (auto& [k, v] : values_) {
    if (k == name) {
      v = value;
      return;
    }
  }
  values_.emplace_back(name, value);
}

bool HyperPoint::has(const std::string& name) const {
  return std::any_of(values_.begin(), values_.end(), [&](const auto& kv) { return kv.first == name; });
}

double HyperPoint::get(const std::string& name) const {
  for (const auto& [k, v] : values_) {
    if (k == name) return v;
  }
  throw Error("hyperparameter '" + name + "' missing from grid point " + to_string());
}

double HyperPoint::get_or(const std::string& name, double fallback) const {
  return has(name) ? get(name) : fallback;
}

std::string HyperPoint::to_string() const {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < values_.size(); ++i) {
    os << (i ? ", " : "") << values_[i].first << '=' << values_[i].second;
  }
  os << '}';
  return os.str();
}

std::vector<HyperPoint> make_grid(const std::vector<GridAxis>& axes) {
  std::vector<HyperPoint> grid{HyperPoint{}};
  for (const GridAxis& axis : axes) {
    if (axis.values.empty()) throw Error("grid axis '" + axis.name + "' has no values");
    std::vector<HyperPoint> next;
    for (const HyperPoint& p : grid) {
      for (double v : axis.values) {
        HyperPoint q = p;
        q.set(axis.name, v);
        next.push_back(std::move(q));
      }
    }
    grid = std::move(next);
  }
  return grid;
}

}  // namespace milkit
