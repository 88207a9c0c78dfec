#include "milkit/bag_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "milkit/parallel.hpp"

namespace milkit {

std::string to_string(BagMeasure m) {
  switch (m) {
    case BagMeasure::MeanMin: return "meanmin";
    case BagMeasure::Emd: return "emd";
    case BagMeasure::Hausdorff: return "hausdorff";
  }
  throw Error("unknown bag measure");
}

BagMeasure bag_measure_from_string(const std::string& s) {
  if (s == "meanmin") return BagMeasure::MeanMin;
  if (s == "emd") return BagMeasure::Emd;
  if (s == "hausdorff") return BagMeasure::Hausdorff;
  throw Error("unknown bag measure '" + s + "' (expected meanmin, emd or hausdorff)");
}

bool is_symmetric(BagMeasure m) { return m != BagMeasure::MeanMin; }

namespace {

double squared_distance(const Instance& a, const Instance& b) {
  double s = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double r = a[j] - b[j];
    s += r * r;
  }
  return s;
}

void check_pair(const Bag& a, const Bag& b) {
  if (a.instances.empty() || b.instances.empty()) throw Error("bag distance needs nonempty bags");
  if (a.dim() != b.dim()) {
    throw Error("bag dimension mismatch: '" + a.id + "' has " + std::to_string(a.dim()) + ", '" + b.id + "' has " +
                std::to_string(b.dim()));
  }
}

// Transportation simplex. Row k supplies `cols` units, column l demands
// `rows` units, so every basic flow is an integer and degenerate pivots are
// detected exactly.
class Transport {
 public:
  explicit Transport(const std::vector<std::vector<double>>& cost)
      : m_(cost.size()), n_(cost.empty() ? 0 : cost.front().size()), c_(m_ * n_), where_(m_ * n_, -1) {
    for (std::size_t i = 0; i < m_; ++i) {
      if (cost[i].size() != n_) throw Error("transport cost matrix is ragged");
      for (std::size_t j = 0; j < n_; ++j) {
        const double v = cost[i][j];
        if (!std::isfinite(v)) throw Error("transport cost must be finite");
        c_[i * n_ + j] = v;
        scale_ = std::max(scale_, std::abs(v));
      }
    }
  }

  EmdResult solve() {
    initial_basis();
    const double tol = 1e-12 * std::max(1.0, scale_);
    const std::size_t max_pivots = 50 * m_ * n_ + 1000;
    std::size_t degenerate_streak = 0;
    std::vector<double> u(m_), v(n_);
    for (std::size_t pivot = 0;; ++pivot) {
      if (pivot > max_pivots) throw Error("transport solver exceeded its pivot limit");
      duals(u, v);
      // Dantzig pricing; Bland's rule after a run of degenerate pivots.
      const bool bland = degenerate_streak > m_ + n_;
      std::size_t enter = npos;
      double best = -tol;
      for (std::size_t i = 0; i < m_ && !(bland && enter != npos); ++i) {
        for (std::size_t j = 0; j < n_; ++j) {
          const std::size_t cell = i * n_ + j;
          if (where_[cell] >= 0) continue;
          const double r = c_[cell] - u[i] - v[j];
          if (r < best) {
            best = r;
            enter = cell;
            if (bland) break;
          }
        }
      }
      if (enter == npos) break;
      degenerate_streak = pivot_on(enter) ? 0 : degenerate_streak + 1;
    }

    EmdResult out;
    out.plan.rows = m_;
    out.plan.cols = n_;
    out.plan.flows.assign(m_ * n_, 0.0);
    const double total = static_cast<double>(m_) * static_cast<double>(n_);
    for (const Basic& b : basis_) out.plan.flows[b.cell] = static_cast<double>(b.flow) / total;
    double cost = 0.0;
    for (std::size_t cell = 0; cell < m_ * n_; ++cell) cost += out.plan.flows[cell] * c_[cell];
    out.cost = std::max(0.0, cost);
    return out;
  }

 private:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  struct Basic {
    std::size_t cell;
    long long flow;
  };

  // Least-cost greedy start. Every allocation closes one line (row or
  // column) except the last, which yields m + n - 1 cells forming a tree.
  void initial_basis() {
    std::vector<long long> supply(m_, static_cast<long long>(n_)), demand(n_, static_cast<long long>(m_));
    std::vector<bool> row_open(m_, true), col_open(n_, true);
    std::size_t rows_left = m_, cols_left = n_;
    std::vector<std::size_t> order(m_ * n_);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return c_[a] < c_[b]; });
    for (std::size_t cell : order) {
      const std::size_t i = cell / n_, j = cell % n_;
      if (!row_open[i] || !col_open[j]) continue;
      const long long f = std::min(supply[i], demand[j]);
      supply[i] -= f;
      demand[j] -= f;
      add_basic(cell, f);
      if (rows_left == 1 && cols_left == 1) break;
      if (supply[i] == 0 && (demand[j] > 0 || rows_left > 1)) {
        row_open[i] = false;
        --rows_left;
      } else {
        col_open[j] = false;
        --cols_left;
      }
    }
    if (basis_.size() != m_ + n_ - 1) throw Error("transport solver built an invalid starting basis");
  }

  void add_basic(std::size_t cell, long long flow) {
    where_[cell] = static_cast<long>(basis_.size());
    basis_.push_back({cell, flow});
  }

  // Tree adjacency over nodes: rows 0..m-1, columns m..m+n-1.
  void build_adjacency() {
    adj_.assign(m_ + n_, {});
    for (std::size_t b = 0; b < basis_.size(); ++b) {
      const std::size_t i = basis_[b].cell / n_, j = basis_[b].cell % n_;
      adj_[i].push_back(b);
      adj_[m_ + j].push_back(b);
    }
  }

  std::size_t other_end(std::size_t node, std::size_t b) const {
    const std::size_t i = basis_[b].cell / n_, j = basis_[b].cell % n_;
    return node == i ? m_ + j : i;
  }

  void duals(std::vector<double>& u, std::vector<double>& v) {
    build_adjacency();
    std::vector<bool> seen(m_ + n_, false);
    std::vector<std::size_t> queue{0};
    seen[0] = true;
    u[0] = 0.0;
    for (std::size_t q = 0; q < queue.size(); ++q) {
      const std::size_t node = queue[q];
      for (std::size_t b : adj_[node]) {
        const std::size_t next = other_end(node, b);
        if (seen[next]) continue;
        seen[next] = true;
        const double c = c_[basis_[b].cell];
        if (next >= m_) v[next - m_] = c - u[node];
        else u[next] = c - v[node - m_];
        queue.push_back(next);
      }
    }
    if (queue.size() != m_ + n_) throw Error("transport basis is not a spanning tree");
  }

  // Returns true when the pivot moved a positive amount of flow.
  bool pivot_on(std::size_t enter) {
    const std::size_t ei = enter / n_, ej = enter % n_;
    // Tree path from the entering column to the entering row.
    std::vector<std::size_t> parent_edge(m_ + n_, npos);
    std::vector<bool> seen(m_ + n_, false);
    std::vector<std::size_t> queue{m_ + ej};
    seen[m_ + ej] = true;
    for (std::size_t q = 0; q < queue.size() && !seen[ei]; ++q) {
      const std::size_t node = queue[q];
      for (std::size_t b : adj_[node]) {
        const std::size_t next = other_end(node, b);
        if (seen[next]) continue;
        seen[next] = true;
        parent_edge[next] = b;
        queue.push_back(next);
      }
    }
    std::vector<std::size_t> path;
    for (std::size_t node = ei; node != m_ + ej;) {
      const std::size_t b = parent_edge[node];
      path.push_back(b);
      node = other_end(node, b);
    }
    std::reverse(path.begin(), path.end());
    // Edges at even positions (counted from the column) lose flow.
    long long theta = std::numeric_limits<long long>::max();
    std::size_t leave = npos;
    for (std::size_t p = 0; p < path.size(); p += 2) {
      const Basic& b = basis_[path[p]];
      if (b.flow < theta || (b.flow == theta && b.cell < basis_[leave].cell)) {
        theta = b.flow;
        leave = path[p];
      }
    }
    for (std::size_t p = 0; p < path.size(); ++p) basis_[path[p]].flow += (p % 2 == 0) ? -theta : theta;
    where_[basis_[leave].cell] = -1;
    basis_[leave] = {enter, theta};
    where_[enter] = static_cast<long>(leave);
    return theta > 0;
  }

  std::size_t m_, n_;
  std::vector<double> c_;
  std::vector<long> where_;  // basis slot of each cell, -1 if nonbasic
  std::vector<Basic> basis_;
  std::vector<std::vector<std::size_t>> adj_;
  double scale_ = 0.0;
};

}  // namespace

EmdResult solve_transport(const std::vector<std::vector<double>>& cost) {
  if (cost.empty() || cost.front().empty()) throw Error("transport cost matrix is empty");
  return Transport(cost).solve();
}

double dist_meanmin(const Bag& a, const Bag& b) {
  check_pair(a, b);
  double total = 0.0;
  for (const Instance& x : a.instances) {
    double best = std::numeric_limits<double>::infinity();
    for (const Instance& y : b.instances) best = std::min(best, squared_distance(x, y));
    total += best;
  }
  return total / static_cast<double>(a.size());
}

EmdResult dist_emd(const Bag& a, const Bag& b) {
  check_pair(a, b);
  std::vector<std::vector<double>> cost(a.size(), std::vector<double>(b.size()));
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t l = 0; l < b.size(); ++l) cost[k][l] = squared_distance(a.instances[k], b.instances[l]);
  }
  return solve_transport(cost);
}

double dist_hausdorff(const Bag& a, const Bag& b) {
  check_pair(a, b);
  std::vector<double> col_min(b.size(), std::numeric_limits<double>::infinity());
  double worst = 0.0;
  for (const Instance& x : a.instances) {
    double row_min = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < b.size(); ++l) {
      const double d = squared_distance(x, b.instances[l]);
      row_min = std::min(row_min, d);
      col_min[l] = std::min(col_min[l], d);
    }
    worst = std::max(worst, row_min);
  }
  for (double d : col_min) worst = std::max(worst, d);
  return std::sqrt(worst);
}

double bag_distance(const Bag& a, const Bag& b, BagMeasure m) {
  switch (m) {
    case BagMeasure::MeanMin: return dist_meanmin(a, b);
    case BagMeasure::Emd: return dist_emd(a, b).cost;
    case BagMeasure::Hausdorff: return dist_hausdorff(a, b);
  }
  throw Error("unknown bag measure");
}

DistanceMatrix pairwise_matrix(const std::vector<Bag>& a, const std::vector<Bag>& b, BagMeasure m,
                               std::size_t workers) {
  DistanceMatrix out;
  for (const Bag& x : a) out.row_ids.push_back(x.id);
  for (const Bag& y : b) out.col_ids.push_back(y.id);
  out.values.assign(a.size() * b.size(), 0.0);
  parallel_for(a.size(), workers, [&](std::size_t i) {
    for (std::size_t j = 0; j < b.size(); ++j) out.values[i * b.size() + j] = bag_distance(a[i], b[j], m);
  });
  return out;
}

void write_distance_csv(const DistanceMatrix& matrix, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "bag_id";
  for (const std::string& id : matrix.col_ids) out << ',' << id;
  out << '\n';
  for (std::size_t i = 0; i < matrix.rows(); ++i) {
    out << matrix.row_ids[i];
    for (std::size_t j = 0; j < matrix.cols(); ++j) out << ',' << format_double(matrix.at(i, j));
    out << '\n';
  }
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Citation-kNN

CitationKnnModel::CitationKnnModel(std::vector<Bag> train, std::vector<Label> labels,
                                   std::vector<std::vector<double>> sorted_neighbors, std::size_t k_ref,
                                   std::size_t k_cite)
    : train_(std::move(train)),
      labels_(std::move(labels)),
      sorted_neighbors_(std::move(sorted_neighbors)),
      k_ref_(k_ref),
      k_cite_(k_cite) {}

double CitationKnnModel::positive_fraction(const Bag& bag) const {
  const std::size_t n = train_.size();
  std::vector<double> dq(n);
  for (std::size_t b = 0; b < n; ++b) dq[b] = dist_hausdorff(bag, train_[b]);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k_ref_), order.end(),
                    [&](std::size_t x, std::size_t y) { return dq[x] < dq[y] || (dq[x] == dq[y] && x < y); });
  std::size_t positives = 0, voters = k_ref_;
  for (std::size_t r = 0; r < k_ref_; ++r) positives += is_positive(labels_[order[r]]) ? 1 : 0;

  for (std::size_t b = 0; b < n; ++b) {
    const auto& nb = sorted_neighbors_[b];
    const auto closer = static_cast<std::size_t>(std::upper_bound(nb.begin(), nb.end(), dq[b]) - nb.begin());
    if (closer < k_cite_) {
      ++voters;
      positives += is_positive(labels_[b]) ? 1 : 0;
    }
  }
  return static_cast<double>(positives) / static_cast<double>(voters);
}

ScoreRatio CitationKnnModel::score(const Bag& bag) const {
  return ScoreRatio::from_probability(positive_fraction(bag));
}

std::string CitationKnnModel::describe() const {
  std::ostringstream os;
  os << "citation-knn(kR=" << k_ref_ << ", kC=" << k_cite_ << ", train=" << train_.size() << ")";
  return os.str();
}

CitationKnnModel train_citation_knn(const MILDataset& ds, std::size_t k_ref, std::size_t k_cite,
                                    std::size_t workers) {
  if (ds.empty()) throw Error("Citation-kNN needs a nonempty training set");
  if (!ds.all_labeled()) throw Error("Citation-kNN needs labeled bags");
  if (k_ref == 0) throw Error("Citation-kNN needs kR >= 1");
  if (k_ref > ds.size() || k_cite > ds.size()) {
    throw Error("Citation-kNN kR and kC must not exceed the number of training bags (" + std::to_string(ds.size()) +
                ")");
  }
  const std::size_t n = ds.size();
  std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
  parallel_for(n, workers, [&](std::size_t i) {
    for (std::size_t j = i + 1; j < n; ++j) dist[i][j] = dist_hausdorff(ds[i], ds[j]);
  });
  std::vector<std::vector<double>> sorted(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) sorted[i].push_back(i < j ? dist[i][j] : dist[j][i]);
    }
    std::sort(sorted[i].begin(), sorted[i].end());
  }
  std::vector<Label> labels;
  for (const Bag& b : ds.bags()) labels.push_back(*b.label);
  return CitationKnnModel(ds.bags(), std::move(labels), std::move(sorted), k_ref, k_cite);
}

}  // namespace milkit
