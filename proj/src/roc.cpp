#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "milkit/evaluation.hpp"

namespace milkit {

namespace {

void check_scores(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size()) throw Error("score and label counts differ");
  const bool has_pos = std::find(labels.begin(), labels.end(), Label::Positive) != labels.end();
  const bool has_neg = std::find(labels.begin(), labels.end(), Label::Negative) != labels.end();
  if (!has_pos || !has_neg) throw Error("AUC needs both positive and negative labels");
  for (double s : scores) {
    if (std::isnan(s)) throw Error("score is NaN");
  }
}

}  // namespace

RocResult compute_auc(std::span<const double> scores, std::span<const Label> labels) {
  check_scores(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  const auto n_pos = static_cast<long long>(std::count(labels.begin(), labels.end(), Label::Positive));
  const auto n_neg = static_cast<long long>(n) - n_pos;

  RocResult roc;
  roc.scores.assign(scores.begin(), scores.end());
  roc.labels.assign(labels.begin(), labels.end());
  roc.points.push_back({0.0, 0.0});

  // Walking from the highest score down, each positive in a tie group beats
  // every negative not yet seen and ties with the group's negatives.
  long long tp = 0, fp = 0, twice = 0;
  for (std::size_t g = 0; g < n;) {
    std::size_t end = g;
    long long p = 0, q = 0;
    while (end < n && scores[order[end]] == scores[order[g]]) {
      (labels[order[end]] == Label::Positive ? p : q) += 1;
      ++end;
    }
    const long long negatives_below = n_neg - fp - q;
    twice += p * (2 * negatives_below + q);
    tp += p;
    fp += q;
    roc.points.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                          static_cast<double>(tp) / static_cast<double>(n_pos)});
    g = end;
  }
  roc.auc = static_cast<double>(twice) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
  return roc;
}

RocResult compute_auc(std::span<const ScoreRatio> scores, std::span<const Label> labels) {
  std::vector<double> values;
  values.reserve(scores.size());
  for (const ScoreRatio& s : scores) values.push_back(s.value());
  return compute_auc(std::span<const double>(values), labels);
}

void write_roc_csv(const std::filesystem::path& path, const RocResult& roc) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << "fpr,tpr\n";
  out.precision(17);
  for (const RocPoint& p : roc.points) out << p.fpr << ',' << p.tpr << '\n';
}

}  // namespace milkit
