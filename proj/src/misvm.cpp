#include <algorithm>
#include <sstream>

#include "milkit/concept.hpp"

namespace milkit {

MiSvmModel::MiSvmModel(Standardizer standardizer, SvmModel svm, FusionRule rule,
                       std::vector<std::vector<Label>> imputed, int iterations, bool converged)
    : standardizer_(std::move(standardizer)),
      svm_(std::move(svm)),
      rule_(rule),
      imputed_(std::move(imputed)),
      iterations_(iterations),
      converged_(converged) {}

double MiSvmModel::instance_decision(std::span<const double> x) const {
  return predict_decision(svm_, standardizer_.transform(x));
}

ScoreRatio MiSvmModel::score(const Bag& bag) const {
  std::vector<double> posteriors;
  posteriors.reserve(bag.size());
  for (const Instance& x : bag.instances) posteriors.push_back(sigmoid(instance_decision(x)));
  return fuse(rule_, posteriors);
}

std::string MiSvmModel::describe() const {
  std::ostringstream os;
  os << "misvm(p=" << svm_.kernel.degree << ", C=" << svm_.C << ", " << to_string(rule_.kind) << ")";
  return os.str();
}

MiSvmModel train_misvm(const MILDataset& ds, PolyKernel kernel, double C, FusionRule rule,
                       const MiSvmOptions& options) {
  if (!ds.all_labeled()) throw Error("miSVM needs labeled bags");
  if (ds.count(Label::Positive) == 0 || ds.count(Label::Negative) == 0) {
    throw Error("miSVM needs positive and negative bags");
  }
  std::vector<Instance> raw;
  std::vector<std::size_t> offset;
  for (const Bag& b : ds.bags()) {
    offset.push_back(raw.size());
    raw.insert(raw.end(), b.instances.begin(), b.instances.end());
  }
  offset.push_back(raw.size());
  Standardizer standardizer = Standardizer::fit(raw);
  const std::vector<Instance> x = standardizer.transform_all(raw);
  const KernelRows rows(x, kernel);

  std::vector<Label> z(x.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::fill(z.begin() + offset[i], z.begin() + offset[i + 1], *ds[i].label);
  }

  SvmDual dual;
  std::vector<Label> trained_on;
  std::vector<double> f(x.size());
  int iterations = 0;
  bool converged = false;
  while (iterations < options.max_iterations) {
    ++iterations;
    dual = solve_svm_dual(rows, z, C, options.svm);
    trained_on = z;

    std::fill(f.begin(), f.end(), dual.bias);
    for (std::size_t j = 0; j < x.size(); ++j) {
      if (dual.alpha[j] == 0.0) continue;
      const double c = dual.alpha[j] * to_int(z[j]);
      const auto row = rows.row(j);
      for (std::size_t i = 0; i < x.size(); ++i) f[i] += c * row[i];
    }

    // Re-impute inside positive bags; negative-bag instances stay negative.
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (!is_positive(*ds[i].label)) continue;
      std::size_t top = offset[i];
      bool any = false;
      for (std::size_t k = offset[i]; k < offset[i + 1]; ++k) {
        z[k] = f[k] > 0.0 ? Label::Positive : Label::Negative;
        any = any || f[k] > 0.0;
        if (f[k] > f[top]) top = k;
      }
      if (!any) z[top] = Label::Positive;
    }
    if (z == trained_on) {
      converged = true;
      break;
    }
  }

  std::vector<std::vector<Label>> imputed(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    imputed[i].assign(trained_on.begin() + offset[i], trained_on.begin() + offset[i + 1]);
  }
  SvmModel svm = make_svm_model(x, trained_on, dual, kernel, C);
  return MiSvmModel(std::move(standardizer), std::move(svm), rule, std::move(imputed), iterations, converged);
}

}  // namespace milkit
