#include "osp/core.hpp"

#include <algorithm>
#include <memory>
#include <sstream>

namespace osp {

LabeledDataset::LabeledDataset(std::size_t dim, int num_classes)
    : dim_(dim), num_classes_(num_classes) {
  if (num_classes < 1) throw InputError("dataset needs at least one class");
}

LabeledDataset::LabeledDataset(const std::vector<LabeledExample>& examples,
                               int num_classes)
    : dim_(examples.empty() ? 0 : examples.front().features.size()),
      num_classes_(num_classes) {
  if (num_classes < 1) throw InputError("dataset needs at least one class");
  for (const auto& ex : examples) add(ex.features, ex.label);
}

void LabeledDataset::add(FeatureView features, int label) {
  if (features.size() != dim_) {
    std::ostringstream msg;
    msg << "feature length " << features.size() << " does not match dataset dim "
        << dim_;
    throw InputError(msg.str());
  }
  if (label < 0 || label >= num_classes_) {
    std::ostringstream msg;
    msg << "label " << label << " outside [0, " << num_classes_ << ")";
    throw InputError(msg.str());
  }
  features_.insert(features_.end(), features.begin(), features.end());
  labels_.push_back(label);
}

LabeledExample LabeledDataset::example(std::size_t i) const {
  auto f = features(i);
  return {std::vector<double>(f.begin(), f.end()), labels_[i]};
}

std::size_t LabeledDataset::class_count(int k) const {
  return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), k));
}

LabeledDataset LabeledDataset::subset(
    std::span<const std::size_t> indices) const {
  LabeledDataset out(dim_, num_classes_);
  out.features_.reserve(indices.size() * dim_);
  out.labels_.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= size()) throw InputError("subset index out of range");
    out.add(features(i), labels_[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------

Region::Region(Predicate contains, std::string description)
    : contains_(std::move(contains)), description_(std::move(description)) {}

Region Region::everything() {
  return {[](FeatureView) { return true; }, "all"};
}

Region Region::nothing() {
  return {[](FeatureView) { return false; }, "none"};
}

Region Region::upper_threshold(std::size_t feature, double t) {
  std::ostringstream d;
  d << "x" << feature << ">" << t;
  return {[feature, t](FeatureView x) { return x[feature] > t; }, d.str()};
}

Region Region::lower_threshold(std::size_t feature, double t) {
  std::ostringstream d;
  d << "x" << feature << "<=" << t;
  return {[feature, t](FeatureView x) { return x[feature] <= t; }, d.str()};
}

Region Region::interval(std::size_t feature, double lo, double hi) {
  std::ostringstream d;
  d << lo << "<x" << feature << "<=" << hi;
  return {[feature, lo, hi](FeatureView x) {
            return x[feature] > lo && x[feature] <= hi;
          },
          d.str()};
}

Region Region::point_set(std::vector<std::vector<double>> points) {
  std::ostringstream d;
  d << "points[" << points.size() << "]";
  auto shared = std::make_shared<const std::vector<std::vector<double>>>(
      std::move(points));
  return {[shared](FeatureView x) {
            return std::any_of(shared->begin(), shared->end(),
                               [&](const std::vector<double>& p) {
                                 return std::equal(p.begin(), p.end(), x.begin(),
                                                   x.end());
                               });
          },
          d.str()};
}

Region Region::complement() const {
  return {[inner = contains_](FeatureView x) { return !inner(x); },
          "not(" + description_ + ")"};
}

Region operator&(const Region& a, const Region& b) {
  return {[l = a.contains_, r = b.contains_](FeatureView x) {
            return l(x) && r(x);
          },
          "(" + a.description_ + " & " + b.description_ + ")"};
}

Region operator|(const Region& a, const Region& b) {
  return {[l = a.contains_, r = b.contains_](FeatureView x) {
            return l(x) || r(x);
          },
          "(" + a.description_ + " | " + b.description_ + ")"};
}

Region operator-(const Region& a, const Region& b) {
  return {[l = a.contains_, r = b.contains_](FeatureView x) {
            return l(x) && !r(x);
          },
          "(" + a.description_ + " - " + b.description_ + ")"};
}

// ---------------------------------------------------------------------------

SelectiveDecision SelectiveDecision::predict(int k) {
  if (k < 0) throw InputError("predicted class index must be nonnegative");
  SelectiveDecision d;
  d.label_ = k;
  return d;
}

int argmax(std::span<const double> values) {
  return static_cast<int>(std::max_element(values.begin(), values.end()) -
                          values.begin());
}

DecisionSetFamily DecisionSetFamily::from_regions(std::vector<Region> regions,
                                                  bool disjoint,
                                                  std::size_t dim) {
  if (regions.empty()) throw InputError("decision family needs K >= 1 sets");
  DecisionSetFamily f;
  f.num_classes_ = static_cast<int>(regions.size());
  f.dim_ = dim;
  f.disjoint_ = disjoint;
  f.regions_ = std::move(regions);
  return f;
}

DecisionSetFamily DecisionSetFamily::thresholded_scores(ScoreFunction scores,
                                                        int num_classes,
                                                        double t,
                                                        std::size_t dim) {
  if (num_classes < 1) throw InputError("decision family needs K >= 1 sets");
  DecisionSetFamily f;
  f.num_classes_ = num_classes;
  f.dim_ = dim;
  f.disjoint_ = true;
  f.scores_ = std::move(scores);
  f.threshold_ = t;
  return f;
}

void DecisionSetFamily::check_dim(FeatureView x) const {
  if (x.size() != dim_) {
    std::ostringstream msg;
    msg << "input dimension " << x.size() << " does not match family dimension "
        << dim_;
    throw InputError(msg.str());
  }
}

std::vector<bool> DecisionSetFamily::memberships(FeatureView x) const {
  check_dim(x);
  std::vector<bool> in(static_cast<std::size_t>(num_classes_), false);
  if (scores_) {
    const std::vector<double> f = scores_(x);
    if (f.size() != in.size()) throw ShapeError("score function width mismatch");
    const int top = argmax(f);
    in[static_cast<std::size_t>(top)] = f[static_cast<std::size_t>(top)] >= threshold_;
    return in;
  }
  for (std::size_t k = 0; k < in.size(); ++k) in[k] = regions_[k].contains(x);
  return in;
}

SelectiveDecision DecisionSetFamily::classify(FeatureView x) const {
  const std::vector<bool> in = memberships(x);
  for (std::size_t k = 0; k < in.size(); ++k)
    if (in[k]) return SelectiveDecision::predict(static_cast<int>(k));
  return SelectiveDecision::reject();
}

SelectiveDecision classify(const DecisionSetFamily& family, FeatureView x) {
  return family.classify(x);
}

Metrics metrics_from_decisions(std::span<const SelectiveDecision> decisions,
                               std::span<const int> labels, int num_classes) {
  if (decisions.empty()) throw InputError("cannot evaluate on an empty dataset");
  if (decisions.size() != labels.size())
    throw InputError("decision and label counts differ");
  std::size_t accepted = 0;
  std::size_t wrong = 0;
  std::vector<std::size_t> one_sided(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (decisions[i].is_reject()) continue;
    ++accepted;
    const int k = decisions[i].label();
    if (k >= num_classes) throw InputError("prediction outside [0, K)");
    if (k != labels[i]) {
      ++wrong;
      ++one_sided[static_cast<std::size_t>(k)];
    }
  }
  const double n = static_cast<double>(decisions.size());
  Metrics m;
  m.coverage = static_cast<double>(accepted) / n;
  m.raw_error = static_cast<double>(wrong) / n;
  m.rejection_rate = static_cast<double>(decisions.size() - accepted) / n;
  m.per_class_one_sided_error.reserve(one_sided.size());
  for (std::size_t c : one_sided)
    m.per_class_one_sided_error.push_back(static_cast<double>(c) / n);
  return m;
}

Metrics evaluate(const DecisionSetFamily& family, const LabeledDataset& data) {
  if (data.empty()) throw InputError("cannot evaluate on an empty dataset");
  if (data.dim() != family.dim())
    throw InputError("dataset dimension does not match decision family");
  std::vector<SelectiveDecision> decisions;
  decisions.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    decisions.push_back(family.classify(data.features(i)));
  return metrics_from_decisions(decisions, data.labels(), family.num_classes());
}

bool empirically_disjoint(const DecisionSetFamily& family,
                          const LabeledDataset& data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto in = family.memberships(data.features(i));
    if (std::count(in.begin(), in.end(), true) > 1) return false;
  }
  return true;
}

}  // namespace osp
