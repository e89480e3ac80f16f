#pragma once

// Domain types shared by every module: labelled datasets, decision regions,
// selective decisions, and the coverage / error metrics of a decision family.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace osp {

// Error taxonomy. The CLI maps these onto exit codes.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParseError : InputError {
  using InputError::InputError;
};
struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : FormatError {
  using FormatError::FormatError;
};

using FeatureView = std::span<const double>;

struct LabeledExample {
  std::vector<double> features;
  int label = 0;
};

/// Feature vectors with integer labels in [0, K), stored row-major.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(std::size_t dim, int num_classes);
  /// Infers dim from the first example; throws InputError on ragged rows or
  /// out-of-range labels.
  LabeledDataset(const std::vector<LabeledExample>& examples, int num_classes);

  void add(FeatureView features, int label);

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  std::size_t dim() const { return dim_; }
  int num_classes() const { return num_classes_; }

  FeatureView features(std::size_t i) const {
    return {features_.data() + i * dim_, dim_};
  }
  int label(std::size_t i) const { return labels_[i]; }
  std::span<const int> labels() const { return labels_; }
  std::span<const double> raw_features() const { return features_; }
  LabeledExample example(std::size_t i) const;

  /// n_k
  std::size_t class_count(int k) const;
  /// n_{!=k} = n - n_k
  std::size_t complement_count(int k) const { return size() - class_count(k); }

  LabeledDataset subset(std::span<const std::size_t> indices) const;

  bool operator==(const LabeledDataset&) const = default;

 private:
  std::size_t dim_ = 0;
  int num_classes_ = 0;
  std::vector<double> features_;
  std::vector<int> labels_;
};

/// A membership predicate over feature space. Regions compose with &, | and -.
class Region {
 public:
  using Predicate = std::function<bool(FeatureView)>;

  Region(Predicate contains, std::string description);

  static Region everything();
  static Region nothing();
  /// {x : x[feature] > t}
  static Region upper_threshold(std::size_t feature, double t);
  /// {x : x[feature] <= t}
  static Region lower_threshold(std::size_t feature, double t);
  /// {x : lo < x[feature] <= hi}
  static Region interval(std::size_t feature, double lo, double hi);
  /// Exact-match membership against a finite list of points.
  static Region point_set(std::vector<std::vector<double>> points);

  bool contains(FeatureView x) const { return contains_(x); }
  const std::string& description() const { return description_; }

  Region complement() const;
  friend Region operator&(const Region& a, const Region& b);
  friend Region operator|(const Region& a, const Region& b);
  friend Region operator-(const Region& a, const Region& b);

 private:
  Predicate contains_;
  std::string description_;
};

class SelectiveDecision {
 public:
  static SelectiveDecision predict(int k);
  static SelectiveDecision reject() { return SelectiveDecision{}; }

  bool is_reject() const { return !label_.has_value(); }
  /// Only valid when !is_reject().
  int label() const { return *label_; }

  bool operator==(const SelectiveDecision&) const = default;

 private:
  std::optional<int> label_;
};

using ScoreFunction = std::function<std::vector<double>(FeatureView)>;

/// K per-class decision regions. Rejection is the complement of their union.
///
/// Two forms exist: explicit regions (possibly overlapping, resolved toward
/// the smallest index), and thresholded scores, where x belongs to S_k iff
/// f_k(x) >= t and k is the (first) argmax of f. The score form is disjoint
/// by construction.
class DecisionSetFamily {
 public:
  static DecisionSetFamily from_regions(std::vector<Region> regions,
                                        bool disjoint, std::size_t dim);
  static DecisionSetFamily thresholded_scores(ScoreFunction scores,
                                              int num_classes, double t,
                                              std::size_t dim);

  int num_classes() const { return num_classes_; }
  std::size_t dim() const { return dim_; }
  bool disjoint() const { return disjoint_; }

  /// Raw membership of x in each set, before any tie-break.
  std::vector<bool> memberships(FeatureView x) const;
  SelectiveDecision classify(FeatureView x) const;

  /// Explicit regions; empty for the thresholded-score form.
  const std::vector<Region>& regions() const { return regions_; }

 private:
  DecisionSetFamily() = default;
  void check_dim(FeatureView x) const;

  int num_classes_ = 0;
  std::size_t dim_ = 0;
  bool disjoint_ = false;
  std::vector<Region> regions_;
  ScoreFunction scores_;
  double threshold_ = 0.0;
};

/// Index of the largest entry; ties go to the smallest index.
int argmax(std::span<const double> values);

struct Metrics {
  double coverage = 0.0;
  double raw_error = 0.0;
  std::vector<double> per_class_one_sided_error;
  double rejection_rate = 0.0;
};

SelectiveDecision classify(const DecisionSetFamily& family, FeatureView x);

/// Throws InputError on an empty dataset or a dimension mismatch.
Metrics evaluate(const DecisionSetFamily& family, const LabeledDataset& data);

/// Metrics for precomputed decisions against labels.
Metrics metrics_from_decisions(std::span<const SelectiveDecision> decisions,
                               std::span<const int> labels, int num_classes);

/// True when no point of `data` lies in two raw member sets.
bool empirically_disjoint(const DecisionSetFamily& family,
                          const LabeledDataset& data);

}  // namespace osp
