#pragma once

// Exact solvers for selective classification over finite hypothesis classes.
//
// Everything here works with empirical probabilities on a given dataset. The
// error budget eps translates into an integer count floor(eps * n), so the
// constraints P(E) <= eps are enforced exactly, without floating slack.

#include <cstdint>
#include <optional>
#include <vector>

#include "osp/core.hpp"

namespace osp::oracle {

enum class HypothesisKind { UpperThreshold, LowerThreshold, Interval, ExplicitSetList };

struct Candidate {
  HypothesisKind kind;
  std::size_t feature = 0;
  // UpperThreshold: {x > lo}. LowerThreshold: {x <= hi}. Interval: (lo, hi].
  double lo = 0.0;
  double hi = 0.0;
  Region region;
};

/// A finite, enumerable class of candidate sets.
class FiniteHypothesisClass {
 public:
  static FiniteHypothesisClass upper_thresholds(std::size_t feature,
                                                const std::vector<double>& grid);
  static FiniteHypothesisClass lower_thresholds(std::size_t feature,
                                                const std::vector<double>& grid);
  /// Both threshold directions, upper sets first.
  static FiniteHypothesisClass thresholds(std::size_t feature,
                                          const std::vector<double>& grid);
  /// Every (grid[i], grid[j]] with i < j.
  static FiniteHypothesisClass intervals(std::size_t feature,
                                         const std::vector<double>& grid);
  static FiniteHypothesisClass explicit_sets(std::vector<Region> sets);

  /// Cut points realising every distinct threshold behaviour on `data`:
  /// -inf, the midpoints between consecutive distinct values, and +inf.
  static std::vector<double> data_cuts(const LabeledDataset& data,
                                       std::size_t feature);

  /// Union of two classes; enumeration order is this class then `other`.
  FiniteHypothesisClass operator+(const FiniteHypothesisClass& other) const;

  std::size_t size() const { return candidates_.size(); }
  const Candidate& candidate(std::size_t i) const { return candidates_[i]; }
  const std::vector<Candidate>& candidates() const { return candidates_; }

  /// Number of distinct membership patterns the class induces on `data`.
  std::size_t distinct_behaviors(const LabeledDataset& data) const;

 private:
  std::vector<Candidate> candidates_;
};

/// Split of the error budget across classes.
class AlphaAllocation {
 public:
  /// Throws InputError unless every alpha_k >= 0 and sum <= 1.
  explicit AlphaAllocation(std::vector<double> alphas);
  const std::vector<double>& alphas() const { return alphas_; }
  double operator[](std::size_t k) const { return alphas_[k]; }
  std::size_t size() const { return alphas_.size(); }

 private:
  std::vector<double> alphas_;
};

/// Points on the face sum(alpha) = 1 with coordinates multiple of `step`.
std::vector<AlphaAllocation> uniform_alpha_grid(int num_classes, double step);
/// step 0.1 for K = 2, 0.25 for larger K.
std::vector<AlphaAllocation> default_alpha_grid(int num_classes);
/// Every split of the integer error budget floor(eps * n) into K per-class
/// counts. On a dataset this reaches every attainable one-sided error profile,
/// so the decoupled sweep over it is exact.
std::vector<AlphaAllocation> count_lattice_alpha_grid(std::size_t n,
                                                      int num_classes, double eps);

/// floor(eps * n), tolerant to representation error in eps.
std::size_t error_budget(double eps, std::size_t n);

struct OracleSolution {
  explicit OracleSolution(DecisionSetFamily f) : family(std::move(f)) {}

  DecisionSetFamily family;
  double value = 0.0;  // achieved empirical coverage
  double error = 0.0;  // achieved empirical raw error
  bool feasible = true;
  std::optional<AlphaAllocation> alpha;
  /// Chosen candidate per class; -1 denotes the empty set.
  std::vector<std::ptrdiff_t> chosen;
  /// Decoupled solver only: the overlapping one-sided sets before tie-break.
  std::vector<Region> raw_sets;
};

/// Largest candidate S with P(x in S, y != k) <= eps_k. Returns the empty set
/// (value 0, feasible) when no candidate qualifies.
OracleSolution solve_osp_exact(const LabeledDataset& data,
                               const FiniteHypothesisClass& cls, int k,
                               double eps_k);

inline constexpr double kDefaultTupleCap = 1e7;

/// Exhaustive search over K-tuples (each coordinate a candidate or the empty
/// set) for the largest total coverage with raw error <= eps and pairwise
/// disjointness on the dataset's points. Throws CapacityError when
/// (|class| + 1)^K exceeds `tuple_cap`.
OracleSolution solve_sc_exact(const LabeledDataset& data,
                              const FiniteHypothesisClass& cls, double eps,
                              double tuple_cap = kDefaultTupleCap);

/// For each allocation solve K independent one-sided problems, resolve the
/// overlaps toward the smallest class index, and keep the best allocation.
OracleSolution solve_osp_decoupled(const LabeledDataset& data,
                                   const FiniteHypothesisClass& cls, double eps,
                                   const std::vector<AlphaAllocation>& alpha_grid);

/// Fraction of points that lie in at least two of the sets.
double overlap_mass(const std::vector<Region>& sets, const LabeledDataset& data);

struct AnalyticCoverage {
  double coverage;
  double s1_cut;  // S_1 = {x > s1_cut}
  double s2_cut;  // S_2 = {x <= s2_cut}
};

/// Closed-form coverage for X ~ U[0,1], P(Y = first class | x) = x, and
/// single-threshold sets. Valid for 0 <= eps < 1/4.
AnalyticCoverage analytic_example_coverage(double eps);

/// n draws from the analytic example. Label 0 has probability x, label 1
/// otherwise.
LabeledDataset sample_analytic_example(std::size_t n, std::uint64_t seed);

/// Smallest empirical misclassification rate of a two-class threshold
/// classifier (either orientation) on a single feature.
double threshold_classification_risk(const LabeledDataset& data,
                                     std::size_t feature = 0);

/// S_k = Pi_k & Gamma. The predictor sets must partition `reference`.
DecisionSetFamily gating_to_sets(const Region& gate,
                                 const std::vector<Region>& predictor_sets,
                                 const LabeledDataset& reference);

/// C_k = complement of the union of the other S_k'. The family must be
/// disjoint (flagged and empirically on `reference`).
std::vector<Region> sets_to_confidence(const DecisionSetFamily& family,
                                       const LabeledDataset& reference);

/// Inverse construction S_k = C_k minus the union of the other C_k'.
DecisionSetFamily confidence_to_sets(const std::vector<Region>& confidence,
                                     std::size_t dim);

struct TrendRow {
  std::size_t n = 0;
  double median_coverage_deviation = 0.0;
  double median_violation = 0.0;
  std::size_t seeds = 0;
};

/// Population value of the one-sided problem for the first class of the
/// analytic example over single-threshold sets: sqrt(2 eps) for eps <= 1/2.
double analytic_osp_value(double eps);

/// ERM for the first class's one-sided problem on fresh analytic samples,
/// compared against population truth. One row per n, medians over seeds.
std::vector<TrendRow> erm_feasibility_trend(double eps,
                                            const std::vector<std::size_t>& n_list,
                                            std::size_t seeds_per_n,
                                            std::uint64_t base_seed = 1);

}  // namespace osp::oracle
