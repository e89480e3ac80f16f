#pragma once

// Experiment-level measurements: the softmax-response baseline, coverage-error
// curves, overlap of the raw one-sided sets, and rejection-region consistency.

#include <optional>
#include <string>
#include <vector>

#include "osp/core.hpp"
#include "osp/net.hpp"
#include "osp/select.hpp"

namespace osp::eval {

/// Reject when max_k f_k < t, otherwise predict the argmax.
DecisionSetFamily sr_baseline(const net::SelectiveModel& model, double t);

/// Deep Gamblers decisions for a K + 1 output model: reject when the
/// abstention score reaches t, otherwise predict the argmax of the first K.
DecisionSetFamily dg_decisions(const net::SelectiveModel& model, double t);

struct CurvePoint {
  double achieved_error = 0.0;
  double achieved_coverage = 0.0;
  double target_error = 0.0;
  std::string method;
  bool feasible = true;
  double mu = 0.0;
  double t = 0.0;
};

/// Target errors (i/2)% for i = 1..20.
std::vector<double> default_curve_targets();

/// For each target: select (mu*, t*) on validation data, then report test
/// error and coverage of the hardened model. Targets must be ascending.
std::vector<CurvePoint> coverage_error_curve(const std::vector<select::TrainedModel>& models,
                                             const std::vector<double>& t_values,
                                             const LabeledDataset& val,
                                             const LabeledDataset& test,
                                             const std::vector<double>& targets,
                                             const std::string& method);

/// Piecewise-linear coverage at `error` along consecutive curve points;
/// nullopt outside the curve's error range.
std::optional<double> interpolate_coverage(const std::vector<CurvePoint>& curve, double error);

/// Fraction of points lying in at least two raw sets {x : f_k(x) > t}.
double osp_overlap(const net::SelectiveModel& model, double t, const LabeledDataset& data);

struct PairViolation {
  std::size_t stricter = 0;  // index i (smaller target error)
  std::size_t looser = 0;    // index j > i
  double mass = 0.0;
};

struct ConsistencyReport {
  std::vector<PairViolation> pairs;
  double max_violation = 0.0;
  bool fully_nested = true;
};

/// Families ordered by increasing target error. For every i < j, reports the
/// mass of points rejected at the looser level j yet accepted at the stricter
/// level i; nested rejection regions (R_j inside R_i) give zero everywhere.
ConsistencyReport consistency_check(const std::vector<DecisionSetFamily>& families,
                                    const LabeledDataset& data);

}  // namespace osp::eval
