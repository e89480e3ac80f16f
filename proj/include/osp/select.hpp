#pragma once

// Hardening soft scores into decision sets, and model selection over the
// (mu, t) grid on validation data.

#include <vector>

#include "osp/core.hpp"
#include "osp/net.hpp"

namespace osp::select {

/// S_k = {f_k >= t} & {k = argmax f}, argmax ties to the smallest index.
DecisionSetFamily harden(const net::SelectiveModel& model, double t);

/// Softmax scores for every row of `data`, computed point by point so they
/// agree bit-for-bit with the scores a hardened family sees.
std::vector<std::vector<double>> score_rows(const net::SelectiveModel& model,
                                            const LabeledDataset& data);

/// Decisions of the hardened rule on precomputed scores.
std::vector<SelectiveDecision> harden_scores(const std::vector<std::vector<double>>& scores,
                                             double t);

struct TrainedModel {
  double mu = 0.0;
  net::SelectiveModel model;
};

struct GridCell {
  double mu = 0.0;
  double t = 0.0;
  double coverage = 0.0;
  double error = 0.0;
  std::size_t model_index = 0;
};

/// |M| x |T| cells, row-major by mu.
struct SelectionGrid {
  std::vector<double> mu_values;
  std::vector<double> t_values;
  std::vector<GridCell> cells;

  const GridCell& at(std::size_t mu_index, std::size_t t_index) const {
    return cells[mu_index * t_values.size() + t_index];
  }
};

struct SelectionCriterion {
  enum class Mode { ErrorConstrained, CoverageConstrained };
  Mode mode = Mode::ErrorConstrained;
  double target = 0.0;

  void validate() const;
};

struct SelectionResult {
  GridCell cell;  // the chosen (mu*, t*) with its validation coverage and error
  bool feasible = true;
  SelectionGrid grid;
};

/// Validation coverage and error for every (mu, t). The error is the sum of
/// one-sided errors, which equals raw error because hardened sets are disjoint.
SelectionGrid fill_grid(const std::vector<TrainedModel>& models, const std::vector<double>& t_values,
                        const LabeledDataset& val);

/// Largest coverage with error <= eps; ties go to larger t, then smaller mu.
/// Without a feasible cell, the minimal-error cell is returned and flagged.
SelectionResult choose_error_constrained(const SelectionGrid& grid, double eps);
/// Smallest error with coverage >= rho; ties go to larger coverage, then larger
/// t, then smaller mu. Without a feasible cell, the maximal-coverage cell is
/// returned and flagged.
SelectionResult choose_coverage_constrained(const SelectionGrid& grid, double rho);
SelectionResult choose(const SelectionGrid& grid, const SelectionCriterion& criterion);

SelectionResult select_error_constrained(const std::vector<TrainedModel>& models,
                                         const std::vector<double>& t_values,
                                         const LabeledDataset& val, double eps);
SelectionResult select_coverage_constrained(const std::vector<TrainedModel>& models,
                                            const std::vector<double>& t_values,
                                            const LabeledDataset& val, double rho);

/// `count` equally spaced values from lo to hi inclusive.
std::vector<double> linspace(double lo, double hi, std::size_t count);
/// `count` log-spaced values from lo to hi inclusive.
std::vector<double> logspace(double lo, double hi, std::size_t count);

/// 100 thresholds equally spaced in [0, 1].
std::vector<double> default_thresholds();
/// 10 values equally spaced in [0.01, 1] and 20 equally spaced in (1, 16].
std::vector<double> full_mu_grid();
/// 8 log-spaced values in [0.05, 16].
std::vector<double> desk_mu_grid();

}  // namespace osp::select
