#include "osp/select.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <tuple>

namespace osp::select {

DecisionSetFamily harden(const net::SelectiveModel& model, double t) {
  auto shared = std::make_shared<const net::SelectiveModel>(model);
  return DecisionSetFamily::thresholded_scores(
      [shared](FeatureView x) { return shared->forward(x); }, model.num_outputs(), t,
      model.spec().input_dim());
}

std::vector<std::vector<double>> score_rows(const net::SelectiveModel& model,
                                            const LabeledDataset& data) {
  std::vector<std::vector<double>> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.push_back(model.forward(data.features(i)));
  return out;
}

std::vector<SelectiveDecision> harden_scores(const std::vector<std::vector<double>>& scores,
                                             double t) {
  std::vector<SelectiveDecision> out;
  out.reserve(scores.size());
  for (const auto& f : scores) {
    const int top = argmax(f);
    out.push_back(f[static_cast<std::size_t>(top)] >= t ? SelectiveDecision::predict(top)
                                                        : SelectiveDecision::reject());
  }
  return out;
}

void SelectionCriterion::validate() const {
  if (!(target >= 0.0 && target <= 1.0)) throw InputError("selection target must lie in [0, 1]");
}

SelectionGrid fill_grid(const std::vector<TrainedModel>& models,
                        const std::vector<double>& t_values, const LabeledDataset& val) {
  if (models.empty() || t_values.empty()) throw InputError("selection grid is empty");
  if (val.empty()) throw InputError("validation data is empty");
  SelectionGrid grid;
  grid.t_values = t_values;
  for (std::size_t mi = 0; mi < models.size(); ++mi) {
    const auto& m = models[mi];
    grid.mu_values.push_back(m.mu);
    const auto scores = score_rows(m.model, val);
    for (double t : t_values) {
      const auto metrics =
          metrics_from_decisions(harden_scores(scores, t), val.labels(), m.model.num_outputs());
      double error = 0.0;
      for (double e : metrics.per_class_one_sided_error) error += e;
      grid.cells.push_back({m.mu, t, metrics.coverage, error, mi});
    }
  }
  return grid;
}

namespace {

constexpr double kSlack = 1e-12;

void check_grid(const SelectionGrid& grid) {
  if (grid.cells.empty()) throw InputError("selection grid is empty");
}

template <typename Key>
SelectionResult best_by(const SelectionGrid& grid, bool feasible, Key key) {
  const GridCell* best = nullptr;
  for (const auto& c : grid.cells)
    if (!best || key(c) > key(*best)) best = &c;
  return {*best, feasible, grid};
}

}  // namespace

SelectionResult choose_error_constrained(const SelectionGrid& grid, double eps) {
  check_grid(grid);
  const bool any = std::any_of(grid.cells.begin(), grid.cells.end(),
                               [&](const GridCell& c) { return c.error <= eps + kSlack; });
  if (any)
    return best_by(grid, true, [&](const GridCell& c) {
      const bool ok = c.error <= eps + kSlack;
      return std::make_tuple(ok, c.coverage, c.t, -c.mu);
    });
  return best_by(grid, false, [](const GridCell& c) {
    return std::make_tuple(-c.error, c.coverage, c.t, -c.mu);
  });
}

SelectionResult choose_coverage_constrained(const SelectionGrid& grid, double rho) {
  check_grid(grid);
  const bool any = std::any_of(grid.cells.begin(), grid.cells.end(),
                               [&](const GridCell& c) { return c.coverage >= rho - kSlack; });
  if (any)
    return best_by(grid, true, [&](const GridCell& c) {
      const bool ok = c.coverage >= rho - kSlack;
      return std::make_tuple(ok, -c.error, c.coverage, c.t, -c.mu);
    });
  return best_by(grid, false, [](const GridCell& c) {
    return std::make_tuple(c.coverage, -c.error, c.t, -c.mu);
  });
}

SelectionResult choose(const SelectionGrid& grid, const SelectionCriterion& criterion) {
  criterion.validate();
  return criterion.mode == SelectionCriterion::Mode::ErrorConstrained
             ? choose_error_constrained(grid, criterion.target)
             : choose_coverage_constrained(grid, criterion.target);
}

SelectionResult select_error_constrained(const std::vector<TrainedModel>& models,
                                         const std::vector<double>& t_values,
                                         const LabeledDataset& val, double eps) {
  return choose_error_constrained(fill_grid(models, t_values, val), eps);
}

SelectionResult select_coverage_constrained(const std::vector<TrainedModel>& models,
                                            const std::vector<double>& t_values,
                                            const LabeledDataset& val, double rho) {
  return choose_coverage_constrained(fill_grid(models, t_values, val), rho);
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  if (count == 0) return {};
  if (count == 1) return {lo};
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
  out.back() = hi;
  return out;
}

std::vector<double> logspace(double lo, double hi, std::size_t count) {
  if (!(lo > 0.0 && hi > 0.0)) throw InputError("log-spaced grids need positive bounds");
  auto exps = linspace(std::log(lo), std::log(hi), count);
  for (double& e : exps) e = std::exp(e);
  if (!exps.empty()) {
    exps.front() = lo;
    exps.back() = hi;
  }
  return exps;
}

std::vector<double> default_thresholds() { return linspace(0.0, 1.0, 100); }

std::vector<double> full_mu_grid() {
  auto grid = linspace(0.01, 1.0, 10);
  const auto upper = linspace(1.0, 16.0, 21);
  grid.insert(grid.end(), upper.begin() + 1, upper.end());
  return grid;
}

std::vector<double> desk_mu_grid() { return logspace(0.05, 16.0, 8); }

}  // namespace osp::select
