#include "osp/eval.hpp"

#include <algorithm>
#include <memory>

namespace osp::eval {

DecisionSetFamily sr_baseline(const net::SelectiveModel& model, double t) {
  auto shared = std::make_shared<const net::SelectiveModel>(model);
  std::vector<Region> regions;
  for (int k = 0; k < model.num_outputs(); ++k)
    regions.emplace_back(
        [shared, k, t](FeatureView x) {
          const auto f = shared->forward(x);
          const double top = *std::max_element(f.begin(), f.end());
          return argmax(f) == k && top >= t;
        },
        "sr" + std::to_string(k));
  return DecisionSetFamily::from_regions(std::move(regions), true, model.spec().input_dim());
}

DecisionSetFamily dg_decisions(const net::SelectiveModel& model, double t) {
  const int K = model.num_outputs() - 1;
  if (K < 1) throw ShapeError("gamblers decisions need K + 1 outputs");
  auto shared = std::make_shared<const net::SelectiveModel>(model);
  std::vector<Region> regions;
  for (int k = 0; k < K; ++k)
    regions.emplace_back(
        [shared, k, K, t](FeatureView x) {
          const auto f = shared->forward(x);
          if (f[static_cast<std::size_t>(K)] >= t) return false;
          return argmax(std::span<const double>(f.data(), static_cast<std::size_t>(K))) == k;
        },
        "dg" + std::to_string(k));
  return DecisionSetFamily::from_regions(std::move(regions), true, model.spec().input_dim());
}

std::vector<double> default_curve_targets() {
  std::vector<double> out;
  for (int i = 1; i <= 20; ++i) out.push_back(i / 200.0);
  return out;
}

std::vector<CurvePoint> coverage_error_curve(const std::vector<select::TrainedModel>& models,
                                             const std::vector<double>& t_values,
                                             const LabeledDataset& val,
                                             const LabeledDataset& test,
                                             const std::vector<double>& targets,
                                             const std::string& method) {
  if (!std::is_sorted(targets.begin(), targets.end()))
    throw InputError("curve targets must be sorted ascending");
  const auto grid = select::fill_grid(models, t_values, val);
  std::vector<CurvePoint> curve;
  for (double eps : targets) {
    const auto chosen = select::choose_error_constrained(grid, eps);
    const auto& model = models[chosen.cell.model_index].model;
    const auto metrics = evaluate(select::harden(model, chosen.cell.t), test);
    curve.push_back({metrics.raw_error, metrics.coverage, eps, method, chosen.feasible,
                     chosen.cell.mu, chosen.cell.t});
  }
  return curve;
}

std::optional<double> interpolate_coverage(const std::vector<CurvePoint>& curve, double error) {
  if (curve.size() == 1 && curve[0].achieved_error == error) return curve[0].achieved_coverage;
  for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
    const auto& a = curve[i];
    const auto& b = curve[i + 1];
    const double lo = std::min(a.achieved_error, b.achieved_error);
    const double hi = std::max(a.achieved_error, b.achieved_error);
    if (error < lo || error > hi) continue;
    if (hi == lo) return std::max(a.achieved_coverage, b.achieved_coverage);
    const double w = (error - a.achieved_error) / (b.achieved_error - a.achieved_error);
    return a.achieved_coverage + w * (b.achieved_coverage - a.achieved_coverage);
  }
  return std::nullopt;
}

double osp_overlap(const net::SelectiveModel& model, double t, const LabeledDataset& data) {
  if (data.empty()) throw InputError("overlap needs a nonempty dataset");
  std::size_t overlapping = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto f = model.forward(data.features(i));
    const auto above = std::count_if(f.begin(), f.end(), [t](double v) { return v > t; });
    overlapping += above >= 2;
  }
  return static_cast<double>(overlapping) / static_cast<double>(data.size());
}

ConsistencyReport consistency_check(const std::vector<DecisionSetFamily>& families,
                                    const LabeledDataset& data) {
  if (families.size() < 2) throw InputError("consistency needs at least two families");
  if (data.empty()) throw InputError("consistency needs a nonempty dataset");
  std::vector<std::vector<bool>> rejected;
  for (const auto& f : families) {
    if (f.dim() != data.dim()) throw InputError("family dimension does not match the dataset");
    std::vector<bool> r(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) r[i] = f.classify(data.features(i)).is_reject();
    rejected.push_back(std::move(r));
  }
  ConsistencyReport report;
  for (std::size_t i = 0; i < families.size(); ++i) {
    for (std::size_t j = i + 1; j < families.size(); ++j) {
      std::size_t count = 0;
      for (std::size_t p = 0; p < data.size(); ++p) count += rejected[j][p] && !rejected[i][p];
      const double mass = static_cast<double>(count) / static_cast<double>(data.size());
      report.pairs.push_back({i, j, mass});
      report.max_violation = std::max(report.max_violation, mass);
    }
  }
  report.fully_nested = report.max_violation == 0.0;
  return report;
}

}  // namespace osp::eval
