#pragma once

// End-to-end runs: split, warm start, mu-grid SGDA, selection, test
// evaluation, and the on-disk result bundle.

#include <string>
#include <vector>

#include "osp/config.hpp"
#include "osp/eval.hpp"
#include "osp/select.hpp"
#include "osp/train.hpp"

namespace osp::pipeline {

/// One row of metrics.csv. Coverage and error are measured on the test split.
struct MetricsRecord {
  std::string mode;  // "error" or "coverage"
  double target = 0.0;
  double coverage = 0.0;
  double error = 0.0;
  double mu = 0.0;
  double t = 0.0;
  double overlap = 0.0;
  bool feasible = true;
  double val_coverage = 0.0;
  double val_error = 0.0;
};

struct PipelineResult {
  MetricsRecord metrics;
  select::SelectionResult selection;
  std::vector<eval::CurvePoint> curve;
  std::string config_hash;
};

struct SplitData {
  LabeledDataset train;
  LabeledDataset val;
  LabeledDataset test;
};

/// Reads the CSV at dataset_path, or synthesizes from the spec.
LabeledDataset load_dataset(const config::RunConfig& cfg);
SplitData split_dataset(const LabeledDataset& data, const config::RunConfig& cfg);

/// One SGDA run per mu from a shared warm start, in grid order. With more
/// than one worker the runs execute concurrently; results do not depend on
/// the worker count.
std::vector<train::TrainResult> train_mu_grid(const net::SelectiveModel& warm,
                                              const LabeledDataset& train,
                                              const config::RunConfig& cfg);

/// Numbers use 17 significant digits so equal values give equal text.
std::string format_number(double v);
std::string metrics_csv(const MetricsRecord& m, const std::string& hash, std::uint64_t seed);
std::string grid_csv(const select::SelectionGrid& grid, const std::string& hash,
                     std::uint64_t seed);
std::string curve_csv(const std::vector<eval::CurvePoint>& curve, const std::string& hash,
                      std::uint64_t seed);
std::string training_log_csv(const std::vector<train::EpochRecord>& log, const std::string& hash,
                             std::uint64_t seed);

/// Validates the config before any compute, then writes into output_dir:
///   config.json, models/mu_<i>.bin, logs/mu_<i>.csv, selection_grid.csv,
///   metrics.csv, curve.csv (when curve targets are set), manifest.json.
/// On an exception, completed artifacts stay and manifest.json records the
/// failed stage and message before the exception propagates. An infeasible
/// selection is not an error; it is reported through metrics.feasible.
PipelineResult run_pipeline(const config::RunConfig& cfg);

}  // namespace osp::pipeline
