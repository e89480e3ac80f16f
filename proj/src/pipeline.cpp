#include "osp/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <sstream>

#include "osp/data.hpp"

namespace osp::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

LabeledDataset load_dataset(const config::RunConfig& cfg) {
  if (!cfg.dataset_path.empty()) return data::ingest_csv(cfg.dataset_path);
  return data::synthesize(cfg.synthetic);
}

SplitData split_dataset(const LabeledDataset& data, const config::RunConfig& cfg) {
  const auto s = data::split_indices(data.size(), cfg.split, cfg.split_seed);
  if (s.train.empty() || s.val.empty() || s.test.empty())
    throw InputError("split: dataset too small for a nonempty train/val/test split");
  return {data.subset(s.train), data.subset(s.val), data.subset(s.test)};
}

std::vector<train::TrainResult> train_mu_grid(const net::SelectiveModel& warm,
                                              const LabeledDataset& train,
                                              const config::RunConfig& cfg) {
  auto run = [&](std::size_t i) {
    train::TrainConfig tc = cfg.train;
    tc.mu = cfg.mu_grid[i];
    tc.seed = cfg.seed + 1000003ULL * (i + 1);
    return train::sgda_refine(warm, train, tc);
  };
  std::vector<train::TrainResult> results;
  results.reserve(cfg.mu_grid.size());
  if (cfg.workers <= 1) {
    for (std::size_t i = 0; i < cfg.mu_grid.size(); ++i) results.push_back(run(i));
    return results;
  }
  for (std::size_t start = 0; start < cfg.mu_grid.size(); start += cfg.workers) {
    const std::size_t stop = std::min(cfg.mu_grid.size(), start + cfg.workers);
    std::vector<std::future<train::TrainResult>> batch;
    for (std::size_t i = start; i < stop; ++i) batch.push_back(std::async(std::launch::async, run, i));
    for (auto& f : batch) results.push_back(f.get());
  }
  return results;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string stamp(const std::string& hash, std::uint64_t seed) {
  return "# config_hash=" + hash + " seed=" + std::to_string(seed) + "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
  if (!out) throw InputError("failed writing " + path.string());
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ";" : "") + format_number(v[i]);
  return out;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ";" : "") + std::to_string(v[i]);
  return out;
}

}  // namespace

std::string metrics_csv(const MetricsRecord& m, const std::string& hash, std::uint64_t seed) {
  std::ostringstream out;
  out << stamp(hash, seed);
  out << "mode,target,coverage,error,mu,t,overlap,feasible,val_coverage,val_error\n";
  out << m.mode << ',' << format_number(m.target) << ',' << format_number(m.coverage) << ','
      << format_number(m.error) << ',' << format_number(m.mu) << ',' << format_number(m.t) << ','
      << format_number(m.overlap) << ',' << (m.feasible ? 1 : 0) << ','
      << format_number(m.val_coverage) << ',' << format_number(m.val_error) << '\n';
  return out.str();
}

std::string grid_csv(const select::SelectionGrid& grid, const std::string& hash,
                     std::uint64_t seed) {
  std::ostringstream out;
  out << stamp(hash, seed) << "mu,t,coverage,error\n";
  for (const auto& c : grid.cells)
    out << format_number(c.mu) << ',' << format_number(c.t) << ',' << format_number(c.coverage)
        << ',' << format_number(c.error) << '\n';
  return out.str();
}

std::string curve_csv(const std::vector<eval::CurvePoint>& curve, const std::string& hash,
                      std::uint64_t seed) {
  std::ostringstream out;
  out << stamp(hash, seed) << "method,target_error,coverage,error,mu,t,feasible\n";
  for (const auto& p : curve)
    out << p.method << ',' << format_number(p.target_error) << ','
        << format_number(p.achieved_coverage) << ',' << format_number(p.achieved_error) << ','
        << format_number(p.mu) << ',' << format_number(p.t) << ',' << (p.feasible ? 1 : 0) << '\n';
  return out.str();
}

std::string training_log_csv(const std::vector<train::EpochRecord>& log, const std::string& hash,
                             std::uint64_t seed) {
  std::ostringstream out;
  out << stamp(hash, seed)
      << "epoch,restricted_sum,constraint,lambda,phi,restricted_absences,constraint_absences\n";
  for (const auto& r : log)
    out << r.epoch << ',' << format_number(r.restricted_sum) << ',' << join(r.constraint) << ','
        << join(r.lambdas) << ',' << join(r.phis) << ',' << join(r.restricted_absences) << ','
        << join(r.constraint_absences) << '\n';
  return out.str();
}

PipelineResult run_pipeline(const config::RunConfig& cfg) {
  cfg.validate();
  const std::string hash = config::config_hash(cfg);
  const fs::path root(cfg.output_dir);
  fs::create_directories(root / "models");
  fs::create_directories(root / "logs");

  json manifest = {{"config_hash", hash}, {"seed", cfg.seed}, {"artifacts", json::array()}};
  std::string stage = "config";
  auto record = [&](const fs::path& rel, const std::string& text) {
    write_text(root / rel, text);
    manifest["artifacts"].push_back(rel.generic_string());
  };
  auto write_manifest = [&]() { write_text(root / "manifest.json", manifest.dump(2) + "\n"); };

  try {
    record("config.json", config::to_json(cfg).dump(2) + "\n");

    stage = "split";
    const SplitData split = split_dataset(load_dataset(cfg), cfg);
    const auto spec = cfg.backbone(split.train.dim());

    stage = "warm_start";
    const auto warm = net::warm_start(split.train, spec, split.train.num_classes(),
                                      cfg.train.warm_start_epochs, cfg.train.warm_start_lr,
                                      cfg.seed, cfg.train.batch_size);

    stage = "train";
    const auto runs = train_mu_grid(warm, split.train, cfg);
    std::vector<select::TrainedModel> models;
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const auto bytes = net::serialize(runs[i].model);
      const fs::path model_rel = fs::path("models") / ("mu_" + std::to_string(i) + ".bin");
      {
        std::ofstream out(root / model_rel, std::ios::binary);
        if (!out) throw InputError("cannot write " + (root / model_rel).string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      }
      manifest["artifacts"].push_back(model_rel.generic_string());
      record(fs::path("logs") / ("mu_" + std::to_string(i) + ".csv"),
             training_log_csv(runs[i].log, hash, cfg.seed));
      models.push_back({cfg.mu_grid[i], runs[i].model});
    }

    stage = "select";
    PipelineResult result;
    result.config_hash = hash;
    const auto grid = select::fill_grid(models, cfg.t_grid, split.val);
    result.selection = select::choose(grid, cfg.criterion);
    record("selection_grid.csv", grid_csv(grid, hash, cfg.seed));

    stage = "evaluate";
    const auto& cell = result.selection.cell;
    const auto& chosen = models[cell.model_index].model;
    const Metrics test = evaluate(select::harden(chosen, cell.t), split.test);
    auto& m = result.metrics;
    m.mode = cfg.criterion.mode == select::SelectionCriterion::Mode::ErrorConstrained ? "error"
                                                                                      : "coverage";
    m.target = cfg.criterion.target;
    m.coverage = test.coverage;
    m.error = test.raw_error;
    m.mu = cell.mu;
    m.t = cell.t;
    m.overlap = eval::osp_overlap(chosen, cell.t, split.test);
    m.feasible = result.selection.feasible;
    m.val_coverage = cell.coverage;
    m.val_error = cell.error;
    record("metrics.csv", metrics_csv(m, hash, cfg.seed));

    if (!cfg.curve_targets.empty()) {
      stage = "curve";
      result.curve = eval::coverage_error_curve(models, cfg.t_grid, split.val, split.test,
                                                cfg.curve_targets, "osp");
      record("curve.csv", curve_csv(result.curve, hash, cfg.seed));
    }

    manifest["status"] = m.feasible ? "ok" : "infeasible";
    write_manifest();
    return result;
  } catch (const std::exception& e) {
    manifest["status"] = "error";
    manifest["failed_stage"] = stage;
    manifest["message"] = e.what();
    try {
      write_manifest();
    } catch (...) {
    }
    throw;
  }
}

}  // namespace osp::pipeline
