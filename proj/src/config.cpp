#include "osp/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

namespace osp::config {

using nlohmann::json;

net::BackboneSpec RunConfig::backbone(std::size_t input_dim) const {
  net::BackboneSpec spec{{input_dim}, activation};
  spec.layer_widths.insert(spec.layer_widths.end(), layer_widths.begin(), layer_widths.end());
  return spec;
}

void RunConfig::validate() const {
  for (double f : split)
    if (!(f > 0.0)) throw InputError("split: fractions must be positive");
  if (std::abs(split[0] + split[1] + split[2] - 1.0) > 1e-9)
    throw InputError("split: fractions must sum to 1");
  if (!dataset_path.empty() && !std::filesystem::exists(dataset_path))
    throw InputError("dataset.path: file does not exist: " + dataset_path);
  if (dataset_path.empty() && synthetic.n == 0) throw InputError("dataset.synthetic.n: must be positive");
  if (layer_widths.empty()) throw InputError("backbone.layer_widths: must not be empty");
  for (auto w : layer_widths)
    if (w == 0) throw InputError("backbone.layer_widths: widths must be positive");
  train.validate();
  criterion.validate();
  if (mu_grid.empty()) throw InputError("mu_grid: must not be empty");
  for (double m : mu_grid)
    if (!(m >= 0.0)) throw InputError("mu_grid: values must be nonnegative");
  if (t_grid.empty()) throw InputError("t_grid: must not be empty");
  for (double t : curve_targets)
    if (!(t >= 0.0 && t <= 1.0)) throw InputError("curve_targets: values must lie in [0, 1]");
  if (!std::is_sorted(curve_targets.begin(), curve_targets.end()))
    throw InputError("curve_targets: must be ascending");
  if (workers == 0) throw InputError("workers: must be positive");
}

namespace {

void check_keys(const json& doc, const std::string& where, std::set<std::string> allowed) {
  if (!doc.is_object()) throw InputError(where + ": expected an object");
  for (const auto& [key, value] : doc.items())
    if (!allowed.count(key)) throw InputError(where + ": unknown key '" + key + "'");
}

template <typename T>
void take(const json& doc, const char* key, T& out) {
  if (doc.contains(key)) out = doc.at(key).get<T>();
}

}  // namespace

void apply_json(RunConfig& cfg, const json& doc) {
  try {
    check_keys(doc, "config",
               {"seed", "split_seed", "dataset", "split", "backbone", "train", "criterion",
                "mu_grid", "t_grid", "curve_targets", "output_dir", "workers"});
    take(doc, "seed", cfg.seed);
    take(doc, "split_seed", cfg.split_seed);
    if (doc.contains("dataset")) {
      const auto& d = doc.at("dataset");
      check_keys(d, "dataset", {"path", "synthetic"});
      take(d, "path", cfg.dataset_path);
      if (d.contains("synthetic")) {
        const auto& s = d.at("synthetic");
        check_keys(s, "dataset.synthetic", {"kind", "n", "seed", "means", "covariances", "priors"});
        if (s.contains("kind")) cfg.synthetic.kind = data::parse_synthetic_kind(s.at("kind").get<std::string>());
        take(s, "n", cfg.synthetic.n);
        take(s, "seed", cfg.synthetic.seed);
        take(s, "means", cfg.synthetic.mixture.means);
        take(s, "covariances", cfg.synthetic.mixture.covariances);
        take(s, "priors", cfg.synthetic.mixture.priors);
      }
    }
    if (doc.contains("split")) {
      const auto& s = doc.at("split");
      check_keys(s, "split", {"train", "val", "test"});
      take(s, "train", cfg.split[0]);
      take(s, "val", cfg.split[1]);
      take(s, "test", cfg.split[2]);
    }
    if (doc.contains("backbone")) {
      const auto& b = doc.at("backbone");
      check_keys(b, "backbone", {"layer_widths", "activation"});
      take(b, "layer_widths", cfg.layer_widths);
      if (b.contains("activation")) cfg.activation = net::parse_activation(b.at("activation").get<std::string>());
    }
    if (doc.contains("train")) {
      const auto& t = doc.at("train");
      check_keys(t, "train",
                 {"epochs", "batch_size", "lr_min", "lr_max", "lr_decay_factor", "lr_decay_epoch",
                  "backbone_update_interval", "warm_start_epochs", "warm_start_lr", "lambda_max",
                  "adaptive", "unrestricted"});
      auto& tc = cfg.train;
      take(t, "epochs", tc.epochs);
      take(t, "batch_size", tc.batch_size);
      take(t, "lr_min", tc.lr_min);
      take(t, "lr_max", tc.lr_max);
      take(t, "lr_decay_factor", tc.lr_decay.factor);
      take(t, "lr_decay_epoch", tc.lr_decay.epoch);
      take(t, "backbone_update_interval", tc.backbone_update_interval);
      take(t, "warm_start_epochs", tc.warm_start_epochs);
      take(t, "warm_start_lr", tc.warm_start_lr);
      take(t, "lambda_max", tc.lambda_max);
      take(t, "adaptive", tc.adaptive);
      take(t, "unrestricted", tc.unrestricted);
    }
    if (doc.contains("criterion")) {
      const auto& c = doc.at("criterion");
      check_keys(c, "criterion", {"mode", "target"});
      if (c.contains("mode")) {
        const auto mode = c.at("mode").get<std::string>();
        if (mode == "error")
          cfg.criterion.mode = select::SelectionCriterion::Mode::ErrorConstrained;
        else if (mode == "coverage")
          cfg.criterion.mode = select::SelectionCriterion::Mode::CoverageConstrained;
        else
          throw InputError("criterion.mode: expected 'error' or 'coverage'");
      }
      take(c, "target", cfg.criterion.target);
    }
    take(doc, "mu_grid", cfg.mu_grid);
    take(doc, "t_grid", cfg.t_grid);
    take(doc, "curve_targets", cfg.curve_targets);
    take(doc, "output_dir", cfg.output_dir);
    take(doc, "workers", cfg.workers);
  } catch (const json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
}

json to_json(const RunConfig& cfg) {
  json synthetic = {{"kind", data::to_string(cfg.synthetic.kind)},
                    {"n", cfg.synthetic.n},
                    {"seed", cfg.synthetic.seed}};
  if (cfg.synthetic.kind == data::SyntheticSpec::Kind::GaussianMixture) {
    synthetic["means"] = cfg.synthetic.mixture.means;
    synthetic["covariances"] = cfg.synthetic.mixture.covariances;
    synthetic["priors"] = cfg.synthetic.mixture.priors;
  }
  json dataset = json::object();
  if (!cfg.dataset_path.empty())
    dataset["path"] = cfg.dataset_path;
  else
    dataset["synthetic"] = synthetic;
  const auto& tc = cfg.train;
  return {
      {"seed", cfg.seed},
      {"split_seed", cfg.split_seed},
      {"dataset", dataset},
      {"split", {{"train", cfg.split[0]}, {"val", cfg.split[1]}, {"test", cfg.split[2]}}},
      {"backbone", {{"layer_widths", cfg.layer_widths}, {"activation", net::to_string(cfg.activation)}}},
      {"train",
       {{"epochs", tc.epochs},
        {"batch_size", tc.batch_size},
        {"lr_min", tc.lr_min},
        {"lr_max", tc.lr_max},
        {"lr_decay_factor", tc.lr_decay.factor},
        {"lr_decay_epoch", tc.lr_decay.epoch},
        {"backbone_update_interval", tc.backbone_update_interval},
        {"warm_start_epochs", tc.warm_start_epochs},
        {"warm_start_lr", tc.warm_start_lr},
        {"lambda_max", tc.lambda_max},
        {"adaptive", tc.adaptive},
        {"unrestricted", tc.unrestricted}}},
      {"criterion",
       {{"mode", cfg.criterion.mode == select::SelectionCriterion::Mode::ErrorConstrained ? "error"
                                                                                          : "coverage"},
        {"target", cfg.criterion.target}}},
      {"mu_grid", cfg.mu_grid},
      {"t_grid", cfg.t_grid},
      {"curve_targets", cfg.curve_targets},
      {"output_dir", cfg.output_dir},
      {"workers", cfg.workers},
  };
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("config file " + path + " is not valid JSON: " + e.what());
  }
  RunConfig cfg;
  apply_json(cfg, doc);
  return cfg;
}

std::string config_hash(const RunConfig& cfg) {
  json doc = to_json(cfg);
  doc.erase("output_dir");
  doc.erase("workers");
  const std::string text = doc.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace osp::config
