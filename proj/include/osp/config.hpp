#pragma once

// Run configuration: defaults, JSON overlay, validation, and a stable hash.

#include <array>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "osp/data.hpp"
#include "osp/net.hpp"
#include "osp/select.hpp"
#include "osp/train.hpp"

namespace osp::config {

struct RunConfig {
  std::uint64_t seed = 0;
  std::uint64_t split_seed = 0;

  /// Exactly one of these is used; a nonempty path wins.
  std::string dataset_path;
  data::SyntheticSpec synthetic;

  std::array<double, 3> split{0.6, 0.2, 0.2};

  /// Widths after the input layer; the input width comes from the data.
  std::vector<std::size_t> layer_widths{64, 64};
  net::Activation activation = net::Activation::Relu;

  train::TrainConfig train;
  select::SelectionCriterion criterion{select::SelectionCriterion::Mode::ErrorConstrained, 0.02};
  std::vector<double> mu_grid = select::desk_mu_grid();
  std::vector<double> t_grid = select::default_thresholds();
  std::vector<double> curve_targets;

  std::string output_dir = "osp_run";
  std::size_t workers = 1;

  net::BackboneSpec backbone(std::size_t input_dim) const;
  /// Throws InputError naming the offending field.
  void validate() const;
};

/// Overlays every key present in `doc` onto `cfg`; unknown keys are errors.
void apply_json(RunConfig& cfg, const nlohmann::json& doc);
nlohmann::json to_json(const RunConfig& cfg);
RunConfig load_config(const std::string& path);

/// FNV-1a over the canonical JSON of every field except output_dir and
/// workers, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

}  // namespace osp::config
