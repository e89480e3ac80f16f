#pragma once

// Dataset ingestion, synthesis, and seeded splitting.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "osp/core.hpp"

namespace osp::data {

/// Reads `f0,...,f{d-1},label` CSV. K is max label + 1.
/// Throws ParseError (with the line number) on a malformed row, InputError on
/// a file with no data rows.
LabeledDataset ingest_csv(const std::string& path);
LabeledDataset parse_csv(std::istream& in);

/// Writes with round-trip precision.
void write_csv(const LabeledDataset& data, const std::string& path);
void write_csv(const LabeledDataset& data, std::ostream& out);

struct GaussianMixture {
  std::vector<std::vector<double>> means;                     // K x d
  std::vector<std::vector<std::vector<double>>> covariances;  // K x d x d
  std::vector<double> priors;                                 // K

  int num_classes() const { return static_cast<int>(priors.size()); }
  std::size_t dim() const { return means.empty() ? 0 : means.front().size(); }
  /// Throws InputError on ragged shapes, priors not summing to 1, or a
  /// covariance that is not symmetric positive definite.
  void validate() const;
  /// Joint density sum_k pi_k N(x; m_k, S_k).
  double density(FeatureView x) const;
  /// P(Y = k | x) for every k.
  std::vector<double> posterior(FeatureView x) const;
};

struct SyntheticSpec {
  enum class Kind { AnalyticExample, GaussianMixture, SeparableBlobs };
  Kind kind = Kind::GaussianMixture;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  GaussianMixture mixture;  // GaussianMixture only
};

/// Two isotropic 2-D blobs at (-3, 0) and (3, 0) with standard deviation 0.5.
GaussianMixture separable_blobs();

SyntheticSpec::Kind parse_synthetic_kind(const std::string& name);
std::string to_string(SyntheticSpec::Kind kind);

/// Deterministic given the seed.
LabeledDataset synthesize(const SyntheticSpec& spec);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Seeded shuffle of [0, n) cut by the fractions, which must be positive and
/// sum to 1.
Split split_indices(std::size_t n, const std::array<double, 3>& fractions, std::uint64_t seed);

}  // namespace osp::data
