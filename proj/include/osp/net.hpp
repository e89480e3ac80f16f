#pragma once

// Shared-backbone multilayer perceptron with K softmax-normalised heads,
// hand-written reverse-mode gradients, and a versioned binary model format.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "osp/core.hpp"

namespace osp::net {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;
using VectorMap = Eigen::Map<Vector>;
using ConstVectorMap = Eigen::Map<const Vector>;

enum class Activation : std::uint32_t { Relu = 0, Tanh = 1, Identity = 2 };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

struct BackboneSpec {
  /// Input width, hidden widths..., feature width.
  std::vector<std::size_t> layer_widths;
  Activation activation = Activation::Relu;

  std::size_t input_dim() const { return layer_widths.front(); }
  std::size_t feature_dim() const { return layer_widths.back(); }
  std::size_t num_layers() const { return layer_widths.size() - 1; }
  /// Throws InputError for fewer than two widths or a zero width.
  void validate() const;

  bool operator==(const BackboneSpec&) const = default;
};

/// Two hidden layers of width 64 with relu.
BackboneSpec default_backbone(std::size_t input_dim);

/// Offsets of each dense layer in the flat parameter vector. Backbone layers
/// come first, the K heads last; weights are row-major (out x in).
struct LayerSlot {
  std::size_t weight_offset;
  std::size_t bias_offset;
  std::size_t rows;
  std::size_t cols;
};

class ParameterLayout {
 public:
  ParameterLayout() = default;
  ParameterLayout(const BackboneSpec& spec, int num_outputs);

  const std::vector<LayerSlot>& slots() const { return slots_; }
  const LayerSlot& head() const { return slots_.back(); }
  std::size_t total() const { return total_; }
  /// Parameters before this index belong to the backbone.
  std::size_t backbone_size() const { return head().weight_offset; }

  bool operator==(const ParameterLayout&) const = default;

 private:
  std::vector<LayerSlot> slots_;
  std::size_t total_ = 0;
};

struct GradientBundle {
  ParameterLayout layout;
  std::vector<double> values;

  std::span<const double> backbone() const {
    return {values.data(), layout.backbone_size()};
  }
  std::span<const double> heads() const {
    return std::span<const double>(values).subspan(layout.backbone_size());
  }
};

struct BatchOutputs {
  Matrix logits;  // n x K
  Matrix probs;   // n x K
};

class SelectiveModel {
 public:
  /// All parameters zero.
  SelectiveModel(BackboneSpec spec, int num_outputs);
  /// Uniform in +-sqrt(6 / (fan_in + fan_out)) per layer, zero biases.
  static SelectiveModel initialized(BackboneSpec spec, int num_outputs, std::uint64_t seed);

  const BackboneSpec& spec() const { return spec_; }
  int num_outputs() const { return num_outputs_; }
  const ParameterLayout& layout() const { return layout_; }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  MatrixMap weight(std::size_t layer);
  ConstMatrixMap weight(std::size_t layer) const;
  VectorMap bias(std::size_t layer);
  ConstVectorMap bias(std::size_t layer) const;
  std::size_t num_dense_layers() const { return layout_.slots().size(); }
  MatrixMap head_weight() { return weight(num_dense_layers() - 1); }
  VectorMap head_bias() { return bias(num_dense_layers() - 1); }

  /// Softmax scores for one input. Throws InputError on a width mismatch.
  std::vector<double> forward(FeatureView x) const;
  std::vector<double> logits(FeatureView x) const;
  /// Rows of `inputs` are examples.
  BatchOutputs forward_batch(const Matrix& inputs) const;
  BatchOutputs forward_batch(const LabeledDataset& data) const;

  bool operator==(const SelectiveModel& o) const {
    return spec_ == o.spec_ && num_outputs_ == o.num_outputs_ && params_ == o.params_;
  }

 private:
  BackboneSpec spec_;
  int num_outputs_;
  ParameterLayout layout_;
  std::vector<double> params_;
};

inline constexpr double kProbFloor = 1e-12;

/// Clamp to [1e-12, 1 - 1e-12] before any logarithm.
double clamp_probability(double p);
/// d clamp(p) / dp: 1 inside the clamp range, 0 outside.
double clamp_derivative(double p);

/// Row-wise softmax with max-logit subtraction.
Matrix softmax(const Matrix& logits);
/// Pulls a gradient with respect to softmax outputs back to the logits.
Matrix softmax_backward(const Matrix& probs, const Matrix& grad_probs);

/// A scalar loss of a batch. Returns the value and fills dLoss/dlogits
/// (already sized n x K on entry, zero-filled).
using LossFunction =
    std::function<double(const BatchOutputs&, std::span<const int> labels, Matrix& grad_logits)>;

/// -(1/n) sum log f_{y_i}(x_i)
LossFunction cross_entropy_loss();

struct LossResult {
  double value = 0.0;
  GradientBundle gradient;
};

/// Loss and exact gradient with respect to every parameter. Throws
/// InputError on an empty batch and NumericError on a non-finite loss.
LossResult backward(const SelectiveModel& model, const LabeledDataset& batch,
                    const LossFunction& loss);
/// Loss only.
double loss_value(const SelectiveModel& model, const LabeledDataset& batch,
                  const LossFunction& loss);

/// Minibatch SGD on `loss`, reshuffling with `seed` every epoch.
void sgd_train(SelectiveModel& model, const LabeledDataset& data, const LossFunction& loss,
               std::size_t epochs, double lr, std::size_t batch_size, std::uint64_t seed);

/// Seeded initialisation followed by cross-entropy training.
SelectiveModel warm_start(const LabeledDataset& data, const BackboneSpec& spec,
                          int num_outputs, std::size_t epochs, double lr,
                          std::uint64_t seed, std::size_t batch_size = 128);

inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<std::uint8_t> serialize(const SelectiveModel& model);
/// Throws FormatError on truncation, bad magic, or a version mismatch.
SelectiveModel deserialize(std::span<const std::uint8_t> bytes);
/// As above, and throws ShapeError unless the model has `expected_outputs`.
SelectiveModel deserialize(std::span<const std::uint8_t> bytes, int expected_outputs);

void save_model(const SelectiveModel& model, const std::string& path);
SelectiveModel load_model(const std::string& path);

}  // namespace osp::net
