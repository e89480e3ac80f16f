#pragma once

// One-sided prediction losses, their Lagrangian, and two-timescale stochastic
// gradient descent-ascent. Also the Deep Gamblers baseline loss.

#include <cstdint>
#include <memory>
#include <vector>

#include "osp/net.hpp"

namespace osp::train {

/// Multipliers lambda_k, slacks phi_k, and the budget multiplier mu.
struct LagrangianState {
  std::vector<double> lambdas;
  std::vector<double> phis;
  double mu = 1.0;

  /// lambda_k = mu, phi_k = 0.
  static LagrangianState initial(int num_classes, double mu);
  /// lambda_k into [0, lambda_max], phi_k into [0, inf).
  void project(double lambda_max);
  void validate(int num_classes) const;
};

/// Per-class pieces of the Lagrangian on one batch. A term whose defining
/// examples are absent from the batch is 0 and flagged.
struct LagrangianTerms {
  std::vector<double> restricted;  // L^res_k
  std::vector<double> constraint;  // C_k
  std::vector<bool> restricted_absent;
  std::vector<bool> constraint_absent;
  double value = 0.0;
};

/// (1/n_k) sum_{y_i = k} -log f_k(x_i). Returns 0 when class k is absent.
double restricted_loss(const net::SelectiveModel& model, const LabeledDataset& batch, int k);
/// (1/n_{!=k}) sum_{y_i != k} -log(1 - f_k(x_i)). Returns 0 when no such example exists.
double constraint_loss(const net::SelectiveModel& model, const LabeledDataset& batch, int k);
/// (1/n) sum_i -log f_k(x_i): the unrestricted objective over all examples.
double unrestricted_loss(const net::SelectiveModel& model, const LabeledDataset& batch, int k);
/// sum_k L^res_k + lambda_k (C_k - phi_k) + mu phi_k
double lagrangian(const net::SelectiveModel& model, const LabeledDataset& batch,
                  const LagrangianState& state);

LagrangianTerms lagrangian_terms(const net::BatchOutputs& outputs, std::span<const int> labels,
                                 const LagrangianState& state, bool unrestricted = false);

/// Loss functions usable with net::backward.
net::LossFunction restricted_loss_fn(int k);
net::LossFunction constraint_loss_fn(int k);
net::LossFunction unrestricted_loss_fn(int k);
/// Gradient with respect to the network only; lambda and phi are constants.
net::LossFunction lagrangian_fn(LagrangianState state, bool unrestricted = false);

struct DGConfig {
  double payoff = 1.5;  // o, in [1, K)
  std::vector<double> thresholds;

  void validate(int num_classes) const;
};

/// -(1/n) sum_i log(f_{y_i}(x_i) + f_?(x_i) / o) for a model whose last output
/// is the abstention score f_?.
double dg_loss(const net::SelectiveModel& model, const LabeledDataset& batch,
               const DGConfig& config);
net::LossFunction dg_loss_fn(const DGConfig& config, int num_classes);

struct LearningRateDecay {
  double factor = 0.1;
  std::size_t epoch = 50;
};

struct TrainConfig {
  double mu = 1.0;
  std::size_t epochs = 200;
  std::size_t batch_size = 128;
  double lr_min = 1e-3;  // descent on (theta, w, phi)
  double lr_max = 1e-4;  // ascent on lambda
  LearningRateDecay lr_decay;
  std::size_t backbone_update_interval = 20;
  std::uint64_t seed = 0;
  std::size_t warm_start_epochs = 50;
  double warm_start_lr = 0.05;
  /// Cap on lambda; a negative value means 10 * mu.
  double lambda_max = -1.0;
  bool adaptive = false;
  bool unrestricted = false;
  bool ascent = true;

  double effective_lambda_max() const { return lambda_max < 0.0 ? 10.0 * mu : lambda_max; }
  /// Throws InputError for nonpositive rates or a zero interval.
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0 is the state before the first SGDA epoch
  double restricted_sum = 0.0;
  std::vector<double> constraint;
  std::vector<double> lambdas;
  std::vector<double> phis;
  std::vector<std::size_t> restricted_absences;
  std::vector<std::size_t> constraint_absences;
};

struct TrainResult {
  net::SelectiveModel model;
  LagrangianState state;
  std::vector<EpochRecord> log;
};

/// Raised when the loss turns non-finite; carries the last finite checkpoint.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, std::shared_ptr<const TrainResult> checkpoint)
      : NumericError(what), checkpoint_(std::move(checkpoint)) {}
  const TrainResult& checkpoint() const { return *checkpoint_; }

 private:
  std::shared_ptr<const TrainResult> checkpoint_;
};

/// Warm start followed by SGDA.
TrainResult sgda_train(const LabeledDataset& data, const net::BackboneSpec& spec,
                       const TrainConfig& config);

/// SGDA from an existing (typically warm-started) model.
TrainResult sgda_refine(net::SelectiveModel model, const LabeledDataset& data,
                        const TrainConfig& config);

/// Deep Gamblers baseline: K + 1 outputs trained on dg_loss.
net::SelectiveModel train_gamblers(const LabeledDataset& data, const net::BackboneSpec& spec,
                                   const DGConfig& dg, std::size_t epochs, double lr,
                                   std::uint64_t seed, std::size_t batch_size = 128);

}  // namespace osp::train
