#include "osp/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace osp::train {

using net::BatchOutputs;
using net::clamp_derivative;
using net::clamp_probability;
using net::Matrix;

LagrangianState LagrangianState::initial(int num_classes, double mu) {
  const auto k = static_cast<std::size_t>(num_classes);
  return {std::vector<double>(k, mu), std::vector<double>(k, 0.0), mu};
}

void LagrangianState::project(double lambda_max) {
  for (double& l : lambdas) l = std::clamp(l, 0.0, lambda_max);
  for (double& p : phis) p = std::max(p, 0.0);
}

void LagrangianState::validate(int num_classes) const {
  if (lambdas.size() != static_cast<std::size_t>(num_classes) ||
      phis.size() != static_cast<std::size_t>(num_classes))
    throw InputError("Lagrangian state length differs from the number of classes");
  for (double l : lambdas)
    if (!(l >= 0.0)) throw InputError("multipliers must be nonnegative");
  for (double p : phis)
    if (!(p >= 0.0)) throw InputError("slacks must be nonnegative");
  if (!std::isfinite(mu)) throw InputError("mu must be finite");
}

namespace {

struct Term {
  double value = 0.0;
  bool absent = false;
};

// Each term optionally adds weight * dTerm/dprobs into `grad`.
Term restricted_term(const Matrix& probs, std::span<const int> labels, int k, double weight,
                     Matrix* grad) {
  const auto count = static_cast<double>(std::count(labels.begin(), labels.end(), k));
  if (count == 0.0) return {0.0, true};
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != k) continue;
    const double p = probs(static_cast<Eigen::Index>(i), k);
    total -= std::log(clamp_probability(p));
    if (grad)
      (*grad)(static_cast<Eigen::Index>(i), k) -=
          weight * clamp_derivative(p) / (clamp_probability(p) * count);
  }
  return {total / count, false};
}

Term constraint_term(const Matrix& probs, std::span<const int> labels, int k, double weight,
                     Matrix* grad) {
  const auto count =
      static_cast<double>(labels.size()) - static_cast<double>(std::count(labels.begin(), labels.end(), k));
  if (count == 0.0) return {0.0, true};
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == k) continue;
    const double p = probs(static_cast<Eigen::Index>(i), k);
    const double q = 1.0 - clamp_probability(p);
    total -= std::log(q);
    if (grad) (*grad)(static_cast<Eigen::Index>(i), k) += weight * clamp_derivative(p) / (q * count);
  }
  return {total / count, false};
}

Term unrestricted_term(const Matrix& probs, std::span<const int> labels, int k, double weight,
                       Matrix* grad) {
  const auto count = static_cast<double>(labels.size());
  if (count == 0.0) return {0.0, true};
  double total = 0.0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    const double p = probs(i, k);
    total -= std::log(clamp_probability(p));
    if (grad) (*grad)(i, k) -= weight * clamp_derivative(p) / (clamp_probability(p) * count);
  }
  return {total / count, false};
}

LagrangianTerms compute_terms(const BatchOutputs& out, std::span<const int> labels,
                              const LagrangianState& state, bool unrestricted, Matrix* grad) {
  const int K = static_cast<int>(out.probs.cols());
  state.validate(K);
  LagrangianTerms t;
  t.value = 0.0;
  for (int k = 0; k < K; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const Term obj = unrestricted ? unrestricted_term(out.probs, labels, k, 1.0, grad)
                                  : restricted_term(out.probs, labels, k, 1.0, grad);
    const Term con = constraint_term(out.probs, labels, k, state.lambdas[ku], grad);
    t.restricted.push_back(obj.value);
    t.constraint.push_back(con.value);
    t.restricted_absent.push_back(obj.absent);
    t.constraint_absent.push_back(con.absent);
    t.value += obj.value + state.lambdas[ku] * (con.value - state.phis[ku]) +
               state.mu * state.phis[ku];
  }
  return t;
}

net::LossFunction single_term_fn(int k, Term (*term)(const Matrix&, std::span<const int>, int,
                                                     double, Matrix*)) {
  return [k, term](const BatchOutputs& out, std::span<const int> labels, Matrix& grad_logits) {
    if (k < 0 || k >= out.probs.cols()) throw InputError("class index outside [0, K)");
    Matrix grad = Matrix::Zero(out.probs.rows(), out.probs.cols());
    const Term t = term(out.probs, labels, k, 1.0, &grad);
    grad_logits = net::softmax_backward(out.probs, grad);
    return t.value;
  };
}

double evaluate_fn(const net::SelectiveModel& model, const LabeledDataset& batch,
                   const net::LossFunction& fn) {
  return net::loss_value(model, batch, fn);
}

}  // namespace

LagrangianTerms lagrangian_terms(const BatchOutputs& outputs, std::span<const int> labels,
                                 const LagrangianState& state, bool unrestricted) {
  return compute_terms(outputs, labels, state, unrestricted, nullptr);
}

net::LossFunction restricted_loss_fn(int k) { return single_term_fn(k, restricted_term); }
net::LossFunction constraint_loss_fn(int k) { return single_term_fn(k, constraint_term); }
net::LossFunction unrestricted_loss_fn(int k) { return single_term_fn(k, unrestricted_term); }

net::LossFunction lagrangian_fn(LagrangianState state, bool unrestricted) {
  return [state = std::move(state), unrestricted](const BatchOutputs& out,
                                                  std::span<const int> labels,
                                                  Matrix& grad_logits) {
    Matrix grad = Matrix::Zero(out.probs.rows(), out.probs.cols());
    const auto t = compute_terms(out, labels, state, unrestricted, &grad);
    grad_logits = net::softmax_backward(out.probs, grad);
    return t.value;
  };
}

double restricted_loss(const net::SelectiveModel& model, const LabeledDataset& batch, int k) {
  return evaluate_fn(model, batch, restricted_loss_fn(k));
}

double constraint_loss(const net::SelectiveModel& model, const LabeledDataset& batch, int k) {
  return evaluate_fn(model, batch, constraint_loss_fn(k));
}

double unrestricted_loss(const net::SelectiveModel& model, const LabeledDataset& batch, int k) {
  return evaluate_fn(model, batch, unrestricted_loss_fn(k));
}

double lagrangian(const net::SelectiveModel& model, const LabeledDataset& batch,
                  const LagrangianState& state) {
  return evaluate_fn(model, batch, lagrangian_fn(state));
}

// ---------------------------------------------------------------------------

void DGConfig::validate(int num_classes) const {
  if (!(payoff >= 1.0 && payoff < static_cast<double>(num_classes))) {
    std::ostringstream msg;
    msg << "payoff " << payoff << " outside [1, " << num_classes << ")";
    throw InputError(msg.str());
  }
}

net::LossFunction dg_loss_fn(const DGConfig& config, int num_classes) {
  config.validate(num_classes);
  const double inv_payoff = 1.0 / config.payoff;
  return [inv_payoff, num_classes](const BatchOutputs& out, std::span<const int> labels,
                                   Matrix& grad_logits) {
    if (out.probs.cols() != num_classes + 1)
      throw ShapeError("gamblers loss needs K + 1 model outputs");
    const auto n = static_cast<double>(labels.size());
    const Eigen::Index abstain = num_classes;
    Matrix grad = Matrix::Zero(out.probs.rows(), out.probs.cols());
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const double v = out.probs(r, labels[i]) + inv_payoff * out.probs(r, abstain);
      total -= std::log(clamp_probability(v));
      const double d = -clamp_derivative(v) / (clamp_probability(v) * n);
      grad(r, labels[i]) += d;
      grad(r, abstain) += d * inv_payoff;
    }
    grad_logits = net::softmax_backward(out.probs, grad);
    return total / n;
  };
}

double dg_loss(const net::SelectiveModel& model, const LabeledDataset& batch,
               const DGConfig& config) {
  return net::loss_value(model, batch, dg_loss_fn(config, model.num_outputs() - 1));
}

net::SelectiveModel train_gamblers(const LabeledDataset& data, const net::BackboneSpec& spec,
                                   const DGConfig& dg, std::size_t epochs, double lr,
                                   std::uint64_t seed, std::size_t batch_size) {
  const int K = data.num_classes();
  auto loss = dg_loss_fn(dg, K);
  auto model = net::SelectiveModel::initialized(spec, K + 1, seed);
  net::sgd_train(model, data, loss, epochs, lr, batch_size, seed + 1);
  return model;
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (!(lr_min > 0.0) || !(lr_max > 0.0) || !(warm_start_lr > 0.0))
    throw InputError("learning rates must be positive");
  if (!(lr_decay.factor > 0.0)) throw InputError("learning-rate decay factor must be positive");
  if (backbone_update_interval < 1) throw InputError("backbone update interval must be >= 1");
  if (batch_size < 1) throw InputError("batch size must be >= 1");
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw InputError("mu must be finite and nonnegative");
}

namespace {

// Plain SGD, or per-parameter moment scaling when adaptive.
class StepRule {
 public:
  StepRule(std::size_t size, bool adaptive)
      : adaptive_(adaptive), m_(adaptive ? size : 0, 0.0), v_(adaptive ? size : 0, 0.0) {}

  void tick() { ++t_; }

  double step(std::size_t i, double grad, double lr) {
    if (!adaptive_) return lr * grad;
    constexpr double b1 = 0.9, b2 = 0.999, guard = 1e-8;
    m_[i] = b1 * m_[i] + (1.0 - b1) * grad;
    v_[i] = b2 * v_[i] + (1.0 - b2) * grad * grad;
    const double mhat = m_[i] / (1.0 - std::pow(b1, static_cast<double>(t_)));
    const double vhat = v_[i] / (1.0 - std::pow(b2, static_cast<double>(t_)));
    return lr * mhat / (std::sqrt(vhat) + guard);
  }

 private:
  bool adaptive_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::size_t t_ = 0;
};

EpochRecord record_epoch(std::size_t epoch, const net::SelectiveModel& model,
                         const LabeledDataset& data, const LagrangianState& state,
                         bool unrestricted, const std::vector<std::size_t>& r_abs,
                         const std::vector<std::size_t>& c_abs) {
  const auto out = model.forward_batch(data);
  const auto terms = lagrangian_terms(out, data.labels(), state, unrestricted);
  EpochRecord r;
  r.epoch = epoch;
  r.restricted_sum = std::accumulate(terms.restricted.begin(), terms.restricted.end(), 0.0);
  r.constraint = terms.constraint;
  r.lambdas = state.lambdas;
  r.phis = state.phis;
  r.restricted_absences = r_abs;
  r.constraint_absences = c_abs;
  return r;
}

}  // namespace

TrainResult sgda_refine(net::SelectiveModel model, const LabeledDataset& data,
                        const TrainConfig& config) {
  config.validate();
  if (data.empty()) throw InputError("training needs a nonempty dataset");
  const int K = data.num_classes();
  if (model.num_outputs() != K) throw ShapeError("model output count differs from K");

  const auto Ku = static_cast<std::size_t>(K);
  const double lambda_max = config.effective_lambda_max();
  LagrangianState state = LagrangianState::initial(K, config.mu);
  state.project(lambda_max);

  const std::size_t backbone = model.layout().backbone_size();
  auto params = model.parameters();
  std::vector<double> pending(backbone, 0.0);
  StepRule param_rule(params.size(), config.adaptive);
  StepRule phi_rule(Ku, config.adaptive);
  std::vector<std::size_t> r_abs(Ku, 0), c_abs(Ku, 0);

  std::vector<EpochRecord> log;
  log.push_back(record_epoch(0, model, data, state, config.unrestricted, r_abs, c_abs));

  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double scale = epoch >= config.lr_decay.epoch ? config.lr_decay.factor : 1.0;
    const double lr_min = config.lr_min * scale;
    const double lr_max = config.lr_max * scale;
    std::shuffle(order.begin(), order.end(), rng);

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const auto batch =
          data.subset(std::span<const std::size_t>(order.data() + start, end - start));

      LagrangianTerms terms;
      const net::LossFunction loss = [&](const BatchOutputs& out, std::span<const int> labels,
                                         Matrix& grad_logits) {
        Matrix grad = Matrix::Zero(out.probs.rows(), out.probs.cols());
        terms = compute_terms(out, labels, state, config.unrestricted, &grad);
        grad_logits = net::softmax_backward(out.probs, grad);
        return terms.value;
      };

      net::LossResult r;
      try {
        r = net::backward(model, batch, loss);
      } catch (const NumericError& e) {
        auto checkpoint = std::make_shared<const TrainResult>(TrainResult{model, state, log});
        throw TrainingDiverged(std::string("training diverged: ") + e.what(), checkpoint);
      }

      param_rule.tick();
      phi_rule.tick();
      for (std::size_t i = 0; i < params.size(); ++i) {
        const double s = param_rule.step(i, r.gradient.values[i], lr_min);
        if (i < backbone)
          pending[i] += s;
        else
          params[i] -= s;
      }
      // Simultaneous descent on phi and ascent on lambda, both from the
      // pre-step multipliers.
      const auto lambdas = state.lambdas;
      const auto phis = state.phis;
      for (std::size_t k = 0; k < Ku; ++k) {
        state.phis[k] -= phi_rule.step(k, state.mu - lambdas[k], lr_min);
        if (config.ascent && !terms.constraint_absent[k])
          state.lambdas[k] += lr_max * (terms.constraint[k] - phis[k]);
        r_abs[k] += terms.restricted_absent[k];
        c_abs[k] += terms.constraint_absent[k];
      }
      state.project(lambda_max);
    }

    if ((epoch + 1) % config.backbone_update_interval == 0) {
      for (std::size_t i = 0; i < backbone; ++i) params[i] -= pending[i];
      std::fill(pending.begin(), pending.end(), 0.0);
    }
    log.push_back(record_epoch(epoch + 1, model, data, state, config.unrestricted, r_abs, c_abs));
  }
  return {std::move(model), std::move(state), std::move(log)};
}

TrainResult sgda_train(const LabeledDataset& data, const net::BackboneSpec& spec,
                       const TrainConfig& config) {
  config.validate();
  auto model = net::warm_start(data, spec, data.num_classes(), config.warm_start_epochs,
                               config.warm_start_lr, config.seed, config.batch_size);
  return sgda_refine(std::move(model), data, config);
}

}  // namespace osp::train
