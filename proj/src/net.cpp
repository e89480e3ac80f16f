#include "osp/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <memory>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>

namespace osp::net {

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "identity") return Activation::Identity;
  throw InputError("unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Relu:
      return "relu";
    case Activation::Tanh:
      return "tanh";
    case Activation::Identity:
      return "identity";
  }
  return "unknown";
}

void BackboneSpec::validate() const {
  if (layer_widths.size() < 2)
    throw InputError("backbone needs at least input and feature widths");
  for (auto w : layer_widths)
    if (w == 0) throw InputError("backbone widths must be positive");
}

BackboneSpec default_backbone(std::size_t input_dim) {
  return {{input_dim, 64, 64}, Activation::Relu};
}

ParameterLayout::ParameterLayout(const BackboneSpec& spec, int num_outputs) {
  spec.validate();
  if (num_outputs < 1) throw InputError("model needs at least one output");
  auto add = [&](std::size_t in, std::size_t out) {
    slots_.push_back({total_, total_ + in * out, out, in});
    total_ += in * out + out;
  };
  for (std::size_t l = 0; l < spec.num_layers(); ++l)
    add(spec.layer_widths[l], spec.layer_widths[l + 1]);
  add(spec.feature_dim(), static_cast<std::size_t>(num_outputs));
}

// ---------------------------------------------------------------------------

namespace {

void activate(Matrix& m, Activation a) {
  switch (a) {
    case Activation::Relu:
      m = m.cwiseMax(0.0);
      break;
    case Activation::Tanh:
      m = m.array().tanh().matrix();
      break;
    case Activation::Identity:
      break;
  }
}

// Multiplies `grad` in place by the activation derivative, expressed through
// the activation output.
void activation_backward(Matrix& grad, const Matrix& out, Activation a) {
  switch (a) {
    case Activation::Relu:
      grad = (out.array() > 0.0).select(grad, 0.0);
      break;
    case Activation::Tanh:
      grad = (grad.array() * (1.0 - out.array().square())).matrix();
      break;
    case Activation::Identity:
      break;
  }
}

Matrix affine(const Matrix& in, ConstMatrixMap w, ConstVectorMap b) {
  Matrix z = in * w.transpose();
  z.rowwise() += b.transpose();
  return z;
}

Matrix dataset_matrix(const LabeledDataset& data) {
  return ConstMatrixMap(data.raw_features().data(), static_cast<Eigen::Index>(data.size()),
                        static_cast<Eigen::Index>(data.dim()));
}

}  // namespace

SelectiveModel::SelectiveModel(BackboneSpec spec, int num_outputs)
    : spec_(std::move(spec)),
      num_outputs_(num_outputs),
      layout_(spec_, num_outputs),
      params_(layout_.total(), 0.0) {}

SelectiveModel SelectiveModel::initialized(BackboneSpec spec, int num_outputs,
                                           std::uint64_t seed) {
  SelectiveModel m(std::move(spec), num_outputs);
  std::mt19937_64 rng(seed);
  for (const auto& slot : m.layout_.slots()) {
    const double limit = std::sqrt(6.0 / static_cast<double>(slot.rows + slot.cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (std::size_t i = 0; i < slot.rows * slot.cols; ++i)
      m.params_[slot.weight_offset + i] = dist(rng);
  }
  return m;
}

MatrixMap SelectiveModel::weight(std::size_t layer) {
  const auto& s = layout_.slots().at(layer);
  return {params_.data() + s.weight_offset, static_cast<Eigen::Index>(s.rows),
          static_cast<Eigen::Index>(s.cols)};
}

ConstMatrixMap SelectiveModel::weight(std::size_t layer) const {
  const auto& s = layout_.slots().at(layer);
  return {params_.data() + s.weight_offset, static_cast<Eigen::Index>(s.rows),
          static_cast<Eigen::Index>(s.cols)};
}

VectorMap SelectiveModel::bias(std::size_t layer) {
  const auto& s = layout_.slots().at(layer);
  return {params_.data() + s.bias_offset, static_cast<Eigen::Index>(s.rows)};
}

ConstVectorMap SelectiveModel::bias(std::size_t layer) const {
  const auto& s = layout_.slots().at(layer);
  return {params_.data() + s.bias_offset, static_cast<Eigen::Index>(s.rows)};
}

BatchOutputs SelectiveModel::forward_batch(const Matrix& inputs) const {
  if (static_cast<std::size_t>(inputs.cols()) != spec_.input_dim()) {
    std::ostringstream msg;
    msg << "input width " << inputs.cols() << " does not match model input width "
        << spec_.input_dim();
    throw InputError(msg.str());
  }
  Matrix h = inputs;
  for (std::size_t l = 0; l < spec_.num_layers(); ++l) {
    h = affine(h, weight(l), bias(l));
    activate(h, spec_.activation);
  }
  BatchOutputs out;
  out.logits = affine(h, weight(num_dense_layers() - 1), bias(num_dense_layers() - 1));
  out.probs = softmax(out.logits);
  return out;
}

BatchOutputs SelectiveModel::forward_batch(const LabeledDataset& data) const {
  return forward_batch(dataset_matrix(data));
}

std::vector<double> SelectiveModel::logits(FeatureView x) const {
  Matrix in = ConstMatrixMap(x.data(), 1, static_cast<Eigen::Index>(x.size()));
  const auto out = forward_batch(in);
  return {out.logits.data(), out.logits.data() + out.logits.size()};
}

std::vector<double> SelectiveModel::forward(FeatureView x) const {
  Matrix in = ConstMatrixMap(x.data(), 1, static_cast<Eigen::Index>(x.size()));
  const auto out = forward_batch(in);
  return {out.probs.data(), out.probs.data() + out.probs.size()};
}

// ---------------------------------------------------------------------------

double clamp_probability(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }

double clamp_derivative(double p) {
  return (p > kProbFloor && p < 1.0 - kProbFloor) ? 1.0 : 0.0;
}

Matrix softmax(const Matrix& logits) {
  Matrix p = logits;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    p.row(i).array() -= p.row(i).maxCoeff();
    p.row(i) = p.row(i).array().exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

Matrix softmax_backward(const Matrix& probs, const Matrix& grad_probs) {
  const Vector inner = (probs.array() * grad_probs.array()).rowwise().sum();
  Matrix g = grad_probs;
  g.colwise() -= inner;
  return (g.array() * probs.array()).matrix();
}

LossFunction cross_entropy_loss() {
  return [](const BatchOutputs& out, std::span<const int> labels, Matrix& grad_logits) {
    const auto n = static_cast<double>(labels.size());
    Matrix grad_probs = Matrix::Zero(out.probs.rows(), out.probs.cols());
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      const double p = out.probs(r, labels[i]);
      total -= std::log(clamp_probability(p));
      grad_probs(r, labels[i]) = -clamp_derivative(p) / (clamp_probability(p) * n);
    }
    grad_logits = softmax_backward(out.probs, grad_probs);
    return total / n;
  };
}

namespace {

double checked(double value) {
  if (!std::isfinite(value)) {
    std::ostringstream msg;
    msg << "loss is not finite (" << value << ")";
    throw NumericError(msg.str());
  }
  return value;
}

}  // namespace

LossResult backward(const SelectiveModel& model, const LabeledDataset& batch,
                    const LossFunction& loss) {
  if (batch.empty()) throw InputError("backward needs a nonempty batch");
  const auto& spec = model.spec();
  const std::size_t layers = spec.num_layers();

  std::vector<Matrix> acts;
  acts.reserve(layers + 1);
  acts.push_back(dataset_matrix(batch));
  if (static_cast<std::size_t>(acts[0].cols()) != spec.input_dim())
    throw InputError("batch width does not match model input width");
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix h = affine(acts.back(), model.weight(l), model.bias(l));
    activate(h, spec.activation);
    acts.push_back(std::move(h));
  }
  BatchOutputs out;
  out.logits = affine(acts.back(), model.weight(layers), model.bias(layers));
  out.probs = softmax(out.logits);

  Matrix delta = Matrix::Zero(out.logits.rows(), out.logits.cols());
  LossResult result;
  result.value = checked(loss(out, batch.labels(), delta));
  result.gradient.layout = model.layout();
  result.gradient.values.assign(model.layout().total(), 0.0);

  auto write = [&](std::size_t layer, const Matrix& d, const Matrix& input) {
    const auto& s = model.layout().slots()[layer];
    MatrixMap gw(result.gradient.values.data() + s.weight_offset,
                 static_cast<Eigen::Index>(s.rows), static_cast<Eigen::Index>(s.cols));
    VectorMap gb(result.gradient.values.data() + s.bias_offset,
                 static_cast<Eigen::Index>(s.rows));
    gw.noalias() = d.transpose() * input;
    gb = d.colwise().sum().transpose();
  };

  write(layers, delta, acts[layers]);
  for (std::size_t l = layers; l-- > 0;) {
    Matrix d = delta * model.weight(l + 1);
    activation_backward(d, acts[l + 1], spec.activation);
    write(l, d, acts[l]);
    delta = std::move(d);
  }
  return result;
}

double loss_value(const SelectiveModel& model, const LabeledDataset& batch,
                  const LossFunction& loss) {
  if (batch.empty()) throw InputError("loss needs a nonempty batch");
  const auto out = model.forward_batch(batch);
  Matrix scratch = Matrix::Zero(out.logits.rows(), out.logits.cols());
  return checked(loss(out, batch.labels(), scratch));
}

void sgd_train(SelectiveModel& model, const LabeledDataset& data, const LossFunction& loss,
               std::size_t epochs, double lr, std::size_t batch_size, std::uint64_t seed) {
  if (data.empty()) throw InputError("training needs a nonempty dataset");
  if (batch_size == 0) throw InputError("batch size must be positive");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  auto params = model.parameters();
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      const auto batch =
          data.subset(std::span<const std::size_t>(order.data() + start, end - start));
      const auto r = backward(model, batch, loss);
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * r.gradient.values[i];
    }
  }
}

SelectiveModel warm_start(const LabeledDataset& data, const BackboneSpec& spec,
                          int num_outputs, std::size_t epochs, double lr,
                          std::uint64_t seed, std::size_t batch_size) {
  if (data.empty()) throw InputError("warm start needs a nonempty dataset");
  auto model = SelectiveModel::initialized(spec, num_outputs, seed);
  sgd_train(model, data, cross_entropy_loss(), epochs, lr, batch_size, seed + 1);
  return model;
}

// ---------------------------------------------------------------------------
// Binary layout, little-endian host order:
//   "OSPM" | u32 version | u32 activation | u32 width count | u64 widths...
//   | u32 outputs | u64 parameter count | f64 parameters...

namespace {

constexpr char kMagic[4] = {'O', 'S', 'P', 'M'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > bytes_.size()) throw FormatError("model payload is truncated");
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize(const SelectiveModel& model) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kModelFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.spec().activation));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.spec().layer_widths.size()));
  for (auto w : model.spec().layer_widths) put<std::uint64_t>(out, w);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.num_outputs()));
  put<std::uint64_t>(out, model.parameters().size());
  for (double v : model.parameters()) put<double>(out, v);
  return out;
}

SelectiveModel deserialize(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  for (char c : kMagic)
    if (in.get<char>() != c) throw FormatError("not a model payload (bad magic)");
  const auto version = in.get<std::uint32_t>();
  if (version != kModelFormatVersion) {
    std::ostringstream msg;
    msg << "model format version " << version << " is not supported (expected "
        << kModelFormatVersion << ")";
    throw FormatError(msg.str());
  }
  const auto activation = in.get<std::uint32_t>();
  if (activation > static_cast<std::uint32_t>(Activation::Identity))
    throw FormatError("unknown activation code in model payload");
  BackboneSpec spec;
  spec.activation = static_cast<Activation>(activation);
  const auto widths = in.get<std::uint32_t>();
  if (widths > 1024) throw FormatError("implausible layer count in model payload");
  for (std::uint32_t i = 0; i < widths; ++i) spec.layer_widths.push_back(in.get<std::uint64_t>());
  const auto outputs = static_cast<int>(in.get<std::uint32_t>());
  const auto count = in.get<std::uint64_t>();

  std::unique_ptr<SelectiveModel> model;
  try {
    model = std::make_unique<SelectiveModel>(spec, outputs);
  } catch (const InputError& e) {
    throw ShapeError(std::string("inconsistent model shape: ") + e.what());
  }
  if (count != model->parameters().size())
    throw ShapeError("parameter count does not match declared shapes");
  for (double& v : model->parameters()) v = in.get<double>();
  if (!in.done()) throw FormatError("trailing bytes after model payload");
  return std::move(*model);
}

SelectiveModel deserialize(std::span<const std::uint8_t> bytes, int expected_outputs) {
  auto model = deserialize(bytes);
  if (model.num_outputs() != expected_outputs) {
    std::ostringstream msg;
    msg << "model has " << model.num_outputs() << " outputs, expected " << expected_outputs;
    throw ShapeError(msg.str());
  }
  return model;
}

void save_model(const SelectiveModel& model, const std::string& path) {
  const auto bytes = serialize(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write model file " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

SelectiveModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open model file " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace osp::net
