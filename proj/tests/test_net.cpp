#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "osp/data.hpp"
#include "osp/net.hpp"

using namespace osp;
using namespace osp::net;

namespace {

LabeledDataset random_batch(std::mt19937_64& rng, std::size_t n, std::size_t d, int K) {
  std::normal_distribution<double> g(0.0, 1.0);
  LabeledDataset b(d, K);
  std::vector<double> x(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : x) v = g(rng);
    b.add(x, static_cast<int>(rng() % static_cast<std::uint64_t>(K)));
  }
  return b;
}

double max_relative_fd_error(SelectiveModel model, const LabeledDataset& batch, const LossFunction& loss) {
  const auto analytic = backward(model, batch, loss).gradient.values;
  auto params = model.parameters();
  double worst = 0.0;
  const double h = 1e-5;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = loss_value(model, batch, loss);
    params[i] = keep - h;
    const double down = loss_value(model, batch, loss);
    params[i] = keep;
    const double numeric = (up - down) / (2.0 * h);
    const double scale = std::max({std::abs(numeric), std::abs(analytic[i]), 1e-3});
    worst = std::max(worst, std::abs(numeric - analytic[i]) / scale);
  }
  return worst;
}

}  // namespace

TEST_CASE("zero head gives uniform scores") {
  auto m = SelectiveModel::initialized({{3, 5}, Activation::Tanh}, 4, 1);
  m.head_weight().setZero();
  m.head_bias().setZero();
  for (double s : m.forward(std::vector<double>{0.3, -1.0, 2.0})) CHECK(s == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("closed-form softmax") {
  Matrix logits(1, 2);
  logits << std::log(2.0), 0.0;
  const Matrix p = softmax(logits);
  CHECK(std::abs(p(0, 0) - 2.0 / 3.0) < 1e-9);
  CHECK(std::abs(p(0, 1) - 1.0 / 3.0) < 1e-9);
}

TEST_CASE("softmax is normalised and shift invariant") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    Matrix z(1, 2 + trial % 5);
    for (Eigen::Index j = 0; j < z.cols(); ++j) z(0, j) = g(rng);
    const Matrix p = softmax(z);
    CHECK(std::abs(p.sum() - 1.0) < 1e-9);
    CHECK((p.array() > 0.0).all());
    const Matrix shifted = softmax((z.array() + g(rng)).matrix());
    CHECK((p - shifted).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("forward rejects a width mismatch") {
  auto m = SelectiveModel::initialized(default_backbone(2), 2, 0);
  CHECK_THROWS_AS(m.forward(std::vector<double>{1.0}), InputError);
}

TEST_CASE("glorot initialisation bounds and zero biases") {
  auto m = SelectiveModel::initialized({{4, 6}, Activation::Relu}, 3, 2);
  const double b0 = std::sqrt(6.0 / 10.0);
  CHECK(m.weight(0).cwiseAbs().maxCoeff() <= b0);
  CHECK(m.bias(0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(m.head_bias().cwiseAbs().maxCoeff() == 0.0);
  CHECK(SelectiveModel::initialized({{4, 6}, Activation::Relu}, 3, 2) == m);
}

TEST_CASE("probe loss gradient matches hand derivation") {
  SelectiveModel m({{1, 1}, Activation::Identity}, 1);
  m.weight(0)(0, 0) = 1.0;
  const double w = 0.7, x = 1.3;
  const int y = 2;
  m.head_weight()(0, 0) = w;
  LabeledDataset batch(1, 3);
  batch.add(std::vector<double>{x}, y);
  LossFunction probe = [](const BatchOutputs& out, std::span<const int> labels, Matrix& grad) {
    grad = Matrix::Zero(out.logits.rows(), out.logits.cols());
    const double r = out.logits(0, 0) - labels[0];
    grad(0, 0) = 2.0 * r;
    return r * r;
  };
  const auto res = backward(m, batch, probe);
  const auto head = res.gradient.layout.head();
  CHECK(res.gradient.values[head.weight_offset] == doctest::Approx(2.0 * (w * x - y) * x).epsilon(1e-12));
  CHECK(res.value == doctest::Approx((w * x - y) * (w * x - y)));
}

TEST_CASE("constant loss has zero gradient") {
  std::mt19937_64 rng(1);
  auto m = SelectiveModel::initialized(default_backbone(3), 2, 1);
  auto batch = random_batch(rng, 8, 3, 2);
  LossFunction constant = [](const BatchOutputs& out, std::span<const int>, Matrix& grad) {
    grad = Matrix::Zero(out.logits.rows(), out.logits.cols());
    return 1.5;
  };
  for (double g : backward(m, batch, constant).gradient.values) CHECK(g == 0.0);
}

TEST_CASE("cross-entropy gradient agrees with central differences") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const Activation act = trial % 2 ? Activation::Tanh : Activation::Relu;
    auto m = SelectiveModel::initialized({{3, 5, 4}, act}, 3, static_cast<std::uint64_t>(trial));
    auto batch = random_batch(rng, 6, 3, 3);
    CHECK(max_relative_fd_error(m, batch, cross_entropy_loss()) < 1e-4);
  }
}

TEST_CASE("non-finite loss raises a numeric error") {
  std::mt19937_64 rng(2);
  auto m = SelectiveModel::initialized(default_backbone(2), 2, 0);
  auto batch = random_batch(rng, 4, 2, 2);
  LossFunction bad = [](const BatchOutputs& out, std::span<const int>, Matrix& grad) {
    grad = Matrix::Zero(out.logits.rows(), out.logits.cols());
    return std::numeric_limits<double>::quiet_NaN();
  };
  CHECK_THROWS_AS(backward(m, batch, bad), NumericError);
}

TEST_CASE("clamp bounds and derivative") {
  CHECK(clamp_probability(0.0) == kProbFloor);
  CHECK(clamp_probability(1.0) == 1.0 - kProbFloor);
  CHECK(clamp_probability(0.3) == 0.3);
  CHECK(clamp_derivative(0.0) == 0.0);
  CHECK(clamp_derivative(0.3) == 1.0);
}

TEST_CASE("warm start on separable blobs") {
  data::SyntheticSpec spec{data::SyntheticSpec::Kind::SeparableBlobs, 1000, 3, {}};
  const auto d = data::synthesize(spec);
  auto m = warm_start(d, default_backbone(2), 2, 50, 0.05, 11);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < d.size(); ++i) correct += argmax(m.forward(d.features(i))) == d.label(i);
  CHECK(static_cast<double>(correct) / static_cast<double>(d.size()) >= 0.99);
}

TEST_CASE("zero epochs returns the seeded initialisation; training is deterministic") {
  std::mt19937_64 rng(3);
  auto d = random_batch(rng, 50, 2, 2);
  CHECK(warm_start(d, default_backbone(2), 2, 0, 0.05, 5) ==
        SelectiveModel::initialized(default_backbone(2), 2, 5));
  CHECK(warm_start(d, default_backbone(2), 2, 3, 0.05, 5) == warm_start(d, default_backbone(2), 2, 3, 0.05, 5));
}

TEST_CASE("serialisation round trip and failures") {
  auto m = SelectiveModel::initialized({{3, 7, 5}, Activation::Tanh}, 3, 9);
  const auto bytes = serialize(m);
  CHECK(deserialize(bytes) == m);
  CHECK(deserialize(bytes, 3) == m);
  CHECK_THROWS_AS(deserialize(std::span<const std::uint8_t>(bytes).first(bytes.size() - 3)), FormatError);
  CHECK_THROWS_AS(deserialize(bytes, 2), ShapeError);
  auto bad_version = bytes;
  bad_version[4] = 99;
  CHECK_THROWS_AS(deserialize(bad_version), FormatError);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(deserialize(bad_magic), FormatError);
}
