#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "osp/core.hpp"

using namespace osp;

namespace {

LabeledDataset one_d(const std::vector<std::pair<double, int>>& rows, int K) {
  LabeledDataset d(1, K);
  for (auto [x, y] : rows) d.add(std::vector<double>{x}, y);
  return d;
}

}  // namespace

TEST_CASE("dataset stores rows and counts classes") {
  auto d = one_d({{0.1, 0}, {0.2, 1}, {0.3, 1}}, 2);
  CHECK(d.size() == 3);
  CHECK(d.dim() == 1);
  CHECK(d.class_count(1) == 2);
  CHECK(d.complement_count(1) == 1);
  CHECK(d.features(2)[0] == 0.3);
  const std::vector<std::size_t> idx{2, 0};
  auto s = d.subset(idx);
  CHECK(s.size() == 2);
  CHECK(s.label(0) == 1);
  CHECK(s.features(1)[0] == 0.1);
}

TEST_CASE("dataset rejects bad rows") {
  LabeledDataset d(2, 2);
  CHECK_THROWS_AS(d.add(std::vector<double>{1.0}, 0), InputError);
  CHECK_THROWS_AS(d.add(std::vector<double>{1.0, 2.0}, 2), InputError);
  CHECK_THROWS_AS(d.add(std::vector<double>{1.0, 2.0}, -1), InputError);
  CHECK_THROWS_AS(LabeledDataset({{{1.0}, 0}, {{1.0, 2.0}, 1}}, 2), InputError);
}

TEST_CASE("region algebra") {
  const auto up = Region::upper_threshold(0, 0.5);
  const auto low = Region::lower_threshold(0, 0.2);
  const std::vector<double> a{0.1}, b{0.3}, c{0.7};
  CHECK(up.contains(c));
  CHECK_FALSE(up.contains(std::vector<double>{0.5}));
  CHECK(low.contains(std::vector<double>{0.2}));
  CHECK((up | low).contains(a));
  CHECK_FALSE((up | low).contains(b));
  CHECK((up.complement() - low).contains(b));
  CHECK_FALSE((up & low).contains(a));
  const auto iv = Region::interval(0, 0.2, 0.3);
  CHECK(iv.contains(b));
  CHECK_FALSE(iv.contains(std::vector<double>{0.2}));
  CHECK(Region::everything().contains(a));
  CHECK_FALSE(Region::nothing().contains(a));
  const auto pts = Region::point_set({{0.3}});
  CHECK(pts.contains(b));
  CHECK_FALSE(pts.contains(c));
}

TEST_CASE("classify: single membership, gap, and overlap tie-break") {
  // S_0 = x <= 0.2, S_1 = (0.4, 0.6], S_2 = x > 0.5
  auto fam = DecisionSetFamily::from_regions(
      {Region::lower_threshold(0, 0.2), Region::interval(0, 0.4, 0.6), Region::upper_threshold(0, 0.5)},
      false, 1);
  CHECK(classify(fam, std::vector<double>{0.9}) == SelectiveDecision::predict(2));
  CHECK(classify(fam, std::vector<double>{0.3}).is_reject());
  CHECK(classify(fam, std::vector<double>{0.55}) == SelectiveDecision::predict(1));
  CHECK(classify(fam, std::vector<double>{0.1}).label() == 0);
  CHECK_THROWS_AS(classify(fam, std::vector<double>{0.1, 0.2}), InputError);
}

TEST_CASE("evaluate: perfect, total abstention, and a hand count") {
  auto data = one_d({{0.1, 0}, {0.2, 0}, {0.8, 1}, {0.9, 1}}, 2);
  auto perfect = DecisionSetFamily::from_regions(
      {Region::lower_threshold(0, 0.5), Region::upper_threshold(0, 0.5)}, true, 1);
  auto m = evaluate(perfect, data);
  CHECK(m.coverage == 1.0);
  CHECK(m.raw_error == 0.0);

  auto none = DecisionSetFamily::from_regions({Region::nothing(), Region::nothing()}, true, 1);
  m = evaluate(none, data);
  CHECK(m.coverage == 0.0);
  CHECK(m.raw_error == 0.0);
  CHECK(m.rejection_rate == 1.0);

  // Four points; S_1 holds two of them with labels {1, 2}; the rest rejected.
  auto four = one_d({{0.1, 1}, {0.2, 2}, {0.8, 0}, {0.9, 2}}, 3);
  auto fam = DecisionSetFamily::from_regions(
      {Region::nothing(), Region::lower_threshold(0, 0.5), Region::nothing()}, true, 1);
  m = evaluate(fam, four);
  CHECK(m.coverage == doctest::Approx(0.5));
  CHECK(m.raw_error == doctest::Approx(0.25));
  CHECK(m.per_class_one_sided_error[1] == doctest::Approx(0.25));
  CHECK(m.per_class_one_sided_error[0] == 0.0);

  CHECK_THROWS_AS(evaluate(fam, LabeledDataset(1, 3)), InputError);
}

TEST_CASE("raw error is the sum of one-sided errors for disjoint families") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LabeledDataset d(1, 3);
  for (int i = 0; i < 200; ++i) d.add(std::vector<double>{u(rng)}, static_cast<int>(rng() % 3));
  auto fam = DecisionSetFamily::from_regions(
      {Region::lower_threshold(0, 0.3), Region::interval(0, 0.3, 0.5), Region::upper_threshold(0, 0.8)},
      true, 1);
  const auto m = evaluate(fam, d);
  double sum = 0.0;
  for (double e : m.per_class_one_sided_error) sum += e;
  CHECK(m.raw_error == doctest::Approx(sum).epsilon(1e-12));
  CHECK(m.coverage + m.rejection_rate == doctest::Approx(1.0));
  CHECK(empirically_disjoint(fam, d));
}

TEST_CASE("thresholded scores keep only the argmax") {
  ScoreFunction f = [](FeatureView x) { return std::vector<double>{x[0], 1.0 - x[0]}; };
  auto fam = DecisionSetFamily::thresholded_scores(f, 2, 0.6, 1);
  CHECK(fam.disjoint());
  CHECK(fam.classify(std::vector<double>{0.7}) == SelectiveDecision::predict(0));
  CHECK(fam.classify(std::vector<double>{0.5}).is_reject());
  CHECK(fam.classify(std::vector<double>{0.3}) == SelectiveDecision::predict(1));
  auto zero = DecisionSetFamily::thresholded_scores(f, 2, 0.0, 1);
  CHECK(zero.classify(std::vector<double>{0.5}) == SelectiveDecision::predict(0));
}

TEST_CASE("argmax ties go to the smallest index") {
  const std::vector<double> v{0.2, 0.4, 0.4};
  CHECK(argmax(v) == 1);
}
