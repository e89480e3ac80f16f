#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "osp/oracle.hpp"

using namespace osp;
using namespace osp::oracle;

namespace {

LabeledDataset one_d(const std::vector<std::pair<double, int>>& rows, int K) {
  LabeledDataset d(1, K);
  for (auto [x, y] : rows) d.add(std::vector<double>{x}, y);
  return d;
}

LabeledDataset random_instance(std::mt19937_64& rng, std::size_t n, int K) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LabeledDataset d(1, K);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::round(u(rng) * 20.0) / 20.0;
    // Label skewed by position so that thresholds matter.
    const int y = u(rng) < 0.7 ? std::min(K - 1, static_cast<int>(x * K)) : static_cast<int>(rng() % K);
    d.add(std::vector<double>{x}, y);
  }
  return d;
}

// Independent brute force: every K-tuple of candidates (or empty), by direct
// membership counting.
double brute_force_sc(const LabeledDataset& d, const FiniteHypothesisClass& cls, double eps) {
  const int K = d.num_classes();
  const std::size_t m = cls.size() + 1;
  std::vector<std::vector<bool>> member(cls.size(), std::vector<bool>(d.size()));
  for (std::size_t c = 0; c < cls.size(); ++c)
    for (std::size_t i = 0; i < d.size(); ++i) member[c][i] = cls.candidate(c).region.contains(d.features(i));
  const double budget = std::floor(eps * static_cast<double>(d.size()) + 1e-9);
  double best = 0.0;
  std::vector<std::size_t> pick(static_cast<std::size_t>(K), 0);
  while (true) {
    bool ok = true;
    double covered = 0.0, errors = 0.0;
    for (std::size_t i = 0; i < d.size() && ok; ++i) {
      int hits = 0;
      for (int k = 0; k < K; ++k) {
        const auto p = pick[static_cast<std::size_t>(k)];
        if (p > 0 && member[p - 1][i]) {
          ++hits;
          if (d.label(i) != k) errors += 1.0;
        }
      }
      if (hits > 1) ok = false;
      if (hits == 1) covered += 1.0;
    }
    if (ok && errors <= budget) best = std::max(best, covered / static_cast<double>(d.size()));
    std::size_t pos = 0;
    while (pos < pick.size() && ++pick[pos] == m) pick[pos++] = 0;
    if (pos == pick.size()) break;
  }
  return best;
}

}  // namespace

TEST_CASE("osp exact: two-point threshold example") {
  auto d = one_d({{0.1, 1}, {0.9, 0}}, 2);
  auto cls = FiniteHypothesisClass::upper_thresholds(0, FiniteHypothesisClass::data_cuts(d, 0));
  auto sol = solve_osp_exact(d, cls, 0, 0.0);
  CHECK(sol.value == doctest::Approx(0.5));
  CHECK(sol.family.classify(std::vector<double>{0.9}).label() == 0);
  CHECK_FALSE(sol.family.memberships(std::vector<double>{0.1})[0]);
}

TEST_CASE("osp exact: vacuous constraint and forced empty set") {
  auto d = one_d({{0.1, 1}, {0.4, 0}, {0.6, 1}, {0.9, 0}}, 2);
  auto cuts = FiniteHypothesisClass::data_cuts(d, 0);
  auto cls = FiniteHypothesisClass::thresholds(0, cuts);
  CHECK(solve_osp_exact(d, cls, 0, 1.0).value == doctest::Approx(1.0));

  // Every lower set holding the class-0 point also holds the class-1 point.
  auto alternating = one_d({{0.1, 1}, {0.2, 0}}, 2);
  auto up = FiniteHypothesisClass::lower_thresholds(0, FiniteHypothesisClass::data_cuts(alternating, 0));
  auto sol = solve_osp_exact(alternating, up, 0, 0.0);
  CHECK(sol.value == 0.0);
  CHECK(sol.feasible);
}

TEST_CASE("sc exact: Bayes-risk budget gives full coverage") {
  auto d = one_d({{0.1, 1}, {0.2, 1}, {0.3, 0}, {0.6, 0}, {0.7, 0}, {0.8, 1}}, 2);
  auto cls = FiniteHypothesisClass::thresholds(0, FiniteHypothesisClass::data_cuts(d, 0));
  const double risk = threshold_classification_risk(d, 0);
  CHECK(risk == doctest::Approx(1.0 / 6.0));
  auto sol = solve_sc_exact(d, cls, risk);
  CHECK(sol.value == doctest::Approx(1.0));
  CHECK(sol.error <= risk + 1e-12);
}

TEST_CASE("sc exact: no error-free tuple leaves only the empty family") {
  // Every threshold set containing a point also contains a wrongly labelled
  // point for either prediction.
  auto d = one_d({{0.1, 0}, {0.1, 1}}, 2);
  auto cls = FiniteHypothesisClass::thresholds(0, FiniteHypothesisClass::data_cuts(d, 0));
  auto sol = solve_sc_exact(d, cls, 0.0);
  CHECK(sol.value == 0.0);
  CHECK(sol.error == 0.0);
}

TEST_CASE("sc exact: capacity error names the cap") {
  auto d = one_d({{0.1, 0}, {0.2, 1}, {0.3, 2}}, 3);
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(i / 20.0);
  auto cls = FiniteHypothesisClass::thresholds(0, grid);
  try {
    solve_sc_exact(d, cls, 0.1, 1000.0);
    FAIL("expected CapacityError");
  } catch (const CapacityError& e) {
    CHECK(std::string(e.what()).find("1000") != std::string::npos);
  }
}

TEST_CASE("sc exact agrees with brute force on random instances") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const int K = 2 + trial % 2;
    auto d = random_instance(rng, 12 + static_cast<std::size_t>(trial % 5), K);
    std::vector<double> grid{-1.0, 0.12, 0.27, 0.43, 0.61, 0.78, 2.0};
    auto cls = FiniteHypothesisClass::thresholds(0, grid) + FiniteHypothesisClass::intervals(0, {0.1, 0.4, 0.7});
    for (double eps : {0.0, 0.1, 0.25}) {
      auto sol = solve_sc_exact(d, cls, eps);
      CHECK(sol.value == doctest::Approx(brute_force_sc(d, cls, eps)).epsilon(1e-12));
      CHECK(sol.error <= eps + 1e-12);
      CHECK(empirically_disjoint(sol.family, d));
    }
  }
}

TEST_CASE("decoupled solver with one class equals osp exact") {
  std::mt19937_64 rng(5);
  auto d = random_instance(rng, 40, 1);
  auto cls = FiniteHypothesisClass::thresholds(0, FiniteHypothesisClass::data_cuts(d, 0));
  for (double eps : {0.0, 0.05, 0.2}) {
    auto dec = solve_osp_decoupled(d, cls, eps, count_lattice_alpha_grid(d.size(), 1, eps));
    auto one = solve_osp_exact(d, cls, 0, eps);
    CHECK(dec.value == doctest::Approx(one.value));
  }
}

TEST_CASE("decoupled solver is disjoint, feasible, and within 2 eps of exact") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const int K = 2 + trial % 2;
    auto d = random_instance(rng, 30, K);
    auto cls = FiniteHypothesisClass::thresholds(0, {-1.0, 0.2, 0.35, 0.5, 0.65, 0.8, 2.0});
    const double eps = 0.1;
    auto dec = solve_osp_decoupled(d, cls, eps, count_lattice_alpha_grid(d.size(), K, eps));
    auto exact = solve_sc_exact(d, cls, eps);
    CHECK(empirically_disjoint(dec.family, d));
    CHECK(dec.error <= eps + 1e-12);
    CHECK(dec.value >= exact.value - 2.0 * eps - 1e-12);
    CHECK(overlap_mass(dec.raw_sets, d) <= 2.0 * eps + 1e-12);
  }
}

TEST_CASE("alpha grids") {
  CHECK(uniform_alpha_grid(2, 0.1).size() == 11);
  CHECK(count_lattice_alpha_grid(100, 2, 0.03).size() == 4);
  CHECK(count_lattice_alpha_grid(10, 3, 0.05).size() == 1);
  CHECK_THROWS_AS(AlphaAllocation({0.7, 0.5}), InputError);
  CHECK_THROWS_AS(AlphaAllocation({-0.1, 0.5}), InputError);
  CHECK(error_budget(0.07, 100) == 7);
}

TEST_CASE("overlap mass") {
  auto d = one_d({{0.1, 0}, {0.5, 1}, {0.9, 0}, {0.95, 1}}, 2);
  CHECK(overlap_mass({Region::lower_threshold(0, 0.3), Region::upper_threshold(0, 0.3)}, d) == 0.0);
  CHECK(overlap_mass({Region::everything(), Region::everything()}, d) == 1.0);
  CHECK(overlap_mass({Region::upper_threshold(0, 0.3), Region::upper_threshold(0, 0.7)}, d) ==
        doctest::Approx(0.5));
}

TEST_CASE("analytic example coverage") {
  auto a = analytic_example_coverage(0.04);
  CHECK(a.coverage == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(a.s1_cut == doctest::Approx(0.8));
  CHECK(a.s2_cut == doctest::Approx(0.2));
  a = analytic_example_coverage(0.0);
  CHECK(a.coverage == 0.0);
  CHECK(a.s1_cut == 1.0);
  CHECK(a.s2_cut == 0.0);
  a = analytic_example_coverage(0.01);
  CHECK(a.coverage == doctest::Approx(0.2));
  CHECK(a.s1_cut == doctest::Approx(0.9));
  CHECK_THROWS_AS(analytic_example_coverage(0.25), InputError);
  CHECK_THROWS_AS(analytic_example_coverage(-0.01), InputError);
  CHECK(analytic_osp_value(0.02) == doctest::Approx(0.2));
}

TEST_CASE("analytic sampler") {
  CHECK(sample_analytic_example(10, 4) == sample_analytic_example(10, 4));
  auto one = sample_analytic_example(1, 9);
  CHECK(one.size() == 1);
  CHECK(one == sample_analytic_example(1, 9));
  auto big = sample_analytic_example(1'000'000, 2);
  const double p0 = static_cast<double>(big.class_count(0)) / 1e6;
  CHECK(p0 >= 0.497);
  CHECK(p0 <= 0.503);
  const double risk = threshold_classification_risk(big, 0);
  CHECK(risk >= 0.247);
  CHECK(risk <= 0.253);
}

TEST_CASE("empirical analytic instance matches 2 sqrt(eps)") {
  auto d = sample_analytic_example(100'000, 21);
  std::vector<double> grid;
  for (int i = 0; i <= 500; ++i) grid.push_back(i / 500.0);
  auto cls = FiniteHypothesisClass::thresholds(0, grid);
  auto sol = solve_sc_exact(d, cls, 0.04);
  CHECK(std::abs(sol.value - 0.4) <= 0.02);
  auto dec = solve_osp_decoupled(d, cls, 0.04, uniform_alpha_grid(2, 0.1));
  CHECK(dec.value >= 0.4 - 0.08 - 0.02);
  CHECK(dec.value <= 0.4 + 0.02);
}

TEST_CASE("gating construction") {
  auto ref = one_d({{0.1, 0}, {0.3, 1}, {0.6, 0}, {0.9, 1}}, 2);
  std::vector<Region> pi{Region::lower_threshold(0, 0.5), Region::upper_threshold(0, 0.5)};
  auto all = gating_to_sets(Region::everything(), pi, ref);
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK_FALSE(all.classify(ref.features(i)).is_reject());
  auto none = gating_to_sets(Region::nothing(), pi, ref);
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(none.classify(ref.features(i)).is_reject());
  CHECK_THROWS_AS(gating_to_sets(Region::everything(), {pi[0], pi[0]}, ref), InputError);

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LabeledDataset pts(1, 3);
  for (int i = 0; i < 100; ++i) pts.add(std::vector<double>{u(rng)}, 0);
  std::vector<Region> three{Region::lower_threshold(0, 0.3), Region::interval(0, 0.3, 0.7),
                            Region::upper_threshold(0, 0.7)};
  auto gate = Region::interval(0, 0.2, 0.5) | Region::upper_threshold(0, 0.8);
  auto fam = gating_to_sets(gate, three, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto x = pts.features(i);
    const auto got = fam.classify(x);
    if (!gate.contains(x)) {
      CHECK(got.is_reject());
    } else {
      const int expect = x[0] <= 0.3 ? 0 : (x[0] <= 0.7 ? 1 : 2);
      CHECK(got.label() == expect);
    }
  }
}

TEST_CASE("confidence sets") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LabeledDataset pts(1, 3);
  for (int i = 0; i < 100; ++i) pts.add(std::vector<double>{u(rng)}, 0);

  auto covering = DecisionSetFamily::from_regions(
      {Region::lower_threshold(0, 0.3), Region::interval(0, 0.3, 0.7), Region::upper_threshold(0, 0.7)},
      true, 1);
  auto c = sets_to_confidence(covering, pts);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (int k = 0; k < 3; ++k)
      CHECK(c[static_cast<std::size_t>(k)].contains(pts.features(i)) ==
            covering.memberships(pts.features(i))[static_cast<std::size_t>(k)]);

  auto empty = DecisionSetFamily::from_regions({Region::nothing(), Region::nothing(), Region::nothing()},
                                               true, 1);
  for (const auto& ck : sets_to_confidence(empty, pts))
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK(ck.contains(pts.features(i)));

  auto gappy = DecisionSetFamily::from_regions(
      {Region::lower_threshold(0, 0.2), Region::interval(0, 0.4, 0.6), Region::upper_threshold(0, 0.9)},
      true, 1);
  auto conf = sets_to_confidence(gappy, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto x = pts.features(i);
    const bool rejected = gappy.classify(x).is_reject();
    for (int a = 0; a < 3; ++a)
      for (int b = a + 1; b < 3; ++b)
        CHECK((conf[static_cast<std::size_t>(a)].contains(x) && conf[static_cast<std::size_t>(b)].contains(x)) ==
              rejected);
  }
  auto back = confidence_to_sets(conf, 1);
  for (std::size_t i = 0; i < pts.size(); ++i)
    CHECK(back.classify(pts.features(i)) == gappy.classify(pts.features(i)));

  auto overlapping = DecisionSetFamily::from_regions(
      {Region::lower_threshold(0, 0.6), Region::upper_threshold(0, 0.4), Region::nothing()}, false, 1);
  CHECK_THROWS_AS(sets_to_confidence(overlapping, pts), InputError);
}

TEST_CASE("erm trend with a single n") {
  auto rows = erm_feasibility_trend(0.04, {100}, 5);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].n == 100);
  CHECK(rows[0].seeds == 5);
  CHECK(rows[0].median_violation >= 0.0);
}
