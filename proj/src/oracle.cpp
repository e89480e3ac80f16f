#include "osp/oracle.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

namespace osp::oracle {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Membership of one candidate over the points of a dataset.
class Bits {
 public:
  explicit Bits(std::size_t n = 0) : n_(n), words_((n + 63) / 64, 0) {}

  void set(std::size_t i) { words_[i / 64] |= (std::uint64_t{1} << (i % 64)); }
  bool test(std::size_t i) const { return (words_[i / 64] >> (i % 64)) & 1U; }

  bool intersects(const Bits& o) const {
    for (std::size_t w = 0; w < words_.size(); ++w)
      if (words_[w] & o.words_[w]) return true;
    return false;
  }
  void unite(const Bits& o) {
    for (std::size_t w = 0; w < words_.size(); ++w) words_[w] |= o.words_[w];
  }
  void subtract(const Bits& o) {
    for (std::size_t w = 0; w < words_.size(); ++w) words_[w] &= ~o.words_[w];
  }
  std::size_t count() const {
    std::size_t c = 0;
    for (auto w : words_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
  }
  std::size_t count_and(const Bits& o) const {
    std::size_t c = 0;
    for (std::size_t w = 0; w < words_.size(); ++w)
      c += static_cast<std::size_t>(std::popcount(words_[w] & o.words_[w]));
    return c;
  }

 private:
  std::size_t n_;
  std::vector<std::uint64_t> words_;
};

bool candidate_contains(const Candidate& c, FeatureView x) {
  switch (c.kind) {
    case HypothesisKind::UpperThreshold:
      return x[c.feature] > c.lo;
    case HypothesisKind::LowerThreshold:
      return x[c.feature] <= c.hi;
    case HypothesisKind::Interval:
      return x[c.feature] > c.lo && x[c.feature] <= c.hi;
    case HypothesisKind::ExplicitSetList:
      break;
  }
  return c.region.contains(x);
}

Bits membership(const Candidate& c, const LabeledDataset& data) {
  Bits b(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    if (candidate_contains(c, data.features(i))) b.set(i);
  return b;
}

Bits label_bits(const LabeledDataset& data, int k) {
  Bits b(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.label(i) == k) b.set(i);
  return b;
}

// Sizes and per-class counts of every candidate. Threshold and interval
// candidates are counted by binary search over the sorted feature.
struct CandidateStats {
  std::size_t size = 0;
  std::vector<std::size_t> per_class;

  std::size_t one_sided_errors(int k) const {
    return size - per_class[static_cast<std::size_t>(k)];
  }
};

class SortedFeature {
 public:
  SortedFeature(const LabeledDataset& data, std::size_t feature)
      : classes_(static_cast<std::size_t>(data.num_classes())) {
    std::vector<std::pair<double, int>> rows;
    rows.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
      rows.emplace_back(data.features(i)[feature], data.label(i));
    std::sort(rows.begin(), rows.end());
    values_.reserve(rows.size());
    prefix_.assign(classes_, std::vector<std::size_t>(rows.size() + 1, 0));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      values_.push_back(rows[i].first);
      for (std::size_t k = 0; k < classes_; ++k)
        prefix_[k][i + 1] = prefix_[k][i] + (rows[i].second == static_cast<int>(k));
    }
  }

  // Number of points with value <= t.
  std::size_t rank(double t) const {
    return static_cast<std::size_t>(
        std::upper_bound(values_.begin(), values_.end(), t) - values_.begin());
  }

  CandidateStats range(std::size_t begin, std::size_t end) const {
    CandidateStats s;
    if (end < begin) end = begin;
    s.size = end - begin;
    s.per_class.resize(classes_);
    for (std::size_t k = 0; k < classes_; ++k)
      s.per_class[k] = prefix_[k][end] - prefix_[k][begin];
    return s;
  }

  std::size_t size() const { return values_.size(); }

 private:
  std::size_t classes_;
  std::vector<double> values_;
  std::vector<std::vector<std::size_t>> prefix_;
};

std::vector<CandidateStats> candidate_stats(const LabeledDataset& data,
                                            const FiniteHypothesisClass& cls) {
  std::map<std::size_t, SortedFeature> sorted;
  auto feature_index = [&](std::size_t f) -> const SortedFeature& {
    auto it = sorted.find(f);
    if (it == sorted.end()) it = sorted.emplace(f, SortedFeature(data, f)).first;
    return it->second;
  };

  std::vector<CandidateStats> out;
  out.reserve(cls.size());
  const std::size_t n = data.size();
  for (const Candidate& c : cls.candidates()) {
    if (c.kind != HypothesisKind::ExplicitSetList && c.feature >= data.dim())
      throw InputError("hypothesis feature index exceeds dataset dimension");
    switch (c.kind) {
      case HypothesisKind::UpperThreshold: {
        const auto& sf = feature_index(c.feature);
        out.push_back(sf.range(sf.rank(c.lo), n));
        break;
      }
      case HypothesisKind::LowerThreshold: {
        const auto& sf = feature_index(c.feature);
        out.push_back(sf.range(0, sf.rank(c.hi)));
        break;
      }
      case HypothesisKind::Interval: {
        const auto& sf = feature_index(c.feature);
        out.push_back(sf.range(sf.rank(c.lo), sf.rank(c.hi)));
        break;
      }
      case HypothesisKind::ExplicitSetList: {
        CandidateStats s;
        s.per_class.assign(static_cast<std::size_t>(data.num_classes()), 0);
        for (std::size_t i = 0; i < n; ++i) {
          if (!c.region.contains(data.features(i))) continue;
          ++s.size;
          ++s.per_class[static_cast<std::size_t>(data.label(i))];
        }
        out.push_back(std::move(s));
        break;
      }
    }
  }
  return out;
}

void check_problem(const LabeledDataset& data, const FiniteHypothesisClass& cls,
                   double eps) {
  if (cls.size() == 0) throw InputError("hypothesis class enumeration is empty");
  if (data.empty()) throw InputError("oracle needs a nonempty dataset");
  if (!(eps >= 0.0 && eps <= 1.0)) throw InputError("error level must lie in [0, 1]");
}

std::ptrdiff_t best_osp_candidate(const std::vector<CandidateStats>& stats, int k,
                                  std::size_t budget) {
  std::ptrdiff_t best = -1;
  std::size_t best_size = 0;
  for (std::size_t i = 0; i < stats.size(); ++i) {
    if (stats[i].one_sided_errors(k) > budget) continue;
    if (best < 0 || stats[i].size > best_size) {
      best = static_cast<std::ptrdiff_t>(i);
      best_size = stats[i].size;
    }
  }
  return best;
}

const Region& region_or_empty(const FiniteHypothesisClass& cls, std::ptrdiff_t idx) {
  static const Region empty = Region::nothing();
  return idx < 0 ? empty : cls.candidate(static_cast<std::size_t>(idx)).region;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

// ---------------------------------------------------------------------------

FiniteHypothesisClass FiniteHypothesisClass::upper_thresholds(
    std::size_t feature, const std::vector<double>& grid) {
  FiniteHypothesisClass c;
  for (double t : grid)
    c.candidates_.push_back({HypothesisKind::UpperThreshold, feature, t, kInf,
                             Region::upper_threshold(feature, t)});
  return c;
}

FiniteHypothesisClass FiniteHypothesisClass::lower_thresholds(
    std::size_t feature, const std::vector<double>& grid) {
  FiniteHypothesisClass c;
  for (double t : grid)
    c.candidates_.push_back({HypothesisKind::LowerThreshold, feature, -kInf, t,
                             Region::lower_threshold(feature, t)});
  return c;
}

FiniteHypothesisClass FiniteHypothesisClass::thresholds(
    std::size_t feature, const std::vector<double>& grid) {
  return upper_thresholds(feature, grid) + lower_thresholds(feature, grid);
}

FiniteHypothesisClass FiniteHypothesisClass::intervals(
    std::size_t feature, const std::vector<double>& grid) {
  FiniteHypothesisClass c;
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (std::size_t j = i + 1; j < grid.size(); ++j)
      c.candidates_.push_back({HypothesisKind::Interval, feature, grid[i], grid[j],
                               Region::interval(feature, grid[i], grid[j])});
  return c;
}

FiniteHypothesisClass FiniteHypothesisClass::explicit_sets(std::vector<Region> sets) {
  FiniteHypothesisClass c;
  for (auto& r : sets)
    c.candidates_.push_back({HypothesisKind::ExplicitSetList, 0, 0.0, 0.0, std::move(r)});
  return c;
}

std::vector<double> FiniteHypothesisClass::data_cuts(const LabeledDataset& data,
                                                     std::size_t feature) {
  if (feature >= data.dim()) throw InputError("feature index exceeds dataset dimension");
  std::vector<double> values;
  values.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) values.push_back(data.features(i)[feature]);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  std::vector<double> cuts;
  cuts.reserve(values.size() + 1);
  cuts.push_back(-kInf);
  for (std::size_t i = 0; i + 1 < values.size(); ++i)
    cuts.push_back(0.5 * (values[i] + values[i + 1]));
  cuts.push_back(kInf);
  return cuts;
}

FiniteHypothesisClass FiniteHypothesisClass::operator+(
    const FiniteHypothesisClass& other) const {
  FiniteHypothesisClass c = *this;
  c.candidates_.insert(c.candidates_.end(), other.candidates_.begin(),
                       other.candidates_.end());
  return c;
}

std::size_t FiniteHypothesisClass::distinct_behaviors(const LabeledDataset& data) const {
  std::set<std::vector<bool>> patterns;
  for (const Candidate& c : candidates_) {
    std::vector<bool> p(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
      p[i] = candidate_contains(c, data.features(i));
    patterns.insert(std::move(p));
  }
  return patterns.size();
}

// ---------------------------------------------------------------------------

AlphaAllocation::AlphaAllocation(std::vector<double> alphas) : alphas_(std::move(alphas)) {
  double total = 0.0;
  for (double a : alphas_) {
    if (!(a >= 0.0)) throw InputError("alpha allocations must be nonnegative");
    total += a;
  }
  if (total > 1.0 + 1e-12) throw InputError("alpha allocation sums above 1");
}

namespace {

void compositions(int parts, int total, std::vector<int>& current,
                  std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    current.push_back(total);
    out.push_back(current);
    current.pop_back();
    return;
  }
  for (int first = 0; first <= total; ++first) {
    current.push_back(first);
    compositions(parts - 1, total - first, current, out);
    current.pop_back();
  }
}

std::vector<std::vector<int>> compositions(int parts, int total) {
  std::vector<std::vector<int>> out;
  std::vector<int> current;
  compositions(parts, total, current, out);
  return out;
}

}  // namespace

std::vector<AlphaAllocation> uniform_alpha_grid(int num_classes, double step) {
  if (num_classes < 1) throw InputError("alpha grid needs K >= 1");
  if (!(step > 0.0 && step <= 1.0)) throw InputError("alpha grid step must lie in (0, 1]");
  const int steps = static_cast<int>(std::lround(1.0 / step));
  std::vector<AlphaAllocation> grid;
  for (const auto& c : compositions(num_classes, steps)) {
    std::vector<double> a;
    for (int m : c) a.push_back(static_cast<double>(m) / steps);
    grid.emplace_back(std::move(a));
  }
  return grid;
}

std::vector<AlphaAllocation> default_alpha_grid(int num_classes) {
  return uniform_alpha_grid(num_classes, num_classes == 2 ? 0.1 : 0.25);
}

std::size_t error_budget(double eps, std::size_t n) {
  return static_cast<std::size_t>(std::floor(eps * static_cast<double>(n) + 1e-9));
}

std::vector<AlphaAllocation> count_lattice_alpha_grid(std::size_t n, int num_classes,
                                                      double eps) {
  if (num_classes < 1) throw InputError("alpha grid needs K >= 1");
  const std::size_t budget = error_budget(eps, n);
  if (budget == 0)
    return {AlphaAllocation(std::vector<double>(static_cast<std::size_t>(num_classes),
                                                1.0 / num_classes))};
  const double scale = eps * static_cast<double>(n);
  std::vector<AlphaAllocation> grid;
  for (const auto& c : compositions(num_classes, static_cast<int>(budget))) {
    std::vector<double> a;
    double total = 0.0;
    for (int m : c) {
      a.push_back(m / scale);
      total += a.back();
    }
    // Guard against the last ulp pushing the sum above one.
    if (total > 1.0)
      for (double& v : a) v /= total;
    grid.emplace_back(std::move(a));
  }
  return grid;
}

// ---------------------------------------------------------------------------

OracleSolution solve_osp_exact(const LabeledDataset& data,
                               const FiniteHypothesisClass& cls, int k, double eps_k) {
  check_problem(data, cls, eps_k);
  if (k < 0 || k >= data.num_classes()) throw InputError("class index outside [0, K)");
  const auto stats = candidate_stats(data, cls);
  const std::ptrdiff_t best = best_osp_candidate(stats, k, error_budget(eps_k, data.size()));
  const double n = static_cast<double>(data.size());

  OracleSolution sol{DecisionSetFamily::from_regions({region_or_empty(cls, best)}, true,
                                                     data.dim())};
  sol.chosen = {best};
  if (best >= 0) {
    const auto& s = stats[static_cast<std::size_t>(best)];
    sol.value = static_cast<double>(s.size) / n;
    sol.error = static_cast<double>(s.one_sided_errors(k)) / n;
  }
  return sol;
}

OracleSolution solve_sc_exact(const LabeledDataset& data, const FiniteHypothesisClass& cls,
                              double eps, double tuple_cap) {
  check_problem(data, cls, eps);
  const int K = data.num_classes();
  const double tuples = std::pow(static_cast<double>(cls.size() + 1), K);
  if (tuples > tuple_cap) {
    std::ostringstream msg;
    msg << "exhaustive search needs " << tuples << " tuples, above the cap of "
        << tuple_cap;
    throw CapacityError(msg.str());
  }

  const std::size_t budget = error_budget(eps, data.size());
  const auto stats = candidate_stats(data, cls);

  struct Option {
    std::size_t index;
    std::size_t size;
    std::size_t errors;
  };
  std::vector<std::vector<Option>> options(static_cast<std::size_t>(K));
  std::vector<std::size_t> suffix_bound(static_cast<std::size_t>(K) + 1, 0);
  std::map<std::size_t, Bits> bits;
  for (int k = 0; k < K; ++k) {
    for (std::size_t i = 0; i < stats.size(); ++i) {
      const std::size_t e = stats[i].one_sided_errors(k);
      if (e > budget || stats[i].size == 0) continue;
      options[static_cast<std::size_t>(k)].push_back({i, stats[i].size, e});
      if (!bits.count(i)) bits.emplace(i, membership(cls.candidate(i), data));
    }
  }
  for (int k = K - 1; k >= 0; --k) {
    std::size_t m = 0;
    for (const auto& o : options[static_cast<std::size_t>(k)]) m = std::max(m, o.size);
    suffix_bound[static_cast<std::size_t>(k)] = suffix_bound[static_cast<std::size_t>(k) + 1] + m;
  }

  // Depth-first search in lexicographic candidate order with the empty set
  // last in each coordinate; only strict improvements replace the incumbent.
  std::ptrdiff_t best_cover = -1;
  std::size_t best_errors = 0;
  std::vector<std::ptrdiff_t> current(static_cast<std::size_t>(K), -1);
  std::vector<std::ptrdiff_t> best_tuple = current;

  auto search = [&](auto&& self, int k, const Bits& used, std::size_t cover,
                    std::size_t errors) -> void {
    if (best_cover >= 0 &&
        static_cast<std::ptrdiff_t>(cover + suffix_bound[static_cast<std::size_t>(k)]) <= best_cover)
      return;
    if (k == K) {
      best_cover = static_cast<std::ptrdiff_t>(cover);
      best_errors = errors;
      best_tuple = current;
      return;
    }
    for (const auto& o : options[static_cast<std::size_t>(k)]) {
      if (errors + o.errors > budget) continue;
      const Bits& b = bits.at(o.index);
      if (b.intersects(used)) continue;
      Bits next = used;
      next.unite(b);
      current[static_cast<std::size_t>(k)] = static_cast<std::ptrdiff_t>(o.index);
      self(self, k + 1, next, cover + o.size, errors + o.errors);
    }
    current[static_cast<std::size_t>(k)] = -1;
    self(self, k + 1, used, cover, errors);
  };
  search(search, 0, Bits(data.size()), 0, 0);

  std::vector<Region> regions;
  for (auto idx : best_tuple) regions.push_back(region_or_empty(cls, idx));
  OracleSolution sol{DecisionSetFamily::from_regions(std::move(regions), true, data.dim())};
  sol.chosen = best_tuple;
  sol.value = static_cast<double>(best_cover) / static_cast<double>(data.size());
  sol.error = static_cast<double>(best_errors) / static_cast<double>(data.size());
  return sol;
}

OracleSolution solve_osp_decoupled(const LabeledDataset& data,
                                   const FiniteHypothesisClass& cls, double eps,
                                   const std::vector<AlphaAllocation>& alpha_grid) {
  check_problem(data, cls, eps);
  if (alpha_grid.empty()) throw InputError("alpha grid is empty");
  const int K = data.num_classes();
  const std::size_t n = data.size();
  const auto stats = candidate_stats(data, cls);

  std::map<std::size_t, Bits> bits;
  auto bits_of = [&](std::size_t i) -> const Bits& {
    auto it = bits.find(i);
    if (it == bits.end()) it = bits.emplace(i, membership(cls.candidate(i), data)).first;
    return it->second;
  };
  std::vector<Bits> labels;
  for (int k = 0; k < K; ++k) labels.push_back(label_bits(data, k));

  std::map<std::pair<int, std::size_t>, std::ptrdiff_t> osp_cache;
  auto osp = [&](int k, std::size_t budget) {
    auto key = std::make_pair(k, budget);
    auto it = osp_cache.find(key);
    if (it == osp_cache.end())
      it = osp_cache.emplace(key, best_osp_candidate(stats, k, budget)).first;
    return it->second;
  };

  std::ptrdiff_t best_cover = -1;
  std::size_t best_errors = 0;
  std::size_t best_alpha = 0;
  std::vector<std::ptrdiff_t> best_chosen;

  for (std::size_t a = 0; a < alpha_grid.size(); ++a) {
    const auto& alpha = alpha_grid[a];
    if (alpha.size() != static_cast<std::size_t>(K))
      throw InputError("alpha allocation length differs from K");
    std::vector<std::ptrdiff_t> chosen;
    Bits taken(n);
    std::size_t errors = 0;
    for (int k = 0; k < K; ++k) {
      const std::ptrdiff_t idx = osp(k, error_budget(alpha[static_cast<std::size_t>(k)] * eps, n));
      chosen.push_back(idx);
      if (idx < 0) continue;
      Bits s = bits_of(static_cast<std::size_t>(idx));
      s.subtract(taken);
      errors += s.count() - s.count_and(labels[static_cast<std::size_t>(k)]);
      taken.unite(s);
    }
    const auto cover = static_cast<std::ptrdiff_t>(taken.count());
    if (cover > best_cover) {
      best_cover = cover;
      best_errors = errors;
      best_alpha = a;
      best_chosen = chosen;
    }
  }

  std::vector<Region> raw;
  std::vector<Region> resolved;
  Region earlier = Region::nothing();
  for (auto idx : best_chosen) {
    const Region& t = region_or_empty(cls, idx);
    raw.push_back(t);
    resolved.push_back(t - earlier);
    earlier = earlier | t;
  }
  OracleSolution sol{DecisionSetFamily::from_regions(std::move(resolved), true, data.dim())};
  sol.value = static_cast<double>(best_cover) / static_cast<double>(n);
  sol.error = static_cast<double>(best_errors) / static_cast<double>(n);
  sol.alpha = alpha_grid[best_alpha];
  sol.chosen = best_chosen;
  sol.raw_sets = std::move(raw);
  return sol;
}

double overlap_mass(const std::vector<Region>& sets, const LabeledDataset& data) {
  if (sets.size() < 2) throw InputError("overlap needs at least two sets");
  if (data.empty()) throw InputError("overlap needs a nonempty dataset");
  std::size_t overlapping = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    int hits = 0;
    for (const auto& s : sets)
      if (s.contains(data.features(i)) && ++hits >= 2) break;
    if (hits >= 2) ++overlapping;
  }
  return static_cast<double>(overlapping) / static_cast<double>(data.size());
}

// ---------------------------------------------------------------------------

AnalyticCoverage analytic_example_coverage(double eps) {
  if (!(eps >= 0.0)) throw InputError("error level must be nonnegative");
  if (eps >= 0.25)
    throw InputError("analytic coverage formula needs eps < 1/4; coverage saturates at 1");
  const double r = std::sqrt(eps);
  return {2.0 * r, 1.0 - r, r};
}

LabeledDataset sample_analytic_example(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  LabeledDataset data(1, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = unit(rng);
    const int label = unit(rng) < x ? 0 : 1;
    data.add(std::span<const double>(&x, 1), label);
  }
  return data;
}

double threshold_classification_risk(const LabeledDataset& data, std::size_t feature) {
  if (data.num_classes() != 2) throw InputError("threshold risk is defined for K = 2");
  if (data.empty()) throw InputError("threshold risk needs a nonempty dataset");
  SortedFeature sf(data, feature);
  const std::size_t n = data.size();
  const auto all = sf.range(0, n);
  std::size_t best = n;
  // Points at or below the cut take one label, points above take the other.
  for (double cut : FiniteHypothesisClass::data_cuts(data, feature)) {
    const auto below = sf.range(0, sf.rank(cut));
    const std::size_t above0 = all.per_class[0] - below.per_class[0];
    const std::size_t above1 = all.per_class[1] - below.per_class[1];
    best = std::min(best, below.per_class[0] + above1);  // above -> 0, below -> 1
    best = std::min(best, below.per_class[1] + above0);  // above -> 1, below -> 0
  }
  return static_cast<double>(best) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------

DecisionSetFamily gating_to_sets(const Region& gate,
                                 const std::vector<Region>& predictor_sets,
                                 const LabeledDataset& reference) {
  if (predictor_sets.empty()) throw InputError("gating needs at least one predictor set");
  for (std::size_t i = 0; i < reference.size(); ++i) {
    int hits = 0;
    for (const auto& p : predictor_sets) hits += p.contains(reference.features(i));
    if (hits != 1) {
      std::ostringstream msg;
      msg << "predictor sets do not partition the space: point " << i << " lies in "
          << hits << " sets";
      throw InputError(msg.str());
    }
  }
  std::vector<Region> sets;
  for (const auto& p : predictor_sets) sets.push_back(p & gate);
  return DecisionSetFamily::from_regions(std::move(sets), true, reference.dim());
}

std::vector<Region> sets_to_confidence(const DecisionSetFamily& family,
                                       const LabeledDataset& reference) {
  if (!family.disjoint() || family.regions().empty())
    throw InputError("confidence conversion needs a disjoint region family");
  if (!empirically_disjoint(family, reference))
    throw InputError("decision sets overlap on the reference dataset");
  const auto& s = family.regions();
  std::vector<Region> out;
  for (std::size_t k = 0; k < s.size(); ++k) {
    Region others = Region::nothing();
    for (std::size_t j = 0; j < s.size(); ++j)
      if (j != k) others = others | s[j];
    out.push_back(others.complement());
  }
  return out;
}

DecisionSetFamily confidence_to_sets(const std::vector<Region>& confidence,
                                     std::size_t dim) {
  std::vector<Region> sets;
  for (std::size_t k = 0; k < confidence.size(); ++k) {
    Region others = Region::nothing();
    for (std::size_t j = 0; j < confidence.size(); ++j)
      if (j != k) others = others | confidence[j];
    sets.push_back(confidence[k] - others);
  }
  return DecisionSetFamily::from_regions(std::move(sets), true, dim);
}

// ---------------------------------------------------------------------------

double analytic_osp_value(double eps) {
  if (!(eps >= 0.0 && eps <= 0.5)) throw InputError("analytic OSP value needs eps in [0, 1/2]");
  return std::sqrt(2.0 * eps);
}

std::vector<TrendRow> erm_feasibility_trend(double eps, const std::vector<std::size_t>& n_list,
                                            std::size_t seeds_per_n, std::uint64_t base_seed) {
  if (n_list.empty()) throw InputError("trend needs at least one sample size");
  if (seeds_per_n == 0) throw InputError("trend needs at least one seed per n");
  for (std::size_t i = 1; i < n_list.size(); ++i)
    if (n_list[i] <= n_list[i - 1]) throw InputError("sample sizes must be strictly increasing");

  const double truth = analytic_osp_value(eps);
  std::vector<TrendRow> rows;
  for (std::size_t ni = 0; ni < n_list.size(); ++ni) {
    std::vector<double> deviation;
    std::vector<double> violation;
    for (std::size_t s = 0; s < seeds_per_n; ++s) {
      const auto data = sample_analytic_example(n_list[ni], base_seed + 7919 * ni + s);
      const auto cls =
          FiniteHypothesisClass::thresholds(0, FiniteHypothesisClass::data_cuts(data, 0));
      const auto sol = solve_osp_exact(data, cls, 0, eps);
      // Population mass and one-sided error of the chosen set under U[0,1]
      // with P(first class | x) = x.
      double mass = 0.0;
      double err = 0.0;
      if (sol.chosen[0] >= 0) {
        const auto& c = cls.candidate(static_cast<std::size_t>(sol.chosen[0]));
        if (c.kind == HypothesisKind::UpperThreshold) {
          const double t = std::clamp(c.lo, 0.0, 1.0);
          mass = 1.0 - t;
          err = 0.5 * mass * mass;
        } else {
          const double t = std::clamp(c.hi, 0.0, 1.0);
          mass = t;
          err = t - 0.5 * t * t;
        }
      }
      deviation.push_back(std::abs(mass - truth));
      violation.push_back(std::max(0.0, err - eps));
    }
    rows.push_back({n_list[ni], median(deviation), median(violation), seeds_per_n});
  }
  return rows;
}

}  // namespace osp::oracle
