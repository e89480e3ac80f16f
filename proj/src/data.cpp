#include "osp/data.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "osp/oracle.hpp"

namespace osp::data {
namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream s(line);
  while (std::getline(s, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  std::ostringstream msg;
  msg << "line " << line << ": " << what;
  throw ParseError(msg.str());
}

using EigenMatrix = Eigen::MatrixXd;

EigenMatrix to_matrix(const std::vector<std::vector<double>>& rows) {
  EigenMatrix m(static_cast<Eigen::Index>(rows.size()),
                static_cast<Eigen::Index>(rows.empty() ? 0 : rows[0].size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return m;
}

}  // namespace

LabeledDataset parse_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw InputError("dataset file is empty");
  {
    const auto header = split_fields(trim(line));
    if (header.size() < 2 || trim(header.back()) != "label")
      fail(line_no, "header must list feature columns followed by 'label'");
    dim = header.size() - 1;
  }

  std::vector<double> features;
  std::vector<int> labels;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(trim(line));
    if (fields.size() != dim + 1) fail(line_no, "expected " + std::to_string(dim + 1) + " fields");
    for (std::size_t j = 0; j < dim; ++j) {
      const std::string f = trim(fields[j]);
      char* end = nullptr;
      const double v = std::strtod(f.c_str(), &end);
      if (f.empty() || end != f.c_str() + f.size() || !std::isfinite(v))
        fail(line_no, "non-numeric feature '" + f + "'");
      features.push_back(v);
    }
    const std::string l = trim(fields[dim]);
    char* end = nullptr;
    const long label = std::strtol(l.c_str(), &end, 10);
    if (l.empty() || end != l.c_str() + l.size()) fail(line_no, "non-integer label '" + l + "'");
    if (label < 0) fail(line_no, "negative label " + l);
    if (label > 1'000'000) fail(line_no, "implausibly large label " + l);
    labels.push_back(static_cast<int>(label));
  }
  if (labels.empty()) throw InputError("dataset has a header but no rows");

  const int K = *std::max_element(labels.begin(), labels.end()) + 1;
  LabeledDataset data(dim, K);
  for (std::size_t i = 0; i < labels.size(); ++i)
    data.add(std::span<const double>(features.data() + i * dim, dim), labels[i]);
  return data;
}

LabeledDataset ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset " + path);
  return parse_csv(in);
}

void write_csv(const LabeledDataset& data, std::ostream& out) {
  for (std::size_t j = 0; j < data.dim(); ++j) out << 'f' << j << ',';
  out << "label\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.features(i)) out << v << ',';
    out << data.label(i) << '\n';
  }
}

void write_csv(const LabeledDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write dataset " + path);
  write_csv(data, out);
}

// ---------------------------------------------------------------------------

void GaussianMixture::validate() const {
  const std::size_t K = priors.size();
  if (K < 1) throw InputError("mixture needs at least one component");
  if (means.size() != K || covariances.size() != K)
    throw InputError("mixture means, covariances and priors disagree on K");
  const std::size_t d = dim();
  if (d == 0) throw InputError("mixture dimension must be positive");
  double total = 0.0;
  for (double p : priors) {
    if (!(p >= 0.0)) throw InputError("mixture priors must be nonnegative");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InputError("mixture priors must sum to 1");
  for (std::size_t k = 0; k < K; ++k) {
    if (means[k].size() != d) throw InputError("mixture means are ragged");
    if (covariances[k].size() != d) throw InputError("covariance has the wrong shape");
    for (const auto& row : covariances[k])
      if (row.size() != d) throw InputError("covariance has the wrong shape");
    const EigenMatrix c = to_matrix(covariances[k]);
    if (!c.isApprox(c.transpose(), 1e-12)) throw InputError("covariance is not symmetric");
    Eigen::LLT<EigenMatrix> llt(c);
    if (llt.info() != Eigen::Success) throw InputError("covariance is not positive definite");
  }
}

namespace {

// log(pi_k) + log N(x; m_k, S_k)
double log_weighted_component(const GaussianMixture& mix, std::size_t k, FeatureView x) {
  const EigenMatrix c = to_matrix(mix.covariances[k]);
  Eigen::LLT<EigenMatrix> llt(c);
  Eigen::VectorXd diff(static_cast<Eigen::Index>(mix.dim()));
  for (std::size_t j = 0; j < mix.dim(); ++j)
    diff(static_cast<Eigen::Index>(j)) = x[j] - mix.means[k][j];
  const Eigen::VectorXd z = llt.matrixL().solve(diff);
  double log_det = 0.0;
  for (Eigen::Index j = 0; j < c.rows(); ++j) log_det += 2.0 * std::log(llt.matrixL()(j, j));
  const auto d = static_cast<double>(mix.dim());
  return std::log(mix.priors[k]) - 0.5 * (z.squaredNorm() + log_det + d * std::log(2.0 * M_PI));
}

}  // namespace

double GaussianMixture::density(FeatureView x) const {
  double total = 0.0;
  for (std::size_t k = 0; k < priors.size(); ++k) total += std::exp(log_weighted_component(*this, k, x));
  return total;
}

std::vector<double> GaussianMixture::posterior(FeatureView x) const {
  std::vector<double> post;
  for (std::size_t k = 0; k < priors.size(); ++k) post.push_back(log_weighted_component(*this, k, x));
  const double top = *std::max_element(post.begin(), post.end());
  double total = 0.0;
  for (double& v : post) total += (v = std::exp(v - top));
  for (double& v : post) v /= total;
  return post;
}

GaussianMixture separable_blobs() {
  return {{{-3.0, 0.0}, {3.0, 0.0}},
          {{{0.25, 0.0}, {0.0, 0.25}}, {{0.25, 0.0}, {0.0, 0.25}}},
          {0.5, 0.5}};
}

SyntheticSpec::Kind parse_synthetic_kind(const std::string& name) {
  if (name == "analytic") return SyntheticSpec::Kind::AnalyticExample;
  if (name == "gaussian_mixture") return SyntheticSpec::Kind::GaussianMixture;
  if (name == "blobs") return SyntheticSpec::Kind::SeparableBlobs;
  throw InputError("unknown synthetic kind '" + name + "'");
}

std::string to_string(SyntheticSpec::Kind kind) {
  switch (kind) {
    case SyntheticSpec::Kind::AnalyticExample:
      return "analytic";
    case SyntheticSpec::Kind::GaussianMixture:
      return "gaussian_mixture";
    case SyntheticSpec::Kind::SeparableBlobs:
      return "blobs";
  }
  return "unknown";
}

LabeledDataset synthesize(const SyntheticSpec& spec) {
  if (spec.kind == SyntheticSpec::Kind::AnalyticExample)
    return oracle::sample_analytic_example(spec.n, spec.seed);

  const GaussianMixture mix =
      spec.kind == SyntheticSpec::Kind::SeparableBlobs ? separable_blobs() : spec.mixture;
  mix.validate();
  const std::size_t d = mix.dim();
  std::vector<Eigen::MatrixXd> factors;
  for (const auto& c : mix.covariances) factors.push_back(Eigen::LLT<EigenMatrix>(to_matrix(c)).matrixL());

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  LabeledDataset data(d, mix.num_classes());
  std::vector<double> x(d);
  Eigen::VectorXd z(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < spec.n; ++i) {
    const double u = unit(rng);
    int k = 0;
    double acc = mix.priors[0];
    while (u >= acc && k + 1 < mix.num_classes()) acc += mix.priors[static_cast<std::size_t>(++k)];
    for (auto& v : z) v = normal(rng);
    const Eigen::VectorXd s = factors[static_cast<std::size_t>(k)] * z;
    for (std::size_t j = 0; j < d; ++j)
      x[j] = mix.means[static_cast<std::size_t>(k)][j] + s(static_cast<Eigen::Index>(j));
    data.add(x, k);
  }
  return data;
}

Split split_indices(std::size_t n, const std::array<double, 3>& fractions, std::uint64_t seed) {
  for (double f : fractions)
    if (!(f > 0.0)) throw InputError("split fractions must be positive");
  if (std::abs(fractions[0] + fractions[1] + fractions[2] - 1.0) > 1e-9)
    throw InputError("split fractions must sum to 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(
                                               std::llround(fractions[1] * static_cast<double>(n))));
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
               order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return s;
}

}  // namespace osp::data
