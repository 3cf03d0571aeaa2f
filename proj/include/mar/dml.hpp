#ifndef MAR_DML_HPP
#define MAR_DML_HPP

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mar/linalg.hpp"
#include "mar/optimizer.hpp"

namespace mar::dml {

/// Similar and dissimilar pairs, stored as difference vectors x - y. The
/// objective only sees pairs through A(x - y).
struct PairSet {
  Matrix similar;     // |S| x D
  Matrix dissimilar;  // |D| x D

  static PairSet from_pairs(const std::vector<std::pair<Vector, Vector>>& s,
                            const std::vector<std::pair<Vector, Vector>>& d) {
    auto pack = [](const std::vector<std::pair<Vector, Vector>>& pairs) {
      if (pairs.empty()) return Matrix(0, 0);
      const Eigen::Index dim = pairs.front().first.size();
      Matrix m(static_cast<Eigen::Index>(pairs.size()), dim);
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (pairs[i].first.size() != dim || pairs[i].second.size() != dim) {
          throw invalid_argument("PairSet: inconsistent pair dimensions");
        }
        m.row(static_cast<Eigen::Index>(i)) = (pairs[i].first - pairs[i].second).transpose();
      }
      return m;
    };
    return {pack(s), pack(d)};
  }
};

struct DmlConfig {
  int K = 10;
  double lambda = 0.0;
  double gamma = 1.0;
  double hinge_weight = 1.0;
  double margin = 1.0;
  OptimizerConfig optimizer;

  void validate() const {
    if (K < 1) throw invalid_argument("DmlConfig: K must be at least 1");
    if (!(hinge_weight > 0.0)) throw invalid_argument("DmlConfig: hinge_weight must be positive");
  }
};

inline double pair_distance(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Vector>& x,
                            const Eigen::Ref<const Vector>& y) {
  if (x.size() != a.cols() || y.size() != a.cols()) throw invalid_argument("pair_distance: dimension mismatch");
  return (a * (x - y)).squaredNorm();
}

namespace detail {
inline void check_pairs(const Eigen::Ref<const Matrix>& a, const PairSet& pairs) {
  if (pairs.similar.rows() == 0 || pairs.dissimilar.rows() == 0) {
    throw invalid_argument("dml: similar and dissimilar pair sets must be non-empty");
  }
  if (pairs.similar.cols() != a.cols() || pairs.dissimilar.cols() != a.cols()) {
    throw invalid_argument("dml: pair dimension does not match A");
  }
}
}  // namespace detail

/// Negated penalized objective (to be maximized):
///   -[ mean_S |A(x-y)|^2 + mu * mean_D max(0, margin - |A(x-y)|^2) ].
/// The regularizer term is added by the optimizer, not here.
inline double dml_objective(const Eigen::Ref<const Matrix>& a, const PairSet& pairs, const DmlConfig& cfg) {
  detail::check_pairs(a, pairs);
  const Matrix ps = pairs.similar * a.transpose();
  const double sim = ps.rowwise().squaredNorm().sum() / static_cast<double>(ps.rows());
  const Matrix pd = pairs.dissimilar * a.transpose();
  const Vector dist = pd.rowwise().squaredNorm();
  double hinge = 0.0;
  for (Eigen::Index i = 0; i < dist.size(); ++i) hinge += std::max(0.0, cfg.margin - dist(i));
  hinge /= static_cast<double>(dist.size());
  return -(sim + cfg.hinge_weight * hinge);
}

/// Gradient of dml_objective. A pair exactly at the margin counts as inactive.
inline Matrix dml_gradient(const Eigen::Ref<const Matrix>& a, const PairSet& pairs, const DmlConfig& cfg) {
  detail::check_pairs(a, pairs);
  // d/dA |A d|^2 = 2 (A d) d^T
  const Matrix ps = pairs.similar * a.transpose();  // rows: (A d)^T
  Matrix grad = -(2.0 / static_cast<double>(ps.rows())) * ps.transpose() * pairs.similar;

  const Matrix pd = pairs.dissimilar * a.transpose();
  const Vector dist = pd.rowwise().squaredNorm();
  Vector active = Vector::Zero(dist.size());
  for (Eigen::Index i = 0; i < dist.size(); ++i) active(i) = dist(i) < cfg.margin ? 1.0 : 0.0;
  if (active.sum() > 0.0) {
    const double w = 2.0 * cfg.hinge_weight / static_cast<double>(dist.size());
    grad += w * pd.transpose() * active.asDiagonal() * pairs.dissimilar;
  }
  return grad;
}

/// Row-wise latent transform: row n of the result is A x_n.
inline Matrix transform(const Eigen::Ref<const Matrix>& a, const Eigen::Ref<const Matrix>& x) {
  if (x.cols() != a.cols()) throw invalid_argument("transform: dimension mismatch");
  return x * a.transpose();
}

class DmlLoss final : public LossModel {
 public:
  DmlLoss(PairSet pairs, DmlConfig cfg) : pairs_(std::move(pairs)), cfg_(std::move(cfg)) {}
  double objective(const Matrix& a) override { return dml_objective(a, pairs_, cfg_); }
  Matrix gradient(const Matrix& a) override { return dml_gradient(a, pairs_, cfg_); }

 private:
  PairSet pairs_;
  DmlConfig cfg_;
};

struct PairSpec {
  std::size_t n_similar = 1000;
  std::size_t n_dissimilar = 1000;
  std::uint64_t seed = 0;
};

struct IndexPairs {
  std::vector<std::pair<std::size_t, std::size_t>> similar;
  std::vector<std::pair<std::size_t, std::size_t>> dissimilar;
  std::vector<std::string> warnings;
};

/// Samples index pairs without replacement: same label -> similar, different
/// labels -> dissimilar. Classes with fewer than two members contribute no
/// similar pairs.
inline IndexPairs sample_index_pairs(const std::vector<int>& labels, const PairSpec& spec) {
  IndexPairs out;
  std::map<int, std::size_t> counts;
  for (int l : labels) ++counts[l];
  if (counts.size() < 2) throw invalid_argument("sample_index_pairs: need at least two classes");
  for (const auto& [label, c] : counts) {
    if (c < 2) out.warnings.push_back("class " + std::to_string(label) + " has fewer than 2 members; skipped for similar pairs");
  }
  std::vector<std::pair<std::size_t, std::size_t>> same;
  std::vector<std::pair<std::size_t, std::size_t>> diff;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      (labels[i] == labels[j] ? same : diff).emplace_back(i, j);
    }
  }
  std::mt19937_64 rng(spec.seed);
  auto take = [&rng](std::vector<std::pair<std::size_t, std::size_t>>& pool, std::size_t n) {
    n = std::min(n, pool.size());
    // Partial Fisher-Yates: the first n entries become a uniform sample.
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    pool.resize(n);
    return pool;
  };
  out.similar = take(same, spec.n_similar);
  out.dissimilar = take(diff, spec.n_dissimilar);
  return out;
}

inline PairSet make_pair_set(const Eigen::Ref<const Matrix>& features, const IndexPairs& idx) {
  PairSet ps;
  ps.similar.resize(static_cast<Eigen::Index>(idx.similar.size()), features.cols());
  for (std::size_t i = 0; i < idx.similar.size(); ++i) {
    const auto [a, b] = idx.similar[i];
    ps.similar.row(static_cast<Eigen::Index>(i)) =
        features.row(static_cast<Eigen::Index>(a)) - features.row(static_cast<Eigen::Index>(b));
  }
  ps.dissimilar.resize(static_cast<Eigen::Index>(idx.dissimilar.size()), features.cols());
  for (std::size_t i = 0; i < idx.dissimilar.size(); ++i) {
    const auto [a, b] = idx.dissimilar[i];
    ps.dissimilar.row(static_cast<Eigen::Index>(i)) =
        features.row(static_cast<Eigen::Index>(a)) - features.row(static_cast<Eigen::Index>(b));
  }
  return ps;
}

struct TrainResult {
  Matrix a;
  std::vector<double> trace;
  std::vector<std::string> warnings;
};

/// Samples pairs, initializes A uniformly in (-0.1, 0.1) and runs the
/// alternating optimizer on the penalized objective plus lambda * surrogate.
inline TrainResult train_mar_dml(const Eigen::Ref<const Matrix>& features, const std::vector<int>& labels,
                                 DmlConfig cfg, const PairSpec& pair_spec) {
  cfg.validate();
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw invalid_argument("train_mar_dml: feature and label counts differ");
  }
  TrainResult out;
  IndexPairs idx = sample_index_pairs(labels, pair_spec);
  out.warnings = idx.warnings;
  PairSet pairs = make_pair_set(features, idx);

  std::mt19937_64 rng(pair_spec.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> init(-0.1, 0.1);
  Matrix a0(cfg.K, features.cols());
  for (Eigen::Index i = 0; i < a0.size(); ++i) a0.data()[i] = init(rng);

  cfg.optimizer.lambda = cfg.lambda;
  cfg.optimizer.gamma = cfg.gamma;
  DmlLoss loss(std::move(pairs), cfg);
  OptimizeResult res = optimize(loss, a0, cfg.optimizer);
  out.a = std::move(res.a);
  out.trace = std::move(res.trace);
  out.warnings.insert(out.warnings.end(), res.warnings.begin(), res.warnings.end());
  return out;
}

}  // namespace mar::dml

#endif  // MAR_DML_HPP
