#ifndef MAR_METRICS_HPP
#define MAR_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <vector>

#include "mar/linalg.hpp"

namespace mar::metrics {

namespace detail {

inline std::vector<double> squared_distances_to(const Eigen::Ref<const Matrix>& corpus,
                                                const Eigen::Ref<const Eigen::RowVectorXd>& q) {
  std::vector<double> d(static_cast<std::size_t>(corpus.rows()));
  for (Eigen::Index i = 0; i < corpus.rows(); ++i) d[static_cast<std::size_t>(i)] = (corpus.row(i) - q).squaredNorm();
  return d;
}

// Indices sorted by ascending distance; equal distances keep index order.
inline std::vector<std::size_t> argsort(const std::vector<double>& d) {
  std::vector<std::size_t> idx(d.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return d[a] < d[b]; });
  return idx;
}

}  // namespace detail

/// Mean over queries of the fraction of the k nearest corpus items sharing
/// the query label. With exclude_self, query i is not matched against corpus
/// item i (queries and corpus are the same set).
inline double precision_at_k(const Eigen::Ref<const Matrix>& queries, const Eigen::Ref<const Matrix>& corpus,
                             const std::vector<int>& query_labels, const std::vector<int>& corpus_labels,
                             std::size_t k, bool exclude_self = false) {
  if (queries.cols() != corpus.cols()) throw invalid_argument("precision_at_k: dimension mismatch");
  if (static_cast<std::size_t>(queries.rows()) != query_labels.size() ||
      static_cast<std::size_t>(corpus.rows()) != corpus_labels.size()) {
    throw invalid_argument("precision_at_k: label counts differ from row counts");
  }
  if (exclude_self && queries.rows() != corpus.rows()) {
    throw invalid_argument("precision_at_k: exclude_self needs queries and corpus of equal size");
  }
  const std::size_t available = corpus_labels.size() - (exclude_self ? 1 : 0);
  if (k == 0 || k > available) throw invalid_argument("precision_at_k: k must lie in [1, corpus size]");
  if (queries.rows() == 0) throw invalid_argument("precision_at_k: no queries");

  double total = 0.0;
  for (Eigen::Index q = 0; q < queries.rows(); ++q) {
    std::vector<double> d = detail::squared_distances_to(corpus, queries.row(q));
    if (exclude_self) d[static_cast<std::size_t>(q)] = std::numeric_limits<double>::infinity();
    const std::vector<std::size_t> order = detail::argsort(d);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < k; ++i) hits += corpus_labels[order[i]] == query_labels[static_cast<std::size_t>(q)];
    total += static_cast<double>(hits) / static_cast<double>(k);
  }
  return total / static_cast<double>(queries.rows());
}

/// Average precision of ranking pairs by ascending distance, similar pairs
/// being the positives. Tied distances contribute the exact expectation of
/// AP over all orderings of the tied block.
inline double average_precision_pairs(const std::vector<double>& distances, const std::vector<bool>& similar) {
  if (distances.size() != similar.size()) throw invalid_argument("average_precision_pairs: length mismatch");
  const auto positives = static_cast<std::size_t>(std::count(similar.begin(), similar.end(), true));
  if (positives == 0 || positives == similar.size()) {
    throw invalid_argument("average_precision_pairs: need both similar and dissimilar pairs");
  }
  const std::vector<std::size_t> order = detail::argsort(distances);
  double sum = 0.0;
  std::size_t before = 0;      // items ranked ahead of the current block
  std::size_t pos_before = 0;  // positives among them
  for (std::size_t start = 0; start < order.size();) {
    std::size_t stop = start;
    std::size_t p = 0;
    while (stop < order.size() && distances[order[stop]] == distances[order[start]]) {
      p += similar[order[stop]];
      ++stop;
    }
    const std::size_t t = stop - start;
    if (p > 0) {
      // A positive sits at block position r (uniform over 1..t); the other
      // p - 1 positives precede it (r - 1)(p - 1)/(t - 1) times on average.
      double expected = 0.0;
      for (std::size_t r = 1; r <= t; ++r) {
        const double ahead = t > 1 ? static_cast<double>((r - 1) * (p - 1)) / static_cast<double>(t - 1) : 0.0;
        expected += (static_cast<double>(pos_before) + 1.0 + ahead) / static_cast<double>(before + r);
      }
      sum += static_cast<double>(p) * expected / static_cast<double>(t);
    }
    before += t;
    pos_before += p;
    start = stop;
  }
  return sum / static_cast<double>(positives);
}

struct KMeansResult {
  std::vector<int> assignments;
  Matrix centers;
  double inertia = 0.0;
};

namespace detail {

inline KMeansResult lloyd(const Eigen::Ref<const Matrix>& x, std::size_t k, std::mt19937_64& rng, int max_iter) {
  const auto n = static_cast<std::size_t>(x.rows());
  Matrix centers(static_cast<Eigen::Index>(k), x.cols());
  // k-means++ seeding
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  centers.row(0) = x.row(static_cast<Eigen::Index>(first(rng)));
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  for (std::size_t c = 1; c < k; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (x.row(static_cast<Eigen::Index>(i)) - centers.row(static_cast<Eigen::Index>(c - 1))).squaredNorm());
    }
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      const double r = u(rng);
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (r < acc) {
          pick = i;
          break;
        }
      }
    } else {
      pick = first(rng);
    }
    centers.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(pick));
  }

  KMeansResult res;
  res.assignments.assign(n, -1);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = (x.row(static_cast<Eigen::Index>(i)) - centers.row(static_cast<Eigen::Index>(c))).squaredNorm();
        if (d < bd) {
          bd = d;
          best = static_cast<int>(c);
        }
      }
      if (res.assignments[i] != best) {
        res.assignments[i] = best;
        changed = true;
      }
    }
    Matrix sums = Matrix::Zero(static_cast<Eigen::Index>(k), x.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(res.assignments[i]) += x.row(static_cast<Eigen::Index>(i));
      ++counts[static_cast<std::size_t>(res.assignments[i])];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        centers.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);
        continue;
      }
      // Empty cluster: move its center to the point farthest from its own center.
      std::size_t far = 0;
      double fd = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double d = (x.row(static_cast<Eigen::Index>(i)) - centers.row(res.assignments[i])).squaredNorm();
        if (d > fd) {
          fd = d;
          far = i;
        }
      }
      centers.row(static_cast<Eigen::Index>(c)) = x.row(static_cast<Eigen::Index>(far));
      changed = true;
    }
    if (!changed) break;
  }
  res.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    res.inertia += (x.row(static_cast<Eigen::Index>(i)) - centers.row(res.assignments[i])).squaredNorm();
  }
  res.centers = std::move(centers);
  return res;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding; the restart with the lowest
/// inertia wins.
inline KMeansResult kmeans(const Eigen::Ref<const Matrix>& x, std::size_t k, std::size_t restarts = 10,
                           std::uint64_t seed = 0, int max_iter = 300) {
  if (k == 0 || k > static_cast<std::size_t>(x.rows())) throw invalid_argument("kmeans: k must lie in [1, N]");
  if (restarts == 0) throw invalid_argument("kmeans: restarts must be positive");
  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < restarts; ++r) {
    KMeansResult cur = detail::lloyd(x, k, rng, max_iter);
    if (cur.inertia < best.inertia) best = std::move(cur);
  }
  return best;
}

namespace detail {

// Relabels values to 0..c-1 in order of first appearance.
inline std::vector<std::size_t> compact_labels(const std::vector<int>& v, std::size_t& classes) {
  std::map<int, std::size_t> ids;
  std::vector<std::size_t> out;
  out.reserve(v.size());
  for (int l : v) out.push_back(ids.emplace(l, ids.size()).first->second);
  classes = ids.size();
  return out;
}

// Minimum-cost perfect assignment on a square cost matrix (Hungarian method
// with potentials). Returns the column assigned to each row.
inline std::vector<std::size_t> hungarian_min(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  std::vector<bool> used(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n);
  for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace detail

/// Fraction of items correctly labeled under the best one-to-one matching of
/// predicted clusters to true classes.
inline double clustering_accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size()) throw invalid_argument("clustering_accuracy: length mismatch");
  if (pred.empty()) throw invalid_argument("clustering_accuracy: empty input");
  std::size_t cp = 0, ct = 0;
  const auto p = detail::compact_labels(pred, cp);
  const auto t = detail::compact_labels(truth, ct);
  const std::size_t n = std::max(cp, ct);
  std::vector<std::vector<double>> cost(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < p.size(); ++i) cost[p[i]][t[i]] -= 1.0;
  const auto match = detail::hungarian_min(cost);
  double hits = 0.0;
  for (std::size_t r = 0; r < n; ++r) hits -= cost[r][match[r]];
  return hits / static_cast<double>(pred.size());
}

/// I(pred; truth) / sqrt(H(pred) H(truth)). Two single-cluster partitions
/// give 1; a single-cluster partition against a non-trivial one gives 0.
inline double nmi(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size()) throw invalid_argument("nmi: length mismatch");
  if (pred.empty()) throw invalid_argument("nmi: empty input");
  std::size_t cp = 0, ct = 0;
  const auto p = detail::compact_labels(pred, cp);
  const auto t = detail::compact_labels(truth, ct);
  const double n = static_cast<double>(pred.size());
  std::vector<std::vector<double>> joint(cp, std::vector<double>(ct, 0.0));
  std::vector<double> pp(cp, 0.0), pt(ct, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    joint[p[i]][t[i]] += 1.0;
    pp[p[i]] += 1.0;
    pt[t[i]] += 1.0;
  }
  auto entropy = [n](const std::vector<double>& c) {
    double h = 0.0;
    for (double v : c) {
      if (v > 0.0) h -= v / n * std::log(v / n);
    }
    return h;
  };
  const double hp = entropy(pp);
  const double ht = entropy(pt);
  if (hp == 0.0 && ht == 0.0) return 1.0;
  if (hp == 0.0 || ht == 0.0) return 0.0;
  double mi = 0.0;
  for (std::size_t a = 0; a < cp; ++a) {
    for (std::size_t b = 0; b < ct; ++b) {
      if (joint[a][b] > 0.0) mi += joint[a][b] / n * std::log(joint[a][b] * n / (pp[a] * pt[b]));
    }
  }
  return std::clamp(mi / std::sqrt(hp * ht), 0.0, 1.0);
}

/// Majority vote among the k nearest training points. Among tied labels the
/// one whose closest member is nearest wins.
inline std::vector<int> knn_predict(const Eigen::Ref<const Matrix>& train, const std::vector<int>& train_labels,
                                    const Eigen::Ref<const Matrix>& test, std::size_t k = 3) {
  if (train.cols() != test.cols()) throw invalid_argument("knn: dimension mismatch");
  if (static_cast<std::size_t>(train.rows()) != train_labels.size()) throw invalid_argument("knn: label count mismatch");
  if (k == 0 || k > train_labels.size()) throw invalid_argument("knn: k must lie in [1, train size]");
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(test.rows()));
  for (Eigen::Index q = 0; q < test.rows(); ++q) {
    const std::vector<std::size_t> order = detail::argsort(detail::squared_distances_to(train, test.row(q)));
    std::map<int, std::size_t> votes;
    for (std::size_t i = 0; i < k; ++i) ++votes[train_labels[order[i]]];
    std::size_t top = 0;
    for (const auto& [l, c] : votes) top = std::max(top, c);
    // order is by distance, so the first tied label met is the nearest one
    for (std::size_t i = 0; i < k; ++i) {
      const int l = train_labels[order[i]];
      if (votes[l] == top) {
        out.push_back(l);
        break;
      }
    }
  }
  return out;
}

inline double knn_accuracy(const Eigen::Ref<const Matrix>& train, const std::vector<int>& train_labels,
                           const Eigen::Ref<const Matrix>& test, const std::vector<int>& test_labels,
                           std::size_t k = 3) {
  if (static_cast<std::size_t>(test.rows()) != test_labels.size() || test_labels.empty()) {
    throw invalid_argument("knn_accuracy: test label count mismatch");
  }
  const std::vector<int> pred = knn_predict(train, train_labels, test, k);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == test_labels[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

}  // namespace mar::metrics

#endif  // MAR_METRICS_HPP
