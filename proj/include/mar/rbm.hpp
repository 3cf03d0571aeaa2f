#ifndef MAR_RBM_HPP
#define MAR_RBM_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mar/linalg.hpp"
#include "mar/optimizer.hpp"
#include "mar/regularizer.hpp"

namespace mar::rbm {

/// Replicated-softmax parameters. Column k of W is the weight vector of
/// hidden unit k over the J vocabulary words.
struct RsmParams {
  Matrix W;        // J x K
  Vector vis_bias;  // J
  Vector hid_bias;  // K

  RsmParams() = default;
  RsmParams(Eigen::Index j, Eigen::Index k) : W(Matrix::Zero(j, k)), vis_bias(Vector::Zero(j)), hid_bias(Vector::Zero(k)) {}

  Eigen::Index vocab() const { return W.rows(); }
  Eigen::Index hidden() const { return W.cols(); }

  void validate() const {
    if (vis_bias.size() != W.rows() || hid_bias.size() != W.cols()) {
      throw invalid_argument("RsmParams: inconsistent shapes");
    }
    if (!W.allFinite() || !vis_bias.allFinite() || !hid_bias.allFinite()) {
      throw invalid_argument("RsmParams: non-finite parameters");
    }
  }
};

/// A document as sparse word counts; the energy depends on the tokens only
/// through these counts.
struct Document {
  std::optional<int> label;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> counts;  // (word id, count), sorted by word id

  std::uint32_t length() const {
    std::uint32_t d = 0;
    for (const auto& [w, c] : counts) d += c;
    return d;
  }

  Vector dense(Eigen::Index vocab) const {
    Vector n = Vector::Zero(vocab);
    for (const auto& [w, c] : counts) {
      if (static_cast<Eigen::Index>(w) >= vocab) throw invalid_argument("Document: word id out of range");
      n(static_cast<Eigen::Index>(w)) += c;
    }
    return n;
  }

  static Document from_dense(const Vector& n, std::optional<int> label = std::nullopt) {
    Document doc;
    doc.label = label;
    for (Eigen::Index j = 0; j < n.size(); ++j) {
      const auto c = static_cast<std::uint32_t>(std::llround(n(j)));
      if (c > 0) doc.counts.emplace_back(static_cast<std::uint32_t>(j), c);
    }
    return doc;
  }
};

struct DocBatch {
  std::vector<Document> docs;
  Eigen::Index vocab = 0;

  void validate() const {
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (docs[i].length() == 0) throw invalid_argument("DocBatch: document " + std::to_string(i) + " is empty");
      for (const auto& [w, c] : docs[i].counts) {
        if (static_cast<Eigen::Index>(w) >= vocab) {
          throw invalid_argument("DocBatch: word id " + std::to_string(w) + " >= vocabulary size");
        }
      }
    }
  }
};

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

/// p(h_k = 1 | counts) = sigmoid(D * beta_k + sum_j W_jk n_j).
inline Vector hidden_probs(const Vector& counts, double doc_length, const RsmParams& p) {
  if (counts.size() != p.vocab()) throw invalid_argument("hidden_probs: count vector size mismatch");
  const Vector act = doc_length * p.hid_bias + p.W.transpose() * counts;
  Vector out(act.size());
  for (Eigen::Index k = 0; k < act.size(); ++k) out(k) = sigmoid(act(k));
  return out;
}

/// Per-token softmax over the vocabulary given the hidden state.
inline Vector visible_dist(const Vector& h, const RsmParams& p) {
  if (h.size() != p.hidden()) throw invalid_argument("visible_dist: hidden vector size mismatch");
  Vector logits = p.vis_bias + p.W * h;
  logits.array() -= logits.maxCoeff();
  Vector e = logits.array().exp();
  return e / e.sum();
}

struct GibbsSample {
  Vector h;
  Vector counts;
};

namespace detail {

inline std::size_t sample_categorical(const Vector& probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng);
  double acc = 0.0;
  for (Eigen::Index j = 0; j < probs.size(); ++j) {
    acc += probs(j);
    if (r < acc) return static_cast<std::size_t>(j);
  }
  return static_cast<std::size_t>(probs.size() - 1);
}

}  // namespace detail

/// h ~ Bernoulli(hidden_probs), then D tokens drawn i.i.d. from visible_dist(h).
inline GibbsSample gibbs_step(const Vector& counts, std::uint32_t doc_length, const RsmParams& p,
                              std::mt19937_64& rng) {
  const Vector ph = hidden_probs(counts, doc_length, p);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  GibbsSample s;
  s.h.resize(ph.size());
  for (Eigen::Index k = 0; k < ph.size(); ++k) s.h(k) = u(rng) < ph(k) ? 1.0 : 0.0;
  const Vector pv = visible_dist(s.h, p);
  s.counts = Vector::Zero(p.vocab());
  for (std::uint32_t t = 0; t < doc_length; ++t) s.counts(static_cast<Eigen::Index>(detail::sample_categorical(pv, rng))) += 1.0;
  return s;
}

struct RsmGradient {
  Matrix dW;
  Vector dvis;
  Vector dhid;
};

/// CD-1 estimate of the mean per-document log-likelihood gradient.
inline RsmGradient cd1_gradient(const std::vector<const Document*>& docs, const RsmParams& p, std::mt19937_64& rng) {
  RsmGradient g{Matrix::Zero(p.vocab(), p.hidden()), Vector::Zero(p.vocab()), Vector::Zero(p.hidden())};
  if (docs.empty()) return g;
  for (const Document* doc : docs) {
    const Vector n = doc->dense(p.vocab());
    const std::uint32_t len = doc->length();
    const Vector pos = hidden_probs(n, len, p);
    const GibbsSample s = gibbs_step(n, len, p, rng);
    const Vector neg = hidden_probs(s.counts, len, p);
    g.dW += n * pos.transpose() - s.counts * neg.transpose();
    g.dvis += n - s.counts;
    g.dhid += static_cast<double>(len) * (pos - neg);
  }
  const double inv = 1.0 / static_cast<double>(docs.size());
  g.dW *= inv;
  g.dvis *= inv;
  g.dhid *= inv;
  return g;
}

inline RsmGradient cd1_gradient(const DocBatch& batch, const RsmParams& p, std::mt19937_64& rng) {
  std::vector<const Document*> ptrs;
  ptrs.reserve(batch.docs.size());
  for (const auto& d : batch.docs) ptrs.push_back(&d);
  return cd1_gradient(ptrs, p, rng);
}

struct RbmTrainConfig {
  int K = 10;
  double lambda = 0.0;
  double gamma = 1.0;
  double lr = 1e-4;
  std::size_t minibatch = 100;
  int epochs = 10;
  std::uint64_t seed = 0;
  double det_clamp = 1e-6;
  double init_scale = 0.01;
};

struct RbmTrainResult {
  RsmParams params;
  std::vector<std::string> warnings;
};

/// Hidden-unit weight vectors (columns of W) as rows of a K x J matrix.
inline Matrix hidden_unit_vectors(const RsmParams& p) { return p.W.transpose(); }

namespace detail {

// One magnitude-preserving projected step on the directions of the hidden
// unit weight vectors, ascending lambda * surrogate.
inline void mar_direction_step(RsmParams& p, double step, const SurrogateConfig& scfg, std::mt19937_64& rng) {
  auto [g, dir] = split_magnitude_direction(hidden_unit_vectors(p));
  for (int attempt = 0;; ++attempt) {
    try {
      dir = project_rows_unit(dir + step * surrogate_gradient(dir, scfg));
      break;
    } catch (const dependent_rows&) {
      if (attempt >= 5) throw numerical_failure("train_mar_rbm: hidden units remain linearly dependent");
      dir = mar::detail::perturb_rows(dir, rng);
    }
  }
  p.W = compose(g, dir).transpose();
}

}  // namespace detail

/// Minibatch CD-1 ascent, each minibatch followed by one direction step on
/// the hidden-unit weight vectors when the regularizer is active.
inline RbmTrainResult train_mar_rbm(const DocBatch& batch, const RbmTrainConfig& cfg) {
  batch.validate();
  if (cfg.K < 1) throw invalid_argument("train_mar_rbm: K must be at least 1");
  if (cfg.minibatch == 0) throw invalid_argument("train_mar_rbm: minibatch must be positive");
  if (!(cfg.lr > 0.0)) throw invalid_argument("train_mar_rbm: learning rate must be positive");
  RbmTrainResult out;
  double lambda = cfg.lambda;
  if (lambda > 0.0 && !mar_applicable(cfg.K, batch.vocab)) {
    out.warnings.push_back("regularizer disabled: needs 2 <= K <= J");
    lambda = 0.0;
  }
  const SurrogateConfig scfg{cfg.gamma, cfg.det_clamp};
  if (lambda > 0.0) scfg.validate();

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> init(-cfg.init_scale, cfg.init_scale);
  RsmParams p(batch.vocab, cfg.K);
  for (Eigen::Index i = 0; i < p.W.size(); ++i) p.W.data()[i] = init(rng);

  std::vector<std::size_t> order(batch.docs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.minibatch) {
      const std::size_t stop = std::min(order.size(), start + cfg.minibatch);
      std::vector<const Document*> mb;
      for (std::size_t i = start; i < stop; ++i) mb.push_back(&batch.docs[order[i]]);
      const RsmGradient g = cd1_gradient(mb, p, rng);
      p.W += cfg.lr * g.dW;
      p.vis_bias += cfg.lr * g.dvis;
      p.hid_bias += cfg.lr * g.dhid;
      if (lambda > 0.0) detail::mar_direction_step(p, cfg.lr * lambda, scfg, rng);
    }
  }
  out.params = std::move(p);
  return out;
}

// ---------------------------------------------------------------------------
// Exact evaluation on tiny instances.

inline double composition_count(std::uint32_t doc_length, Eigen::Index vocab) {
  // C(D + J - 1, J - 1) in floating point
  return std::exp(std::lgamma(doc_length + vocab) - std::lgamma(doc_length + 1.0) - std::lgamma(static_cast<double>(vocab)));
}

inline constexpr double max_enumeration = 1e6;

inline double log_multinomial(const Vector& n, double doc_length) {
  double r = std::lgamma(doc_length + 1.0);
  for (Eigen::Index j = 0; j < n.size(); ++j) r -= std::lgamma(n(j) + 1.0);
  return r;
}

/// Unnormalized log probability of one token sequence with counts n:
/// alpha . n + sum_k softplus(D beta_k + (W^T n)_k).
inline double log_unnormalized(const Vector& n, double doc_length, const RsmParams& p) {
  const Vector act = doc_length * p.hid_bias + p.W.transpose() * n;
  double r = p.vis_bias.dot(n);
  for (Eigen::Index k = 0; k < act.size(); ++k) r += softplus(act(k));
  return r;
}

namespace detail {
template <typename Fn>
void compositions_from(Vector& n, Eigen::Index pos, std::uint32_t remaining, Fn& fn) {
  if (pos == n.size() - 1) {
    n(pos) = remaining;
    fn(static_cast<const Vector&>(n));
    return;
  }
  for (std::uint32_t c = 0; c <= remaining; ++c) {
    n(pos) = c;
    compositions_from(n, pos + 1, remaining - c, fn);
  }
}
}  // namespace detail

/// Calls fn(n) for every count vector of length J summing to D.
template <typename Fn>
void for_each_composition(std::uint32_t doc_length, Eigen::Index vocab, Fn&& fn) {
  if (vocab < 1) throw invalid_argument("for_each_composition: empty vocabulary");
  Vector n = Vector::Zero(vocab);
  detail::compositions_from(n, 0, doc_length, fn);
}

/// log of the partition function over all token sequences of length D.
inline double exact_log_partition(const RsmParams& p, std::uint32_t doc_length) {
  p.validate();
  if (composition_count(doc_length, p.vocab()) > max_enumeration) {
    throw capacity_error("exact_log_partition: too many count vectors to enumerate");
  }
  double maxv = -std::numeric_limits<double>::infinity();
  std::vector<double> terms;
  for_each_composition(doc_length, p.vocab(), [&](const Vector& n) {
    const double t = log_multinomial(n, doc_length) + log_unnormalized(n, doc_length, p);
    terms.push_back(t);
    maxv = std::max(maxv, t);
  });
  double s = 0.0;
  for (double t : terms) s += std::exp(t - maxv);
  return maxv + std::log(s);
}

/// Caches log Z per document length.
class PartitionCache {
 public:
  explicit PartitionCache(const RsmParams& p) : p_(p) {}
  double operator()(std::uint32_t doc_length) {
    auto it = cache_.find(doc_length);
    if (it != cache_.end()) return it->second;
    const double z = exact_log_partition(p_, doc_length);
    cache_.emplace(doc_length, z);
    return z;
  }

 private:
  const RsmParams& p_;
  std::map<std::uint32_t, double> cache_;
};

/// Log probability of the document's token sequence.
inline double log_prob(const Document& doc, const RsmParams& p, PartitionCache& logz) {
  const Vector n = doc.dense(p.vocab());
  const double len = doc.length();
  return log_unnormalized(n, len, p) - logz(doc.length());
}

/// Log probability of the count vector, i.e. summed over token orderings.
inline double log_prob_counts(const Document& doc, const RsmParams& p, PartitionCache& logz) {
  return log_prob(doc, p, logz) + log_multinomial(doc.dense(p.vocab()), doc.length());
}

/// Per-word perplexity exp(-sum log p(doc) / sum D).
inline double perplexity(const DocBatch& batch, const RsmParams& p) {
  if (batch.docs.empty()) throw invalid_argument("perplexity: empty batch");
  PartitionCache logz(p);
  double ll = 0.0;
  double words = 0.0;
  for (const auto& d : batch.docs) {
    ll += log_prob(d, p, logz);
    words += d.length();
  }
  return std::exp(-ll / words);
}

inline double mean_log_likelihood(const DocBatch& batch, const RsmParams& p) {
  PartitionCache logz(p);
  double ll = 0.0;
  for (const auto& d : batch.docs) ll += log_prob(d, p, logz);
  return ll / static_cast<double>(batch.docs.size());
}

/// N x K matrix of hidden activation probabilities, one row per document.
inline Matrix hidden_representations(const DocBatch& batch, const RsmParams& p) {
  Matrix out(static_cast<Eigen::Index>(batch.docs.size()), p.hidden());
  for (std::size_t i = 0; i < batch.docs.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) =
        hidden_probs(batch.docs[i].dense(p.vocab()), batch.docs[i].length(), p).transpose();
  }
  return out;
}

/// Highest-weight word ids for every hidden unit.
inline std::vector<std::vector<std::uint32_t>> top_words(const RsmParams& p, std::size_t n) {
  std::vector<std::vector<std::uint32_t>> out;
  for (Eigen::Index k = 0; k < p.hidden(); ++k) {
    std::vector<std::uint32_t> ids(static_cast<std::size_t>(p.vocab()));
    std::iota(ids.begin(), ids.end(), 0u);
    std::stable_sort(ids.begin(), ids.end(), [&](std::uint32_t a, std::uint32_t b) { return p.W(a, k) > p.W(b, k); });
    ids.resize(std::min(n, ids.size()));
    out.push_back(std::move(ids));
  }
  return out;
}

}  // namespace mar::rbm

#endif  // MAR_RBM_HPP
