#ifndef MAR_SYNTH_HPP
#define MAR_SYNTH_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "mar/io.hpp"
#include "mar/rbm.hpp"

namespace mar::synth {

enum class Mode { docs, features };

struct LongtailSpec {
  int n_topics = 10;
  double exponent = 1.5;
  std::size_t n = 1000;   // documents or points
  Eigen::Index dim = 50;  // vocabulary size or feature dimension
  Mode mode = Mode::features;
  std::uint64_t seed = 0;
  // docs mode
  std::uint32_t doc_length = 10;
  double focus = 0.8;  // probability mass of a topic's own word block
  // features mode
  double separation = 3.0;
  double noise = 1.0;
};

struct LongtailData {
  io::DenseDataset dense;  // features mode
  rbm::DocBatch docs;      // docs mode
  std::vector<int> labels;
};

/// Class sizes proportional to rank^(-exponent), every class non-empty,
/// summing to n (largest-remainder rounding).
inline std::vector<std::size_t> longtail_sizes(int n_topics, double exponent, std::size_t n) {
  if (n_topics < 2) throw invalid_argument("synth: n_topics must be at least 2");
  if (n < static_cast<std::size_t>(n_topics)) throw invalid_argument("synth: need at least one item per topic");
  if (!(exponent >= 0.0)) throw invalid_argument("synth: exponent must be nonnegative");
  const auto t = static_cast<std::size_t>(n_topics);
  std::vector<double> w(t);
  for (std::size_t r = 0; r < t; ++r) w[r] = std::pow(static_cast<double>(r + 1), -exponent);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  const std::size_t spare = n - t;  // one item per class is reserved
  std::vector<std::size_t> sizes(t, 1);
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t used = 0;
  for (std::size_t r = 0; r < t; ++r) {
    const double exact = static_cast<double>(spare) * w[r] / total;
    const auto fl = static_cast<std::size_t>(std::floor(exact));
    sizes[r] += fl;
    used += fl;
    rem.emplace_back(exact - static_cast<double>(fl), r);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; used < spare; ++i, ++used) ++sizes[rem[i].second];
  return sizes;
}

/// Power-law sized classes. Docs mode: topic t concentrates `focus` of its
/// word distribution on its own contiguous block of the vocabulary.
/// Features mode: class means are `separation` times distinct unit
/// directions, with shared isotropic Gaussian noise.
inline LongtailData synth_longtail(const LongtailSpec& spec) {
  const std::vector<std::size_t> sizes = longtail_sizes(spec.n_topics, spec.exponent, spec.n);
  std::mt19937_64 rng(spec.seed);
  LongtailData out;
  for (std::size_t t = 0; t < sizes.size(); ++t) out.labels.insert(out.labels.end(), sizes[t], static_cast<int>(t));
  std::shuffle(out.labels.begin(), out.labels.end(), rng);
  const auto topics = static_cast<Eigen::Index>(spec.n_topics);

  if (spec.mode == Mode::docs) {
    if (spec.dim < topics) throw invalid_argument("synth: vocabulary must have at least one word per topic");
    if (spec.doc_length == 0) throw invalid_argument("synth: doc_length must be positive");
    if (!(spec.focus >= 0.0 && spec.focus <= 1.0)) throw invalid_argument("synth: focus must lie in [0, 1]");
    const Eigen::Index block = spec.dim / topics;
    std::vector<std::discrete_distribution<Eigen::Index>> word_dist;
    for (Eigen::Index t = 0; t < topics; ++t) {
      std::vector<double> p(static_cast<std::size_t>(spec.dim), (1.0 - spec.focus) / static_cast<double>(spec.dim));
      for (Eigen::Index j = t * block; j < (t + 1) * block; ++j) p[static_cast<std::size_t>(j)] += spec.focus / static_cast<double>(block);
      word_dist.emplace_back(p.begin(), p.end());
    }
    out.docs.vocab = spec.dim;
    for (int label : out.labels) {
      Vector n = Vector::Zero(spec.dim);
      for (std::uint32_t i = 0; i < spec.doc_length; ++i) n(word_dist[static_cast<std::size_t>(label)](rng)) += 1.0;
      out.docs.docs.push_back(rbm::Document::from_dense(n, label));
    }
    return out;
  }

  if (spec.dim < 1) throw invalid_argument("synth: dimension must be positive");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix means(topics, spec.dim);
  if (topics <= spec.dim) {
    means.setZero();
    for (Eigen::Index t = 0; t < topics; ++t) means(t, t) = 1.0;
  } else {
    for (Eigen::Index i = 0; i < means.size(); ++i) means.data()[i] = gauss(rng);
    means = project_rows_unit(means);
  }
  means *= spec.separation;
  out.dense.X.resize(static_cast<Eigen::Index>(spec.n), spec.dim);
  for (std::size_t i = 0; i < spec.n; ++i) {
    for (Eigen::Index j = 0; j < spec.dim; ++j) {
      out.dense.X(static_cast<Eigen::Index>(i), j) = means(out.labels[i], j) + spec.noise * gauss(rng);
    }
  }
  out.dense.labels = out.labels;
  for (Eigen::Index j = 0; j < spec.dim; ++j) out.dense.feature_names.push_back("f" + std::to_string(j));
  return out;
}

}  // namespace mar::synth

#endif  // MAR_SYNTH_HPP
