#ifndef MAR_NN_HPP
#define MAR_NN_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "mar/linalg.hpp"
#include "mar/optimizer.hpp"
#include "mar/regularizer.hpp"

namespace mar::nn {

/// One hidden layer with sigmoid units and a softmax output. Rows of
/// hidden_W are the hidden-unit weight vectors.
struct MlpParams {
  Matrix hidden_W;  // m x d
  Vector hidden_b;  // m
  Matrix out_W;     // c x m
  Vector out_b;     // c

  MlpParams() = default;
  MlpParams(Eigen::Index d, Eigen::Index m, Eigen::Index c)
      : hidden_W(Matrix::Zero(m, d)), hidden_b(Vector::Zero(m)), out_W(Matrix::Zero(c, m)), out_b(Vector::Zero(c)) {}

  Eigen::Index inputs() const { return hidden_W.cols(); }
  Eigen::Index hidden() const { return hidden_W.rows(); }
  Eigen::Index classes() const { return out_W.rows(); }

  void validate() const {
    if (hidden_b.size() != hidden_W.rows() || out_W.cols() != hidden_W.rows() || out_b.size() != out_W.rows()) {
      throw invalid_argument("MlpParams: inconsistent shapes");
    }
    if (out_W.rows() < 1 || hidden_W.rows() < 1) throw invalid_argument("MlpParams: empty layer");
    if (!hidden_W.allFinite() || !hidden_b.allFinite() || !out_W.allFinite() || !out_b.allFinite()) {
      throw invalid_argument("MlpParams: non-finite parameters");
    }
  }

  MlpParams& operator+=(const MlpParams& o) {
    hidden_W += o.hidden_W;
    hidden_b += o.hidden_b;
    out_W += o.out_W;
    out_b += o.out_b;
    return *this;
  }
  MlpParams& operator*=(double s) {
    hidden_W *= s;
    hidden_b *= s;
    out_W *= s;
    out_b *= s;
    return *this;
  }
};

inline double logistic(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

namespace detail {

inline Matrix logistic(const Matrix& z) { return z.unaryExpr([](double t) { return nn::logistic(t); }); }

// Row-wise softmax, stable under large logits.
inline Matrix softmax_rows(Matrix z) {
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    z.row(i).array() -= z.row(i).maxCoeff();
    z.row(i) = z.row(i).array().exp();
    z.row(i) /= z.row(i).sum();
  }
  return z;
}

inline void check_batch(const MlpParams& p, const Eigen::Ref<const Matrix>& x, const std::vector<int>& y) {
  if (x.cols() != p.inputs()) throw invalid_argument("nn: input dimension mismatch");
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw invalid_argument("nn: feature and label counts differ");
  if (x.rows() == 0) throw invalid_argument("nn: empty batch");
  for (int l : y) {
    if (l < 0 || l >= p.classes()) throw invalid_argument("nn: label " + std::to_string(l) + " out of range");
  }
}

}  // namespace detail

/// Class probabilities for each row of x (N x c).
inline Matrix forward(const MlpParams& p, const Eigen::Ref<const Matrix>& x) {
  if (x.cols() != p.inputs()) throw invalid_argument("forward: input dimension mismatch");
  Matrix h = x * p.hidden_W.transpose();
  h.rowwise() += p.hidden_b.transpose();
  h = detail::logistic(h);
  Matrix z = h * p.out_W.transpose();
  z.rowwise() += p.out_b.transpose();
  return detail::softmax_rows(std::move(z));
}

inline Vector forward_one(const MlpParams& p, const Vector& x) {
  const Matrix row = x.transpose();
  return forward(p, row).row(0).transpose();
}

inline std::vector<int> predict(const MlpParams& p, const Eigen::Ref<const Matrix>& x) {
  const Matrix probs = forward(p, x);
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index arg = 0;
    probs.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

inline double accuracy(const MlpParams& p, const Eigen::Ref<const Matrix>& x, const std::vector<int>& y) {
  if (static_cast<std::size_t>(x.rows()) != y.size() || y.empty()) {
    throw invalid_argument("accuracy: feature and label counts differ or are empty");
  }
  const std::vector<int> pred = predict(p, x);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < y.size(); ++i) hit += pred[i] == y[i];
  return static_cast<double>(hit) / static_cast<double>(y.size());
}

struct LossOptions {
  double lambda = 0.0;
  double gamma = 1.0;
  double det_clamp = 1e-6;
};

struct LossGrad {
  double objective = 0.0;      // cross_entropy - lambda * surrogate
  double cross_entropy = 0.0;  // mean over the batch
  double surrogate = 0.0;      // of the row-normalized hidden weights; 0 when inactive
  bool mar_active = false;
  MlpParams grad;
};

/// Mean cross-entropy minus lambda times the surrogate of the row-normalized
/// hidden weights, with its full gradient. The regularizer is skipped when
/// lambda = 0 or the hidden layer does not satisfy 2 <= m <= d.
inline LossGrad loss_and_grad(const MlpParams& p, const Eigen::Ref<const Matrix>& x, const std::vector<int>& y,
                              const LossOptions& opt = {}) {
  p.validate();
  detail::check_batch(p, x, y);
  if (!(opt.lambda >= 0.0)) throw invalid_argument("loss_and_grad: lambda must be nonnegative");
  const double n = static_cast<double>(x.rows());

  Matrix h = x * p.hidden_W.transpose();
  h.rowwise() += p.hidden_b.transpose();
  h = detail::logistic(h);
  Matrix z = h * p.out_W.transpose();
  z.rowwise() += p.out_b.transpose();
  const Matrix probs = detail::softmax_rows(z);

  LossGrad out;
  Matrix dz = probs;
  double ce = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto label = static_cast<Eigen::Index>(y[static_cast<std::size_t>(i)]);
    // log softmax evaluated from the logits to avoid log(0)
    const double zmax = z.row(i).maxCoeff();
    const double lse = zmax + std::log((z.row(i).array() - zmax).exp().sum());
    ce += lse - z(i, label);
    dz(i, label) -= 1.0;
  }
  dz /= n;
  out.cross_entropy = ce / n;

  out.grad.out_W = dz.transpose() * h;
  out.grad.out_b = dz.colwise().sum().transpose();
  const Matrix dh = (dz * p.out_W).cwiseProduct(h.cwiseProduct((1.0 - h.array()).matrix()));
  out.grad.hidden_W = dh.transpose() * x;
  out.grad.hidden_b = dh.colwise().sum().transpose();

  out.objective = out.cross_entropy;
  if (opt.lambda > 0.0 && mar_applicable(p.hidden(), p.inputs())) {
    const Vector r = p.hidden_W.rowwise().norm();
    const Matrix u = project_rows_unit(p.hidden_W);
    out.surrogate = surrogate_g(gram_det(u), opt.gamma);
    const Matrix gu = surrogate_gradient(u, SurrogateConfig{opt.gamma, opt.det_clamp});
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      // d u_i / d w_i = (I - u_i u_i^T) / |w_i|
      const Eigen::RowVectorXd gi = gu.row(i);
      const Eigen::RowVectorXd ui = u.row(i);
      out.grad.hidden_W.row(i) -= opt.lambda * (gi - gi.dot(ui) * ui) / r(i);
    }
    out.objective -= opt.lambda * out.surrogate;
    out.mar_active = true;
  }
  if (!std::isfinite(out.objective)) throw numerical_failure("loss_and_grad: non-finite loss");
  return out;
}

struct NnTrainConfig {
  int m = 10;
  double lambda = 0.0;
  double gamma = 1.0;
  double lr = 0.1;
  std::size_t minibatch = 100;
  int epochs = 10;
  std::uint64_t seed = 0;
  double det_clamp = 1e-6;
};

struct NnTrainResult {
  MlpParams params;
  std::vector<double> trace;  // mean minibatch objective per epoch
  std::vector<std::string> warnings;
};

/// Initialization: hidden weights uniform in +-1/sqrt(d), output weights
/// uniform in +-1/sqrt(m), zero biases.
inline MlpParams init_params(Eigen::Index d, Eigen::Index m, Eigen::Index c, std::mt19937_64& rng) {
  MlpParams p(d, m, c);
  std::uniform_real_distribution<double> u1(-1.0 / std::sqrt(static_cast<double>(d)),
                                            1.0 / std::sqrt(static_cast<double>(d)));
  std::uniform_real_distribution<double> u2(-1.0 / std::sqrt(static_cast<double>(m)),
                                            1.0 / std::sqrt(static_cast<double>(m)));
  for (Eigen::Index i = 0; i < p.hidden_W.size(); ++i) p.hidden_W.data()[i] = u1(rng);
  for (Eigen::Index i = 0; i < p.out_W.size(); ++i) p.out_W.data()[i] = u2(rng);
  return p;
}

inline NnTrainResult train_nn(const Eigen::Ref<const Matrix>& x, const std::vector<int>& y, int classes,
                              const NnTrainConfig& cfg) {
  if (cfg.m < 1) throw invalid_argument("train_nn: m must be at least 1");
  if (classes < 2) throw invalid_argument("train_nn: need at least two classes");
  if (cfg.minibatch == 0) throw invalid_argument("train_nn: minibatch must be positive");
  if (!(cfg.lr > 0.0)) throw invalid_argument("train_nn: learning rate must be positive");
  if (cfg.epochs < 0) throw invalid_argument("train_nn: epochs must be nonnegative");
  NnTrainResult out;
  std::mt19937_64 rng(cfg.seed);
  MlpParams p = init_params(x.cols(), cfg.m, classes, rng);
  detail::check_batch(p, x, y);

  LossOptions opt{cfg.lambda, cfg.gamma, cfg.det_clamp};
  if (opt.lambda > 0.0 && !mar_applicable(cfg.m, x.cols())) {
    out.warnings.push_back("regularizer disabled: needs 2 <= m <= d");
    opt.lambda = 0.0;
  }

  std::vector<std::size_t> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.minibatch) {
      const std::size_t stop = std::min(order.size(), start + cfg.minibatch);
      Matrix xb(static_cast<Eigen::Index>(stop - start), x.cols());
      std::vector<int> yb;
      yb.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        xb.row(static_cast<Eigen::Index>(i - start)) = x.row(static_cast<Eigen::Index>(order[i]));
        yb.push_back(y[order[i]]);
      }
      LossGrad lg = loss_and_grad(p, xb, yb, opt);
      lg.grad *= -cfg.lr;
      p += lg.grad;
      sum += lg.objective;
      ++batches;
    }
    out.trace.push_back(sum / static_cast<double>(batches));
  }
  out.params = std::move(p);
  return out;
}

/// Angle statistics of the hidden-unit weight vectors.
struct HiddenDiversity {
  MarBreakdown mar;
  double min_angle = 0.0;
  double mu = 0.0;     // mean of the pairwise angles
  double sigma = 0.0;  // variance of the pairwise angles
};

inline HiddenDiversity measure_hidden_diversity(const MlpParams& p, double gamma = 1.0) {
  if (p.hidden() < 2) throw invalid_argument("measure_hidden_diversity: need at least two hidden units");
  HiddenDiversity out;
  out.mar = mar_breakdown(p.hidden_W, gamma);
  const std::vector<double> angles = pairwise_angles(p.hidden_W);
  out.min_angle = *std::min_element(angles.begin(), angles.end());
  out.mu = out.mar.mean_angle;
  out.sigma = out.mar.angle_variance;
  return out;
}

/// Univariate regression head f(x) = sum_j alpha_j sigmoid(w_j . x).
inline double regression_output(const Eigen::Ref<const Matrix>& w, const Vector& alpha, const Vector& x) {
  if (w.rows() != alpha.size() || w.cols() != x.size()) throw invalid_argument("regression_output: shape mismatch");
  double f = 0.0;
  for (Eigen::Index j = 0; j < w.rows(); ++j) f += alpha(j) * logistic(w.row(j).dot(x));
  return f;
}

}  // namespace mar::nn

#endif  // MAR_NN_HPP
