#ifndef MAR_BOUNDS_HPP
#define MAR_BOUNDS_HPP

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mar/error.hpp"
#include "mar/linalg.hpp"

namespace mar::bounds {

inline constexpr double pi = 3.14159265358979323846;

/// Constants of the one-hidden-layer analysis. Kclasses is only used by the
/// cross-entropy constants, C only by the approximation bound.
struct BoundInputs {
  double m = 1.0;
  double n = 1.0;
  double L = 0.25;
  double C1 = 1.0;
  double C2 = 1.0;
  double C3 = 1.0;
  double C4 = 1.0;
  double h0 = 0.5;
  double theta = 0.0;
  double tau = 1.0;
  double delta = 0.05;
  std::optional<double> mu;
  std::optional<double> sigma;
  double C = 1.0;
  double Kclasses = 2.0;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw invalid_argument(std::string("BoundInputs: ") + name + " must be positive");
    };
    positive(m, "m");
    positive(n, "n");
    positive(C1, "C1");
    positive(C3, "C3");
    positive(C4, "C4");
    positive(C, "C");
    if (!(L >= 0.0) || !(C2 >= 0.0) || !std::isfinite(h0)) {
      throw invalid_argument("BoundInputs: L and C2 must be nonnegative, h0 finite");
    }
    if (!(theta >= 0.0 && theta <= pi / 2.0)) throw invalid_argument("BoundInputs: theta must lie in [0, pi/2]");
    if (!(tau > 0.0 && tau <= 1.0)) throw invalid_argument("BoundInputs: tau must lie in (0, 1]");
    if (!(delta > 0.0 && delta < 1.0)) throw invalid_argument("BoundInputs: delta must lie in (0, 1)");
    if (!(Kclasses >= 1.0)) throw invalid_argument("BoundInputs: Kclasses must be at least 1");
  }
};

struct LayerSpec {
  double m = 1.0;
  double C3 = 1.0;
  double theta = 0.0;
  double tau = 1.0;
};

struct Bound {
  double bound = 0.0;
  double probability = 0.0;
};

struct ThetaEstimate {
  double theta = 0.0;
  bool negative = false;  // callers must clamp to 0 before using it as an angle bound
};

/// theta = mu - sqrt(sigma / (1 - tau)).
inline ThetaEstimate theta_lower_bound(double mu, double sigma, double tau) {
  if (!(sigma >= 0.0)) throw invalid_argument("theta_lower_bound: sigma must be nonnegative");
  if (!(tau > 0.0 && tau < 1.0)) throw invalid_argument("theta_lower_bound: tau must lie in (0, 1)");
  ThetaEstimate out;
  out.theta = mu - std::sqrt(sigma / (1.0 - tau));
  out.negative = out.theta < 0.0;
  return out;
}

namespace detail {

inline double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double confidence_term(double delta, double n) { return std::sqrt(2.0 * std::log(2.0 / delta) / n); }

// One step of the layer recursion: returns J^p from J^{p-1}.
inline double layer_step(double j_prev, double m_prev, double cos_prev, double c3, double L, double h0) {
  const double q = (m_prev - 1.0) * cos_prev + 1.0;
  const double t1 = m_prev * (c3 * c3) * (h0 * h0);
  const double t2 = L * L * (c3 * c3) * q * j_prev;
  const double t3 = 2.0 * std::sqrt(m_prev) * (c3 * c3) * L * std::abs(h0) * std::sqrt(q * j_prev);
  return t1 + t2 + t3;
}

}  // namespace detail

/// sup |f| <= sqrt(J) for the one-hidden-layer network:
/// J = m C4^2 h0^2 + L^2 C1^2 C3^2 C4^2 q + 2 sqrt(m) C1 C3 C4^2 L |h0| sqrt(q),
/// q = (m - 1) cos(theta) + 1.
inline double j_single(const BoundInputs& in) {
  in.validate();
  const double q = (in.m - 1.0) * std::cos(in.theta) + 1.0;
  const double c13 = in.C1 * in.C1 * (in.C3 * in.C3);
  const double t1 = in.m * (in.C4 * in.C4) * (in.h0 * in.h0);
  const double t2 = in.L * in.L * (in.C4 * in.C4) * q * c13;
  const double t3 = 2.0 * std::sqrt(in.m) * (in.C4 * in.C4) * in.L * std::abs(in.h0) * std::sqrt(q * c13);
  return t1 + t2 + t3;
}

/// Rademacher part (2 L C1 C3 C4 + C4 |h0|) sqrt(m) / sqrt(n), split into
/// the same two products the multilayer form uses.
inline double rademacher_single(const BoundInputs& in) {
  const double sn = std::sqrt(in.n);
  const double t1 = (2.0 * in.L) * in.C1 * in.C4 / sn * (std::sqrt(in.m) * in.C3);
  const double t2 = std::abs(in.h0) / sn * (std::sqrt(in.m) * in.C4);
  return t1 + t2;
}

/// Squared-loss estimation error bound and its probability (1 - delta) tau.
inline Bound estimation_bound_squared(const BoundInputs& in) {
  const double sj = std::sqrt(j_single(in));
  const double lead = sj + in.C2;
  return {8.0 * lead * rademacher_single(in) + lead * lead * detail::confidence_term(in.delta, in.n),
          (1.0 - in.delta) * in.tau};
}

inline void validate_layers(const std::vector<LayerSpec>& layers) {
  if (layers.empty()) throw invalid_argument("bounds: layer spec is empty");
  for (const auto& l : layers) {
    if (!(l.m > 0.0) || !(l.C3 > 0.0)) throw invalid_argument("bounds: layer m and C3 must be positive");
    if (!(l.theta >= 0.0 && l.theta <= pi / 2.0)) throw invalid_argument("bounds: layer theta must lie in [0, pi/2]");
    if (!(l.tau > 0.0 && l.tau <= 1.0)) throw invalid_argument("bounds: layer tau must lie in (0, 1]");
  }
}

/// J^P of the P-hidden-layer recursion. layers[p] holds (m^p, C3^p, theta^p,
/// tau^p) for p = 0..P-1; out_weight_bound is C3^P.
inline double j_multilayer(const std::vector<LayerSpec>& layers, double out_weight_bound, double L, double C1,
                           double h0) {
  validate_layers(layers);
  if (!(out_weight_bound > 0.0) || !(C1 > 0.0)) throw invalid_argument("j_multilayer: bounds must be positive");
  double j = C1 * C1 * (layers[0].C3 * layers[0].C3);
  for (std::size_t p = 1; p <= layers.size(); ++p) {
    const double c3 = p < layers.size() ? layers[p].C3 : out_weight_bound;
    j = detail::layer_step(j, layers[p - 1].m, std::cos(layers[p - 1].theta), c3, L, h0);
  }
  return j;
}

/// Multilayer estimation bound. Uses n, L, C1, C2, h0, delta from `in` and
/// in.C4 as the output weight bound C3^P; m, C3, theta, tau of `in` are
/// ignored in favor of the layer spec.
inline Bound estimation_bound_multilayer(const std::vector<LayerSpec>& layers, const BoundInputs& in) {
  in.validate();
  validate_layers(layers);
  const std::size_t P = layers.size();
  const double sn = std::sqrt(in.n);
  const double L2 = 2.0 * in.L;
  auto c3_of = [&](std::size_t p) { return p < P ? layers[p].C3 : in.C4; };

  double prod = 1.0;
  for (std::size_t p = 0; p < P; ++p) prod *= std::sqrt(layers[p].m) * layers[p].C3;
  const double t1 = std::pow(L2, static_cast<double>(P)) * in.C1 * in.C4 / sn * prod;

  double sum = 0.0;
  for (std::size_t p = 0; p < P; ++p) {
    double inner = 1.0;
    for (std::size_t j = p; j < P; ++j) inner *= std::sqrt(layers[j].m) * c3_of(j + 1);
    sum += std::pow(L2, static_cast<double>(P - 1 - p)) * inner;
  }
  const double t2 = std::abs(in.h0) / sn * sum;

  const double sj = std::sqrt(j_multilayer(layers, in.C4, in.L, in.C1, in.h0));
  const double lead = sj + in.C2;
  double prob = 1.0 - in.delta;
  for (const auto& l : layers) prob *= l.tau;
  return {8.0 * lead * (t1 + t2) + lead * lead * detail::confidence_term(in.delta, in.n), prob};
}

/// Logistic loss: 4 / (1 + exp(-sqrt J)) * R + log(1 + exp(sqrt J)) * conf.
inline Bound estimation_bound_logistic(const BoundInputs& in) {
  const double sj = std::sqrt(j_single(in));
  const double lip = 4.0 / (1.0 + std::exp(-sj));
  return {lip * rademacher_single(in) + detail::softplus(sj) * detail::confidence_term(in.delta, in.n),
          (1.0 - in.delta) * in.tau};
}

/// Hinge loss: 4 R + (1 + sqrt J) * conf.
inline Bound estimation_bound_hinge(const BoundInputs& in) {
  const double sj = std::sqrt(j_single(in));
  return {4.0 * rademacher_single(in) + (1.0 + sj) * detail::confidence_term(in.delta, in.n),
          (1.0 - in.delta) * in.tau};
}

struct CrossEntropyConstants {
  double lipschitz = 0.0;
  double loss_bound = 0.0;
};

/// Lipschitz constant (K-1)/(K-1+exp(-2 sqrt J)) and loss bound
/// log(1 + (K-1) exp(2 sqrt J)), the latter evaluated without overflow.
inline CrossEntropyConstants cross_entropy_constants(const BoundInputs& in) {
  const double sj = std::sqrt(j_single(in));
  const double k1 = in.Kclasses - 1.0;
  CrossEntropyConstants out;
  if (k1 <= 0.0) return out;
  out.lipschitz = k1 / (k1 + std::exp(-2.0 * sj));
  out.loss_bound = detail::softplus(std::log(k1) + 2.0 * sj);
  return out;
}

struct ApproximationBound {
  double bound = 0.0;
  double barron_term = 0.0;
  double angle_term = 0.0;
  double m_cap = 0.0;  // infinity when theta = 0
  bool c1c3_ok = false;
  bool c4_ok = false;
  bool m_cap_ok = false;
  bool feasible() const { return c1c3_ok && c4_ok && m_cap_ok; }
};

/// 2C(1/sqrt n + (1 + 2 ln(C1 C3)) / (C1 C3)) + 4 m C C1 C3 sin(theta'/2),
/// theta' = min(3 m theta, pi), with the three preconditions reported.
inline ApproximationBound approximation_bound(const BoundInputs& in) {
  in.validate();
  ApproximationBound out;
  const double c13 = in.C1 * in.C3;
  out.barron_term = 2.0 * in.C * (1.0 / std::sqrt(in.n) + (1.0 + 2.0 * std::log(c13)) / c13);
  const double theta_p = std::min(3.0 * in.m * in.theta, pi);
  out.angle_term = 4.0 * in.m * in.C * c13 * std::sin(theta_p / 2.0);
  out.bound = out.barron_term + out.angle_term;
  out.c1c3_ok = c13 >= 1.0;
  out.c4_ok = in.C4 >= 2.0 * std::sqrt(in.m) * in.C;
  if (in.theta > 0.0) {
    out.m_cap = 2.0 * (std::floor((pi / 2.0 - in.theta) / in.theta) + 1.0);
    out.m_cap_ok = in.m <= out.m_cap;
  } else {
    out.m_cap = std::numeric_limits<double>::infinity();
    out.m_cap_ok = true;
  }
  return out;
}

struct ScanRow {
  double theta = 0.0;
  double estimation = 0.0;
  double approximation = 0.0;
  double sum = 0.0;
  bool feasible = false;
};

struct ScanResult {
  std::vector<ScanRow> rows;
  bool estimation_nonincreasing = true;
  bool approximation_nondecreasing = true;
  std::optional<std::size_t> best;  // argmin of sum over feasible rows
  // best is neither the first nor the last grid point
  bool best_interior = false;
};

/// Estimation (squared loss) and approximation bounds over a theta grid.
inline ScanResult tradeoff_scan(const BoundInputs& in, const std::vector<double>& theta_grid) {
  ScanResult out;
  for (double t : theta_grid) {
    BoundInputs x = in;
    x.theta = t;
    const ApproximationBound ab = approximation_bound(x);
    ScanRow r;
    r.theta = t;
    r.estimation = estimation_bound_squared(x).bound;
    r.approximation = ab.bound;
    r.sum = r.estimation + r.approximation;
    r.feasible = ab.feasible();
    out.rows.push_back(r);
  }
  std::vector<std::size_t> feasible;
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    if (i > 0) {
      if (out.rows[i].estimation > out.rows[i - 1].estimation) out.estimation_nonincreasing = false;
      if (out.rows[i].approximation < out.rows[i - 1].approximation) out.approximation_nondecreasing = false;
    }
    if (out.rows[i].feasible) feasible.push_back(i);
  }
  for (std::size_t i : feasible) {
    if (!out.best || out.rows[i].sum < out.rows[*out.best].sum) out.best = i;
  }
  if (out.best) out.best_interior = *out.best != 0 && *out.best + 1 != out.rows.size();
  return out;
}

}  // namespace mar::bounds

#endif  // MAR_BOUNDS_HPP
