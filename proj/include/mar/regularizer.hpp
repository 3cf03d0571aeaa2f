#ifndef MAR_REGULARIZER_HPP
#define MAR_REGULARIZER_HPP

#include <cmath>
#include <vector>

#include "mar/linalg.hpp"

namespace mar {

/// Mean (psi) and population variance (pi) of the pairwise non-obtuse angles,
/// and omega = psi - gamma * pi.
struct MarBreakdown {
  double mean_angle = 0.0;
  double angle_variance = 0.0;
  double omega = 0.0;
  double gamma = 1.0;
};

struct SurrogateConfig {
  double gamma = 1.0;
  double det_clamp = 1e-6;

  void validate() const {
    if (!(gamma > 0.0)) throw invalid_argument("SurrogateConfig: gamma must be positive");
    if (!(det_clamp > 0.0 && det_clamp < 0.5)) {
      throw invalid_argument("SurrogateConfig: det_clamp must lie in (0, 0.5)");
    }
  }
};

inline void require_nonzero_rows(const Eigen::Ref<const Matrix>& a, const char* who) {
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double n = a.row(i).norm();
    if (!(n > tol::degenerate_norm) || !std::isfinite(n)) {
      throw degenerate_row(std::string(who) + ": row " + std::to_string(i) + " has near-zero norm");
    }
  }
}

/// Angles over unordered pairs i < j, in row-major pair order.
inline std::vector<double> pairwise_angles(const Eigen::Ref<const Matrix>& a) {
  require_nonzero_rows(a, "pairwise_angles");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(a.rows() * (a.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < a.rows(); ++j) {
      out.push_back(non_obtuse_angle(a.row(i).transpose(), a.row(j).transpose()));
    }
  }
  return out;
}

inline MarBreakdown mar_breakdown(const Eigen::Ref<const Matrix>& a, double gamma = 1.0) {
  if (a.rows() < 2) throw invalid_argument("mar_breakdown: need at least two components");
  if (!(gamma > 0.0)) throw invalid_argument("mar_breakdown: gamma must be positive");
  const std::vector<double> angles = pairwise_angles(a);
  const double n = static_cast<double>(angles.size());
  double mean = 0.0;
  for (double t : angles) mean += t;
  mean /= n;
  double var = 0.0;
  for (double t : angles) var += (t - mean) * (t - mean);
  var /= n;
  MarBreakdown out;
  out.mean_angle = mean;
  out.angle_variance = var;
  out.gamma = gamma;
  out.omega = mean - gamma * var;
  return out;
}

inline double mar_omega(const Eigen::Ref<const Matrix>& a, double gamma = 1.0) {
  return mar_breakdown(a, gamma).omega;
}

/// g(x) = arcsin(sqrt x) - gamma * (pi/2 - arcsin(sqrt x))^2 on [0, 1].
inline double surrogate_g(double x, double gamma = 1.0) {
  if (!(x >= -1e-12 && x <= 1.0 + 1e-12)) throw invalid_argument("surrogate_g: argument outside [0, 1]");
  if (!(gamma > 0.0)) throw invalid_argument("surrogate_g: gamma must be positive");
  const double s = std::asin(std::sqrt(std::clamp(x, 0.0, 1.0)));
  const double gap = half_pi - s;
  return s - gamma * gap * gap;
}

/// Derivative of surrogate_g; finite only on the open interval (0, 1).
inline double surrogate_g_prime(double x, double gamma = 1.0) {
  if (!(x > 0.0 && x < 1.0)) throw invalid_argument("surrogate_g_prime: argument outside (0, 1)");
  const double s = std::asin(std::sqrt(x));
  return (1.0 + 2.0 * gamma * (half_pi - s)) / (2.0 * std::sqrt(x * (1.0 - x)));
}

/// g(gram_det(a)) without the unit-row precondition. Used where a caller
/// differentiates through non-unit perturbations of a unit-row matrix.
inline double gram_surrogate(const Eigen::Ref<const Matrix>& a, double gamma = 1.0) {
  return surrogate_g(gram_det(a), gamma);
}

namespace detail {

// 1 - det for unit rows, from the eigenvalues of the off-diagonal Gram part.
// Near det = 1, where arcsin(sqrt x) is steepest, this keeps full precision.
inline double gram_det_complement(const Eigen::Ref<const Matrix>& a_unit) {
  Matrix off = row_gram(a_unit);
  off.diagonal().setZero();
  const Vector mu = Eigen::SelfAdjointEigenSolver<Matrix>(off, Eigen::EigenvaluesOnly).eigenvalues();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) log_det += std::log1p(mu(i));
  return -std::expm1(log_det);
}

}  // namespace detail

/// Smooth lower bound of omega for unit, linearly independent rows.
inline double surrogate(const Eigen::Ref<const Matrix>& a_unit, double gamma = 1.0) {
  require_unit_rows(a_unit, "surrogate");
  const double det = gram_det(a_unit);
  if (!(det > 0.0)) throw dependent_rows("surrogate: rows are linearly dependent");
  if (det < 0.5) return surrogate_g(det, gamma);
  if (!(gamma > 0.0)) throw invalid_argument("surrogate: gamma must be positive");
  const double comp = std::max(0.0, detail::gram_det_complement(a_unit));
  const double s = std::atan2(std::sqrt(1.0 - comp), std::sqrt(comp));
  const double gap = half_pi - s;
  return s - gamma * gap * gap;
}

/// Gradient of g(det(A A^T)) in A, i.e. g'(det) * 2 det (A A^T)^{-1} A. Row i
/// is a positive multiple of the residual direction of row i against the
/// span of the others. g' is evaluated at det clamped into
/// [det_clamp, 1 - det_clamp].
inline Matrix surrogate_gradient(const Eigen::Ref<const Matrix>& a_unit, const SurrogateConfig& cfg = {}) {
  cfg.validate();
  require_unit_rows(a_unit, "surrogate_gradient");
  if (a_unit.rows() > a_unit.cols()) {
    throw dependent_rows("surrogate_gradient: more components than dimensions");
  }
  const Matrix m = row_gram(a_unit);
  const double det = gram_det(a_unit);
  Eigen::LLT<Matrix> llt(m);
  if (!(det > 0.0) || llt.info() != Eigen::Success) {
    throw dependent_rows("surrogate_gradient: rows are linearly dependent");
  }
  const double clamped = std::clamp(det, cfg.det_clamp, 1.0 - cfg.det_clamp);
  const double scale = surrogate_g_prime(clamped, cfg.gamma) * 2.0 * det;
  Matrix g = llt.solve(Matrix(a_unit));
  g *= scale;
  if (!g.allFinite()) throw numerical_failure("surrogate_gradient: non-finite gradient");
  return g;
}

/// One projected ascent step on the surrogate.
inline Matrix ascent_step(const Eigen::Ref<const Matrix>& a_unit, double eta, const SurrogateConfig& cfg = {}) {
  if (!(eta >= 0.0)) throw invalid_argument("ascent_step: eta must be nonnegative");
  if (eta == 0.0) {
    require_unit_rows(a_unit, "ascent_step");
    return a_unit;
  }
  return project_rows_unit(a_unit + eta * surrogate_gradient(a_unit, cfg));
}

}  // namespace mar

#endif  // MAR_REGULARIZER_HPP
