#ifndef MAR_OPTIMIZER_HPP
#define MAR_OPTIMIZER_HPP

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mar/linalg.hpp"
#include "mar/regularizer.hpp"

namespace mar {

/// A model objective to be maximized over the component matrix A.
class LossModel {
 public:
  virtual ~LossModel() = default;
  virtual double objective(const Matrix& a) = 0;
  virtual Matrix gradient(const Matrix& a) = 0;
  // Stochastic models return a fresh minibatch estimate on every call.
  virtual bool stochastic() const { return false; }
};

/// The zero objective; optimizing it leaves only the regularizer.
class ZeroLoss final : public LossModel {
 public:
  double objective(const Matrix&) override { return 0.0; }
  Matrix gradient(const Matrix& a) override { return Matrix::Zero(a.rows(), a.cols()); }
};

struct OptimizerConfig {
  double lambda = 0.0;
  double gamma = 1.0;
  int outer_iters = 100;
  int inner_g_iters = 50;
  int inner_a_iters = 50;
  double step_g = 0.1;
  double step_a = 0.1;
  double backtrack = 0.5;
  int max_halvings = 30;
  double g_floor = 1e-8;
  double rel_tol = 1e-6;
  std::uint64_t seed = 0;
  double det_clamp = 1e-6;

  void validate() const {
    if (!(lambda >= 0.0)) throw invalid_argument("OptimizerConfig: lambda must be nonnegative");
    if (!(gamma > 0.0)) throw invalid_argument("OptimizerConfig: gamma must be positive");
    if (!(step_g > 0.0) || !(step_a > 0.0)) throw invalid_argument("OptimizerConfig: step sizes must be positive");
    if (!(backtrack > 0.0 && backtrack < 1.0)) throw invalid_argument("OptimizerConfig: backtrack must lie in (0, 1)");
    if (!(g_floor > 0.0)) throw invalid_argument("OptimizerConfig: g_floor must be positive");
    if (outer_iters < 0 || inner_g_iters < 0 || inner_a_iters < 0 || max_halvings < 0) {
      throw invalid_argument("OptimizerConfig: iteration counts must be nonnegative");
    }
    SurrogateConfig{gamma, det_clamp}.validate();
  }

  SurrogateConfig surrogate() const { return {gamma, det_clamp}; }
};

struct MagnitudeDirection {
  Vector g;
  Matrix a_unit;
};

/// A = diag(g) * A_unit with g the row norms.
inline MagnitudeDirection split_magnitude_direction(const Eigen::Ref<const Matrix>& a) {
  MagnitudeDirection out;
  out.a_unit = project_rows_unit(a);
  out.g = a.rowwise().norm();
  return out;
}

inline Matrix compose(const Vector& g, const Matrix& a_unit) { return g.asDiagonal() * a_unit; }

/// Whether the surrogate can be evaluated for K components in D dimensions.
inline bool mar_applicable(Eigen::Index k, Eigen::Index d) { return k >= 2 && k <= d; }

namespace detail {

inline bool improved_enough(double before, double after) {
  return (after - before) > 1e-14 * std::max(1.0, std::abs(before));
}

inline double regularized_value(LossModel& model, const Vector& g, const Matrix& a_unit, double lambda,
                                double gamma) {
  double v = model.objective(compose(g, a_unit));
  if (lambda > 0.0) v += lambda * gram_surrogate(a_unit, gamma);
  return v;
}

inline Matrix perturb_rows(const Matrix& a_unit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> noise(-1e-6, 1e-6);
  Matrix p = a_unit;
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] += noise(rng);
  return project_rows_unit(p);
}

// Rows pinned at the magnitude floor whose loss gradient points against the
// direction are flipped; the surrogate and the angles ignore row sign.
inline void flip_floored_rows(LossModel& model, const Vector& g, Matrix& a_unit, double g_floor) {
  if (!(g.array() <= g_floor).any()) return;
  const Matrix full_grad = model.gradient(compose(g, a_unit));
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (g(i) <= g_floor && full_grad.row(i).dot(a_unit.row(i)) < 0.0) a_unit.row(i) *= -1.0;
  }
}

}  // namespace detail

/// Projected gradient ascent on the magnitudes with directions held fixed.
inline Vector g_step(LossModel& model, const Matrix& a_unit, const Vector& g0, const OptimizerConfig& cfg) {
  cfg.validate();
  if (g0.size() != a_unit.rows()) throw invalid_argument("g_step: magnitude vector size mismatch");
  Vector g = g0.cwiseMax(cfg.g_floor);
  double f = model.objective(compose(g, a_unit));
  if (!std::isfinite(f)) throw numerical_failure("g_step: non-finite objective");

  for (int it = 0; it < cfg.inner_g_iters; ++it) {
    const Matrix full_grad = model.gradient(compose(g, a_unit));
    Vector grad(g.size());
    for (Eigen::Index i = 0; i < g.size(); ++i) grad(i) = full_grad.row(i).dot(a_unit.row(i));
    if (!grad.allFinite()) throw numerical_failure("g_step: non-finite gradient");
    if (grad.squaredNorm() == 0.0) break;

    if (model.stochastic()) {
      g = (g + cfg.step_g * grad).cwiseMax(cfg.g_floor);
      continue;
    }
    double step = cfg.step_g;
    bool accepted = false;
    Vector cand;
    double fc = f;
    for (int h = 0; h <= cfg.max_halvings; ++h, step *= cfg.backtrack) {
      cand = (g + step * grad).cwiseMax(cfg.g_floor);
      fc = model.objective(compose(cand, a_unit));
      if (std::isfinite(fc) && fc >= f) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const bool progress = detail::improved_enough(f, fc);
    g = cand;
    f = fc;
    if (!progress) break;
  }
  return g;
}

/// Projected gradient ascent on the unit-row directions of
/// L(diag(g) A) + lambda * surrogate(A) with magnitudes held fixed.
inline Matrix a_step(LossModel& model, const Vector& g, const Matrix& a_unit0, const OptimizerConfig& cfg,
                     std::mt19937_64& rng) {
  cfg.validate();
  require_unit_rows(a_unit0, "a_step");
  if (cfg.lambda > 0.0 && !mar_applicable(a_unit0.rows(), a_unit0.cols())) {
    throw invalid_argument("a_step: regularizer needs 2 <= K <= D");
  }
  const bool use_mar = cfg.lambda > 0.0;
  Matrix a = a_unit0;
  double f = detail::regularized_value(model, g, a, cfg.lambda, cfg.gamma);
  if (!std::isfinite(f)) throw numerical_failure("a_step: non-finite objective");

  int perturbations = 0;
  constexpr int max_perturbations = 5;
  for (int it = 0; it < cfg.inner_a_iters; ++it) {
    Matrix grad = g.asDiagonal() * model.gradient(compose(g, a));
    if (use_mar) {
      try {
        grad += cfg.lambda * surrogate_gradient(a, cfg.surrogate());
      } catch (const dependent_rows&) {
        if (++perturbations > max_perturbations) {
          throw numerical_failure("a_step: rows remain linearly dependent after perturbation");
        }
        a = detail::perturb_rows(a, rng);
        f = detail::regularized_value(model, g, a, cfg.lambda, cfg.gamma);
        --it;
        continue;
      }
    }
    if (!grad.allFinite()) throw numerical_failure("a_step: non-finite gradient");
    if (grad.squaredNorm() == 0.0) break;

    if (model.stochastic()) {
      a = project_rows_unit(a + cfg.step_a * grad);
      continue;
    }
    double step = cfg.step_a;
    bool accepted = false;
    Matrix cand;
    double fc = f;
    for (int h = 0; h <= cfg.max_halvings; ++h, step *= cfg.backtrack) {
      try {
        cand = project_rows_unit(a + step * grad);
      } catch (const degenerate_row&) {
        continue;
      }
      fc = detail::regularized_value(model, g, cand, cfg.lambda, cfg.gamma);
      if (std::isfinite(fc) && fc >= f) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const bool progress = detail::improved_enough(f, fc);
    a = std::move(cand);
    f = fc;
    if (!progress) break;
  }
  return a;
}

inline Matrix a_step(LossModel& model, const Vector& g, const Matrix& a_unit0, const OptimizerConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  return a_step(model, g, a_unit0, cfg, rng);
}

struct OptimizeResult {
  Matrix a;
  double initial_objective = 0.0;
  std::vector<double> trace;  // L(A) + lambda * surrogate after each outer iteration
  bool converged = false;
  std::vector<std::string> warnings;
};

/// Alternating magnitude/direction optimization.
inline OptimizeResult optimize(LossModel& model, const Matrix& a0, OptimizerConfig cfg) {
  cfg.validate();
  OptimizeResult out;
  if (cfg.lambda > 0.0 && !mar_applicable(a0.rows(), a0.cols())) {
    out.warnings.push_back("regularizer disabled: needs 2 <= K <= D (K=" + std::to_string(a0.rows()) +
                           ", D=" + std::to_string(a0.cols()) + ")");
    cfg.lambda = 0.0;
  }
  if (cfg.outer_iters == 0) {
    out.a = a0;
    out.initial_objective = model.objective(a0);
    return out;
  }
  auto [g, a_unit] = split_magnitude_direction(a0);
  g = g.cwiseMax(cfg.g_floor);
  std::mt19937_64 rng(cfg.seed);

  double prev = detail::regularized_value(model, g, a_unit, cfg.lambda, cfg.gamma);
  if (!std::isfinite(prev)) throw numerical_failure("optimize: non-finite initial objective");
  out.initial_objective = prev;
  for (int outer = 0; outer < cfg.outer_iters; ++outer) {
    detail::flip_floored_rows(model, g, a_unit, cfg.g_floor);
    g = g_step(model, a_unit, g, cfg);
    a_unit = a_step(model, g, a_unit, cfg, rng);
    const double cur = detail::regularized_value(model, g, a_unit, cfg.lambda, cfg.gamma);
    out.trace.push_back(cur);
    if (std::abs(cur - prev) < cfg.rel_tol * std::max(1.0, std::abs(prev))) {
      out.converged = true;
      break;
    }
    prev = cur;
  }
  out.a = compose(g, a_unit);
  return out;
}

}  // namespace mar

#endif  // MAR_OPTIMIZER_HPP
