#ifndef MAR_VERIFY_HPP
#define MAR_VERIFY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "mar/bounds.hpp"
#include "mar/linalg.hpp"
#include "mar/nn.hpp"
#include "mar/regularizer.hpp"

namespace mar::verify {

// ---------------------------------------------------------------------------
// Random instances shared by the property suites and the tests.

inline Matrix random_gaussian(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

inline Matrix random_unit_rows(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  return project_rows_unit(random_gaussian(rows, cols, rng));
}

/// Random unit-row matrix with 2 <= K <= kmax and K <= D <= dmax.
inline Matrix random_config(std::mt19937_64& rng, int kmax = 6, int dmax = 10) {
  std::uniform_int_distribution<int> kd(2, kmax);
  const int k = kd(rng);
  std::uniform_int_distribution<int> dd(k, std::max(k, dmax));
  return random_unit_rows(k, dd(rng), rng);
}

/// Unit-row matrix whose Gram determinant lies in [lo, hi].
inline Matrix random_config_with_det(std::mt19937_64& rng, double lo, double hi, int kmax = 6, int dmax = 10) {
  for (;;) {
    Matrix a = random_config(rng, kmax, dmax);
    const double d = gram_det(a);
    if (d >= lo && d <= hi) return a;
  }
}

/// Central finite-difference gradient of f at x, entrywise.
template <typename F>
Matrix central_difference(F&& f, const Matrix& x, double h = 1e-6) {
  Matrix g(x.rows(), x.cols());
  Matrix xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = xp.data()[i];
    xp.data()[i] = orig + h;
    const double fp = f(xp);
    xp.data()[i] = orig - h;
    const double fm = f(xp);
    xp.data()[i] = orig;
    g.data()[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const Matrix& a, const Matrix& b) {
  const double denom = std::max(b.norm(), 1e-300);
  return (a - b).norm() / denom;
}

// ---------------------------------------------------------------------------
// Single-instance checks. Each returns a margin: >= 0 means pass.

/// Surrogate lower bound: omega - surrogate + 1e-9.
inline double check_lower_bound(const Matrix& a_unit, double gamma) {
  return mar_omega(a_unit, gamma) - surrogate(a_unit, gamma) + 1e-9;
}

/// Determinant expansion along every row:
/// 1e-8 - max_i |det(A) - det(A_-i) * l_i (e_i . a_i)|.
inline double check_det_expansion(const Matrix& a_unit) {
  const double det = gram_det(a_unit);
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a_unit.rows(); ++i) {
    const OrthDecomposition od = orth_decompose(a_unit, i);
    const double li = od.residual_norm * od.residual_dir.dot(a_unit.row(i).transpose());
    const double rest = a_unit.rows() > 1 ? gram_det(remove_row(a_unit, i)) : 1.0;
    worst = std::max(worst, std::abs(det - rest * li));
  }
  return 1e-8 - worst;
}

/// Gradient rows parallel to the residual directions with positive
/// coefficients: min_i cos(G_i, e_i) - (1 - 1e-8).
inline double check_gradient_direction(const Matrix& a_unit, const SurrogateConfig& cfg = {}) {
  const Matrix g = surrogate_gradient(a_unit, cfg);
  double worst = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < a_unit.rows(); ++i) {
    const OrthDecomposition od = orth_decompose(a_unit, i);
    const double c = g.row(i).dot(od.residual_dir.transpose()) / g.row(i).norm();
    worst = std::min(worst, c);
  }
  return worst - (1.0 - 1e-8);
}

struct AscentOutcome {
  bool passed = false;
  double eta = 0.0;  // largest passing step
  double d_omega = 0.0;
  double d_mean = 0.0;
  double d_var = 0.0;
};

inline const std::array<double, 6>& eta_grid() {
  static const std::array<double, 6> grid{1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7};
  return grid;
}

/// Searches the step grid for a projected surrogate step that does not
/// decrease omega or the mean angle and does not increase the variance.
inline AscentOutcome check_ascent(const Matrix& a_unit, double gamma = 1.0) {
  const SurrogateConfig cfg{gamma, 1e-6};
  const MarBreakdown before = mar_breakdown(a_unit, gamma);
  AscentOutcome out;
  for (double eta : eta_grid()) {
    const MarBreakdown after = mar_breakdown(ascent_step(a_unit, eta, cfg), gamma);
    const double dw = after.omega - before.omega;
    const double dm = after.mean_angle - before.mean_angle;
    const double dv = after.angle_variance - before.angle_variance;
    if (dw >= -1e-12 && dm >= -1e-12 && dv <= 1e-12) {
      out = {true, eta, dw, dm, dv};
      return out;
    }
  }
  return out;
}

/// 1e-5 - relative error of the analytic surrogate gradient against
/// central differences of g(det(A A^T)).
inline double check_surrogate_fd(const Matrix& a_unit, double gamma = 1.0) {
  const Matrix g = surrogate_gradient(a_unit, SurrogateConfig{gamma, 1e-6});
  const Matrix fd = central_difference([gamma](const Matrix& x) { return gram_surrogate(x, gamma); }, a_unit);
  return 1e-5 - relative_error(g, fd);
}

/// Angle triangle inequality for ordinary angles:
/// phi(u1,u2) + phi(u2,u3) + 1e-12 - phi(u1,u3).
inline double check_triangle(const Vector& u1, const Vector& u2, const Vector& u3) {
  return signed_angle(u1, u2) + signed_angle(u2, u3) + 1e-12 - signed_angle(u1, u3);
}

struct NetworkDraw {
  Matrix w;
  Vector alpha;
  Vector x;
  bounds::BoundInputs inputs;
};

/// Random one-hidden-layer regression network inside the norm constraints,
/// with theta set to the empirical minimum pairwise angle. Norms are pushed
/// to their caps and x is aligned with the hidden units half of the time.
inline NetworkDraw random_constrained_network(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> md(2, 6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  NetworkDraw nd;
  const int m = md(rng);
  std::uniform_int_distribution<int> dd(m, 8);
  const int d = dd(rng);
  bounds::BoundInputs& in = nd.inputs;
  in.m = m;
  in.L = 0.25;
  in.h0 = 0.5;
  in.C1 = 0.5 + 4.0 * u(rng);
  in.C3 = 0.5 + 4.0 * u(rng);
  in.C4 = 0.5 + 4.0 * u(rng);

  nd.w = random_unit_rows(m, d, rng);
  if (u(rng) < 0.5) {
    // clustered hidden units: small angles, large J
    const Matrix base = random_unit_rows(1, d, rng);
    for (Eigen::Index j = 0; j < nd.w.rows(); ++j) nd.w.row(j) = base.row(0) + 0.3 * u(rng) * nd.w.row(j);
    nd.w = project_rows_unit(nd.w);
  }
  for (Eigen::Index j = 0; j < nd.w.rows(); ++j) nd.w.row(j) *= in.C3 * (u(rng) < 0.5 ? 1.0 : u(rng));
  const std::vector<double> angles = pairwise_angles(nd.w);
  in.theta = *std::min_element(angles.begin(), angles.end());

  nd.alpha = random_gaussian(m, 1, rng).col(0);
  if (u(rng) < 0.5) nd.alpha = nd.alpha.cwiseAbs();
  nd.alpha *= in.C4 * (u(rng) < 0.5 ? 1.0 : u(rng)) / nd.alpha.norm();

  if (u(rng) < 0.5) {
    nd.x = nd.w.colwise().sum().transpose();
    if (u(rng) < 0.5) nd.x = -nd.x;
  } else {
    nd.x = random_gaussian(d, 1, rng).col(0);
  }
  nd.x *= in.C1 * (u(rng) < 0.5 ? 1.0 : u(rng)) / nd.x.norm();
  return nd;
}

/// sqrt(J) - |f(x)|.
inline double check_output_bound(const NetworkDraw& nd) {
  return std::sqrt(bounds::j_single(nd.inputs)) - std::abs(nn::regression_output(nd.w, nd.alpha, nd.x));
}

// ---------------------------------------------------------------------------
// Driver.

struct SuiteResult {
  std::string name;
  std::size_t trials = 0;
  std::size_t passed = 0;
  double worst_margin = std::numeric_limits<double>::infinity();
  bool ok() const { return passed == trials; }
};

struct VerifyReport {
  std::uint64_t seed = 0;
  std::size_t trials = 0;
  std::vector<SuiteResult> suites;

  bool all_passed() const {
    return std::all_of(suites.begin(), suites.end(), [](const SuiteResult& s) { return s.ok(); });
  }
};

namespace detail {

inline std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

template <typename Check>
SuiteResult run_suite(const std::string& name, std::size_t trials, std::mt19937_64& rng, Check&& check) {
  SuiteResult s;
  s.name = name;
  for (std::size_t t = 0; t < trials; ++t) {
    double margin = -std::numeric_limits<double>::infinity();
    try {
      margin = check(rng);
    } catch (const error&) {
      // an exception on a valid random instance counts as a failure
    }
    ++s.trials;
    if (margin >= 0.0) ++s.passed;
    s.worst_margin = std::min(s.worst_margin, margin);
  }
  return s;
}

}  // namespace detail

/// Runs every property suite `trials` times. trials = 0 gives an empty report.
inline VerifyReport run_verify(std::uint64_t seed, std::size_t trials) {
  VerifyReport rep;
  rep.seed = seed;
  rep.trials = trials;
  if (trials == 0) return rep;
  std::mt19937_64 rng(seed);

  rep.suites.push_back(detail::run_suite("angle_invariance", trials, rng, [](std::mt19937_64& r) {
    std::uniform_int_distribution<int> dd(1, 8);
    std::uniform_real_distribution<double> sc(0.1, 10.0);
    std::bernoulli_distribution flip(0.5);
    const int d = dd(r);
    const Matrix xy = random_gaussian(2, d, r);
    const double s = sc(r) * (flip(r) ? -1.0 : 1.0);
    const double t = sc(r) * (flip(r) ? -1.0 : 1.0);
    const Vector x = xy.row(0).transpose();
    const Vector y = xy.row(1).transpose();
    return 1e-12 - std::abs(non_obtuse_angle(s * x, t * y) - non_obtuse_angle(x, y));
  }));
  rep.suites.push_back(detail::run_suite("gram_det_range", trials, rng, [](std::mt19937_64& r) {
    std::uniform_int_distribution<int> kd(1, 8);
    const Matrix a = random_unit_rows(kd(r), kd(r), r);
    const double d = gram_det(a);
    return std::min(d, 1.0 + 1e-10 - d);
  }));
  rep.suites.push_back(detail::run_suite("det_expansion", trials, rng, [](std::mt19937_64& r) {
    return check_det_expansion(random_config(r, 8, 8));
  }));
  rep.suites.push_back(detail::run_suite("gradient_direction", trials, rng, [](std::mt19937_64& r) {
    return check_gradient_direction(random_config(r));
  }));
  rep.suites.push_back(detail::run_suite("triangle_inequality", trials, rng, [](std::mt19937_64& r) {
    std::uniform_int_distribution<int> dd(2, 8);
    const Matrix u = random_gaussian(3, dd(r), r);
    return check_triangle(u.row(0).transpose(), u.row(1).transpose(), u.row(2).transpose());
  }));
  for (double gamma : {0.5, 1.0, 2.0}) {
    rep.suites.push_back(detail::run_suite("lower_bound_gamma_" + detail::short_number(gamma), trials, rng,
                                           [gamma](std::mt19937_64& r) { return check_lower_bound(random_config(r), gamma); }));
  }
  rep.suites.push_back(detail::run_suite("ascent_mean_variance", trials, rng, [](std::mt19937_64& r) {
    const AscentOutcome o = check_ascent(random_config(r));
    return o.passed ? 0.0 : -1.0;
  }));
  rep.suites.push_back(detail::run_suite("surrogate_gradient_fd", trials, rng, [](std::mt19937_64& r) {
    return check_surrogate_fd(random_config_with_det(r, 0.05, 0.95));
  }));
  rep.suites.push_back(detail::run_suite("output_bound", trials, rng, [](std::mt19937_64& r) {
    return check_output_bound(random_constrained_network(r));
  }));
  return rep;
}

}  // namespace mar::verify

#endif  // MAR_VERIFY_HPP
