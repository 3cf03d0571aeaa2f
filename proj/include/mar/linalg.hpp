#ifndef MAR_LINALG_HPP
#define MAR_LINALG_HPP

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/LU>
#include <Eigen/QR>

#include "mar/error.hpp"

namespace mar {

// Rows are components: a K x D matrix holds K component vectors of length D.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using ComponentMatrix = Matrix;

namespace tol {
inline constexpr double unit_norm = 1e-12;
inline constexpr double dependence = 1e-10;
inline constexpr double degenerate_norm = 1e-12;
}  // namespace tol

inline constexpr double half_pi = 1.57079632679489661923;

inline bool all_finite(const Eigen::Ref<const Matrix>& a) { return a.allFinite(); }

inline bool has_unit_rows(const Eigen::Ref<const Matrix>& a, double tolerance = tol::unit_norm) {
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    if (std::abs(a.row(i).norm() - 1.0) > tolerance) return false;
  }
  return true;
}

inline void require_unit_rows(const Eigen::Ref<const Matrix>& a, const char* who) {
  if (!has_unit_rows(a)) {
    throw invalid_argument(std::string(who) + ": rows must have unit norm");
  }
}

/// Non-obtuse angle arccos(|x.y| / (|x||y|)) in [0, pi/2]. Orientation and
/// scale of either argument do not matter.
inline double non_obtuse_angle(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  if (x.size() != y.size()) throw invalid_argument("non_obtuse_angle: dimension mismatch");
  const double nx = x.norm();
  const double ny = y.norm();
  if (!(nx > 0.0) || !(ny > 0.0) || !std::isfinite(nx) || !std::isfinite(ny)) {
    throw invalid_argument("non_obtuse_angle: zero-norm or non-finite input");
  }
  const double c = std::clamp(std::abs(x.dot(y)) / (nx * ny), 0.0, 1.0);
  return std::acos(c);
}

/// Ordinary angle arccos(x.y / (|x||y|)) in [0, pi].
inline double signed_angle(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  if (x.size() != y.size()) throw invalid_argument("signed_angle: dimension mismatch");
  const double nx = x.norm();
  const double ny = y.norm();
  if (!(nx > 0.0) || !(ny > 0.0)) throw invalid_argument("signed_angle: zero-norm input");
  return std::acos(std::clamp(x.dot(y) / (nx * ny), -1.0, 1.0));
}

inline Matrix row_gram(const Eigen::Ref<const Matrix>& a) {
  Matrix m = a * a.transpose();
  // Force exact symmetry; the product is symmetric only up to rounding.
  return 0.5 * (m + m.transpose());
}

/// Determinant of the row Gram matrix. Returns 0 when the rows are dependent,
/// including the K > D case where independence is impossible.
inline double gram_det(const Eigen::Ref<const Matrix>& a) {
  if (a.rows() > a.cols()) return 0.0;
  const Matrix m = row_gram(a);
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() == Eigen::Success) {
    const auto diag = llt.matrixLLT().diagonal();
    double d = 1.0;
    for (Eigen::Index i = 0; i < diag.size(); ++i) d *= diag(i);
    return d * d;
  }
  return std::max(0.0, Eigen::FullPivLU<Matrix>(m).determinant());
}

inline Matrix project_rows_unit(const Eigen::Ref<const Matrix>& a) {
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const double n = a.row(i).norm();
    if (!(n > tol::degenerate_norm) || !std::isfinite(n)) {
      throw degenerate_row("project_rows_unit: row " + std::to_string(i) + " has near-zero norm");
    }
    out.row(i) = a.row(i) / n;
  }
  return out;
}

inline Matrix remove_row(const Eigen::Ref<const Matrix>& a, Eigen::Index i) {
  Matrix out(a.rows() - 1, a.cols());
  for (Eigen::Index r = 0, k = 0; r < a.rows(); ++r) {
    if (r != i) out.row(k++) = a.row(r);
  }
  return out;
}

/// Row i split into its projection onto the span of the other rows plus a
/// residual: a_i = parallel_part + residual_norm * residual_dir.
struct OrthDecomposition {
  Vector parallel_part;
  double residual_norm = 0.0;
  Vector residual_dir;
  Vector coefficients;  // parallel_part = sum_j coefficients(j) * other_row(j)
};

inline OrthDecomposition orth_decompose(const Eigen::Ref<const Matrix>& a, Eigen::Index i) {
  if (i < 0 || i >= a.rows()) throw invalid_argument("orth_decompose: row index out of range");
  OrthDecomposition out;
  const Vector ai = a.row(i).transpose();
  if (a.rows() == 1) {
    out.parallel_part = Vector::Zero(a.cols());
    out.coefficients = Vector(0);
  } else {
    const Matrix others_t = remove_row(a, i).transpose();  // D x (K-1)
    Eigen::ColPivHouseholderQR<Matrix> qr(others_t);
    qr.setThreshold(tol::dependence);
    if (qr.rank() < others_t.cols()) {
      throw dependent_rows("orth_decompose: remaining rows are linearly dependent");
    }
    out.coefficients = qr.solve(ai);
    out.parallel_part = others_t * out.coefficients;
  }
  const Vector residual = ai - out.parallel_part;
  out.residual_norm = residual.norm();
  if (out.residual_norm < tol::dependence) {
    throw dependent_rows("orth_decompose: row " + std::to_string(i) + " lies in the span of the others");
  }
  out.residual_dir = residual / out.residual_norm;
  return out;
}

}  // namespace mar

#endif  // MAR_LINALG_HPP
