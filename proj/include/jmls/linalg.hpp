#pragma once

// Shared numeric helpers: Eigen aliases, error types, log-domain arithmetic
// and the handful of factorizations every module leans on.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/LU>

namespace jmls {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Raised when a computation breaks down numerically (loss of definiteness,
/// singular factor, total weight underflow).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for malformed inputs: dimension mismatches, invalid probabilities.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // ln(2π)
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

// log Σ exp(v_i); -inf for an empty range or all -inf entries.
inline double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return kNegInf;
  const double hi = *std::max_element(values.begin(), values.end());
  if (hi == kNegInf) return kNegInf;
  if (std::isinf(hi)) return hi;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - hi);
  return hi + std::log(sum);
}

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

inline double asymmetry(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

/// Positive-definiteness test via LDLᵀ pivots. A pivot passes when it is
/// positive and at least `rel_tol` times the largest diagonal magnitude.
inline bool is_positive_definite(const Matrix& m, double rel_tol = 1e-12) {
  if (m.rows() != m.cols() || m.rows() == 0) return false;
  const double scale = m.diagonal().cwiseAbs().maxCoeff();
  if (!(scale > 0.0)) return false;
  Eigen::LDLT<Matrix> ldlt(symmetrize(m));
  if (ldlt.info() != Eigen::Success) return false;
  const Vector d = ldlt.vectorD();
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (!(d(i) > 0.0) || d(i) < rel_tol * scale) return false;
  }
  return true;
}

inline double min_eigenvalue(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline bool is_psd(const Matrix& m, double tol = 1e-10) {
  const double scale = std::max(1.0, m.size() ? m.cwiseAbs().maxCoeff() : 0.0);
  return asymmetry(m) <= tol * scale && min_eigenvalue(m) >= -tol * scale;
}

/// Cholesky factor of a symmetric positive-definite matrix; throws with
/// `what` in the message when the factorization fails.
inline Eigen::LLT<Matrix> cholesky(const Matrix& m, const char* what) {
  Eigen::LLT<Matrix> llt(symmetrize(m));
  if (llt.info() != Eigen::Success) {
    throw NumericalError(std::string("Cholesky factorization failed for ") + what);
  }
  const auto diag = llt.matrixLLT().diagonal();
  for (Eigen::Index i = 0; i < diag.size(); ++i) {
    if (!(diag(i) > 0.0) || !std::isfinite(diag(i))) {
      throw NumericalError(std::string("matrix is not positive definite: ") + what);
    }
  }
  return llt;
}

inline double log_det(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

inline double log_det_spd(const Matrix& m, const char* what) {
  if (m.size() == 0) return 0.0;
  return log_det(cholesky(m, what));
}

struct SignedLogDet {
  double log_abs = 0.0;
  int sign = 1;
};

// ln|det M| with sign tracking through partial-pivot LU.
inline SignedLogDet signed_log_det(const Matrix& m) {
  SignedLogDet out;
  if (m.size() == 0) return out;
  Eigen::PartialPivLU<Matrix> lu(m);
  const Matrix& lu_m = lu.matrixLU();
  int sign = lu.permutationP().determinant() > 0 ? 1 : -1;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < lu_m.rows(); ++i) {
    const double d = lu_m(i, i);
    if (d == 0.0) return {kNegInf, 0};
    if (d < 0.0) sign = -sign;
    acc += std::log(std::abs(d));
  }
  out.log_abs = acc;
  out.sign = sign;
  return out;
}

/// ln N(x | mean, cov) for a covariance already factorized.
inline double log_normal_pdf(const Vector& x, const Vector& mean, const Eigen::LLT<Matrix>& cov_llt) {
  const Vector diff = x - mean;
  const Vector z = cov_llt.matrixL().solve(diff);
  return -0.5 * (z.squaredNorm() + log_det(cov_llt) + static_cast<double>(x.size()) * kLog2Pi);
}

inline double log_normal_pdf(const Vector& x, const Vector& mean, const Matrix& cov) {
  return log_normal_pdf(x, mean, cholesky(cov, "normal covariance"));
}

inline double normal_pdf_scalar(double x, double mean, double var) {
  const double d = x - mean;
  return std::exp(-0.5 * (d * d / var + std::log(var) + kLog2Pi));
}

}  // namespace jmls
