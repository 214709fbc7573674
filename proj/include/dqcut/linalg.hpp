#pragma once

// Dense symmetric eigenvalue helpers, nullspace bases and an explicitly
// maintained inverse with Sherman-Morrison rank-one updates.

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dqcut/errors.hpp"

namespace dqcut {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double max_abs(const MatrixXd& M) {
  return M.size() == 0 ? 0.0 : M.cwiseAbs().maxCoeff();
}

inline double max_abs(const VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

inline MatrixXd symmetric_part(const MatrixXd& M) {
  return 0.5 * (M + M.transpose());
}

inline void require_finite(const MatrixXd& M, const char* what) {
  if (!M.allFinite()) {
    throw NumericalError(std::string(what) + " has non-finite entries");
  }
}

/// Orthonormal basis Z of null(A); AZ = 0 and Z'Z = I.
struct NullspaceBasis {
  MatrixXd Z;

  [[nodiscard]] Eigen::Index dimension() const { return Z.cols(); }
};

/// Relative threshold used for numerical rank decisions on A.
inline constexpr double kRankTolerance = 1e-10;

/// Numerical rank of A via a column-pivoted QR of A'.
inline Eigen::Index numerical_rank(const MatrixXd& A) {
  if (A.rows() == 0 || A.cols() == 0) return 0;
  const MatrixXd At = A.transpose();
  Eigen::ColPivHouseholderQR<MatrixXd> qr(At);
  qr.setThreshold(kRankTolerance);
  return qr.rank();
}

inline NullspaceBasis nullspace_basis(const MatrixXd& A) {
  const Eigen::Index m = A.rows();
  const Eigen::Index n = A.cols();
  if (m == 0) return {MatrixXd::Identity(n, n)};
  require_finite(A, "A");
  if (m > n) {
    throw NumericalError("nullspace_basis: more rows than columns; prune dependent rows first");
  }
  const MatrixXd At = A.transpose();
  Eigen::ColPivHouseholderQR<MatrixXd> qr(At);
  qr.setThreshold(kRankTolerance);
  if (qr.rank() < m) {
    throw NumericalError("nullspace_basis: A is rank deficient (rank " +
                         std::to_string(qr.rank()) + " < " + std::to_string(m) +
                         "); prune dependent rows first");
  }
  const MatrixXd H = qr.householderQ();
  return {H.rightCols(n - m)};
}

/// Result of dropping linearly dependent rows of [A | b].
struct RowSelection {
  std::vector<Eigen::Index> kept;     // ascending original row indices
  std::vector<Eigen::Index> dropped;  // ascending original row indices
  bool consistent = true;             // dropped rows agree with kept ones
};

/// Least-norm solution of A x = b for full-row-rank A.
inline VectorXd least_norm_solution(const MatrixXd& A, const VectorXd& b) {
  if (A.rows() == 0) return VectorXd::Zero(A.cols());
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(A);
  cod.setThreshold(kRankTolerance);
  return cod.solve(b);
}

inline RowSelection select_independent_rows(const MatrixXd& A, const VectorXd& b) {
  RowSelection sel;
  const Eigen::Index m = A.rows();
  if (m == 0) return sel;
  if (A.cols() == 0) {
    for (Eigen::Index r = 0; r < m; ++r) sel.dropped.push_back(r);
    sel.consistent = max_abs(b) <= 1e-8;
    return sel;
  }
  const MatrixXd At = A.transpose();
  Eigen::ColPivHouseholderQR<MatrixXd> qr(At);
  qr.setThreshold(kRankTolerance);
  const Eigen::Index rank = qr.rank();
  const auto& perm = qr.colsPermutation().indices();
  std::vector<bool> keep(static_cast<std::size_t>(m), false);
  for (Eigen::Index k = 0; k < rank; ++k) keep[static_cast<std::size_t>(perm(k))] = true;
  for (Eigen::Index r = 0; r < m; ++r) {
    (keep[static_cast<std::size_t>(r)] ? sel.kept : sel.dropped).push_back(r);
  }
  if (!sel.dropped.empty()) {
    MatrixXd Ak(static_cast<Eigen::Index>(sel.kept.size()), A.cols());
    VectorXd bk(static_cast<Eigen::Index>(sel.kept.size()));
    for (std::size_t k = 0; k < sel.kept.size(); ++k) {
      Ak.row(static_cast<Eigen::Index>(k)) = A.row(sel.kept[k]);
      bk(static_cast<Eigen::Index>(k)) = b(sel.kept[k]);
    }
    const VectorXd x = least_norm_solution(Ak, bk);
    const double scale = std::max({1.0, max_abs(b), max_abs(A) * max_abs(x)});
    sel.consistent = max_abs(VectorXd(A * x - b)) <= 1e-8 * scale;
  }
  return sel;
}

/// Smallest eigenvalue of a symmetric matrix; +inf for an empty matrix.
inline double min_eigenvalue(const MatrixXd& M) {
  if (M.rows() == 0) return std::numeric_limits<double>::infinity();
  require_finite(M, "min_eigenvalue: matrix");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetric_part(M), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericalError("min_eigenvalue: eigensolver failed");
  return es.eigenvalues()(0);
}

/// Smallest lambda with M v = lambda N v, N positive definite.
/// Reduced to a standard problem through N = L L'.
inline double min_generalized_eigenvalue(const MatrixXd& M, const MatrixXd& N) {
  if (M.rows() == 0) return std::numeric_limits<double>::infinity();
  require_finite(M, "min_generalized_eigenvalue: M");
  require_finite(N, "min_generalized_eigenvalue: N");
  Eigen::LLT<MatrixXd> llt(symmetric_part(N));
  if (llt.info() != Eigen::Success) {
    throw NumericalError("min_generalized_eigenvalue: N is not positive definite");
  }
  MatrixXd C = llt.matrixL().solve(symmetric_part(M));
  C = llt.matrixL().solve(MatrixXd(C.transpose()));
  return min_eigenvalue(symmetric_part(C));
}

/// lambda_min(Z' Q Z).
inline double projected_min_eigenvalue(const MatrixXd& Q, const MatrixXd& Z) {
  return min_eigenvalue(symmetric_part(Z.transpose() * Q * Z));
}

/// True iff lambda_min(M) >= -tol * max(1, |M|_max).
inline bool psd_certificate(const MatrixXd& M, double tol) {
  if (M.rows() == 0) return true;
  return min_eigenvalue(M) >= -tol * std::max(1.0, max_abs(M));
}

/// Explicit inverse V of a positive definite M, kept in sync under
/// diagonal rank-one updates M += delta * e_i e_i'.
struct InverseState {
  MatrixXd M;
  MatrixXd V;
  int update_count = 0;      // rank-one updates since the last factorization
  int refactorizations = 0;  // drift-triggered refactorizations
};

inline MatrixXd inverse_of_pd(const MatrixXd& M) {
  Eigen::LLT<MatrixXd> llt(symmetric_part(M));
  if (llt.info() != Eigen::Success) {
    throw NumericalError("factor_inverse: matrix is not positive definite");
  }
  MatrixXd V = llt.solve(MatrixXd::Identity(M.rows(), M.cols()));
  if (!V.allFinite() || (V.diagonal().array() <= 0.0).any()) {
    throw NumericalError("factor_inverse: matrix is numerically singular");
  }
  return symmetric_part(V);
}

inline InverseState factor_inverse(const MatrixXd& M) {
  require_finite(M, "factor_inverse: matrix");
  InverseState st;
  st.M = symmetric_part(M);
  st.V = inverse_of_pd(st.M);
  return st;
}

/// |M V - I|_max.
inline double inverse_drift(const InverseState& st) {
  const Eigen::Index n = st.M.rows();
  return max_abs(MatrixXd(st.M * st.V - MatrixXd::Identity(n, n)));
}

/// Drift tolerance scaled by a cheap condition estimate.
inline double inverse_drift_tolerance(const InverseState& st) {
  const double cond = std::max(1.0, max_abs(st.M) * max_abs(st.V));
  return 1e-10 * static_cast<double>(std::max<Eigen::Index>(1, st.M.rows())) * cond;
}

/// V <- V - delta V_i V_i' / (1 + delta V_ii). Requires 1 + delta V_ii > 0.
/// Every n updates the product M V is compared against I and V is
/// refactorized when the drift exceeds tolerance.
inline void sherman_morrison_update(InverseState& st, Eigen::Index i, double delta) {
  const Eigen::Index n = st.V.rows();
  if (i < 0 || i >= n) throw DomainError("sherman_morrison_update: index out of range");
  const double denom = 1.0 + delta * st.V(i, i);
  if (!(denom > 0.0)) {
    throw NumericalError("sherman_morrison_update: 1 + delta*V_ii <= 0 leaves the PD cone");
  }
  st.M(i, i) += delta;
  if (delta != 0.0) {
    const VectorXd col = st.V.col(i);
    st.V.noalias() -= (delta / denom) * (col * col.transpose());
  }
  ++st.update_count;
  if (st.update_count >= n) {
    if (inverse_drift(st) > inverse_drift_tolerance(st)) {
      st.V = inverse_of_pd(st.M);
      ++st.refactorizations;
    }
    st.update_count = 0;
  }
}

}  // namespace dqcut
