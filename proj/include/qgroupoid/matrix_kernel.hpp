// Copyright 2026 The qgroupoid developers
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace qgroupoid {

using cd = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<cd>;

enum class ErrorCode {
  NotHermitian,
  NotPSD,
  NotPosDef,
  NotCommutative,
  ParentMismatch,
  BadGroupTable,
  NotAnAction,
  WeightNotOrbitConstant,
  AlgebraMismatch,
  FormNotPSD,
  NotAdjointable,
  NotFaithful,
  LeftActionNotAdjointable,
  InvalidBimodule,
  GroupoidMismatch,
  BaseMismatch,
  NotGroupMode,
  CodomainFormNotPSD,
  BadParams,
  ParseError,
  IoError,
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::NotHermitian: return "NotHermitian";
    case ErrorCode::NotPSD: return "NotPSD";
    case ErrorCode::NotPosDef: return "NotPosDef";
    case ErrorCode::NotCommutative: return "NotCommutative";
    case ErrorCode::ParentMismatch: return "ParentMismatch";
    case ErrorCode::BadGroupTable: return "BadGroupTable";
    case ErrorCode::NotAnAction: return "NotAnAction";
    case ErrorCode::WeightNotOrbitConstant: return "WeightNotOrbitConstant";
    case ErrorCode::AlgebraMismatch: return "AlgebraMismatch";
    case ErrorCode::FormNotPSD: return "FormNotPSD";
    case ErrorCode::NotAdjointable: return "NotAdjointable";
    case ErrorCode::NotFaithful: return "NotFaithful";
    case ErrorCode::LeftActionNotAdjointable: return "LeftActionNotAdjointable";
    case ErrorCode::InvalidBimodule: return "InvalidBimodule";
    case ErrorCode::GroupoidMismatch: return "GroupoidMismatch";
    case ErrorCode::BaseMismatch: return "BaseMismatch";
    case ErrorCode::NotGroupMode: return "NotGroupMode";
    case ErrorCode::CodomainFormNotPSD: return "CodomainFormNotPSD";
    case ErrorCode::BadParams: return "BadParams";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

constexpr double kDefaultTol = 1e-9;

inline CMatrix adjoint(const CMatrix& m) { return m.adjoint(); }

inline double frobenius(const CMatrix& m) { return m.norm(); }

inline double matrix_scale(const CMatrix& m) { return std::max(1.0, m.norm()); }

inline bool is_hermitian(const CMatrix& m, double tol) {
  if (m.rows() != m.cols()) return false;
  return (m - m.adjoint()).norm() <= tol * matrix_scale(m);
}

inline bool is_exactly_diagonal(const CMatrix& m) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (i != j && m(i, j) != cd(0.0, 0.0)) return false;
  return true;
}

struct Eigensystem {
  RVector eigenvalues;   // ascending
  CMatrix eigenvectors;  // unitary, columns matched to eigenvalues
};

namespace detail {

// Make the first entry of magnitude above a relative cutoff real positive.
inline void canonicalize_phase(Eigen::Ref<CVector> v) {
  double vmax = v.cwiseAbs().maxCoeff();
  if (vmax == 0.0) return;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    double a = std::abs(v(i));
    if (a > 1e-12 * vmax) {
      v *= std::conj(v(i)) / a;
      return;
    }
  }
}

inline bool lex_less(const CVector& a, const CVector& b) {
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i).real() != b(i).real()) return a(i).real() < b(i).real();
    if (a(i).imag() != b(i).imag()) return a(i).imag() < b(i).imag();
  }
  return false;
}

}  // namespace detail

// Hermitian eigendecomposition with deterministic output: eigenvalues
// ascending, eigenvector phases canonicalized, near-degenerate runs ordered
// lexicographically.
inline Eigensystem hermitian_eigensystem(const CMatrix& m, double tol = kDefaultTol) {
  if (m.rows() != m.cols()) throw Error(ErrorCode::NotHermitian, "matrix is not square");
  if (!is_hermitian(m, tol))
    throw Error(ErrorCode::NotHermitian,
                "asymmetry " + std::to_string((m - m.adjoint()).norm()) + " exceeds tolerance");

  Eigensystem sys;
  const Eigen::Index n = m.rows();
  if (is_exactly_diagonal(m)) {
    std::vector<Eigen::Index> order(n);
    for (Eigen::Index i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return m(a, a).real() < m(b, b).real(); });
    sys.eigenvalues.resize(n);
    sys.eigenvectors = CMatrix::Zero(n, n);
    for (Eigen::Index k = 0; k < n; ++k) {
      sys.eigenvalues(k) = m(order[k], order[k]).real();
      sys.eigenvectors(order[k], k) = 1.0;
    }
    return sys;
  }

  Eigen::SelfAdjointEigenSolver<CMatrix> solver(0.5 * (m + m.adjoint()));
  if (solver.info() != Eigen::Success)
    throw Error(ErrorCode::NotHermitian, "eigensolver failed to converge");
  sys.eigenvalues = solver.eigenvalues();
  sys.eigenvectors = solver.eigenvectors();
  for (Eigen::Index j = 0; j < n; ++j) detail::canonicalize_phase(sys.eigenvectors.col(j));

  // Order near-degenerate eigenvalue runs by lexicographic vector comparison.
  double scale = std::max(1.0, std::max(std::abs(sys.eigenvalues(0)), std::abs(sys.eigenvalues(n - 1))));
  double tie = tol * scale;
  Eigen::Index start = 0;
  while (start < n) {
    Eigen::Index end = start + 1;
    while (end < n && sys.eigenvalues(end) - sys.eigenvalues(end - 1) <= tie) ++end;
    if (end - start > 1) {
      std::vector<Eigen::Index> idx(end - start);
      for (Eigen::Index k = 0; k < end - start; ++k) idx[k] = start + k;
      std::vector<CVector> cols(end - start);
      std::vector<double> vals(end - start);
      for (Eigen::Index k = 0; k < end - start; ++k) {
        cols[k] = sys.eigenvectors.col(start + k);
        vals[k] = sys.eigenvalues(start + k);
      }
      std::vector<Eigen::Index> perm(end - start);
      for (Eigen::Index k = 0; k < end - start; ++k) perm[k] = k;
      std::stable_sort(perm.begin(), perm.end(), [&](Eigen::Index a, Eigen::Index b) {
        return detail::lex_less(cols[a], cols[b]);
      });
      for (Eigen::Index k = 0; k < end - start; ++k) {
        sys.eigenvectors.col(start + k) = cols[perm[k]];
        sys.eigenvalues(start + k) = vals[perm[k]];
      }
    }
    start = end;
  }
  return sys;
}

// Spectral radius of a hermitian matrix; Frobenius norm otherwise.
inline double hermitian_scale(const Eigensystem& sys) {
  if (sys.eigenvalues.size() == 0) return 1.0;
  double lo = std::abs(sys.eigenvalues(0));
  double hi = std::abs(sys.eigenvalues(sys.eigenvalues.size() - 1));
  return std::max(1.0, std::max(lo, hi));
}

inline bool is_psd(const CMatrix& m, double tol = kDefaultTol) {
  Eigensystem sys = hermitian_eigensystem(m, tol);
  if (sys.eigenvalues.size() == 0) return true;
  return sys.eigenvalues(0) >= -tol * hermitian_scale(sys);
}

struct NullSplit {
  CMatrix null_basis;   // orthonormal columns spanning the numerical kernel
  CMatrix range_basis;  // the remaining eigenvectors
  RVector eigenvalues;  // full ascending spectrum
};

inline NullSplit null_space(const CMatrix& g, double tol = kDefaultTol) {
  Eigensystem sys = hermitian_eigensystem(g, tol);
  const Eigen::Index n = g.rows();
  double scale = hermitian_scale(sys);
  if (n > 0 && sys.eigenvalues(0) < -tol * scale)
    throw Error(ErrorCode::NotPSD, "min eigenvalue " + std::to_string(sys.eigenvalues(0)));
  Eigen::Index k = 0;
  while (k < n && sys.eigenvalues(k) <= tol * scale) ++k;
  NullSplit split;
  split.null_basis = sys.eigenvectors.leftCols(k);
  split.range_basis = sys.eigenvectors.rightCols(n - k);
  split.eigenvalues = sys.eigenvalues;
  return split;
}

// Largest singular value.
inline double op_norm(const CMatrix& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues()(0);
}

// Deterministic power-iteration estimate of the largest singular value of a
// sparse operator. Fixed start vector, fixed iteration budget.
inline double op_norm_estimate(const SpMat& m, int iters = 60) {
  if (m.rows() == 0 || m.cols() == 0 || m.nonZeros() == 0) return 0.0;
  CVector v(m.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = cd(1.0 + 1e-3 * static_cast<double>(i % 97), 0.0);
  v.normalize();
  double prev = 0.0;
  double sigma2 = 0.0;
  for (int it = 0; it < iters; ++it) {
    CVector w = m * v;
    v = m.adjoint() * w;
    sigma2 = v.norm();
    if (sigma2 == 0.0) return 0.0;
    v /= sigma2;
    if (it > 4 && std::abs(sigma2 - prev) <= 1e-13 * std::max(1.0, sigma2)) break;
    prev = sigma2;
  }
  return std::sqrt(sigma2);
}

inline double frobenius(const SpMat& m) { return m.norm(); }

// Upper-triangular factor D with D^* D = H for positive definite H.
inline CMatrix posdef_factor(const CMatrix& h, double tol = kDefaultTol) {
  if (!is_hermitian(h, tol)) throw Error(ErrorCode::NotHermitian, "form is not hermitian");
  if (is_exactly_diagonal(h)) {
    CMatrix d = CMatrix::Zero(h.rows(), h.cols());
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
      double x = h(i, i).real();
      if (x <= 0.0) throw Error(ErrorCode::NotPosDef, "diagonal entry " + std::to_string(x));
      d(i, i) = std::sqrt(x);
    }
    return d;
  }
  Eigen::LLT<CMatrix> llt(0.5 * (h + h.adjoint()));
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::NotPosDef, "Cholesky factorization failed");
  return CMatrix(llt.matrixL()).adjoint();
}

inline SpMat to_sparse(const CMatrix& m) {
  SpMat s(m.rows(), m.cols());
  std::vector<Eigen::Triplet<cd>> trips;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      if (m(i, j) != cd(0.0, 0.0)) trips.emplace_back(i, j, m(i, j));
  s.setFromTriplets(trips.begin(), trips.end());
  return s;
}

inline CMatrix to_dense(const SpMat& m) { return CMatrix(m); }

}  // namespace qgroupoid
