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

#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "qgroupoid/matrix_kernel.hpp"
#include "qgroupoid/report.hpp"

namespace qgroupoid {

/// Finite-dimensional C*-algebra: a direct sum of full matrix blocks.
/// The standard linear basis is the family of matrix units, ordered
/// block-major and row-major inside each block.
struct CStarAlgebra {
  std::vector<int> block_sizes;
  std::string label;

  CStarAlgebra() = default;
  CStarAlgebra(std::vector<int> sizes, std::string name = "")
      : block_sizes(std::move(sizes)), label(std::move(name)) {
    for (int n : block_sizes)
      if (n <= 0) throw Error(ErrorCode::BadParams, "block sizes must be positive");
    if (block_sizes.empty()) throw Error(ErrorCode::BadParams, "algebra needs at least one block");
  }

  int dim() const {
    int d = 0;
    for (int n : block_sizes) d += n * n;
    return d;
  }

  /// Size of the canonical faithful block-diagonal representation.
  int rep_dim() const { return std::accumulate(block_sizes.begin(), block_sizes.end(), 0); }

  bool commutative() const {
    for (int n : block_sizes)
      if (n != 1) return false;
    return true;
  }

  bool operator==(const CStarAlgebra& o) const { return block_sizes == o.block_sizes; }
  bool operator!=(const CStarAlgebra& o) const { return !(*this == o); }

  struct BasisUnit {
    int block;
    int row;
    int col;
  };

  BasisUnit basis_unit(int index) const {
    int off = 0;
    for (size_t b = 0; b < block_sizes.size(); ++b) {
      int n = block_sizes[b];
      if (index < off + n * n) {
        int local = index - off;
        return {static_cast<int>(b), local / n, local % n};
      }
      off += n * n;
    }
    throw Error(ErrorCode::BadParams, "basis index out of range");
  }

  int basis_index(int block, int row, int col) const {
    int off = 0;
    for (int b = 0; b < block; ++b) off += block_sizes[b] * block_sizes[b];
    return off + row * block_sizes[block] + col;
  }
};

inline CStarAlgebra scalar_algebra(const std::string& label = "C") {
  return CStarAlgebra({1}, label);
}

inline CStarAlgebra function_algebra(int points, const std::string& label) {
  return CStarAlgebra(std::vector<int>(points, 1), label);
}

struct AlgebraElement {
  CStarAlgebra parent;
  std::vector<CMatrix> blocks;

  AlgebraElement() = default;
  explicit AlgebraElement(CStarAlgebra alg) : parent(std::move(alg)) {
    blocks.reserve(parent.block_sizes.size());
    for (int n : parent.block_sizes) blocks.push_back(CMatrix::Zero(n, n));
  }

  static AlgebraElement zero(const CStarAlgebra& alg) { return AlgebraElement(alg); }

  static AlgebraElement unit(const CStarAlgebra& alg) {
    AlgebraElement a(alg);
    for (size_t b = 0; b < a.blocks.size(); ++b)
      a.blocks[b] = CMatrix::Identity(alg.block_sizes[b], alg.block_sizes[b]);
    return a;
  }

  static AlgebraElement basis_element(const CStarAlgebra& alg, int index) {
    AlgebraElement a(alg);
    auto u = alg.basis_unit(index);
    a.blocks[u.block](u.row, u.col) = 1.0;
    return a;
  }

  static AlgebraElement from_coeffs(const CStarAlgebra& alg, const CVector& c) {
    if (c.size() != alg.dim()) throw Error(ErrorCode::BadParams, "coefficient length mismatch");
    AlgebraElement a(alg);
    int idx = 0;
    for (size_t b = 0; b < a.blocks.size(); ++b) {
      int n = alg.block_sizes[b];
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) a.blocks[b](i, j) = c(idx++);
    }
    return a;
  }

  CVector coeffs() const {
    CVector c(parent.dim());
    int idx = 0;
    for (size_t b = 0; b < blocks.size(); ++b) {
      int n = parent.block_sizes[b];
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) c(idx++) = blocks[b](i, j);
    }
    return c;
  }

  AlgebraElement star() const {
    AlgebraElement a(parent);
    for (size_t b = 0; b < blocks.size(); ++b) a.blocks[b] = blocks[b].adjoint();
    return a;
  }

  /// Operator norm: the largest singular value across blocks.
  double norm() const {
    double n = 0.0;
    for (const auto& m : blocks) n = std::max(n, op_norm(m));
    return n;
  }

  double frob() const { return coeffs().norm(); }

  AlgebraElement& operator+=(const AlgebraElement& o) {
    require_same_parent(o);
    for (size_t b = 0; b < blocks.size(); ++b) blocks[b] += o.blocks[b];
    return *this;
  }
  AlgebraElement& operator-=(const AlgebraElement& o) {
    require_same_parent(o);
    for (size_t b = 0; b < blocks.size(); ++b) blocks[b] -= o.blocks[b];
    return *this;
  }
  AlgebraElement& operator*=(cd s) {
    for (auto& m : blocks) m *= s;
    return *this;
  }

  friend AlgebraElement operator+(AlgebraElement a, const AlgebraElement& b) { return a += b; }
  friend AlgebraElement operator-(AlgebraElement a, const AlgebraElement& b) { return a -= b; }
  friend AlgebraElement operator*(cd s, AlgebraElement a) { return a *= s; }

  void require_same_parent(const AlgebraElement& o) const {
    if (parent != o.parent) throw Error(ErrorCode::ParentMismatch, "elements from different algebras");
  }
};

inline AlgebraElement multiply(const AlgebraElement& a, const AlgebraElement& c) {
  a.require_same_parent(c);
  AlgebraElement r(a.parent);
  for (size_t b = 0; b < a.blocks.size(); ++b) r.blocks[b] = a.blocks[b] * c.blocks[b];
  return r;
}

inline AlgebraElement operator*(const AlgebraElement& a, const AlgebraElement& c) {
  return multiply(a, c);
}

/// Canonical faithful block-diagonal representation.
inline CMatrix faithful_rep(const AlgebraElement& a) {
  int n = a.parent.rep_dim();
  CMatrix m = CMatrix::Zero(n, n);
  int off = 0;
  for (size_t b = 0; b < a.blocks.size(); ++b) {
    int k = a.parent.block_sizes[b];
    m.block(off, off, k, k) = a.blocks[b];
    off += k;
  }
  return m;
}

inline cd rep_trace(const AlgebraElement& a) {
  cd t = 0.0;
  for (const auto& m : a.blocks) t += m.trace();
  return t;
}

/// Matrix of left multiplication a -> x a on basis coefficients.
inline CMatrix left_mult_matrix(const AlgebraElement& x) {
  int d = x.parent.dim();
  CMatrix m(d, d);
  for (int l = 0; l < d; ++l)
    m.col(l) = multiply(x, AlgebraElement::basis_element(x.parent, l)).coeffs();
  return m;
}

/// Matrix of right multiplication a -> a x on basis coefficients.
inline CMatrix right_mult_matrix(const AlgebraElement& x) {
  int d = x.parent.dim();
  CMatrix m(d, d);
  for (int l = 0; l < d; ++l)
    m.col(l) = multiply(AlgebraElement::basis_element(x.parent, l), x).coeffs();
  return m;
}

/// Trace pairing F(k,l) = tr(e_k e_l); nondegenerate, used to recover
/// algebra-valued inner products from scalar pairings.
inline CMatrix trace_form(const CStarAlgebra& alg) {
  int d = alg.dim();
  CMatrix f = CMatrix::Zero(d, d);
  for (int k = 0; k < d; ++k) {
    auto uk = alg.basis_unit(k);
    for (int l = 0; l < d; ++l) {
      auto ul = alg.basis_unit(l);
      if (uk.block == ul.block && uk.col == ul.row && ul.col == uk.row) f(k, l) = 1.0;
    }
  }
  return f;
}

inline CVector trace_vector(const CStarAlgebra& alg) {
  int d = alg.dim();
  CVector t = CVector::Zero(d);
  for (int l = 0; l < d; ++l) {
    auto u = alg.basis_unit(l);
    if (u.row == u.col) t(l) = 1.0;
  }
  return t;
}

enum class MapKind { plain, hom, antihom };

inline const char* map_kind_name(MapKind k) {
  switch (k) {
    case MapKind::plain: return "plain";
    case MapKind::hom: return "hom";
    case MapKind::antihom: return "antihom";
  }
  return "?";
}

/// Linear map between algebras, stored over the standard matrix-unit bases.
struct LinearMap {
  CStarAlgebra domain;
  CStarAlgebra codomain;
  CMatrix matrix;  // codomain.dim() x domain.dim()
  MapKind kind = MapKind::plain;

  LinearMap() = default;
  LinearMap(CStarAlgebra dom, CStarAlgebra cod, CMatrix m, MapKind k = MapKind::plain)
      : domain(std::move(dom)), codomain(std::move(cod)), matrix(std::move(m)), kind(k) {
    if (matrix.rows() != codomain.dim() || matrix.cols() != domain.dim())
      throw Error(ErrorCode::BadParams, "linear map shape mismatch");
  }

  static LinearMap identity(const CStarAlgebra& alg) {
    return LinearMap(alg, alg, CMatrix::Identity(alg.dim(), alg.dim()), MapKind::hom);
  }

  AlgebraElement apply(const AlgebraElement& a) const {
    if (a.parent != domain) throw Error(ErrorCode::ParentMismatch, "map applied outside its domain");
    return AlgebraElement::from_coeffs(codomain, matrix * a.coeffs());
  }

  LinearMap compose(const LinearMap& inner) const {
    if (inner.codomain != domain) throw Error(ErrorCode::ParentMismatch, "composition mismatch");
    MapKind k = MapKind::plain;
    if (kind == MapKind::hom && inner.kind == MapKind::hom) k = MapKind::hom;
    if (kind == MapKind::antihom && inner.kind == MapKind::antihom) k = MapKind::hom;
    if (kind == MapKind::hom && inner.kind == MapKind::antihom) k = MapKind::antihom;
    if (kind == MapKind::antihom && inner.kind == MapKind::hom) k = MapKind::antihom;
    return LinearMap(inner.domain, codomain, matrix * inner.matrix, k);
  }

  int rank(double tol = kDefaultTol) const {
    if (matrix.size() == 0) return 0;
    Eigen::JacobiSVD<CMatrix> svd(matrix);
    double cutoff = tol * std::max(1.0, svd.singularValues()(0));
    int r = 0;
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()(i) > cutoff) ++r;
    return r;
  }
};

/// Checks the declared multiplicative behaviour of a map on all basis pairs,
/// plus star preservation and unitality.
inline CheckResult verify_kind(const LinearMap& phi, double tol = kDefaultTol) {
  ResidualGauge gauge(std::string("kind.") + map_kind_name(phi.kind));
  const int d = phi.domain.dim();
  AlgebraElement one_img = phi.apply(AlgebraElement::unit(phi.domain));
  AlgebraElement one = AlgebraElement::unit(phi.codomain);
  gauge.observe((one_img - one).frob(), one.frob(), "unit");

  std::vector<AlgebraElement> img;
  img.reserve(d);
  for (int l = 0; l < d; ++l) img.push_back(phi.apply(AlgebraElement::basis_element(phi.domain, l)));

  for (int l = 0; l < d; ++l) {
    AlgebraElement lhs = phi.apply(AlgebraElement::basis_element(phi.domain, l).star());
    AlgebraElement rhs = img[l].star();
    gauge.observe((lhs - rhs).frob(), rhs.frob(), "star at basis " + std::to_string(l));
  }

  if (phi.kind != MapKind::plain) {
    for (int i = 0; i < d; ++i) {
      AlgebraElement ei = AlgebraElement::basis_element(phi.domain, i);
      for (int j = 0; j < d; ++j) {
        AlgebraElement ej = AlgebraElement::basis_element(phi.domain, j);
        AlgebraElement lhs = phi.apply(multiply(ei, ej));
        AlgebraElement rhs = phi.kind == MapKind::hom ? multiply(img[i], img[j])
                                                      : multiply(img[j], img[i]);
        gauge.observe((lhs - rhs).frob(), rhs.frob(),
                      "basis pair (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }
  return gauge.result(tol);
}

/// Characters of a commutative algebra: the coordinate evaluations.
inline std::vector<LinearMap> characters(const CStarAlgebra& alg) {
  if (!alg.commutative()) throw Error(ErrorCode::NotCommutative, "characters need a commutative algebra");
  int k = alg.dim();
  std::vector<LinearMap> chars;
  chars.reserve(k);
  for (int i = 0; i < k; ++i) {
    CMatrix row = CMatrix::Zero(1, k);
    row(0, i) = 1.0;
    chars.emplace_back(alg, scalar_algebra(), row, MapKind::hom);
  }
  return chars;
}

/// Complete positivity via the basis Gram/Choi block matrix
/// [rho_cod(P(e_i^* e_j))]_{ij}.
inline CheckResult is_completely_positive(const LinearMap& p, double tol = kDefaultTol) {
  const int d = p.domain.dim();
  const int n = p.codomain.rep_dim();
  CMatrix choi(d * n, d * n);
  for (int i = 0; i < d; ++i) {
    AlgebraElement ei = AlgebraElement::basis_element(p.domain, i).star();
    for (int j = 0; j < d; ++j) {
      AlgebraElement ej = AlgebraElement::basis_element(p.domain, j);
      choi.block(i * n, j * n, n, n) = faithful_rep(p.apply(multiply(ei, ej)));
    }
  }
  CheckResult r;
  r.name = "completely_positive";
  Eigensystem sys = hermitian_eigensystem(0.5 * (choi + choi.adjoint()), std::max(tol, 1e-12));
  double hermiticity = (choi - choi.adjoint()).norm();
  r.scale = hermitian_scale(sys);
  double min_eig = sys.eigenvalues.size() ? sys.eigenvalues(0) : 0.0;
  r.max_residual = std::max(std::max(0.0, -min_eig), hermiticity) / r.scale;
  r.pass = r.max_residual <= tol;
  if (!r.pass) r.witness = "Choi min eigenvalue " + std::to_string(min_eig);
  return r;
}

/// Faithfulness of a positive map: the scalar Gram tr(rho(P(e_i^* e_j)))
/// must be positive definite.
inline CheckResult is_faithful_positive(const LinearMap& p, double tol = kDefaultTol) {
  const int d = p.domain.dim();
  CMatrix gram(d, d);
  for (int i = 0; i < d; ++i) {
    AlgebraElement ei = AlgebraElement::basis_element(p.domain, i).star();
    for (int j = 0; j < d; ++j) {
      AlgebraElement ej = AlgebraElement::basis_element(p.domain, j);
      gram(i, j) = rep_trace(p.apply(multiply(ei, ej)));
    }
  }
  CheckResult r;
  r.name = "faithful";
  Eigensystem sys = hermitian_eigensystem(0.5 * (gram + gram.adjoint()), std::max(tol, 1e-12));
  r.scale = hermitian_scale(sys);
  double min_eig = sys.eigenvalues.size() ? sys.eigenvalues(0) : 0.0;
  r.max_residual = std::max(0.0, -min_eig) / r.scale;
  r.pass = min_eig > tol * r.scale;
  if (!r.pass) r.witness = "scalar Gram min eigenvalue " + std::to_string(min_eig);
  return r;
}

}  // namespace qgroupoid
