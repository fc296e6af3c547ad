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

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qgroupoid/cstar_algebra.hpp"
#include "qgroupoid/matrix_kernel.hpp"
#include "qgroupoid/report.hpp"

namespace qgroupoid {

/// Finite-dimensional Hilbert bimodule. The right-algebra-valued inner
/// product is stored as a coefficient stack: <v_i, v_j>_R = sum_k G_k(i,j) e_k
/// with G_k sparse. The scalar form tr rho_R <.,.> must be positive definite
/// (modules are kept in quotiented form).
struct HilbertBimodule {
  CStarAlgebra left_algebra;
  CStarAlgebra right_algebra;
  int dim = 0;
  std::vector<SpMat> left_action;   // one m x m matrix per basis element of L
  std::vector<SpMat> right_action;  // one m x m matrix per basis element of R
  std::vector<SpMat> gram;          // one m x m coefficient matrix per basis element of R

  CMatrix flat_gram() const {
    CVector tr = trace_vector(right_algebra);
    CMatrix h = CMatrix::Zero(dim, dim);
    for (size_t k = 0; k < gram.size(); ++k)
      if (tr(k) != cd(0.0)) h += tr(k) * CMatrix(gram[k]);
    return h;
  }

  CVector gram_coeffs(const CVector& u, const CVector& v) const {
    CVector c(right_algebra.dim());
    for (int k = 0; k < right_algebra.dim(); ++k) c(k) = u.dot(gram[k] * v);
    return c;
  }

  AlgebraElement gram_value(const CVector& u, const CVector& v) const {
    return AlgebraElement::from_coeffs(right_algebra, gram_coeffs(u, v));
  }

  AlgebraElement gram_at(int i, int j) const {
    CVector ei = CVector::Zero(dim), ej = CVector::Zero(dim);
    ei(i) = 1.0;
    ej(j) = 1.0;
    return gram_value(ei, ej);
  }

  SpMat left_of(const AlgebraElement& b) const {
    if (b.parent != left_algebra) throw Error(ErrorCode::ParentMismatch, "left action element");
    return combine(left_action, b.coeffs());
  }
  SpMat right_of(const AlgebraElement& b) const {
    if (b.parent != right_algebra) throw Error(ErrorCode::ParentMismatch, "right action element");
    return combine(right_action, b.coeffs());
  }

  static SpMat combine(const std::vector<SpMat>& mats, const CVector& coeffs) {
    SpMat out(mats.empty() ? 0 : mats[0].rows(), mats.empty() ? 0 : mats[0].cols());
    for (size_t l = 0; l < mats.size(); ++l)
      if (coeffs(l) != cd(0.0)) out = out + SpMat(coeffs(static_cast<int>(l)) * mats[l]);
    return out;
  }
};

namespace detail {

inline int star_index(const CStarAlgebra& alg, int k) {
  auto u = alg.basis_unit(k);
  return alg.basis_index(u.block, u.col, u.row);
}

// e_n e_k = sum_l c(n,k,l) e_l; for matrix units the product is another unit
// or zero, so return the single target index (or -1).
inline int unit_product_index(const CStarAlgebra& alg, int n, int k) {
  auto a = alg.basis_unit(n);
  auto b = alg.basis_unit(k);
  if (a.block != b.block || a.col != b.row) return -1;
  return alg.basis_index(a.block, a.row, b.col);
}

}  // namespace detail

/// Structural validation of a bimodule: hermitian form, positive definite
/// flattened form, right compatibility, left *-homomorphism with adjointable
/// action, commuting actions. All but the definiteness test are sparse
/// matrix identities, so this stays cheap on large tensor modules.
inline Report validate_bimodule(const HilbertBimodule& e, double tol = kDefaultTol,
                                bool check_posdef = true) {
  Report report;
  const CStarAlgebra& R = e.right_algebra;
  const CStarAlgebra& L = e.left_algebra;

  {
    ResidualGauge gauge("bimodule.gram_hermitian");
    for (int k = 0; k < R.dim(); ++k) {
      SpMat lhs = e.gram[detail::star_index(R, k)];
      SpMat rhs = e.gram[k].adjoint();
      gauge.observe(frobenius(SpMat(lhs - rhs)), frobenius(rhs), "coefficient " + std::to_string(k));
    }
    report.checks.push_back(gauge.result(tol));
  }

  if (check_posdef) {
    CheckResult c;
    c.name = "bimodule.flat_posdef";
    if (e.dim > 0) {
      Eigensystem sys = hermitian_eigensystem(e.flat_gram(), std::max(tol, 1e-12));
      c.scale = hermitian_scale(sys);
      double min_eig = sys.eigenvalues(0);
      c.max_residual = std::max(0.0, -min_eig) / c.scale;
      c.pass = min_eig > tol * c.scale;
      if (!c.pass) c.witness = "flattened Gram min eigenvalue " + std::to_string(min_eig);
    }
    report.checks.push_back(c);
  }

  {
    // <u, v.e_k>_l = sum_n G_n(u,v) c(n,k,l)  <=>  G_l R_k = sum_n c(n,k,l) G_n
    ResidualGauge gauge("bimodule.right_compatibility");
    for (int k = 0; k < R.dim(); ++k) {
      for (int l = 0; l < R.dim(); ++l) {
        SpMat lhs = SpMat(e.gram[l] * e.right_action[k]);
        SpMat rhs(e.dim, e.dim);
        for (int n = 0; n < R.dim(); ++n)
          if (detail::unit_product_index(R, n, k) == l) rhs = rhs + e.gram[n];
        gauge.observe(frobenius(SpMat(lhs - rhs)), frobenius(rhs),
                      "right basis " + std::to_string(k) + ", coefficient " + std::to_string(l));
      }
    }
    report.checks.push_back(gauge.result(tol));
  }

  {
    ResidualGauge gauge("bimodule.left_action_hom");
    SpMat ident(e.dim, e.dim);
    ident.setIdentity();
    SpMat one = e.left_of(AlgebraElement::unit(L));
    gauge.observe(frobenius(SpMat(one - ident)), frobenius(ident), "unit");
    for (int i = 0; i < L.dim(); ++i)
      for (int j = 0; j < L.dim(); ++j) {
        int p = detail::unit_product_index(L, i, j);
        SpMat lhs = SpMat(e.left_action[i] * e.left_action[j]);
        SpMat rhs = p >= 0 ? e.left_action[p] : SpMat(e.dim, e.dim);
        gauge.observe(frobenius(SpMat(lhs - rhs)), frobenius(rhs),
                      "basis pair (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
    report.checks.push_back(gauge.result(tol));
  }

  {
    // adjointability with lambda(b)^* = lambda(b^*):
    // lambda(b^*)^dagger G_k = G_k lambda(b)
    ResidualGauge gauge("bimodule.left_action_adjointable");
    for (int i = 0; i < L.dim(); ++i) {
      SpMat star_mat = e.left_action[detail::star_index(L, i)];
      for (int k = 0; k < R.dim(); ++k) {
        SpMat lhs = SpMat(SpMat(star_mat.adjoint()) * e.gram[k]);
        SpMat rhs = SpMat(e.gram[k] * e.left_action[i]);
        gauge.observe(frobenius(SpMat(lhs - rhs)), frobenius(rhs),
                      "left basis " + std::to_string(i) + ", coefficient " + std::to_string(k));
      }
    }
    report.checks.push_back(gauge.result(tol));
  }

  {
    ResidualGauge gauge("bimodule.actions_commute");
    for (int i = 0; i < L.dim(); ++i)
      for (int k = 0; k < R.dim(); ++k) {
        SpMat lhs = SpMat(e.left_action[i] * e.right_action[k]);
        SpMat rhs = SpMat(e.right_action[k] * e.left_action[i]);
        gauge.observe(frobenius(SpMat(lhs - rhs)), frobenius(rhs),
                      "(" + std::to_string(i) + "," + std::to_string(k) + ")");
      }
    report.checks.push_back(gauge.result(tol));
  }

  return report;
}

inline void require_valid_bimodule(const HilbertBimodule& e, double tol = kDefaultTol,
                                   bool check_posdef = true) {
  Report r = validate_bimodule(e, tol, check_posdef);
  for (const auto& c : r.checks) {
    if (c.pass) continue;
    ErrorCode code = ErrorCode::InvalidBimodule;
    if (c.name == "bimodule.flat_posdef") code = ErrorCode::NotFaithful;
    if (c.name == "bimodule.left_action_adjointable") code = ErrorCode::LeftActionNotAdjointable;
    throw Error(code, c.name + " failed, residual " + std::to_string(c.max_residual) +
                          (c.witness.empty() ? "" : " at " + c.witness));
  }
}

/// B as a Hilbert bimodule over itself: <a,c>_B = a^* c.
inline HilbertBimodule canonical_over_self(const CStarAlgebra& b) {
  HilbertBimodule e;
  e.left_algebra = b;
  e.right_algebra = b;
  e.dim = b.dim();
  for (int l = 0; l < b.dim(); ++l) {
    AlgebraElement x = AlgebraElement::basis_element(b, l);
    e.left_action.push_back(to_sparse(left_mult_matrix(x)));
    e.right_action.push_back(to_sparse(right_mult_matrix(x)));
  }
  e.gram.reserve(b.dim());
  for (int k = 0; k < b.dim(); ++k) e.gram.emplace_back(e.dim, e.dim);
  std::vector<std::vector<Eigen::Triplet<cd>>> trips(b.dim());
  for (int i = 0; i < b.dim(); ++i) {
    AlgebraElement star_i = AlgebraElement::basis_element(b, i).star();
    for (int j = 0; j < b.dim(); ++j) {
      CVector c = multiply(star_i, AlgebraElement::basis_element(b, j)).coeffs();
      for (int k = 0; k < b.dim(); ++k)
        if (c(k) != cd(0.0)) trips[k].emplace_back(i, j, c(k));
    }
  }
  for (int k = 0; k < b.dim(); ++k) e.gram[k].setFromTriplets(trips[k].begin(), trips[k].end());
  return e;
}

/// The localization of A over B along the Haar map: underlying space A,
/// left action a -> a.eta_t(b), right action a -> a.eta_s(b), inner product
/// <a,c>_B = P(S(a^* c)). The coinverse twist makes the form localize at the
/// source leg, which is what balances the tensor product over B.
inline HilbertBimodule localization(const CStarAlgebra& a, const LinearMap& haar,
                                    const LinearMap& coinverse, const LinearMap& eta_s,
                                    const LinearMap& eta_t, double tol = kDefaultTol) {
  if (haar.domain != a || coinverse.domain != a || coinverse.codomain != a)
    throw Error(ErrorCode::ParentMismatch, "localization data mismatch");
  const CStarAlgebra& b = haar.codomain;
  if (eta_s.domain != b || eta_t.domain != b || eta_s.codomain != a || eta_t.codomain != a)
    throw Error(ErrorCode::ParentMismatch, "unit embeddings mismatch");

  HilbertBimodule e;
  e.left_algebra = b;
  e.right_algebra = b;
  e.dim = a.dim();
  for (int l = 0; l < b.dim(); ++l) {
    AlgebraElement bl = AlgebraElement::basis_element(b, l);
    e.left_action.push_back(to_sparse(right_mult_matrix(eta_t.apply(bl))));
    e.right_action.push_back(to_sparse(right_mult_matrix(eta_s.apply(bl))));
  }
  CMatrix twist = haar.matrix * coinverse.matrix;  // P o S on coefficients
  e.gram.reserve(b.dim());
  std::vector<std::vector<Eigen::Triplet<cd>>> trips(b.dim());
  for (int i = 0; i < a.dim(); ++i) {
    AlgebraElement star_i = AlgebraElement::basis_element(a, i).star();
    for (int j = 0; j < a.dim(); ++j) {
      CVector c = twist * multiply(star_i, AlgebraElement::basis_element(a, j)).coeffs();
      for (int k = 0; k < b.dim(); ++k)
        if (c(k) != cd(0.0)) trips[k].emplace_back(i, j, c(k));
    }
  }
  for (int k = 0; k < b.dim(); ++k) {
    e.gram.emplace_back(e.dim, e.dim);
    e.gram[k].setFromTriplets(trips[k].begin(), trips[k].end());
  }

  Report r = validate_bimodule(e, tol);
  for (const auto& c : r.checks) {
    if (c.pass) continue;
    if (c.name == "bimodule.flat_posdef")
      throw Error(ErrorCode::NotFaithful, "localization form degenerate: " + c.witness);
    if (c.name == "bimodule.left_action_adjointable")
      throw Error(ErrorCode::LeftActionNotAdjointable, c.witness);
    throw Error(ErrorCode::InvalidBimodule, c.name + ": " + c.witness);
  }
  return e;
}

struct BoundedOperator {
  CMatrix matrix;
  CMatrix adjoint_matrix;
};

/// Adjoint of an operator with respect to the algebra-valued inner product.
/// The flattened form pins the unique candidate X = H^{-1} T^dagger H; the
/// full R-valued equations X^dagger G_k = G_k T are then verified.
inline BoundedOperator adjoint_of(const CMatrix& t, const HilbertBimodule& e,
                                  double tol = kDefaultTol) {
  if (t.rows() != e.dim || t.cols() != e.dim)
    throw Error(ErrorCode::BadParams, "operator shape mismatch");
  CMatrix h = e.flat_gram();
  CMatrix x = h.ldlt().solve(t.adjoint() * h);
  double worst = 0.0;
  double scale = 1.0;
  for (size_t k = 0; k < e.gram.size(); ++k) {
    CMatrix lhs = x.adjoint() * CMatrix(e.gram[k]);
    CMatrix rhs = CMatrix(e.gram[k]) * t;
    worst = std::max(worst, (lhs - rhs).norm());
    scale = std::max(scale, rhs.norm());
  }
  if (worst > tol * scale)
    throw Error(ErrorCode::NotAdjointable, "residual " + std::to_string(worst / scale));
  return BoundedOperator{t, x};
}

/// Fullness: the values <v_i, v_j>_R span R.
inline bool is_full(const HilbertBimodule& e, double tol = kDefaultTol) {
  const int dr = e.right_algebra.dim();
  CMatrix stack(e.dim * e.dim, dr);
  for (int i = 0; i < e.dim; ++i)
    for (int j = 0; j < e.dim; ++j)
      for (int k = 0; k < dr; ++k) stack(i * e.dim + j, k) = e.gram[k].coeff(i, j);
  if (stack.rows() == 0) return dr == 0;
  Eigen::JacobiSVD<CMatrix> svd(stack);
  double cutoff = tol * std::max(1.0, svd.singularValues()(0));
  int rank = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()(i) > cutoff) ++rank;
  return rank == dr;
}

// ---------------------------------------------------------------------------
// Interior (Rieffel) tensor product
// ---------------------------------------------------------------------------

/// Interior tensor product E1 (x)_B E2 in quotiented form.
///
/// Construction: factor the flattened form of E2 as H2 = D^* D, so the left
/// B-action becomes a *-representation on standard coordinates. Decompose
/// that representation into canonical blocks with multiplicity spaces, and
/// eigendecompose the rho_B-flattened Gram of E1 per block. The surviving
/// eigenvectors tensored with multiplicity vectors give an orthonormal basis
/// of the quotient whose members are short sums of pure tensors, which keeps
/// compression of product operators cheap and exactly sparse for function
/// algebras.
class TensorModule {
 public:
  HilbertBimodule module;

  struct Summand {
    int w;
    int xi;
    cd coef;
  };

  TensorModule(const HilbertBimodule& e1, const HilbertBimodule& e2, double tol = kDefaultTol)
      : tol_(tol), mid_(e1.right_algebra) {
    if (e1.right_algebra != e2.left_algebra)
      throw Error(ErrorCode::AlgebraMismatch, "tensor factors do not share the middle algebra");
    m1_ = e1.dim;
    m2_ = e2.dim;
    c_stack_ = e1.gram;
    lambda2_ = e2.left_action;
    g2_stack_ = e2.gram;
    rho2_ = e2.right_action;

    build_second_factor(e2);
    build_quotient(e1);
    build_module(e1, e2);
  }

  int raw_dim() const { return m1_ * m2_; }
  int dim() const { return module.dim; }
  const CStarAlgebra& middle_algebra() const { return mid_; }

  struct KronTerm {
    SpMat first;   // m1 x m1
    SpMat second;  // m2 x m2
  };

  /// Compression of sum_t M_t (x) N_t to the quotient basis.
  SpMat compress(const std::vector<KronTerm>& terms) const {
    SpMat out(dim(), dim());
    std::vector<Eigen::Triplet<cd>> trips;
    for (const auto& term : terms) {
      SpMat mw = SpMat(term.first * w_sp_);
      SpMat nxi_m = SpMat(term.second * xi_sp_);
      for (int l = 0; l < mid_.dim(); ++l) {
        SpMat xl = SpMat(SpMat(w_sp_.adjoint()) * SpMat(c_stack_[l] * mw));
        SpMat yl = SpMat(SpMat(xi_sp_.adjoint()) * SpMat(h2_sp_ * SpMat(lambda2_[l] * nxi_m)));
        gather(xl, yl, trips);
      }
    }
    out.setFromTriplets(trips.begin(), trips.end());
    out.prune([](const Eigen::Index&, const Eigen::Index&, const cd& v) { return v != cd(0.0); });
    return out;
  }

  SpMat compress_first(const SpMat& m) const {
    SpMat ident(m2_, m2_);
    ident.setIdentity();
    return compress({KronTerm{m, ident}});
  }

  SpMat compress_second(const SpMat& n) const {
    SpMat ident(m1_, m1_);
    ident.setIdentity();
    return compress({KronTerm{ident, n}});
  }

  struct PureTensor {
    CVector first;
    CVector second;
    cd coef = 1.0;
  };

  /// Coordinates of a raw vector (a short sum of pure tensors) in the
  /// orthonormal quotient basis.
  CVector project_raw(const std::vector<PureTensor>& raw) const {
    CVector coords = CVector::Zero(dim());
    // cache C_l v and H2 Lambda_l xi per raw term
    for (const auto& term : raw) {
      std::vector<CVector> cw(mid_.dim()), hx(mid_.dim());
      for (int l = 0; l < mid_.dim(); ++l) {
        cw[l] = c_stack_[l] * term.first;
        hx[l] = h2_dense_ * (lambda2_[l] * term.second);
      }
      for (int b = 0; b < dim(); ++b) {
        cd acc = 0.0;
        for (const auto& s : columns_[b]) {
          for (int l = 0; l < mid_.dim(); ++l) {
            cd xv = w_dense_.col(s.w).dot(cw[l]);
            cd yv = xi_dense_.col(s.xi).dot(hx[l]);
            acc += std::conj(s.coef) * term.coef * xv * yv;
          }
        }
        coords(b) += acc;
      }
    }
    return coords;
  }

  CVector project_pure(int i1, int i2) const {
    PureTensor t;
    t.first = CVector::Zero(m1_);
    t.first(i1) = 1.0;
    t.second = CVector::Zero(m2_);
    t.second(i2) = 1.0;
    return project_raw({t});
  }

  /// Canonical raw representative of quotient coordinates.
  std::vector<PureTensor> representative(const CVector& coords) const {
    std::vector<PureTensor> out;
    for (int b = 0; b < dim(); ++b) {
      if (coords(b) == cd(0.0)) continue;
      for (const auto& s : columns_[b]) {
        PureTensor t;
        t.first = w_dense_.col(s.w);
        t.second = xi_dense_.col(s.xi);
        t.coef = coords(b) * s.coef;
        out.push_back(std::move(t));
      }
    }
    return out;
  }

  /// Seminorm of a raw vector under the flattened tensor form; vanishes
  /// exactly on the null space that was quotiented out.
  double raw_seminorm(const std::vector<PureTensor>& raw) const {
    cd acc = 0.0;
    for (const auto& a : raw)
      for (const auto& b : raw) {
        for (int l = 0; l < mid_.dim(); ++l) {
          cd xv = a.first.dot(c_stack_[l] * b.first);
          cd yv = a.second.dot(h2_dense_ * (lambda2_[l] * b.second));
          acc += std::conj(a.coef) * b.coef * xv * yv;
        }
      }
    return std::sqrt(std::max(0.0, acc.real()));
  }

  /// Null space dimension discovered during construction.
  int null_dim() const { return m1_ * m2_ - dim(); }

  /// A basis of the null space as raw pure-tensor sums (used to certify
  /// contractions vanish on the quotiented directions).
  const std::vector<std::vector<PureTensor>>& null_basis() const { return null_basis_; }

 private:
  double tol_;
  CStarAlgebra mid_;
  int m1_ = 0, m2_ = 0;
  std::vector<SpMat> c_stack_, lambda2_, g2_stack_, rho2_;

  CMatrix h2_dense_;
  SpMat h2_sp_;
  CMatrix w_dense_, xi_dense_;
  SpMat w_sp_, xi_sp_;
  std::vector<std::vector<Summand>> columns_;
  bool pure_columns_ = true;
  std::unordered_map<long long, int> pair_to_col_;
  std::vector<std::vector<PureTensor>> null_basis_;

  int nw() const { return static_cast<int>(w_dense_.cols()); }
  int nxi() const { return static_cast<int>(xi_dense_.cols()); }

  // unitarized left action of the middle algebra on E2 plus its canonical
  // block decomposition
  CMatrix d_, dinv_;
  std::vector<CMatrix> mult_spaces_;  // per middle block: m2 x mult_i

  void build_second_factor(const HilbertBimodule& e2) {
    h2_dense_ = e2.flat_gram();
    Eigensystem hsys = hermitian_eigensystem(h2_dense_, std::max(tol_, 1e-12));
    if (m2_ > 0 && hsys.eigenvalues(0) <= tol_ * hermitian_scale(hsys))
      throw Error(ErrorCode::InvalidBimodule, "second factor has a degenerate flattened form");
    h2_sp_ = to_sparse(h2_dense_);
    d_ = posdef_factor(h2_dense_, tol_);
    dinv_ = d_.inverse();

    // unitarized representation of the middle algebra
    std::vector<CMatrix> rep(mid_.dim());
    for (int l = 0; l < mid_.dim(); ++l) rep[l] = d_ * CMatrix(lambda2_[l]) * dinv_;

    ResidualGauge star_rep("tensor.middle_star_rep");
    for (int l = 0; l < mid_.dim(); ++l) {
      CMatrix lhs = rep[l].adjoint();
      CMatrix rhs = rep[detail::star_index(mid_, l)];
      star_rep.observe((lhs - rhs).norm(), rhs.norm(), "basis " + std::to_string(l));
    }
    CheckResult c = star_rep.result(std::max(tol_ * 100, 1e-7));
    if (!c.pass)
      throw Error(ErrorCode::InvalidBimodule,
                  "left action of the middle algebra is not adjointable: " + c.witness);

    // multiplicity space per middle block = range of pi(E^i_{11})
    int xi_cols = 0;
    std::vector<std::vector<CMatrix>> iso_cols;  // per block, per (r,c) -> column
    mult_spaces_.clear();
    for (size_t bi = 0; bi < mid_.block_sizes.size(); ++bi) {
      int ni = mid_.block_sizes[bi];
      CMatrix proj = rep[mid_.basis_index(static_cast<int>(bi), 0, 0)];
      CMatrix basis;
      if (is_exactly_diagonal(proj)) {
        int cnt = 0;
        for (int i = 0; i < m2_; ++i)
          if (proj(i, i).real() > 0.5) ++cnt;
        basis = CMatrix::Zero(m2_, cnt);
        int c2 = 0;
        for (int i = 0; i < m2_; ++i)
          if (proj(i, i).real() > 0.5) basis(i, c2++) = 1.0;
      } else {
        Eigensystem psys = hermitian_eigensystem(proj, std::max(tol_, 1e-12));
        int cnt = 0;
        for (Eigen::Index i = 0; i < psys.eigenvalues.size(); ++i)
          if (psys.eigenvalues(i) > 0.5) ++cnt;
        basis = psys.eigenvectors.rightCols(cnt);
      }
      mult_spaces_.push_back(basis);
      xi_cols += ni * static_cast<int>(basis.cols());
    }
    if (xi_cols != m2_)
      throw Error(ErrorCode::InvalidBimodule, "middle representation failed to decompose");

    xi_dense_ = CMatrix::Zero(m2_, m2_);
    xi_index_.assign(mid_.block_sizes.size(), {});
    int col = 0;
    CMatrix u_check = CMatrix::Zero(m2_, m2_);
    for (size_t bi = 0; bi < mid_.block_sizes.size(); ++bi) {
      int ni = mid_.block_sizes[bi];
      int mi = static_cast<int>(mult_spaces_[bi].cols());
      xi_index_[bi].assign(ni, std::vector<int>(mi, -1));
      for (int r = 0; r < ni; ++r) {
        CMatrix mover = rep[mid_.basis_index(static_cast<int>(bi), r, 0)];
        for (int c2 = 0; c2 < mi; ++c2) {
          CVector ucol = mover * mult_spaces_[bi].col(c2);
          u_check.col(col) = ucol;
          xi_dense_.col(col) = dinv_ * ucol;
          xi_index_[bi][r][c2] = col;
          ++col;
        }
      }
    }
    double unitary_defect = (u_check.adjoint() * u_check - CMatrix::Identity(m2_, m2_)).norm();
    if (unitary_defect > std::max(tol_ * 100, 1e-7) * std::max(1.0, static_cast<double>(m2_)))
      throw Error(ErrorCode::InvalidBimodule, "middle representation decomposition not unitary");
    xi_sp_ = to_sparse(prune_small(xi_dense_));
  }

  std::vector<std::vector<std::vector<int>>> xi_index_;  // block -> r -> c -> xi column

  static CMatrix prune_small(const CMatrix& m) {
    CMatrix out = m;
    double scale = m.cwiseAbs().maxCoeff();
    for (Eigen::Index j = 0; j < out.cols(); ++j)
      for (Eigen::Index i = 0; i < out.rows(); ++i)
        if (std::abs(out(i, j)) <= 1e-15 * scale) out(i, j) = 0.0;
    return out;
  }

  void build_quotient(const HilbertBimodule& e1) {
    // rho_B-flattened Gram of E1, one hermitian block per middle block
    std::vector<CMatrix> ghat(mid_.block_sizes.size());
    for (size_t bi = 0; bi < mid_.block_sizes.size(); ++bi) {
      int ni = mid_.block_sizes[bi];
      CMatrix g = CMatrix::Zero(m1_ * ni, m1_ * ni);
      for (int r = 0; r < ni; ++r)
        for (int c2 = 0; c2 < ni; ++c2) {
          const SpMat& coeff = c_stack_[mid_.basis_index(static_cast<int>(bi), r, c2)];
          for (int k = 0; k < coeff.outerSize(); ++k)
            for (SpMat::InnerIterator it(coeff, k); it; ++it)
              g(it.row() * ni + r, it.col() * ni + c2) = it.value();
        }
      ghat[bi] = g;
    }

    double scale = 1.0;
    std::vector<Eigensystem> systems(ghat.size());
    for (size_t bi = 0; bi < ghat.size(); ++bi) {
      systems[bi] = hermitian_eigensystem(ghat[bi], std::max(tol_, 1e-12));
      if (systems[bi].eigenvalues.size() > 0)
        scale = std::max(scale, hermitian_scale(systems[bi]));
    }
    for (size_t bi = 0; bi < ghat.size(); ++bi)
      if (systems[bi].eigenvalues.size() > 0 && systems[bi].eigenvalues(0) < -tol_ * scale)
        throw Error(ErrorCode::FormNotPSD,
                    "tensor form eigenvalue " + std::to_string(systems[bi].eigenvalues(0)));

    columns_.clear();
    pair_to_col_.clear();
    null_basis_.clear();
    std::vector<CVector> wcols;
    auto w_col_of = [&](const CVector& slice) {
      wcols.push_back(slice);
      return static_cast<int>(wcols.size()) - 1;
    };

    for (size_t bi = 0; bi < ghat.size(); ++bi) {
      int ni = mid_.block_sizes[bi];
      int mi = static_cast<int>(mult_spaces_[bi].cols());
      const Eigensystem& sys = systems[bi];
      for (Eigen::Index p = 0; p < sys.eigenvalues.size(); ++p) {
        double sigma = sys.eigenvalues(p);
        bool kept = sigma > tol_ * scale;
        std::vector<int> widx(ni);
        for (int r = 0; r < ni; ++r) {
          CVector slice(m1_);
          for (int a = 0; a < m1_; ++a) slice(a) = sys.eigenvectors(a * ni + r, p);
          widx[r] = w_col_of(slice);
        }
        for (int c2 = 0; c2 < mi; ++c2) {
          if (kept) {
            std::vector<Summand> col;
            for (int r = 0; r < ni; ++r)
              col.push_back(Summand{widx[r], xi_index_[bi][r][c2], cd(1.0 / std::sqrt(sigma), 0.0)});
            if (col.size() > 1) pure_columns_ = false;
            columns_.push_back(std::move(col));
          } else {
            std::vector<PureTensor> nullvec;
            for (int r = 0; r < ni; ++r) {
              PureTensor t;
              t.first = wcols[widx[r]];
              t.second = CVector::Zero(m2_);  // filled below from xi
              t.coef = 1.0;
              t.second = xi_col_dense(xi_index_[bi][r][c2]);
              nullvec.push_back(std::move(t));
            }
            null_basis_.push_back(std::move(nullvec));
          }
        }
      }
    }

    w_dense_ = CMatrix::Zero(m1_, static_cast<int>(wcols.size()));
    for (size_t i = 0; i < wcols.size(); ++i) w_dense_.col(static_cast<int>(i)) = wcols[i];
    w_dense_ = prune_small(w_dense_);
    w_sp_ = to_sparse(w_dense_);

    if (pure_columns_) {
      for (size_t b = 0; b < columns_.size(); ++b) {
        const Summand& s = columns_[b][0];
        pair_to_col_[key(s.w, s.xi)] = static_cast<int>(b);
      }
    }
  }

  CVector xi_col_dense(int idx) const { return xi_dense_.col(idx); }

  long long key(int w, int xi) const { return static_cast<long long>(w) * (nxi() + 1) + xi; }

  void gather(const SpMat& x, const SpMat& y, std::vector<Eigen::Triplet<cd>>& trips) const {
    if (pure_columns_) {
      for (int kx = 0; kx < x.outerSize(); ++kx)
        for (SpMat::InnerIterator itx(x, kx); itx; ++itx) {
          if (itx.value() == cd(0.0)) continue;
          for (int ky = 0; ky < y.outerSize(); ++ky)
            for (SpMat::InnerIterator ity(y, ky); ity; ++ity) {
              if (ity.value() == cd(0.0)) continue;
              auto row = pair_to_col_.find(key(static_cast<int>(itx.row()), static_cast<int>(ity.row())));
              auto col = pair_to_col_.find(key(static_cast<int>(itx.col()), static_cast<int>(ity.col())));
              if (row == pair_to_col_.end() || col == pair_to_col_.end()) continue;
              cd v = std::conj(columns_[row->second][0].coef) * columns_[col->second][0].coef *
                     itx.value() * ity.value();
              if (v != cd(0.0)) trips.emplace_back(row->second, col->second, v);
            }
        }
      return;
    }
    CMatrix xd = CMatrix(x), yd = CMatrix(y);
    for (int bp = 0; bp < dim(); ++bp)
      for (int b = 0; b < dim(); ++b) {
        cd acc = 0.0;
        for (const auto& sp : columns_[bp])
          for (const auto& s : columns_[b])
            acc += std::conj(sp.coef) * s.coef * xd(sp.w, s.w) * yd(sp.xi, s.xi);
        if (acc != cd(0.0)) trips.emplace_back(bp, b, acc);
      }
  }

  void build_module(const HilbertBimodule& e1, const HilbertBimodule& e2) {
    module.left_algebra = e1.left_algebra;
    module.right_algebra = e2.right_algebra;
    module.dim = static_cast<int>(columns_.size());

    for (int l = 0; l < e1.left_algebra.dim(); ++l)
      module.left_action.push_back(compress_first(e1.left_action[l]));
    for (int k = 0; k < e2.right_algebra.dim(); ++k)
      module.right_action.push_back(compress_second(rho2_[k]));

    // C-valued Gram on the quotient basis: pair the E1 stack against
    // Xi^dagger G_k Lambda_l Xi instead of the flattened H2 form.
    for (int k = 0; k < e2.right_algebra.dim(); ++k) {
      std::vector<Eigen::Triplet<cd>> trips;
      for (int l = 0; l < mid_.dim(); ++l) {
        SpMat xl = SpMat(SpMat(w_sp_.adjoint()) * SpMat(c_stack_[l] * w_sp_));
        SpMat yl = SpMat(SpMat(xi_sp_.adjoint()) * SpMat(g2_stack_[k] * SpMat(lambda2_[l] * xi_sp_)));
        gather(xl, yl, trips);
      }
      SpMat g(module.dim, module.dim);
      g.setFromTriplets(trips.begin(), trips.end());
      g.prune([](const Eigen::Index&, const Eigen::Index&, const cd& v) { return v != cd(0.0); });
      module.gram.push_back(std::move(g));
    }
  }
};

inline TensorModule interior_tensor(const HilbertBimodule& e1, const HilbertBimodule& e2,
                                    double tol = kDefaultTol) {
  return TensorModule(e1, e2, tol);
}

/// Canonical identification (E1 (x) E2) (x) E3 ~ E1 (x) (E2 (x) E3) on the
/// quotients, with its inverse and the certification that it preserves the
/// algebra-valued inner product.
struct Associator {
  TensorModule pair12;
  TensorModule pair23;
  TensorModule left;   // (E1 x E2) x E3
  TensorModule right;  // E1 x (E2 x E3)
  CMatrix forward;
  CMatrix backward;
  Report certification;
};

inline Associator associator(const HilbertBimodule& e1, const HilbertBimodule& e2,
                             const HilbertBimodule& e3, double tol = kDefaultTol) {
  TensorModule p12(e1, e2, tol);
  TensorModule p23(e2, e3, tol);
  TensorModule left(p12.module, e3, tol);
  TensorModule right(e1, p23.module, tol);
  Associator a{std::move(p12), std::move(p23), std::move(left), std::move(right),
               CMatrix(), CMatrix(), Report{}};

  const int rl = a.left.dim();
  const int rr = a.right.dim();
  a.forward = CMatrix::Zero(rr, rl);
  for (int b = 0; b < rl; ++b) {
    CVector unit = CVector::Zero(rl);
    unit(b) = 1.0;
    CVector img = CVector::Zero(rr);
    for (const auto& outer : a.left.representative(unit)) {
      // outer.first lives in the (E1 x E2) quotient; expand it
      for (const auto& inner : a.pair12.representative(outer.first)) {
        CVector mid = a.pair23.project_raw({TensorModule::PureTensor{inner.second, outer.second, 1.0}});
        img += outer.coef * inner.coef *
               a.right.project_raw({TensorModule::PureTensor{inner.first, mid, 1.0}});
      }
    }
    a.forward.col(b) = img;
  }

  a.backward = CMatrix::Zero(rl, rr);
  for (int b = 0; b < rr; ++b) {
    CVector unit = CVector::Zero(rr);
    unit(b) = 1.0;
    CVector img = CVector::Zero(rl);
    for (const auto& outer : a.right.representative(unit)) {
      for (const auto& inner : a.pair23.representative(outer.second)) {
        CVector mid = a.pair12.project_raw({TensorModule::PureTensor{outer.first, inner.first, 1.0}});
        img += outer.coef * inner.coef *
               a.left.project_raw({TensorModule::PureTensor{mid, inner.second, 1.0}});
      }
    }
    a.backward.col(b) = img;
  }

  {
    ResidualGauge gauge("associator.inner_product");
    for (int k = 0; k < e3.right_algebra.dim(); ++k) {
      CMatrix lhs = a.forward.adjoint() * CMatrix(a.right.module.gram[k]) * a.forward;
      CMatrix rhs = CMatrix(a.left.module.gram[k]);
      gauge.observe((lhs - rhs).norm(), rhs.norm(), "coefficient " + std::to_string(k));
    }
    a.certification.checks.push_back(gauge.result(tol));
  }
  {
    ResidualGauge gauge("associator.bijective");
    CMatrix lhs = a.backward * a.forward;
    gauge.observe((lhs - CMatrix::Identity(rl, rl)).norm(), std::sqrt(static_cast<double>(rl)),
                  "backward o forward");
    CMatrix rhs = a.forward * a.backward;
    gauge.observe((rhs - CMatrix::Identity(rr, rr)).norm(), std::sqrt(static_cast<double>(rr)),
                  "forward o backward");
    a.certification.checks.push_back(gauge.result(tol));
  }
  return a;
}

}  // namespace qgroupoid
