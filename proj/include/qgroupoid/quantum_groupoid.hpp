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

#include <optional>
#include <unordered_set>
#include <string>
#include <utility>
#include <vector>

#include "qgroupoid/cstar_algebra.hpp"
#include "qgroupoid/hilbert_bimodule.hpp"
#include "qgroupoid/parallel.hpp"
#include "qgroupoid/report.hpp"

namespace qgroupoid {

/// Sweedler leg form of the coproduct of one basis element: a finite list of
/// coefficient-vector pairs (a', a'') over the standard basis of A.
using DeltaLegs = std::vector<std::pair<CVector, CVector>>;

/// Candidate compact-quantum-groupoid bundle.
struct QuantumGroupoidData {
  CStarAlgebra A;
  CStarAlgebra B;
  LinearMap eta_s;      // B -> A, *-homomorphism
  LinearMap eta_t;      // B -> A, *-antihomomorphism
  LinearMap haar;       // P: A -> B
  LinearMap coinverse;  // S: A -> A
  std::vector<DeltaLegs> delta_legs;  // one list per basis element of A

  AlgebraElement elem(const CVector& coeffs) const {
    return AlgebraElement::from_coeffs(A, coeffs);
  }
};

inline const char* kPaxiomNote =
    "haar axiom reading: the slice of the coproduct against the Haar map is "
    "compared with eta_t o P after the canonical identification of A (x)_B B "
    "with A";
inline const char* kCyclicNote =
    "generated-algebra bookkeeping uses operators on the fiber module; "
    "evaluation against the cyclic vector is reported with an empirical "
    "injectivity rank test";

// ---------------------------------------------------------------------------
// Data validation
// ---------------------------------------------------------------------------

inline Report validate_data(const QuantumGroupoidData& q, double tol = kDefaultTol) {
  Report report;
  report.tolerance = tol;

  {
    LinearMap es = q.eta_s;
    es.kind = MapKind::hom;
    CheckResult c = verify_kind(es, tol);
    c.name = "data.eta_s_hom";
    report.checks.push_back(c);
    LinearMap et = q.eta_t;
    et.kind = MapKind::antihom;
    CheckResult c2 = verify_kind(et, tol);
    c2.name = "data.eta_t_antihom";
    report.checks.push_back(c2);
  }
  {
    CheckResult c;
    c.name = "data.eta_injective";
    int rs = q.eta_s.rank(tol), rt = q.eta_t.rank(tol);
    c.pass = rs == q.B.dim() && rt == q.B.dim();
    if (!c.pass) {
      c.max_residual = 1.0;
      c.witness = "rank eta_s=" + std::to_string(rs) + ", eta_t=" + std::to_string(rt) +
                  ", dim B=" + std::to_string(q.B.dim());
    }
    report.checks.push_back(c);
  }
  {
    ResidualGauge gauge("data.eta_images_commute");
    for (int i = 0; i < q.B.dim(); ++i) {
      AlgebraElement s = q.eta_s.apply(AlgebraElement::basis_element(q.B, i));
      for (int j = 0; j < q.B.dim(); ++j) {
        AlgebraElement t = q.eta_t.apply(AlgebraElement::basis_element(q.B, j));
        gauge.observe((multiply(s, t) - multiply(t, s)).frob(),
                      std::max(multiply(s, t).frob(), 1.0),
                      "(" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
    report.checks.push_back(gauge.result(tol));
  }
  {
    CheckResult c = is_completely_positive(q.haar, tol);
    c.name = "data.haar_completely_positive";
    report.checks.push_back(c);
    CheckResult c2 = is_faithful_positive(q.haar, tol);
    c2.name = "data.haar_faithful";
    report.checks.push_back(c2);
  }
  {
    ResidualGauge gauge("data.haar_star");
    for (int i = 0; i < q.A.dim(); ++i) {
      AlgebraElement a = AlgebraElement::basis_element(q.A, i);
      gauge.observe((q.haar.apply(a.star()) - q.haar.apply(a).star()).frob(),
                    q.haar.apply(a).frob(), "basis " + std::to_string(i));
    }
    report.checks.push_back(gauge.result(tol));
  }
  {
    // conditional expectation along the target embedding:
    // P o eta_t = id, P(a eta_t(b)) = P(a) b, P(eta_t(b) a) = P(a) b
    ResidualGauge gauge("data.haar_module");
    AlgebraElement oneB = AlgebraElement::unit(q.B);
    for (int l = 0; l < q.B.dim(); ++l) {
      AlgebraElement b = AlgebraElement::basis_element(q.B, l);
      AlgebraElement tb = q.eta_t.apply(b);
      gauge.observe((q.haar.apply(tb) - b).frob(), b.frob(), "P(eta_t) at " + std::to_string(l));
      for (int i = 0; i < q.A.dim(); ++i) {
        AlgebraElement a = AlgebraElement::basis_element(q.A, i);
        AlgebraElement pa_b = multiply(q.haar.apply(a), b);
        gauge.observe((q.haar.apply(multiply(a, tb)) - pa_b).frob(), pa_b.frob(),
                      "P(a eta_t(b)) at (" + std::to_string(i) + "," + std::to_string(l) + ")");
        AlgebraElement b_pa = multiply(b, q.haar.apply(a));
        gauge.observe((q.haar.apply(multiply(tb, a)) - b_pa).frob(), b_pa.frob(),
                      "P(eta_t(b) a) at (" + std::to_string(i) + "," + std::to_string(l) + ")");
      }
    }
    gauge.observe((q.haar.apply(q.eta_t.apply(oneB)) - oneB).frob(), oneB.frob(), "unit");
    report.checks.push_back(gauge.result(tol));
  }
  {
    LinearMap s = q.coinverse;
    s.kind = MapKind::antihom;
    // verify multiplicativity only; star behaviour is handled below
    ResidualGauge gauge("data.coinverse_antihom");
    std::vector<AlgebraElement> img;
    for (int i = 0; i < q.A.dim(); ++i)
      img.push_back(s.apply(AlgebraElement::basis_element(q.A, i)));
    AlgebraElement one = AlgebraElement::unit(q.A);
    gauge.observe((s.apply(one) - one).frob(), one.frob(), "unit");
    for (int i = 0; i < q.A.dim(); ++i)
      for (int j = 0; j < q.A.dim(); ++j) {
        AlgebraElement lhs = s.apply(multiply(AlgebraElement::basis_element(q.A, i),
                                              AlgebraElement::basis_element(q.A, j)));
        AlgebraElement rhs = multiply(img[j], img[i]);
        gauge.observe((lhs - rhs).frob(), rhs.frob(),
                      "basis pair (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
    report.checks.push_back(gauge.result(tol));
  }
  {
    ResidualGauge gauge("data.coinverse_bimodule");
    for (int l = 0; l < q.B.dim(); ++l) {
      AlgebraElement b = AlgebraElement::basis_element(q.B, l);
      gauge.observe((q.coinverse.apply(q.eta_s.apply(b)) - q.eta_t.apply(b)).frob(),
                    q.eta_t.apply(b).frob(), "S o eta_s at " + std::to_string(l));
      gauge.observe((q.coinverse.apply(q.eta_t.apply(b)) - q.eta_s.apply(b)).frob(),
                    q.eta_s.apply(b).frob(), "S o eta_t at " + std::to_string(l));
    }
    report.checks.push_back(gauge.result(tol));
  }
  {
    // (S o *)^2 = id together with S commuting with *, which at finite
    // dimension pins the involutive coinverse used by the localization.
    ResidualGauge gauge("data.coinverse_involutive");
    for (int i = 0; i < q.A.dim(); ++i) {
      AlgebraElement a = AlgebraElement::basis_element(q.A, i);
      AlgebraElement round = q.coinverse.apply(q.coinverse.apply(a.star()).star());
      gauge.observe((round - a).frob(), a.frob(), "(So*)^2 at " + std::to_string(i));
      AlgebraElement lhs = q.coinverse.apply(a.star());
      AlgebraElement rhs = q.coinverse.apply(a).star();
      gauge.observe((lhs - rhs).frob(), rhs.frob(), "S o * at " + std::to_string(i));
    }
    report.checks.push_back(gauge.result(tol));
  }
  {
    CheckResult c;
    c.name = "data.delta_legs_shape";
    c.pass = static_cast<int>(q.delta_legs.size()) == q.A.dim();
    if (!c.pass) {
      c.max_residual = 1.0;
      c.witness = "leg lists " + std::to_string(q.delta_legs.size()) + " for dim " +
                  std::to_string(q.A.dim());
    } else {
      for (const auto& legs : q.delta_legs)
        for (const auto& leg : legs)
          if (leg.first.size() != q.A.dim() || leg.second.size() != q.A.dim()) {
            c.pass = false;
            c.max_residual = 1.0;
            c.witness = "leg coefficient length mismatch";
          }
    }
    report.checks.push_back(c);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Fiber tensor A- (x)_B A- with the leg homomorphisms
// ---------------------------------------------------------------------------

struct FiberTensor {
  HilbertBimodule loc;       // the localization A-
  TensorModule module;       // A- (x)_B A-
  std::vector<SpMat> phi1;   // per basis of A
  std::vector<SpMat> phi2;
  std::vector<SpMat> delta_op;  // operator form of the coproduct per basis
  CVector cyclic;               // class of 1 (x) 1
  Report certification;

  SpMat phi1_of(const CVector& coeffs) const { return HilbertBimodule::combine(phi1, coeffs); }
  SpMat phi2_of(const CVector& coeffs) const { return HilbertBimodule::combine(phi2, coeffs); }
  SpMat delta_of(const CVector& coeffs) const { return HilbertBimodule::combine(delta_op, coeffs); }
};

inline FiberTensor build_fiber_tensor(const QuantumGroupoidData& q, double tol = kDefaultTol) {
  HilbertBimodule loc = localization(q.A, q.haar, q.coinverse, q.eta_s, q.eta_t, tol);
  TensorModule module(loc, loc, tol);

  FiberTensor f{std::move(loc), std::move(module), {}, {}, {}, CVector(), Report{}};
  f.certification.tolerance = tol;

  std::vector<SpMat> mult(q.A.dim());
  for (int i = 0; i < q.A.dim(); ++i)
    mult[i] = to_sparse(left_mult_matrix(AlgebraElement::basis_element(q.A, i)));

  for (int i = 0; i < q.A.dim(); ++i) {
    f.phi1.push_back(f.module.compress_first(mult[i]));
    f.phi2.push_back(f.module.compress_second(mult[i]));
  }

  {
    // null-space invariance of the leg actions (the quotient compression of
    // products is only lawful on operators preserving the null space)
    ResidualGauge gauge("fiber.null_invariant");
    auto sq = [&](double x) { return x * x; };
    for (const auto& nv : f.module.null_basis())
      gauge.observe(sq(f.module.raw_seminorm(nv)), 1.0, "null basis vector itself");
    for (int i = 0; i < q.A.dim(); ++i) {
      for (const auto& nv : f.module.null_basis()) {
        std::vector<TensorModule::PureTensor> moved1 = nv, moved2 = nv;
        for (auto& t : moved1) t.first = mult[i] * t.first;
        for (auto& t : moved2) t.second = mult[i] * t.second;
        gauge.observe(sq(f.module.raw_seminorm(moved1)), 1.0, "phi1 basis " + std::to_string(i));
        gauge.observe(sq(f.module.raw_seminorm(moved2)), 1.0, "phi2 basis " + std::to_string(i));
      }
    }
    f.certification.checks.push_back(gauge.result(tol * 100));
  }
  {
    ResidualGauge gauge("fiber.phi_hom");
    SpMat ident(f.module.dim(), f.module.dim());
    ident.setIdentity();
    CVector one = AlgebraElement::unit(q.A).coeffs();
    gauge.observe(frobenius(SpMat(f.phi1_of(one) - ident)), frobenius(ident), "phi1 unit");
    gauge.observe(frobenius(SpMat(f.phi2_of(one) - ident)), frobenius(ident), "phi2 unit");
    for (int i = 0; i < q.A.dim(); ++i)
      for (int j = 0; j < q.A.dim(); ++j) {
        CVector prod = multiply(AlgebraElement::basis_element(q.A, i),
                                AlgebraElement::basis_element(q.A, j))
                           .coeffs();
        SpMat lhs1 = SpMat(f.phi1[i] * f.phi1[j]);
        SpMat rhs1 = f.phi1_of(prod);
        gauge.observe(frobenius(SpMat(lhs1 - rhs1)), frobenius(rhs1),
                      "phi1 (" + std::to_string(i) + "," + std::to_string(j) + ")");
        SpMat lhs2 = SpMat(f.phi2[i] * f.phi2[j]);
        SpMat rhs2 = f.phi2_of(prod);
        gauge.observe(frobenius(SpMat(lhs2 - rhs2)), frobenius(rhs2),
                      "phi2 (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
    f.certification.checks.push_back(gauge.result(tol));
  }
  {
    ResidualGauge gauge("fiber.phi_adjointable");
    const auto& gram = f.module.module.gram;
    for (int i = 0; i < q.A.dim(); ++i) {
      int istar = detail::star_index(q.A, i);
      for (size_t k = 0; k < gram.size(); ++k) {
        SpMat l1 = SpMat(SpMat(f.phi1[istar].adjoint()) * gram[k]);
        SpMat r1 = SpMat(gram[k] * f.phi1[i]);
        gauge.observe(frobenius(SpMat(l1 - r1)), frobenius(r1), "phi1 basis " + std::to_string(i));
        SpMat l2 = SpMat(SpMat(f.phi2[istar].adjoint()) * gram[k]);
        SpMat r2 = SpMat(gram[k] * f.phi2[i]);
        gauge.observe(frobenius(SpMat(l2 - r2)), frobenius(r2), "phi2 basis " + std::to_string(i));
      }
    }
    f.certification.checks.push_back(gauge.result(tol));
  }
  {
    ResidualGauge gauge("fiber.phi_commute");
    for (int i = 0; i < q.A.dim(); ++i)
      for (int j = 0; j < q.A.dim(); ++j) {
        SpMat lhs = SpMat(f.phi1[i] * f.phi2[j]);
        SpMat rhs = SpMat(f.phi2[j] * f.phi1[i]);
        gauge.observe(frobenius(SpMat(lhs - rhs)), std::max(frobenius(rhs), 1.0),
                      "(" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
    f.certification.checks.push_back(gauge.result(tol));
  }

  for (int b = 0; b < q.A.dim(); ++b) {
    SpMat op(f.module.dim(), f.module.dim());
    for (const auto& leg : q.delta_legs[b]) op = op + SpMat(f.phi1_of(leg.first) * f.phi2_of(leg.second));
    f.delta_op.push_back(std::move(op));
  }

  CVector one = AlgebraElement::unit(q.A).coeffs();
  f.cyclic = f.module.project_raw({TensorModule::PureTensor{one, one, 1.0}});
  return f;
}

// ---------------------------------------------------------------------------
// Generated algebra
// ---------------------------------------------------------------------------

struct GeneratedAlgebra {
  int dimension = 0;
  bool stabilized = false;
  int rounds = 0;
  int cyclic_rank = 0;
  std::vector<SpMat> basis;  // orthonormal in the Frobenius inner product
};

namespace detail {

// <a, b> = tr(a^* b) by merged iteration over the shared storage order.
inline cd frob_dot(const SpMat& a, const SpMat& b) {
  cd acc = 0.0;
  for (int k = 0; k < a.outerSize(); ++k) {
    SpMat::InnerIterator ita(a, k), itb(b, k);
    while (ita && itb) {
      if (ita.index() < itb.index()) {
        ++ita;
      } else if (itb.index() < ita.index()) {
        ++itb;
      } else {
        acc += std::conj(ita.value()) * itb.value();
        ++ita;
        ++itb;
      }
    }
  }
  return acc;
}

// bit-exact structural fingerprint, used to drop duplicate word products
inline std::string sparse_fingerprint(const SpMat& m) {
  std::string s;
  s.reserve(static_cast<size_t>(m.nonZeros()) * 24);
  for (int k = 0; k < m.outerSize(); ++k)
    for (SpMat::InnerIterator it(m, k); it; ++it) {
      int outer = k;
      int inner = static_cast<int>(it.index());
      double re = it.value().real(), im = it.value().imag();
      s.append(reinterpret_cast<const char*>(&outer), sizeof(outer));
      s.append(reinterpret_cast<const char*>(&inner), sizeof(inner));
      s.append(reinterpret_cast<const char*>(&re), sizeof(re));
      s.append(reinterpret_cast<const char*>(&im), sizeof(im));
    }
  return s;
}

}  // namespace detail

/// Span closure of words in phi1(basis) and phi2(basis) under multiplication,
/// iterated to stabilization. Operators are orthonormalized in the Frobenius
/// inner product; the word length cap is dim(module)^2.
inline GeneratedAlgebra generated_algebra(const FiberTensor& f, double tol = kDefaultTol) {
  GeneratedAlgebra out;
  const int r = f.module.dim();
  std::vector<SpMat> generators;
  for (const auto& m : f.phi1) generators.push_back(m);
  for (const auto& m : f.phi2) generators.push_back(m);

  std::unordered_set<std::string> seen;
  auto orthonormalize_insert = [&](SpMat cand) -> bool {
    if (cand.nonZeros() == 0) return false;
    if (!seen.insert(detail::sparse_fingerprint(cand)).second) return false;
    double scale = std::max(1.0, frobenius(cand));
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : out.basis) {
        cd c = detail::frob_dot(b, cand);
        if (c != cd(0.0)) cand = SpMat(cand - SpMat(c * b));
      }
    double nrm = frobenius(cand);
    if (nrm <= 1e3 * tol * scale) return false;
    cand = SpMat(cand * cd(1.0 / nrm, 0.0));
    cand.prune([](const Eigen::Index&, const Eigen::Index&, const cd& v) { return v != cd(0.0); });
    out.basis.push_back(std::move(cand));
    return true;
  };

  std::vector<SpMat> fresh;
  SpMat ident(r, r);
  ident.setIdentity();
  if (orthonormalize_insert(ident)) fresh.push_back(ident);
  for (const auto& g : generators)
    if (orthonormalize_insert(g)) fresh.push_back(g);

  const int cap = std::max(r * r, 2);
  int word_len = 1;
  while (!fresh.empty()) {
    ++out.rounds;
    ++word_len;
    std::vector<SpMat> next;
    for (const auto& b : fresh)
      for (const auto& g : generators) {
        SpMat cand = SpMat(b * g);
        if (orthonormalize_insert(cand)) next.push_back(out.basis.back());
      }
    fresh = std::move(next);
    if (!fresh.empty() && word_len >= cap) {
      out.stabilized = false;
      out.dimension = static_cast<int>(out.basis.size());
      return out;
    }
  }
  out.stabilized = true;
  out.dimension = static_cast<int>(out.basis.size());

  // empirical injectivity of evaluation at the cyclic vector
  if (r > 0 && !out.basis.empty()) {
    CMatrix eval(r, static_cast<int>(out.basis.size()));
    for (size_t i = 0; i < out.basis.size(); ++i) eval.col(static_cast<int>(i)) = out.basis[i] * f.cyclic;
    Eigen::JacobiSVD<CMatrix> svd(eval);
    double cutoff = tol * std::max(1.0, svd.singularValues().size() ? svd.singularValues()(0) : 0.0);
    for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
      if (svd.singularValues()(i) > cutoff) ++out.cyclic_rank;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Axiom checks
// ---------------------------------------------------------------------------

namespace detail {

struct OperatorDiff {
  double diff = 0.0;
  double ref = 0.0;
};

inline OperatorDiff op_diff(const SpMat& lhs, const SpMat& rhs) {
  OperatorDiff d;
  d.diff = op_norm_estimate(SpMat(lhs - rhs));
  d.ref = std::max(op_norm_estimate(lhs), op_norm_estimate(rhs));
  return d;
}

}  // namespace detail

/// Coassociativity on the triple module (A- x A-) x A-. The middle-leg lift
/// acts through the compressed phi2 of the double; this is the associator
/// transport written out on elementary tensors.
inline CheckResult check_coassociativity(const QuantumGroupoidData& q, const FiberTensor& f,
                                         double tol = kDefaultTol) {
  TensorModule triple(f.module.module, f.loc, tol);
  const int da = q.A.dim();

  std::vector<SpMat> mult(da);
  for (int i = 0; i < da; ++i)
    mult[i] = to_sparse(left_mult_matrix(AlgebraElement::basis_element(q.A, i)));

  std::vector<SpMat> lift_delta(da), lift_phi1(da), lift_phi2(da), phi3(da);
  for (int i = 0; i < da; ++i) {
    lift_delta[i] = triple.compress_first(f.delta_op[i]);
    lift_phi1[i] = triple.compress_first(f.phi1[i]);
    lift_phi2[i] = triple.compress_first(f.phi2[i]);
    phi3[i] = triple.compress_second(mult[i]);
  }
  // hat23(e_c) = sum_j lift(phi2(x_j)) phi3(y_j) over the legs of e_c
  std::vector<SpMat> hat23(da);
  for (int c = 0; c < da; ++c) {
    SpMat acc(triple.dim(), triple.dim());
    for (const auto& leg : q.delta_legs[c])
      acc = acc + SpMat(HilbertBimodule::combine(lift_phi2, leg.first) *
                        HilbertBimodule::combine(phi3, leg.second));
    hat23[c] = std::move(acc);
  }

  std::vector<detail::OperatorDiff> slots(da);
  parallel_for(da, [&](int b) {
    SpMat lhs(triple.dim(), triple.dim());
    SpMat rhs(triple.dim(), triple.dim());
    for (const auto& leg : q.delta_legs[b]) {
      lhs = lhs + SpMat(HilbertBimodule::combine(lift_delta, leg.first) *
                        HilbertBimodule::combine(phi3, leg.second));
      rhs = rhs + SpMat(HilbertBimodule::combine(lift_phi1, leg.first) *
                        HilbertBimodule::combine(hat23, leg.second));
    }
    slots[b] = detail::op_diff(lhs, rhs);
  });

  ResidualGauge gauge("axiom.coassociativity");
  for (int b = 0; b < da; ++b)
    gauge.observe(slots[b].diff, slots[b].ref, "basis " + std::to_string(b));
  return gauge.result(tol);
}

/// Haar axiom: contracting the second leg of Delta(a) applied to the cyclic
/// vector against P recovers eta_t(P(a)).
inline Report check_haar(const QuantumGroupoidData& q, const FiberTensor& f,
                         double tol = kDefaultTol) {
  Report report;
  report.tolerance = tol;
  const int da = q.A.dim();

  auto contract = [&](const std::vector<TensorModule::PureTensor>& raw) {
    AlgebraElement acc = AlgebraElement::zero(q.A);
    for (const auto& term : raw) {
      AlgebraElement u = q.elem(term.first);
      AlgebraElement pv = q.haar.apply(q.elem(term.second));
      acc += term.coef * multiply(u, q.eta_s.apply(pv));
    }
    return acc;
  };

  {
    struct Slot {
      double diff, ref;
    };
    std::vector<Slot> slots(da);
    parallel_for(da, [&](int b) {
      CVector v = f.delta_op[b] * f.cyclic;
      AlgebraElement lhs = contract(f.module.representative(v));
      AlgebraElement rhs = q.eta_t.apply(q.haar.apply(AlgebraElement::basis_element(q.A, b)));
      slots[b] = Slot{(lhs - rhs).frob(), rhs.frob()};
    });
    ResidualGauge gauge("axiom.haar");
    for (int b = 0; b < da; ++b) gauge.observe(slots[b].diff, slots[b].ref, "basis " + std::to_string(b));
    report.checks.push_back(gauge.result(tol));
  }
  {
    // contraction well-definedness: balanced pairs agree, null vectors die
    ResidualGauge gauge("axiom.haar_contraction");
    for (int i = 0; i < da; ++i) {
      CVector ei = AlgebraElement::basis_element(q.A, i).coeffs();
      for (int l = 0; l < q.B.dim(); ++l) {
        AlgebraElement b = AlgebraElement::basis_element(q.B, l);
        CVector us = multiply(q.elem(ei), q.eta_s.apply(b)).coeffs();
        for (int j = 0; j < da; ++j) {
          CVector ej = AlgebraElement::basis_element(q.A, j).coeffs();
          CVector vt = multiply(q.elem(ej), q.eta_t.apply(b)).coeffs();
          AlgebraElement lhs = contract({TensorModule::PureTensor{us, ej, 1.0}});
          AlgebraElement rhs = contract({TensorModule::PureTensor{ei, vt, 1.0}});
          gauge.observe((lhs - rhs).frob(), std::max(rhs.frob(), 1.0),
                        "balanced (" + std::to_string(i) + "," + std::to_string(l) + "," +
                            std::to_string(j) + ")");
        }
      }
    }
    for (const auto& nv : f.module.null_basis())
      gauge.observe(contract(nv).frob(), 1.0, "null vector");
    report.checks.push_back(gauge.result(tol));
  }
  return report;
}

/// Coinverse axiom: the flip of (S x S) applied to the legs of Delta(a)
/// equals the legs of Delta(S a), compared as operators.
inline CheckResult check_coinverse(const QuantumGroupoidData& q, const FiberTensor& f,
                                   double tol = kDefaultTol) {
  const int da = q.A.dim();
  std::vector<detail::OperatorDiff> slots(da);
  parallel_for(da, [&](int b) {
    SpMat lhs(f.module.dim(), f.module.dim());
    for (const auto& leg : q.delta_legs[b]) {
      CVector s2 = q.coinverse.matrix * leg.second;
      CVector s1 = q.coinverse.matrix * leg.first;
      lhs = lhs + SpMat(f.phi1_of(s2) * f.phi2_of(s1));
    }
    CVector sb = q.coinverse.matrix * AlgebraElement::basis_element(q.A, b).coeffs();
    SpMat rhs = f.delta_of(sb);
    slots[b] = detail::op_diff(lhs, rhs);
  });
  ResidualGauge gauge("axiom.coinverse");
  for (int b = 0; b < da; ++b) gauge.observe(slots[b].diff, slots[b].ref, "basis " + std::to_string(b));

  // (S o *)^2 = id at operator level through the first leg homomorphism
  for (int b = 0; b < da; ++b) {
    AlgebraElement a = AlgebraElement::basis_element(q.A, b);
    CVector round = q.coinverse.matrix *
                    q.elem(q.coinverse.matrix * a.star().coeffs()).star().coeffs();
    SpMat lhs = f.phi1_of(round);
    SpMat rhs = f.phi1[b];
    auto d = detail::op_diff(lhs, rhs);
    gauge.observe(d.diff, d.ref, "(So*)^2 basis " + std::to_string(b));
  }
  return gauge.result(tol);
}

/// Coproduct structure: Delta is a unital *-homomorphism into the fiber
/// algebra and a morphism of bimodules.
inline Report check_delta_structure(const QuantumGroupoidData& q, const FiberTensor& f,
                                    double tol = kDefaultTol) {
  Report report;
  report.tolerance = tol;
  const int da = q.A.dim();

  {
    ResidualGauge gauge("delta.star_hom");
    SpMat ident(f.module.dim(), f.module.dim());
    ident.setIdentity();
    SpMat one = f.delta_of(AlgebraElement::unit(q.A).coeffs());
    gauge.observe(frobenius(SpMat(one - ident)), frobenius(ident), "unit");
    struct Slot {
      double diff = 0.0, ref = 0.0;
      std::string at;
    };
    std::vector<Slot> slots(da);
    parallel_for(da, [&](int i) {
      Slot s;
      AlgebraElement ei = AlgebraElement::basis_element(q.A, i);
      {
        SpMat lhs = SpMat(f.delta_op[i].adjoint());
        SpMat rhs = f.delta_of(ei.star().coeffs());
        double d = frobenius(SpMat(lhs - rhs)), r = frobenius(rhs);
        if (d > s.diff) s = Slot{d, r, "star basis " + std::to_string(i)};
        s.ref = std::max(s.ref, r);
      }
      for (int j = 0; j < da; ++j) {
        SpMat lhs = SpMat(f.delta_op[i] * f.delta_op[j]);
        SpMat rhs = f.delta_of(multiply(ei, AlgebraElement::basis_element(q.A, j)).coeffs());
        double d = frobenius(SpMat(lhs - rhs)), r = frobenius(rhs);
        if (d > s.diff) {
          s.diff = d;
          s.at = "product (" + std::to_string(i) + "," + std::to_string(j) + ")";
        }
        s.ref = std::max(s.ref, r);
      }
      slots[i] = s;
    });
    for (const auto& s : slots) gauge.observe(s.diff, s.ref, s.at);
    report.checks.push_back(gauge.result(tol));
  }
  {
    ResidualGauge gauge("delta.bimodule_morphism");
    for (int b = 0; b < q.B.dim(); ++b) {
      AlgebraElement eb = AlgebraElement::basis_element(q.B, b);
      CMatrix right_t = right_mult_matrix(q.eta_t.apply(eb));
      CMatrix right_s = right_mult_matrix(q.eta_s.apply(eb));
      for (int i = 0; i < da; ++i) {
        AlgebraElement ei = AlgebraElement::basis_element(q.A, i);
        {
          SpMat lhs = f.delta_of(multiply(ei, q.eta_t.apply(eb)).coeffs());
          SpMat rhs(f.module.dim(), f.module.dim());
          for (const auto& leg : q.delta_legs[i])
            rhs = rhs + SpMat(f.phi1_of(right_t * leg.first) * f.phi2_of(leg.second));
          double d = frobenius(SpMat(lhs - rhs));
          gauge.observe(d, frobenius(rhs),
                        "eta_t leg at (" + std::to_string(i) + "," + std::to_string(b) + ")");
        }
        {
          SpMat lhs = f.delta_of(multiply(ei, q.eta_s.apply(eb)).coeffs());
          SpMat rhs(f.module.dim(), f.module.dim());
          for (const auto& leg : q.delta_legs[i])
            rhs = rhs + SpMat(f.phi1_of(leg.first) * f.phi2_of(right_s * leg.second));
          double d = frobenius(SpMat(lhs - rhs));
          gauge.observe(d, frobenius(rhs),
                        "eta_s leg at (" + std::to_string(i) + "," + std::to_string(b) + ")");
        }
      }
    }
    report.checks.push_back(gauge.result(tol));
  }
  return report;
}

/// The full axiom suite for a candidate bundle.
inline Report verify_all(const QuantumGroupoidData& q, double tol = kDefaultTol) {
  Report report = validate_data(q, tol);
  report.notes.push_back(kPaxiomNote);
  report.notes.push_back(kCyclicNote);

  std::optional<FiberTensor> fiber;
  try {
    fiber.emplace(build_fiber_tensor(q, tol));
  } catch (const Error& err) {
    CheckResult c;
    c.name = "fiber.build";
    c.pass = false;
    c.max_residual = 1.0;
    c.witness = err.what();
    report.checks.push_back(c);
    return report;
  }
  report.append(fiber->certification);
  {
    CheckResult c;
    c.name = "fiber.module_dimension";
    c.witness = "dimension " + std::to_string(fiber->module.dim());
    report.checks.push_back(c);
  }

  GeneratedAlgebra gen = generated_algebra(*fiber, tol);
  {
    CheckResult c;
    c.name = "fiber.generated_algebra";
    c.pass = gen.stabilized;
    if (!gen.stabilized) c.max_residual = 1.0;
    c.witness = "dimension " + std::to_string(gen.dimension) + ", rounds " +
                std::to_string(gen.rounds);
    report.checks.push_back(c);
    if (gen.cyclic_rank != gen.dimension)
      report.notes.push_back("cyclic-vector evaluation is not injective on the generated algebra: rank " +
                             std::to_string(gen.cyclic_rank) + " of " + std::to_string(gen.dimension));
  }

  report.append(check_delta_structure(q, *fiber, tol));
  report.checks.push_back(check_coassociativity(q, *fiber, tol));
  report.append(check_haar(q, *fiber, tol));
  report.checks.push_back(check_coinverse(q, *fiber, tol));
  return report;
}

}  // namespace qgroupoid
