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
#include <utility>
#include <vector>

#include "qgroupoid/groupoid.hpp"
#include "qgroupoid/quantum_groupoid.hpp"

namespace qgroupoid {

/// Full dual package of a finite groupoid: the commutative function algebras
/// A = C(arrows), B = C(objects) with the pullback embeddings, inverse
/// pullback, fiber integration and the coproduct in leg form; plus the
/// counit, which exists only commutatively.
struct GroupoidDual {
  FiniteGroupoid groupoid;
  HaarSystem haar;
  QuantumGroupoidData data;
  LinearMap counit;  // A -> B
  std::vector<std::pair<int, int>> gamma2;
};

inline GroupoidDual build_dual(const FiniteGroupoid& g, const HaarSystem& h) {
  const int na = g.num_arrows();
  const int no = g.num_objects();
  GroupoidDual d;
  d.groupoid = g;
  d.haar = h;
  d.gamma2 = composable_pairs(g);

  CStarAlgebra a = function_algebra(na, "C(arrows)");
  CStarAlgebra b = function_algebra(no, "C(objects)");

  CMatrix es = CMatrix::Zero(na, no), et = CMatrix::Zero(na, no);
  for (int x = 0; x < na; ++x) {
    es(x, g.src[x]) = 1.0;
    et(x, g.tgt[x]) = 1.0;
  }
  CMatrix eps = CMatrix::Zero(no, na);
  for (int q = 0; q < no; ++q)
    if (g.identity[q] >= 0 && g.identity[q] < na) eps(q, g.identity[q]) = 1.0;
  CMatrix s = CMatrix::Zero(na, na);
  for (int x = 0; x < na; ++x)
    if (g.inverse[x] >= 0 && g.inverse[x] < na) s(g.inverse[x], x) = 1.0;
  CMatrix p = CMatrix::Zero(no, na);
  for (int x = 0; x < na; ++x) p(g.tgt[x], x) += h.weights[g.tgt[x]];

  d.data.A = a;
  d.data.B = b;
  d.data.eta_s = LinearMap(b, a, es, MapKind::hom);
  d.data.eta_t = LinearMap(b, a, et, MapKind::antihom);
  d.data.haar = LinearMap(a, b, p, MapKind::plain);
  d.data.coinverse = LinearMap(a, a, s, MapKind::antihom);
  d.counit = LinearMap(a, b, eps, MapKind::hom);

  d.data.delta_legs.assign(na, {});
  for (const auto& [x, y] : d.gamma2) {
    int z = g.compose_at(x, y);
    if (z < 0 || z >= na) continue;
    CVector ex = CVector::Zero(na), ey = CVector::Zero(na);
    ex(x) = 1.0;
    ey(y) = 1.0;
    d.data.delta_legs[z].emplace_back(ex, ey);
  }
  return d;
}

/// Counit axioms in leg form plus the bimodule-morphism property of the
/// counit, all at the element level.
inline Report check_counit(const GroupoidDual& d, double tol = kDefaultTol) {
  Report report;
  report.tolerance = tol;
  const auto& q = d.data;
  const int na = q.A.dim();

  {
    ResidualGauge gauge("dual.counit");
    for (int b = 0; b < na; ++b) {
      AlgebraElement a = AlgebraElement::basis_element(q.A, b);
      AlgebraElement lhs1 = AlgebraElement::zero(q.A);
      AlgebraElement lhs2 = AlgebraElement::zero(q.A);
      for (const auto& leg : q.delta_legs[b]) {
        AlgebraElement a1 = q.elem(leg.first), a2 = q.elem(leg.second);
        lhs1 += multiply(a1, q.eta_s.apply(d.counit.apply(a2)));
        lhs2 += multiply(q.eta_t.apply(d.counit.apply(a1)), a2);
      }
      gauge.observe((lhs1 - a).frob(), a.frob(), "right slice at basis " + std::to_string(b));
      gauge.observe((lhs2 - a).frob(), a.frob(), "left slice at basis " + std::to_string(b));
    }
    report.checks.push_back(gauge.result(tol));
  }
  {
    ResidualGauge gauge("dual.counit_bimodule");
    for (int l = 0; l < q.B.dim(); ++l) {
      AlgebraElement b = AlgebraElement::basis_element(q.B, l);
      for (int i = 0; i < na; ++i) {
        AlgebraElement a = AlgebraElement::basis_element(q.A, i);
        AlgebraElement lhs = d.counit.apply(multiply(a, q.eta_t.apply(b)));
        AlgebraElement rhs = multiply(b, d.counit.apply(a));
        gauge.observe((lhs - rhs).frob(), rhs.frob(),
                      "eta_t at (" + std::to_string(i) + "," + std::to_string(l) + ")");
        AlgebraElement lhs2 = d.counit.apply(multiply(a, q.eta_s.apply(b)));
        AlgebraElement rhs2 = multiply(d.counit.apply(a), b);
        gauge.observe((lhs2 - rhs2).frob(), rhs2.frob(),
                      "eta_s at (" + std::to_string(i) + "," + std::to_string(l) + ")");
      }
    }
    report.checks.push_back(gauge.result(tol));
  }
  return report;
}

/// The finite-scale fiber-algebra identification: the operators
/// phi1(delta_x) phi2(delta_y) over composable pairs form a complete
/// orthogonal family of nonzero self-adjoint idempotents summing to the
/// identity, hence a *-isomorphism onto the functions on composable pairs.
inline Report check_iso_gamma2(const GroupoidDual& d, const FiberTensor& f,
                               const GeneratedAlgebra& gen, double tol = kDefaultTol) {
  Report report;
  report.tolerance = tol;
  {
    CheckResult c;
    c.name = "dual.gamma2_dimension";
    c.pass = gen.stabilized && gen.dimension == static_cast<int>(d.gamma2.size());
    if (!c.pass) c.max_residual = 1.0;
    c.witness = "generated dimension " + std::to_string(gen.dimension) + ", composable pairs " +
                std::to_string(d.gamma2.size());
    if (c.pass) c.witness.clear();
    report.checks.push_back(c);
  }
  {
    ResidualGauge gauge("dual.gamma2_iso");
    const int na = d.data.A.dim();
    std::vector<SpMat> ops;
    ops.reserve(d.gamma2.size());
    for (const auto& [x, y] : d.gamma2) {
      CVector ex = CVector::Zero(na), ey = CVector::Zero(na);
      ex(x) = 1.0;
      ey(y) = 1.0;
      ops.push_back(SpMat(f.phi1_of(ex) * f.phi2_of(ey)));
    }
    for (size_t i = 0; i < ops.size(); ++i) {
      double nrm = frobenius(ops[i]);
      std::string at = "pair (" + d.groupoid.arrows[d.gamma2[i].first] + "," +
                       d.groupoid.arrows[d.gamma2[i].second] + ")";
      if (nrm < 0.5) gauge.observe(1.0, 1.0, "vanishing indicator at " + at);
      gauge.observe(frobenius(SpMat(SpMat(ops[i] * ops[i]) - ops[i])), 1.0, "idempotent at " + at);
      gauge.observe(frobenius(SpMat(SpMat(ops[i].adjoint()) - ops[i])), 1.0, "self-adjoint at " + at);
    }
    for (size_t i = 0; i < ops.size(); ++i)
      for (size_t j = i + 1; j < ops.size(); ++j)
        gauge.observe(frobenius(SpMat(ops[i] * ops[j])), 1.0,
                      "orthogonality at pair indices " + std::to_string(i) + "," + std::to_string(j));
    SpMat sum(f.module.dim(), f.module.dim());
    for (const auto& op : ops) sum = sum + op;
    SpMat ident(f.module.dim(), f.module.dim());
    ident.setIdentity();
    gauge.observe(frobenius(SpMat(sum - ident)), frobenius(ident), "resolution of identity");
    report.checks.push_back(gauge.result(tol));
  }
  return report;
}

/// Group-mode identities (single object): the counit package (orco), (Seta),
/// (A21) and the Haar package (ginv), (toberep), plus (antipode). Legs are
/// compared in the full algebraic tensor square, which is exact over a
/// one-dimensional base.
inline Report check_group_mode(const GroupoidDual& d, double tol = kDefaultTol) {
  if (d.data.B.dim() != 1)
    throw Error(ErrorCode::NotGroupMode, "base algebra has dimension " +
                                             std::to_string(d.data.B.dim()));
  Report report;
  report.tolerance = tol;
  const auto& q = d.data;
  const int na = q.A.dim();
  const CMatrix& s = q.coinverse.matrix;
  AlgebraElement one = AlgebraElement::unit(q.A);

  auto leg_matrix = [&](const CVector& coeffs) {
    CMatrix m = CMatrix::Zero(na, na);
    for (int b = 0; b < na; ++b) {
      if (coeffs(b) == cd(0.0)) continue;
      for (const auto& leg : q.delta_legs[b]) m += coeffs(b) * (leg.first * leg.second.transpose());
    }
    return m;
  };

  {
    ResidualGauge gauge("group.orco");
    for (int b = 0; b < na; ++b) {
      AlgebraElement lhs1 = AlgebraElement::zero(q.A), lhs2 = AlgebraElement::zero(q.A);
      for (const auto& leg : q.delta_legs[b]) {
        lhs1 += multiply(q.elem(leg.first), q.elem(s * leg.second));
        lhs2 += multiply(q.elem(s * leg.first), q.elem(leg.second));
      }
      cd eps = d.counit.apply(AlgebraElement::basis_element(q.A, b)).coeffs()(0);
      AlgebraElement rhs = eps * one;
      gauge.observe((lhs1 - rhs).frob(), one.frob(), "id(x)S at basis " + std::to_string(b));
      gauge.observe((lhs2 - rhs).frob(), one.frob(), "S(x)id at basis " + std::to_string(b));
    }
    report.checks.push_back(gauge.result(tol));
  }
  {
    ResidualGauge gauge("group.seta");
    AlgebraElement lhs = q.elem(s * one.coeffs());
    gauge.observe((lhs - one).frob(), one.frob(), "unit");
    report.checks.push_back(gauge.result(tol));
  }
  {
    ResidualGauge gauge("group.ginv");
    for (int b = 0; b < na; ++b) {
      CVector eb = CVector::Zero(na);
      eb(b) = 1.0;
      CMatrix lhs = s * leg_matrix(eb).transpose() * s.transpose();
      CMatrix rhs = leg_matrix(s * eb);
      gauge.observe((lhs - rhs).norm(), rhs.norm(), "basis " + std::to_string(b));
    }
    report.checks.push_back(gauge.result(tol));
  }
  {
    ResidualGauge gauge("group.toberep");
    for (int b = 0; b < na; ++b) {
      AlgebraElement lhs1 = AlgebraElement::zero(q.A), lhs2 = AlgebraElement::zero(q.A);
      for (const auto& leg : q.delta_legs[b]) {
        cd p2 = (q.haar.matrix * leg.second)(0);
        cd p1 = (q.haar.matrix * leg.first)(0);
        lhs1 += p2 * q.elem(leg.first);
        lhs2 += p1 * q.elem(leg.second);
      }
      cd pb = (q.haar.matrix * AlgebraElement::basis_element(q.A, b).coeffs())(0);
      AlgebraElement rhs = pb * one;
      gauge.observe((lhs1 - rhs).frob(), std::max(1.0, rhs.frob()),
                    "id(x)P at basis " + std::to_string(b));
      gauge.observe((lhs2 - rhs).frob(), std::max(1.0, rhs.frob()),
                    "P(x)id at basis " + std::to_string(b));
    }
    report.checks.push_back(gauge.result(tol));
  }
  {
    ResidualGauge gauge("group.antipode");
    for (int b = 0; b < na; ++b) {
      AlgebraElement a = AlgebraElement::basis_element(q.A, b);
      AlgebraElement round = q.elem(s * q.elem(s * a.star().coeffs()).star().coeffs());
      gauge.observe((round - a).frob(), a.frob(), "basis " + std::to_string(b));
    }
    report.checks.push_back(gauge.result(tol));
  }
  {
    // full-tensor coassociativity (A21): legs of legs match on both sides
    ResidualGauge gauge("group.coassoc_full");
    for (int b = 0; b < na; ++b) {
      CVector lhs = CVector::Zero(na * na * na), rhs = CVector::Zero(na * na * na);
      for (const auto& leg : q.delta_legs[b]) {
        for (int c = 0; c < na; ++c) {
          if (leg.first(c) == cd(0.0)) continue;
          for (const auto& inner : q.delta_legs[c])
            for (int i = 0; i < na; ++i)
              for (int j = 0; j < na; ++j)
                for (int k = 0; k < na; ++k)
                  lhs(i * na * na + j * na + k) +=
                      leg.first(c) * inner.first(i) * inner.second(j) * leg.second(k);
        }
        for (int c = 0; c < na; ++c) {
          if (leg.second(c) == cd(0.0)) continue;
          for (const auto& inner : q.delta_legs[c])
            for (int i = 0; i < na; ++i)
              for (int j = 0; j < na; ++j)
                for (int k = 0; k < na; ++k)
                  rhs(i * na * na + j * na + k) +=
                      leg.first(i) * inner.first(j) * inner.second(k) * leg.second(c);
        }
      }
      gauge.observe((lhs - rhs).norm(), rhs.norm(), "basis " + std::to_string(b));
    }
    report.checks.push_back(gauge.result(tol));
  }
  return report;
}

/// Everything a commutative instance must satisfy: groupoid axioms, Haar
/// invariance, the full quantum axiom suite, counit laws, the fiber-algebra
/// identification, and in group mode both classical packages.
inline Report verify_dual(const GroupoidDual& d, double tol = kDefaultTol) {
  Report report;
  report.tolerance = tol;
  report.append(validate(d.groupoid));
  report.checks.push_back(haar_left_invariance(d.groupoid, d.haar, tol));
  {
    LinearMap et_hom = d.data.eta_t;
    et_hom.kind = MapKind::hom;
    CheckResult hom = verify_kind(et_hom, tol);
    et_hom.kind = MapKind::antihom;
    CheckResult anti = verify_kind(et_hom, tol);
    CheckResult c;
    c.name = "dual.eta_t_both_kinds";
    c.max_residual = std::max(hom.max_residual, anti.max_residual);
    c.scale = std::max(hom.scale, anti.scale);
    c.pass = hom.pass && anti.pass;
    if (!c.pass) c.witness = hom.pass ? anti.witness : hom.witness;
    report.checks.push_back(c);
  }
  report.append(verify_all(d.data, tol));
  report.append(check_counit(d, tol));
  try {
    FiberTensor f = build_fiber_tensor(d.data, tol);
    GeneratedAlgebra gen = generated_algebra(f, tol);
    report.append(check_iso_gamma2(d, f, gen, tol));
  } catch (const Error& err) {
    CheckResult c;
    c.name = "dual.gamma2_iso";
    c.pass = false;
    c.max_residual = 1.0;
    c.witness = err.what();
    report.checks.push_back(c);
  }
  if (d.data.B.dim() == 1) report.append(check_group_mode(d, tol));
  return report;
}

}  // namespace qgroupoid
