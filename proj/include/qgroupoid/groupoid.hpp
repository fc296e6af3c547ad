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

#include <array>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "qgroupoid/matrix_kernel.hpp"
#include "qgroupoid/report.hpp"

namespace qgroupoid {

/// Finite groupoid: objects, arrows, source/target, a partial composition
/// table, identities and inverses. Identities and inverses are supplied
/// explicitly; validate() verifies rather than infers.
struct FiniteGroupoid {
  std::vector<std::string> objects;
  std::vector<std::string> arrows;
  std::vector<int> src;       // arrow -> object
  std::vector<int> tgt;       // arrow -> object
  std::vector<int> compose;   // arrows x arrows, row-major; -1 where undefined
  std::vector<int> identity;  // object -> arrow
  std::vector<int> inverse;   // arrow -> arrow

  int num_objects() const { return static_cast<int>(objects.size()); }
  int num_arrows() const { return static_cast<int>(arrows.size()); }

  int compose_at(int x, int y) const { return compose[x * num_arrows() + y]; }
  void set_compose(int x, int y, int z) { compose[x * num_arrows() + y] = z; }

  int object_index(const std::string& id) const {
    for (int i = 0; i < num_objects(); ++i)
      if (objects[i] == id) return i;
    throw Error(ErrorCode::BadParams, "unknown object id " + id);
  }
  int arrow_index(const std::string& id) const {
    for (int i = 0; i < num_arrows(); ++i)
      if (arrows[i] == id) return i;
    throw Error(ErrorCode::BadParams, "unknown arrow id " + id);
  }

  std::vector<int> t_fiber(int q) const {
    std::vector<int> f;
    for (int x = 0; x < num_arrows(); ++x)
      if (tgt[x] == q) f.push_back(x);
    return f;
  }
  std::vector<int> s_fiber(int q) const {
    std::vector<int> f;
    for (int x = 0; x < num_arrows(); ++x)
      if (src[x] == q) f.push_back(x);
    return f;
  }

  /// Orbit (connected component) label per object.
  std::vector<int> orbit_of_object() const {
    std::vector<int> root(num_objects());
    for (int i = 0; i < num_objects(); ++i) root[i] = i;
    std::function<int(int)> find = [&](int a) {
      while (root[a] != a) a = root[a] = root[root[a]];
      return a;
    };
    for (int x = 0; x < num_arrows(); ++x) {
      int a = find(src[x]), b = find(tgt[x]);
      if (a != b) root[std::max(a, b)] = std::min(a, b);
    }
    std::vector<int> lab(num_objects());
    for (int i = 0; i < num_objects(); ++i) lab[i] = find(i);
    return lab;
  }
};

inline std::vector<std::pair<int, int>> composable_pairs(const FiniteGroupoid& g) {
  std::vector<std::pair<int, int>> pairs;
  for (int x = 0; x < g.num_arrows(); ++x)
    for (int y = 0; y < g.num_arrows(); ++y)
      if (g.src[x] == g.tgt[y]) pairs.emplace_back(x, y);
  return pairs;
}

inline std::vector<std::array<int, 3>> composable_triples(const FiniteGroupoid& g) {
  std::vector<std::array<int, 3>> triples;
  for (int x = 0; x < g.num_arrows(); ++x)
    for (int y = 0; y < g.num_arrows(); ++y) {
      if (g.src[x] != g.tgt[y]) continue;
      for (int z = 0; z < g.num_arrows(); ++z)
        if (g.src[y] == g.tgt[z]) triples.push_back({x, y, z});
    }
  return triples;
}

inline Report validate(const FiniteGroupoid& g) {
  Report report;
  auto fail = [](const std::string& name, const std::string& witness) {
    CheckResult c;
    c.name = name;
    c.max_residual = 1.0;
    c.pass = false;
    c.witness = witness;
    return c;
  };
  auto ok = [](const std::string& name) {
    CheckResult c;
    c.name = name;
    return c;
  };

  const int na = g.num_arrows();
  {
    CheckResult c = ok("groupoid.composability_domain");
    for (int x = 0; x < na && c.pass; ++x)
      for (int y = 0; y < na && c.pass; ++y) {
        bool defined = g.compose_at(x, y) >= 0;
        bool should = g.src[x] == g.tgt[y];
        if (defined != should)
          c = fail("groupoid.composability_domain",
                   "(" + g.arrows[x] + "," + g.arrows[y] + ")" +
                       (defined ? " defined but not composable" : " composable but undefined"));
      }
    report.checks.push_back(c);
  }
  {
    CheckResult c = ok("groupoid.source_target_of_product");
    for (int x = 0; x < na && c.pass; ++x)
      for (int y = 0; y < na && c.pass; ++y) {
        int z = g.compose_at(x, y);
        if (z < 0) continue;
        if (g.tgt[z] != g.tgt[x] || g.src[z] != g.src[y])
          c = fail("groupoid.source_target_of_product",
                   "(" + g.arrows[x] + "," + g.arrows[y] + ") -> " + g.arrows[z]);
      }
    report.checks.push_back(c);
  }
  {
    CheckResult c = ok("groupoid.associativity");
    for (const auto& t : composable_triples(g)) {
      int xy = g.compose_at(t[0], t[1]);
      int yz = g.compose_at(t[1], t[2]);
      if (xy < 0 || yz < 0) continue;  // reported by the domain check
      int lhs = g.compose_at(xy, t[2]);
      int rhs = g.compose_at(t[0], yz);
      if (lhs != rhs || lhs < 0) {
        c = fail("groupoid.associativity", "(" + g.arrows[t[0]] + "," + g.arrows[t[1]] + "," +
                                               g.arrows[t[2]] + ")");
        break;
      }
    }
    report.checks.push_back(c);
  }
  {
    CheckResult c = ok("groupoid.identity_section");
    for (int q = 0; q < g.num_objects() && c.pass; ++q) {
      int i = g.identity[q];
      if (i < 0 || i >= na || g.src[i] != q || g.tgt[i] != q)
        c = fail("groupoid.identity_section", g.objects[q]);
    }
    report.checks.push_back(c);
  }
  {
    CheckResult c = ok("groupoid.unit_law");
    for (int x = 0; x < na && c.pass; ++x) {
      int right = g.compose_at(x, g.identity[g.src[x]]);
      int left = g.compose_at(g.identity[g.tgt[x]], x);
      if (right != x || left != x) c = fail("groupoid.unit_law", g.arrows[x]);
    }
    report.checks.push_back(c);
  }
  {
    CheckResult c = ok("groupoid.inverse_law");
    for (int x = 0; x < na && c.pass; ++x) {
      int inv = g.inverse[x];
      if (inv < 0 || inv >= na) {
        c = fail("groupoid.inverse_law", g.arrows[x]);
        break;
      }
      if (g.compose_at(x, inv) != g.identity[g.tgt[x]] ||
          g.compose_at(inv, x) != g.identity[g.src[x]])
        c = fail("groupoid.inverse_law", g.arrows[x]);
    }
    report.checks.push_back(c);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Instance generators
// ---------------------------------------------------------------------------

struct GroupTable {
  std::vector<std::vector<int>> mult;
  int unit = 0;

  int order() const { return static_cast<int>(mult.size()); }

  void verify() const {
    int n = order();
    if (n == 0) throw Error(ErrorCode::BadGroupTable, "empty table");
    for (const auto& row : mult)
      if (static_cast<int>(row.size()) != n) throw Error(ErrorCode::BadGroupTable, "ragged table");
    for (int i = 0; i < n; ++i) {
      std::vector<bool> seen_row(n, false), seen_col(n, false);
      for (int j = 0; j < n; ++j) {
        int r = mult[i][j], c = mult[j][i];
        if (r < 0 || r >= n || c < 0 || c >= n) throw Error(ErrorCode::BadGroupTable, "entry range");
        if (seen_row[r] || seen_col[c]) throw Error(ErrorCode::BadGroupTable, "not a Latin square");
        seen_row[r] = seen_col[c] = true;
      }
    }
    if (unit < 0 || unit >= n) throw Error(ErrorCode::BadGroupTable, "unit out of range");
    for (int i = 0; i < n; ++i)
      if (mult[unit][i] != i || mult[i][unit] != i)
        throw Error(ErrorCode::BadGroupTable, "unit law fails");
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k)
          if (mult[mult[i][j]][k] != mult[i][mult[j][k]])
            throw Error(ErrorCode::BadGroupTable, "not associative");
  }

  int inv(int i) const {
    for (int j = 0; j < order(); ++j)
      if (mult[i][j] == unit) return j;
    throw Error(ErrorCode::BadGroupTable, "missing inverse");
  }
};

inline GroupTable cyclic_table(int n) {
  if (n <= 0) throw Error(ErrorCode::BadParams, "order must be positive");
  GroupTable t;
  t.mult.assign(n, std::vector<int>(n));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) t.mult[i][j] = (i + j) % n;
  return t;
}

/// Multiplication table of a set of permutations closed under composition.
inline GroupTable permutation_table(const std::vector<std::vector<int>>& perms) {
  int n = static_cast<int>(perms.size());
  GroupTable t;
  t.mult.assign(n, std::vector<int>(n, -1));
  auto compose = [&](const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> c(a.size());
    for (size_t i = 0; i < a.size(); ++i) c[i] = a[b[i]];
    return c;
  };
  for (int i = 0; i < n; ++i) {
    bool idp = true;
    for (size_t k = 0; k < perms[i].size(); ++k)
      if (perms[i][k] != static_cast<int>(k)) idp = false;
    if (idp) t.unit = i;
    for (int j = 0; j < n; ++j) {
      auto c = compose(perms[i], perms[j]);
      int idx = -1;
      for (int k = 0; k < n; ++k)
        if (perms[k] == c) idx = k;
      if (idx < 0) throw Error(ErrorCode::BadGroupTable, "permutation set not closed");
      t.mult[i][j] = idx;
    }
  }
  t.verify();
  return t;
}

inline GroupTable s3_table() {
  std::vector<std::vector<int>> perms = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2},
                                         {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
  return permutation_table(perms);
}

inline FiniteGroupoid trivial_groupoid() {
  FiniteGroupoid g;
  g.objects = {"q0"};
  g.arrows = {"e"};
  g.src = {0};
  g.tgt = {0};
  g.compose = {0};
  g.identity = {0};
  g.inverse = {0};
  return g;
}

/// Pair groupoid on n points: arrow (i,j) is the unique arrow j -> i.
inline FiniteGroupoid pair_groupoid(int n) {
  if (n <= 0) throw Error(ErrorCode::BadParams, "pair groupoid needs n >= 1");
  FiniteGroupoid g;
  for (int i = 0; i < n; ++i) g.objects.push_back("q" + std::to_string(i));
  auto aidx = [n](int i, int j) { return i * n + j; };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      g.arrows.push_back("a" + std::to_string(i) + "_" + std::to_string(j));
      g.tgt.push_back(i);
      g.src.push_back(j);
    }
  int na = n * n;
  g.compose.assign(na * na, -1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) g.set_compose(aidx(i, j), aidx(j, k), aidx(i, k));
  for (int i = 0; i < n; ++i) g.identity.push_back(aidx(i, i));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g.inverse.push_back(aidx(j, i));
  return g;
}

inline FiniteGroupoid group_groupoid(const GroupTable& table, const std::string& name = "g") {
  table.verify();
  int n = table.order();
  FiniteGroupoid g;
  g.objects = {"q0"};
  for (int i = 0; i < n; ++i) g.arrows.push_back(name + std::to_string(i));
  g.src.assign(n, 0);
  g.tgt.assign(n, 0);
  g.compose.assign(n * n, -1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g.set_compose(i, j, table.mult[i][j]);
  g.identity = {table.unit};
  for (int i = 0; i < n; ++i) g.inverse.push_back(table.inv(i));
  return g;
}

/// Action groupoid of a group acting by permutations on a finite set.
/// Arrows are (g, p) with source p and target g.p.
inline FiniteGroupoid action_groupoid(const GroupTable& table,
                                      const std::vector<std::vector<int>>& action,
                                      int num_points) {
  table.verify();
  int n = table.order();
  if (static_cast<int>(action.size()) != n) throw Error(ErrorCode::NotAnAction, "one permutation per group element");
  for (const auto& perm : action) {
    if (static_cast<int>(perm.size()) != num_points) throw Error(ErrorCode::NotAnAction, "permutation arity");
    std::vector<bool> seen(num_points, false);
    for (int p : perm) {
      if (p < 0 || p >= num_points || seen[p]) throw Error(ErrorCode::NotAnAction, "not a permutation");
      seen[p] = true;
    }
  }
  for (int p = 0; p < num_points; ++p)
    if (action[table.unit][p] != p) throw Error(ErrorCode::NotAnAction, "unit must act trivially");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int p = 0; p < num_points; ++p)
        if (action[table.mult[i][j]][p] != action[i][action[j][p]])
          throw Error(ErrorCode::NotAnAction, "action is not a homomorphism");

  FiniteGroupoid g;
  for (int p = 0; p < num_points; ++p) g.objects.push_back("p" + std::to_string(p));
  auto aidx = [num_points](int gi, int p) { return gi * num_points + p; };
  for (int gi = 0; gi < n; ++gi)
    for (int p = 0; p < num_points; ++p) {
      g.arrows.push_back("g" + std::to_string(gi) + "@p" + std::to_string(p));
      g.src.push_back(p);
      g.tgt.push_back(action[gi][p]);
    }
  int na = n * num_points;
  g.compose.assign(na * na, -1);
  for (int gi = 0; gi < n; ++gi)
    for (int gj = 0; gj < n; ++gj)
      for (int p = 0; p < num_points; ++p)
        g.set_compose(aidx(gi, action[gj][p]), aidx(gj, p), aidx(table.mult[gi][gj], p));
  for (int p = 0; p < num_points; ++p) g.identity.push_back(aidx(table.unit, p));
  for (int gi = 0; gi < n; ++gi)
    for (int p = 0; p < num_points; ++p)
      g.inverse.push_back(aidx(table.inv(gi), action[gi][p]));
  return g;
}

inline FiniteGroupoid disjoint_union(const FiniteGroupoid& a, const FiniteGroupoid& b) {
  FiniteGroupoid g;
  for (const auto& o : a.objects) g.objects.push_back("A." + o);
  for (const auto& o : b.objects) g.objects.push_back("B." + o);
  for (const auto& x : a.arrows) g.arrows.push_back("A." + x);
  for (const auto& x : b.arrows) g.arrows.push_back("B." + x);
  int oa = a.num_objects(), na = a.num_arrows(), nb = b.num_arrows();
  for (int x = 0; x < na; ++x) {
    g.src.push_back(a.src[x]);
    g.tgt.push_back(a.tgt[x]);
  }
  for (int x = 0; x < nb; ++x) {
    g.src.push_back(oa + b.src[x]);
    g.tgt.push_back(oa + b.tgt[x]);
  }
  int n = na + nb;
  g.compose.assign(n * n, -1);
  for (int x = 0; x < na; ++x)
    for (int y = 0; y < na; ++y)
      if (a.compose_at(x, y) >= 0) g.set_compose(x, y, a.compose_at(x, y));
  for (int x = 0; x < nb; ++x)
    for (int y = 0; y < nb; ++y)
      if (b.compose_at(x, y) >= 0) g.set_compose(na + x, na + y, na + b.compose_at(x, y));
  for (int q = 0; q < oa; ++q) g.identity.push_back(a.identity[q]);
  for (int q = 0; q < b.num_objects(); ++q) g.identity.push_back(na + b.identity[q]);
  for (int x = 0; x < na; ++x) g.inverse.push_back(a.inverse[x]);
  for (int x = 0; x < nb; ++x) g.inverse.push_back(na + b.inverse[x]);
  return g;
}

// ---------------------------------------------------------------------------
// Haar systems
// ---------------------------------------------------------------------------

enum class HaarMode { counting, normalized };

/// Weights per object; uniform mass assigned to each point of the t-fiber.
struct HaarSystem {
  std::vector<double> weights;
  HaarMode mode = HaarMode::normalized;
};

inline HaarSystem haar_system(const FiniteGroupoid& g, HaarMode mode = HaarMode::normalized) {
  HaarSystem h;
  h.mode = mode;
  h.weights.resize(g.num_objects());
  for (int q = 0; q < g.num_objects(); ++q) {
    int fiber = static_cast<int>(g.t_fiber(q).size());
    if (fiber == 0) throw Error(ErrorCode::BadParams, "object with empty t-fiber: " + g.objects[q]);
    h.weights[q] = mode == HaarMode::counting ? 1.0 : 1.0 / fiber;
  }
  return h;
}

/// Guard for user-supplied weights: left invariance forces w constant on
/// orbits.
inline HaarSystem haar_system_from_weights(const FiniteGroupoid& g, std::vector<double> weights) {
  if (static_cast<int>(weights.size()) != g.num_objects())
    throw Error(ErrorCode::BadParams, "one weight per object expected");
  for (double w : weights)
    if (!(w > 0.0)) throw Error(ErrorCode::BadParams, "weights must be positive");
  auto orbit = g.orbit_of_object();
  for (int q = 0; q < g.num_objects(); ++q)
    for (int r = 0; r < g.num_objects(); ++r)
      if (orbit[q] == orbit[r] && std::abs(weights[q] - weights[r]) > 1e-12 * std::max(weights[q], 1.0))
        throw Error(ErrorCode::WeightNotOrbitConstant,
                    g.objects[q] + " vs " + g.objects[r]);
  HaarSystem h;
  h.weights = std::move(weights);
  return h;
}

/// Left invariance on the indicator basis: for every arrow a and indicator
/// f = delta_z, the mass of f pulled through left translation by a matches
/// the mass over the target fiber.
inline CheckResult haar_left_invariance(const FiniteGroupoid& g, const HaarSystem& h,
                                        double tol = kDefaultTol) {
  ResidualGauge gauge("haar.left_invariance");
  for (int a = 0; a < g.num_arrows(); ++a) {
    for (int z = 0; z < g.num_arrows(); ++z) {
      double lhs = 0.0, rhs = 0.0;
      for (int y : g.t_fiber(g.src[a])) {
        int ay = g.compose_at(a, y);
        if (ay == z) lhs += h.weights[g.src[a]];
      }
      if (g.tgt[z] == g.tgt[a]) rhs = h.weights[g.tgt[a]];
      gauge.observe(std::abs(lhs - rhs), std::abs(rhs),
                    "arrow " + g.arrows[a] + ", indicator " + g.arrows[z]);
    }
  }
  return gauge.result(tol);
}

}  // namespace qgroupoid
