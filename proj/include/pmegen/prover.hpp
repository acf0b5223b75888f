#pragma once

// Property reasoning over block expressions: structural propagation for
// triangular/diagonal/symmetric guards, size inference, and the bounded
// rewrite search that establishes SPD-ness from tautologies.

#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "pmegen/expr.hpp"
#include "pmegen/opspec.hpp"
#include "pmegen/partition.hpp"
#include "pmegen/size.hpp"

namespace pmegen {

using PropertyMap = std::map<std::string, PropertySet>;

namespace detail {

inline bool atom_has(const Expr& e, const PropertyMap& props, Property p) {
  if (!e.is(Op::Operand)) return false;
  auto it = props.find(e.name());
  return it != props.end() && it->second.count(p) > 0;
}

}  // namespace detail

// Structural propagation: atoms carry their block properties, Zero is
// everything, transpose flips lower/upper, and sums/negations preserve.

inline bool is_lower(const Expr& e, const PropertyMap& props);
inline bool is_upper(const Expr& e, const PropertyMap& props);

inline bool is_diagonal(const Expr& e, const PropertyMap& props) {
  switch (e.op()) {
    case Op::Zero: return true;
    case Op::Operand: return detail::atom_has(e, props, Property::Diagonal);
    case Op::Transpose:
    case Op::Minus: return is_diagonal(e[0], props);
    case Op::Plus:
      for (const auto& t : e.children())
        if (!is_diagonal(t, props)) return false;
      return true;
    default: return false;
  }
}

inline bool is_lower(const Expr& e, const PropertyMap& props) {
  switch (e.op()) {
    case Op::Zero: return true;
    case Op::Operand:
      return detail::atom_has(e, props, Property::LowerTriangular) || detail::atom_has(e, props, Property::Diagonal);
    case Op::Transpose: return is_upper(e[0], props);
    case Op::Minus: return is_lower(e[0], props);
    case Op::Plus:
      for (const auto& t : e.children())
        if (!is_lower(t, props)) return false;
      return true;
    default: return false;
  }
}

inline bool is_upper(const Expr& e, const PropertyMap& props) {
  switch (e.op()) {
    case Op::Zero: return true;
    case Op::Operand:
      return detail::atom_has(e, props, Property::UpperTriangular) || detail::atom_has(e, props, Property::Diagonal);
    case Op::Transpose: return is_lower(e[0], props);
    case Op::Minus: return is_upper(e[0], props);
    case Op::Plus:
      for (const auto& t : e.children())
        if (!is_upper(t, props)) return false;
      return true;
    default: return false;
  }
}

inline bool is_symmetric_atom(const Expr& e, const PropertyMap& props) {
  return detail::atom_has(e, props, Property::Symmetric) || detail::atom_has(e, props, Property::SPD) ||
         detail::atom_has(e, props, Property::Diagonal);
}

/// Drops transposes on symmetric atoms (trans(A) -> A, trans(inv A) -> inv A).
inline Expr drop_symmetric_transposes(const Expr& e, const PropertyMap& props) {
  if (e.is(Op::Transpose)) {
    const Expr& a = e[0];
    if (is_symmetric_atom(a, props)) return a;
    if (a.is(Op::Inverse) && is_symmetric_atom(a[0], props)) return a;
  }
  if (e.size() == 0) return e;
  bool changed = false;
  std::vector<Expr> cs;
  for (const auto& c : e.children()) {
    cs.push_back(drop_symmetric_transposes(c, props));
    changed = changed || !(cs.back() == c);
  }
  if (!changed) return e;
  switch (e.op()) {
    case Op::Plus: return sum_of(std::move(cs));
    case Op::Times: return product_of(std::move(cs));
    case Op::Minus: return negate(cs[0]);
    case Op::Transpose: return transpose_of(cs[0]);
    case Op::Inverse: return inverse_of(cs[0]);
    default: return Expr::make(e.op(), e.name(), std::move(cs));
  }
}

/// Symmetric by declaration or because the expression is its own transpose.
inline bool is_symmetric_structurally(const Expr& e, const PropertyMap& props) {
  if (e.is_zero() || is_symmetric_atom(e, props)) return true;
  if (is_diagonal(e, props)) return true;
  return drop_symmetric_transposes(transpose_of(e), props) == drop_symmetric_transposes(e, props);
}

/// Nonsingular by structure: triangular, diagonal or SPD atoms, possibly
/// transposed or inverted.
inline bool is_invertible_by_structure(const Expr& e, const PropertyMap& props) {
  switch (e.op()) {
    case Op::Operand:
      return detail::atom_has(e, props, Property::LowerTriangular) ||
             detail::atom_has(e, props, Property::UpperTriangular) ||
             detail::atom_has(e, props, Property::Diagonal) || detail::atom_has(e, props, Property::SPD);
    case Op::Transpose:
    case Op::Inverse: return is_invertible_by_structure(e[0], props);
    default: return false;
  }
}

/// Size of an expression from the sizes of its atoms; nullopt when it
/// cannot be determined (Zero, solution operators, unknown atoms).
inline std::optional<Dimension> infer_dims(const Expr& e, const std::map<std::string, Dimension>& dims) {
  auto is_scalar = [](const Dimension& d) { return d.rows.is_one() && d.cols.is_one(); };
  switch (e.op()) {
    case Op::Operand: {
      auto it = dims.find(e.name());
      if (it == dims.end()) return std::nullopt;
      return it->second;
    }
    case Op::Zero:
    case Op::Solved: return std::nullopt;
    case Op::Minus:
    case Op::Inverse: return infer_dims(e[0], dims);
    case Op::Transpose: {
      auto d = infer_dims(e[0], dims);
      if (!d) return d;
      return Dimension{d->cols, d->rows};
    }
    case Op::Plus:
      for (const auto& t : e.children())
        if (auto d = infer_dims(t, dims)) return d;
      return std::nullopt;
    case Op::Times: {
      // Scalar factors do not change the shape of the product.
      std::optional<Dimension> first, last;
      bool all_scalar = true;
      for (const auto& f : e.children()) {
        auto d = infer_dims(f, dims);
        if (!d) return std::nullopt;
        if (is_scalar(*d)) continue;
        all_scalar = false;
        if (!first) first = d;
        last = d;
      }
      if (all_scalar) return Dimension{SymSize::literal(1), SymSize::literal(1)};
      return Dimension{first->rows, last->cols};
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// SPD prover

struct ProverLimits {
  int max_depth = 8;
  std::size_t max_nodes = 20000;
};

struct ProofResult {
  bool proved = false;
  std::vector<std::string> chain;  // prefix keys from the input to the fact
  std::size_t explored = 0;
};

namespace detail {

inline Expr rebuild(const Expr& e, std::size_t i, const Expr& child) {
  std::vector<Expr> cs = e.children();
  cs[i] = child;
  switch (e.op()) {
    case Op::Plus: return sum_of(std::move(cs));
    case Op::Times: return product_of(std::move(cs));
    case Op::Minus: return negate(cs[0]);
    case Op::Transpose: return transpose_of(cs[0]);
    case Op::Inverse: return inverse_of(cs[0]);
    default: return Expr::make(e.op(), e.name(), std::move(cs));
  }
}

/// Every expression obtained by applying `local` at exactly one position.
inline void rewrite_everywhere(const Expr& e, const std::function<void(const Expr&, std::vector<Expr>&)>& local,
                               std::vector<Expr>& out) {
  local(e, out);
  for (std::size_t i = 0; i < e.size(); ++i) {
    std::vector<Expr> sub;
    rewrite_everywhere(e[i], local, sub);
    for (const auto& s : sub) out.push_back(rebuild(e, i, s));
  }
}

/// inv(a) -> a, trans(inv(a)) -> a^T; other factors are not inverse-like.
inline std::optional<Expr> inverse_argument(const Expr& f) {
  if (f.is(Op::Inverse)) return f[0];
  if (f.is(Op::Transpose) && f[0].is(Op::Inverse)) return transpose_of(f[0][0]);
  return std::nullopt;
}

/// a^-1 b^-1 -> (b a)^-1 for adjacent inverse-like factors.
inline void contract_inverses(const Expr& e, std::vector<Expr>& out) {
  if (!e.is(Op::Times)) return;
  const auto& fs = e.children();
  for (std::size_t i = 0; i + 1 < fs.size(); ++i) {
    auto a = inverse_argument(fs[i]);
    auto b = inverse_argument(fs[i + 1]);
    if (!a || !b) continue;
    std::vector<Expr> next(fs.begin(), fs.begin() + i);
    next.push_back(inverse_of(product_of({*b, *a})));
    next.insert(next.end(), fs.begin() + i + 2, fs.end());
    out.push_back(product_of(std::move(next)));
  }
}

/// (a b)^-1 -> b^-1 a^-1.
inline void expand_inverse(const Expr& e, std::vector<Expr>& out) {
  if (!e.is(Op::Inverse) || !e[0].is(Op::Times)) return;
  std::vector<Expr> fs;
  for (auto it = e[0].children().rbegin(); it != e[0].children().rend(); ++it) fs.push_back(inverse_of(*it));
  out.push_back(product_of(std::move(fs)));
}

}  // namespace detail

/// Rewrite rules derived from a set of equations: both orientations of each
/// equation and of its transpose, plus isolation of an atom from a product
/// whose other factors are invertible by structure (L X^T = B gives
/// X = B^T L^-T).
inline std::vector<std::pair<Expr, Expr>> prover_rules(const std::vector<Equation>& equations,
                                                       const PropertyMap& props) {
  std::vector<std::pair<Expr, Expr>> out;
  std::set<std::string> seen;
  auto add = [&](const Expr& from, const Expr& to) {
    if (from.is_zero() || from == to) return;
    if (seen.insert(from.key() + "=>" + to.key()).second) out.emplace_back(from, to);
  };
  auto prep = [&](const Expr& x) { return drop_symmetric_transposes(normalize(x), props); };
  for (const auto& eq : equations) {
    Expr l = prep(eq.lhs), r = prep(eq.rhs);
    Expr lt = drop_symmetric_transposes(transpose_of(l), props);
    Expr rt = drop_symmetric_transposes(transpose_of(r), props);
    add(l, r);
    add(r, l);
    add(lt, rt);
    add(rt, lt);
    for (const auto& [side, other] : {std::pair{l, r}, std::pair{r, l}, std::pair{lt, rt}, std::pair{rt, lt}}) {
      if (!side.is(Op::Times)) continue;
      const auto& fs = side.children();
      for (std::size_t i = 0; i < fs.size(); ++i) {
        if (!fs[i].is(Op::Operand)) continue;
        bool ok = true;
        for (std::size_t j = 0; j < fs.size() && ok; ++j)
          if (j != i && !is_invertible_by_structure(fs[j], props)) ok = false;
        if (!ok) continue;
        std::vector<Expr> iso;
        for (std::size_t j = i; j-- > 0;) iso.push_back(inverse_of(fs[j]));
        iso.push_back(other);
        for (std::size_t j = fs.size(); j-- > i + 1;) iso.push_back(inverse_of(fs[j]));
        add(fs[i], drop_symmetric_transposes(product_of(std::move(iso)), props));
      }
    }
  }
  return out;
}

/// Breadth-first search over rewrites of `e` for an expression whose key is
/// in `facts`. Failure means "not proved", never "not SPD".
inline ProofResult prove_spd(const Expr& e, const std::vector<Equation>& equations,
                             const std::vector<PropertyFact>& facts, const PropertyMap& props,
                             ProverLimits limits = {}) {
  std::set<std::string> targets;
  for (const auto& f : facts)
    if (f.property == Property::SPD) targets.insert(drop_symmetric_transposes(normalize(f.expression), props).key());
  for (const auto& [name, ps] : props)
    if (ps.count(Property::SPD)) targets.insert(name);

  ProofResult res;
  Expr start = drop_symmetric_transposes(normalize(e), props);
  std::map<std::string, std::string> parent;
  auto finish = [&](const std::string& key) {
    res.proved = true;
    for (std::string k = key;; k = parent[k]) {
      res.chain.insert(res.chain.begin(), k);
      if (parent[k].empty()) break;
    }
    return res;
  };
  parent[start.key()] = "";
  if (targets.count(start.key())) return finish(start.key());
  if (targets.empty()) return res;

  auto rules = prover_rules(equations, props);
  std::deque<std::pair<Expr, int>> queue{{start, 0}};
  while (!queue.empty()) {
    auto [cur, depth] = queue.front();
    queue.pop_front();
    ++res.explored;
    if (depth >= limits.max_depth) continue;

    // A rewrite that would invert a zero has no meaning and is skipped.
    std::vector<Expr> next;
    for (const auto& [from, to] : rules) {
      try {
        Expr n = replace_all(cur, from, to);
        if (!(n == cur)) next.push_back(n);
      } catch (const StructuralError&) {
      }
    }
    try {
      detail::rewrite_everywhere(cur, detail::contract_inverses, next);
      detail::rewrite_everywhere(cur, detail::expand_inverse, next);
    } catch (const StructuralError&) {
    }

    for (auto& n : next) {
      n = drop_symmetric_transposes(n, props);
      if (parent.count(n.key())) continue;
      parent[n.key()] = cur.key();
      if (targets.count(n.key())) {
        res.explored += 1;
        return finish(n.key());
      }
      if (parent.size() >= limits.max_nodes) return res;
      queue.emplace_back(n, depth + 1);
    }
  }
  return res;
}

}  // namespace pmegen
