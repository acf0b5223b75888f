#pragma once

// Immutable symbolic matrix expressions, their canonical form, and the
// equation manipulations built on top of it.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "pmegen/errors.hpp"

namespace pmegen {

enum class Op : std::uint8_t { Operand, Zero, Plus, Times, Minus, Transpose, Inverse, Solved };

/// Shared immutable AST node handle. Equality and ordering go through the
/// serialized prefix form, which is computed once at construction.
class Expr {
  struct Node {
    Op op;
    std::string name;
    std::vector<Expr> children;
    std::string key;
  };

public:
  Expr() : node_(zero_node()) {}

  static Expr operand(std::string name) { return make(Op::Operand, std::move(name), {}); }
  static Expr zero() { return Expr(); }
  static Expr plus(std::vector<Expr> terms) { return make(Op::Plus, {}, std::move(terms)); }
  static Expr times(std::vector<Expr> factors) { return make(Op::Times, {}, std::move(factors)); }
  static Expr minus(Expr e) { return make(Op::Minus, {}, {std::move(e)}); }
  static Expr trans(Expr e) { return make(Op::Transpose, {}, {std::move(e)}); }
  static Expr inv(Expr e) { return make(Op::Inverse, {}, {std::move(e)}); }
  static Expr solved(std::string op, std::vector<Expr> args) {
    return make(Op::Solved, std::move(op), std::move(args));
  }

  /// Unchecked construction; arity is only validated by normalize().
  static Expr make(Op op, std::string name, std::vector<Expr> children) {
    if (op == Op::Zero) return Expr();
    auto n = std::make_shared<Node>();
    n->op = op;
    n->name = std::move(name);
    n->children = std::move(children);
    n->key = serialize(*n);
    return Expr(std::move(n));
  }

  Op op() const noexcept { return node_->op; }
  const std::string& name() const noexcept { return node_->name; }
  const std::vector<Expr>& children() const noexcept { return node_->children; }
  const Expr& operator[](std::size_t i) const { return node_->children.at(i); }
  std::size_t size() const noexcept { return node_->children.size(); }

  /// Serialized prefix form, e.g. `(times L (trans L))`.
  const std::string& key() const noexcept { return node_->key; }

  bool is(Op o) const noexcept { return node_->op == o; }
  bool is_zero() const noexcept { return node_->op == Op::Zero; }
  bool is_atom() const noexcept { return node_->op == Op::Operand || node_->op == Op::Solved; }

  friend bool operator==(const Expr& a, const Expr& b) {
    return a.node_ == b.node_ || a.node_->key == b.node_->key;
  }
  friend bool operator<(const Expr& a, const Expr& b) { return a.node_->key < b.node_->key; }

private:
  explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}

  static std::shared_ptr<const Node> zero_node() {
    static const auto z = [] {
      auto n = std::make_shared<Node>();
      n->op = Op::Zero;
      n->key = "0";
      return std::shared_ptr<const Node>(std::move(n));
    }();
    return z;
  }

  static std::string serialize(const Node& n) {
    const char* head = nullptr;
    switch (n.op) {
      case Op::Operand: return n.name;
      case Op::Zero: return "0";
      case Op::Plus: head = "plus"; break;
      case Op::Times: head = "times"; break;
      case Op::Minus: head = "minus"; break;
      case Op::Transpose: head = "trans"; break;
      case Op::Inverse: head = "inv"; break;
      case Op::Solved: head = "solved"; break;
    }
    std::string out = "(";
    out += head;
    if (n.op == Op::Solved) out += " " + n.name;
    for (const auto& c : n.children) out += " " + c.key();
    out += ")";
    return out;
  }

  std::shared_ptr<const Node> node_;
};

struct ExprHash {
  std::size_t operator()(const Expr& e) const noexcept { return std::hash<std::string>{}(e.key()); }
};

struct Equation {
  Expr lhs;
  Expr rhs;

  std::string key() const { return "(eq " + lhs.key() + " " + rhs.key() + ")"; }
  friend bool operator==(const Equation& a, const Equation& b) {
    return a.lhs == b.lhs && a.rhs == b.rhs;
  }
};

// ---------------------------------------------------------------------------
// Structural validation

inline void validate(const Expr& e) {
  switch (e.op()) {
    case Op::Operand:
      if (e.name().empty()) throw StructuralError("operand with empty name");
      if (e.size() != 0) throw StructuralError("operand '" + e.name() + "' has children");
      return;
    case Op::Zero:
      return;
    case Op::Plus:
    case Op::Times:
      if (e.size() == 0)
        throw StructuralError(std::string(e.is(Op::Plus) ? "plus" : "times") + " with no operands");
      break;
    case Op::Minus:
    case Op::Transpose:
    case Op::Inverse:
      if (e.size() != 1) throw StructuralError("unary node with " + std::to_string(e.size()) + " operands");
      break;
    case Op::Solved:
      if (e.name().empty()) throw StructuralError("solution operator without a name");
      if (e.size() == 0) throw StructuralError("solution operator '" + e.name() + "' without arguments");
      break;
  }
  for (const auto& c : e.children()) validate(c);
}

// ---------------------------------------------------------------------------
// Canonical-form constructors. Each takes normalized inputs and returns a
// normalized result.

Expr negate(const Expr& x);
Expr transpose_of(const Expr& x);
Expr inverse_of(const Expr& x);
Expr sum_of(std::vector<Expr> terms);
Expr product_of(std::vector<Expr> factors);

inline Expr negate(const Expr& x) {
  switch (x.op()) {
    case Op::Zero: return x;
    case Op::Minus: return x[0];
    case Op::Plus: {
      std::vector<Expr> ts;
      ts.reserve(x.size());
      for (const auto& t : x.children()) ts.push_back(negate(t));
      return sum_of(std::move(ts));
    }
    default: return Expr::minus(x);
  }
}

inline Expr transpose_of(const Expr& x) {
  switch (x.op()) {
    case Op::Zero: return x;
    case Op::Operand:
    case Op::Solved: return Expr::trans(x);
    case Op::Transpose: return x[0];
    case Op::Minus: return negate(transpose_of(x[0]));
    case Op::Plus: {
      std::vector<Expr> ts;
      for (const auto& t : x.children()) ts.push_back(transpose_of(t));
      return sum_of(std::move(ts));
    }
    case Op::Times: {
      std::vector<Expr> fs;
      for (auto it = x.children().rbegin(); it != x.children().rend(); ++it) fs.push_back(transpose_of(*it));
      return product_of(std::move(fs));
    }
    case Op::Inverse:
      // Transpose stays outside the inverse of an atom; compound arguments
      // absorb the transpose so that (AB)^-T has a single spelling.
      if (x[0].is_atom()) return Expr::trans(x);
      return inverse_of(transpose_of(x[0]));
  }
  return x;
}

inline Expr inverse_of(const Expr& x) {
  switch (x.op()) {
    case Op::Zero: throw StructuralError("inverse of a zero expression");
    case Op::Inverse: return x[0];
    case Op::Minus: return negate(inverse_of(x[0]));
    case Op::Transpose:
      if (x[0].is(Op::Inverse)) return transpose_of(x[0][0]);
      return Expr::trans(Expr::inv(x[0]));
    case Op::Plus: {
      // inv(S) and -inv(-S) are the same; keep the sign whose sum sorts first.
      Expr flipped = negate(x);
      if (flipped.key() < x.key()) return negate(Expr::inv(flipped));
      return Expr::inv(x);
    }
    default: return Expr::inv(x);
  }
}

inline Expr sum_of(std::vector<Expr> terms) {
  std::vector<Expr> flat;
  for (auto& t : terms) {
    if (t.is(Op::Plus))
      flat.insert(flat.end(), t.children().begin(), t.children().end());
    else if (!t.is_zero())
      flat.push_back(std::move(t));
  }
  std::sort(flat.begin(), flat.end());
  // Cancel x against (minus x).
  std::vector<bool> dead(flat.size(), false);
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (dead[i] || !flat[i].is(Op::Minus)) continue;
    for (std::size_t j = 0; j < flat.size(); ++j) {
      if (!dead[j] && j != i && flat[j] == flat[i][0]) {
        dead[i] = dead[j] = true;
        break;
      }
    }
  }
  std::vector<Expr> kept;
  for (std::size_t i = 0; i < flat.size(); ++i)
    if (!dead[i]) kept.push_back(flat[i]);
  if (kept.empty()) return Expr::zero();
  if (kept.size() == 1) return kept.front();
  return Expr::plus(std::move(kept));
}

inline Expr product_of(std::vector<Expr> factors) {
  std::vector<Expr> flat;
  bool negative = false;
  for (auto& f : factors) {
    Expr g = f;
    if (g.is(Op::Minus)) {
      negative = !negative;
      g = g[0];
    }
    if (g.is_zero()) return Expr::zero();
    if (g.is(Op::Times))
      flat.insert(flat.end(), g.children().begin(), g.children().end());
    else
      flat.push_back(std::move(g));
  }
  if (flat.empty()) throw StructuralError("empty product");
  Expr r = flat.size() == 1 ? flat.front() : Expr::times(std::move(flat));
  return negative ? negate(r) : r;
}

/// Rewrites `e` to the canonical representative of its class.
inline Expr normalize(const Expr& e) {
  validate(e);
  std::function<Expr(const Expr&)> go = [&](const Expr& x) -> Expr {
    switch (x.op()) {
      case Op::Operand:
      case Op::Zero: return x;
      case Op::Minus: return negate(go(x[0]));
      case Op::Transpose: return transpose_of(go(x[0]));
      case Op::Inverse: return inverse_of(go(x[0]));
      case Op::Plus:
      case Op::Times:
      case Op::Solved: {
        std::vector<Expr> cs;
        cs.reserve(x.size());
        for (const auto& c : x.children()) cs.push_back(go(c));
        if (x.is(Op::Plus)) return sum_of(std::move(cs));
        if (x.is(Op::Times)) return product_of(std::move(cs));
        return Expr::solved(x.name(), std::move(cs));
      }
    }
    return x;
  };
  return go(e);
}

inline Equation normalize(const Equation& eq) { return {normalize(eq.lhs), normalize(eq.rhs)}; }

// ---------------------------------------------------------------------------
// Queries and substitution

inline void collect_operands(const Expr& e, std::set<std::string>& out) {
  if (e.is(Op::Operand)) out.insert(e.name());
  for (const auto& c : e.children()) collect_operands(c, out);
}

inline std::set<std::string> operands_of(const Expr& e) {
  std::set<std::string> out;
  collect_operands(e, out);
  return out;
}

template <typename KnownSet>
bool is_known(const Expr& e, const KnownSet& known) {
  if (e.is(Op::Operand)) return known.count(e.name()) > 0;
  for (const auto& c : e.children())
    if (!is_known(c, known)) return false;
  return true;
}

/// Additive terms of a normalized expression (Zero has none).
inline std::vector<Expr> terms_of(const Expr& e) {
  if (e.is_zero()) return {};
  if (e.is(Op::Plus)) return e.children();
  return {e};
}

/// Replaces operand leaves by name and renormalizes.
template <typename Map>
Expr substitute(const Expr& e, const Map& bindings) {
  std::function<Expr(const Expr&)> go = [&](const Expr& x) -> Expr {
    if (x.is(Op::Operand)) {
      auto it = bindings.find(x.name());
      return it == bindings.end() ? x : it->second;
    }
    if (x.size() == 0) return x;
    std::vector<Expr> cs;
    for (const auto& c : x.children()) cs.push_back(go(c));
    return Expr::make(x.op(), x.name(), std::move(cs));
  };
  return normalize(go(e));
}

/// Replaces every occurrence of `from` in `e` by `to`. Occurrences are whole
/// subterms, contiguous runs inside a product, or sub-multisets of a sum.
/// The result is renormalized. Inputs must be normalized.
inline Expr replace_all(const Expr& e, const Expr& from, const Expr& to) {
  std::function<Expr(const Expr&)> go = [&](const Expr& x) -> Expr {
    if (x == from) return to;
    if (x.size() == 0) return x;
    std::vector<Expr> cs;
    cs.reserve(x.size());
    for (const auto& c : x.children()) cs.push_back(go(c));

    if (x.is(Op::Times) && from.is(Op::Times) && from.size() <= cs.size()) {
      const auto& pat = from.children();
      std::vector<Expr> out;
      std::size_t i = 0;
      while (i < cs.size()) {
        bool hit = i + pat.size() <= cs.size() && std::equal(pat.begin(), pat.end(), cs.begin() + i);
        if (hit) {
          out.push_back(to);
          i += pat.size();
        } else {
          out.push_back(cs[i++]);
        }
      }
      return product_of(std::move(out));
    }
    if (x.is(Op::Plus) && from.is(Op::Plus) && from.size() <= cs.size()) {
      std::vector<Expr> rest = cs;
      bool all = true;
      for (const auto& t : from.children()) {
        auto it = std::find(rest.begin(), rest.end(), t);
        if (it == rest.end()) {
          all = false;
          break;
        }
        rest.erase(it);
      }
      if (all) {
        rest.push_back(to);
        return sum_of(std::move(rest));
      }
    }
    switch (x.op()) {
      case Op::Plus: return sum_of(std::move(cs));
      case Op::Times: return product_of(std::move(cs));
      case Op::Minus: return negate(cs[0]);
      case Op::Transpose: return transpose_of(cs[0]);
      case Op::Inverse: return inverse_of(cs[0]);
      default: return Expr::make(x.op(), x.name(), std::move(cs));
    }
  };
  return go(e);
}

inline bool occurs_in(const Expr& e, const Expr& part) { return replace_all(e, part, Expr::operand("\x01")) != e; }

// ---------------------------------------------------------------------------
// Equation manipulation

/// Moves known-only additive terms to the right and unknown-bearing terms to
/// the left, flipping signs. Equations without unknowns come back unchanged
/// (see is_tautology_candidate).
template <typename KnownSet>
Equation to_canonical_equation(const Equation& eq, const KnownSet& known) {
  Equation n = normalize(eq);
  std::vector<Expr> left, right;
  bool any_unknown = false;
  for (const auto& t : terms_of(n.lhs)) {
    if (is_known(t, known)) {
      right.push_back(negate(t));
    } else {
      left.push_back(t);
      any_unknown = true;
    }
  }
  for (const auto& t : terms_of(n.rhs)) {
    if (is_known(t, known)) {
      right.push_back(t);
    } else {
      left.push_back(negate(t));
      any_unknown = true;
    }
  }
  if (!any_unknown) return n;
  // -X = -E reads better as X = E.
  if (std::all_of(left.begin(), left.end(), [](const Expr& t) { return t.is(Op::Minus); })) {
    for (auto& t : left) t = negate(t);
    for (auto& t : right) t = negate(t);
  }
  return {sum_of(std::move(left)), sum_of(std::move(right))};
}

template <typename KnownSet>
bool is_tautology_candidate(const Equation& eq, const KnownSet& known) {
  return is_known(eq.lhs, known) && is_known(eq.rhs, known);
}

/// Applies equations as left-to-right rewrite rules (each also in its
/// transposed form), one rule per step, renormalizing after every step, until
/// no rule fires or `max_depth` steps have been taken.
inline Expr rewrite_with(const Expr& e, const std::vector<Equation>& rules, int max_depth) {
  Expr cur = normalize(e);
  if (max_depth < 1) return cur;
  std::vector<std::pair<Expr, Expr>> oriented;
  for (const auto& r : rules) {
    Equation n = normalize(r);
    oriented.emplace_back(n.lhs, n.rhs);
    Expr tl = transpose_of(n.lhs);
    if (tl != n.lhs) oriented.emplace_back(tl, transpose_of(n.rhs));
  }
  for (int step = 0; step < max_depth; ++step) {
    bool fired = false;
    for (const auto& [from, to] : oriented) {
      if (from.is_zero()) continue;
      Expr next = replace_all(cur, from, to);
      if (next != cur) {
        cur = std::move(next);
        fired = true;
        break;
      }
    }
    if (!fired) break;
  }
  return cur;
}

// ---------------------------------------------------------------------------
// Prefix-form reader

namespace detail {

class PrefixReader {
public:
  explicit PrefixReader(std::string_view text) : s_(text) {}

  Expr read_expr() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end of input");
    if (s_[pos_] != '(') {
      std::string tok = token();
      if (tok == "0") return Expr::zero();
      return Expr::operand(tok);
    }
    ++pos_;
    std::string head = token();
    std::string name;
    if (head == "solved") name = token();
    std::vector<Expr> kids;
    for (;;) {
      skip();
      if (pos_ >= s_.size()) fail("unterminated list");
      if (s_[pos_] == ')') {
        ++pos_;
        break;
      }
      kids.push_back(read_expr());
    }
    if (head == "plus") return Expr::make(Op::Plus, {}, std::move(kids));
    if (head == "times") return Expr::make(Op::Times, {}, std::move(kids));
    if (head == "minus") return Expr::make(Op::Minus, {}, std::move(kids));
    if (head == "trans") return Expr::make(Op::Transpose, {}, std::move(kids));
    if (head == "inv") return Expr::make(Op::Inverse, {}, std::move(kids));
    if (head == "solved") return Expr::make(Op::Solved, name, std::move(kids));
    if (head == "eq") {
      if (kids.size() != 2) fail("eq needs two sides");
      eq_ = Equation{kids[0], kids[1]};
      return Expr::zero();
    }
    fail("unknown head '" + head + "'");
  }

  void expect_end() {
    skip();
    if (pos_ != s_.size()) fail("trailing input");
  }

  std::optional<Equation> eq_;

private:
  void skip() {
    while (pos_ < s_.size() && s_[pos_] == ' ') ++pos_;
  }
  std::string token() {
    skip();
    std::size_t b = pos_;
    while (pos_ < s_.size() && s_[pos_] != ' ' && s_[pos_] != '(' && s_[pos_] != ')') ++pos_;
    if (b == pos_) fail("expected token");
    return std::string(s_.substr(b, pos_ - b));
  }
  [[noreturn]] void fail(const std::string& why) const {
    throw ParseError(0, 0, "prefix form, offset " + std::to_string(pos_) + ": " + why);
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Expr parse_prefix(std::string_view text) {
  detail::PrefixReader r(text);
  Expr e = r.read_expr();
  if (r.eq_) throw ParseError(0, 0, "prefix form: expected expression, got equation");
  r.expect_end();
  validate(e);
  return e;
}

inline Equation parse_prefix_equation(std::string_view text) {
  detail::PrefixReader r(text);
  r.read_expr();
  if (!r.eq_) throw ParseError(0, 0, "prefix form: expected (eq lhs rhs)");
  r.expect_end();
  validate(r.eq_->lhs);
  validate(r.eq_->rhs);
  return *r.eq_;
}

// ---------------------------------------------------------------------------
// Infix renderings

enum class Notation { Text, Latex, Dsl };

namespace detail {

inline std::string latex_name(const std::string& name) {
  auto us = name.find('_');
  if (us == std::string::npos) return name;
  return name.substr(0, us) + "_{" + name.substr(us + 1) + "}";
}

inline std::string latex_operator(const std::string& name) {
  static const char* greek[] = {"Gamma", "Delta", "Theta", "Lambda", "Xi", "Pi",
                                "Sigma", "Upsilon", "Phi", "Psi", "Omega"};
  for (const char* g : greek)
    if (name == g) return std::string("\\") + g;
  return "\\operatorname{" + name + "}";
}

inline int precedence(const Expr& e) {
  switch (e.op()) {
    case Op::Plus: return 1;
    case Op::Minus: return 2;
    case Op::Times: return 3;
    case Op::Transpose:
    case Op::Inverse: return 4;
    default: return 5;
  }
}

inline std::string render(const Expr& e, Notation n, int min_prec);

inline std::string wrap(const Expr& e, Notation n, int min_prec) {
  std::string body = render(e, n, 0);
  if (precedence(e) < min_prec) return (n == Notation::Latex ? "\\left(" : "(") + body +
                                        (n == Notation::Latex ? "\\right)" : ")");
  return body;
}

inline std::string render(const Expr& e, Notation n, int /*min_prec*/) {
  switch (e.op()) {
    case Op::Operand: return n == Notation::Latex ? latex_name(e.name()) : e.name();
    case Op::Zero: return "0";
    case Op::Plus: {
      std::vector<Expr> pos, neg;
      for (const auto& t : e.children()) (t.is(Op::Minus) ? neg : pos).push_back(t);
      std::string out;
      for (const auto& t : pos) out += (out.empty() ? "" : " + ") + wrap(t, n, 2);
      for (const auto& t : neg) out += (out.empty() ? "-" : " - ") + wrap(t[0], n, 3);
      return out;
    }
    case Op::Minus: return "-" + wrap(e[0], n, n == Notation::Dsl ? 4 : 3);
    case Op::Times: {
      std::string out;
      const char* sep = n == Notation::Latex ? " " : " * ";
      for (const auto& f : e.children()) out += (out.empty() ? "" : sep) + wrap(f, n, 4);
      return out;
    }
    case Op::Transpose:
      if (n == Notation::Dsl) return "trans(" + render(e[0], n, 0) + ")";
      if (e[0].is(Op::Inverse))
        return wrap(e[0][0], n, 5) + (n == Notation::Latex ? "^{-T}" : "^-T");
      return wrap(e[0], n, 5) + (n == Notation::Latex ? "^{T}" : "^T");
    case Op::Inverse:
      if (n == Notation::Dsl) return "inv(" + render(e[0], n, 0) + ")";
      return wrap(e[0], n, 5) + (n == Notation::Latex ? "^{-1}" : "^-1");
    case Op::Solved: {
      if (n == Notation::Dsl) throw StructuralError("solution operators have no DSL spelling");
      std::string out = n == Notation::Latex ? latex_operator(e.name()) + "\\left(" : e.name() + "(";
      bool first = true;
      for (const auto& a : e.children()) {
        out += (first ? "" : ", ") + render(a, n, 0);
        first = false;
      }
      return out + (n == Notation::Latex ? "\\right)" : ")");
    }
  }
  return {};
}

}  // namespace detail

inline std::string to_text(const Expr& e) { return detail::render(e, Notation::Text, 0); }
inline std::string to_latex(const Expr& e) { return detail::render(e, Notation::Latex, 0); }
inline std::string to_dsl(const Expr& e) { return detail::render(e, Notation::Dsl, 0); }

inline std::string to_text(const Equation& eq) { return to_text(eq.lhs) + " = " + to_text(eq.rhs); }
inline std::string to_latex(const Equation& eq) { return to_latex(eq.lhs) + " = " + to_latex(eq.rhs); }
inline std::string to_dsl(const Equation& eq) { return to_dsl(eq.lhs) + " = " + to_dsl(eq.rhs); }

}  // namespace pmegen
