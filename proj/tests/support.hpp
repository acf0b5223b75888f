#pragma once

// Shared fixtures for the test binaries: the example operations and random
// generators for expressions, specs and numeric instances.

#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pmegen/pmegen.hpp"

namespace testing_support {

using namespace pmegen;

inline std::string ops_path(const std::string& file) { return std::string(PMEGEN_OPS_DIR) + "/" + file; }

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline OperationSpec load_op(const std::string& name) { return parse_operation(read_text(ops_path(name + ".op"))); }

inline Expr op(const std::string& n) { return Expr::operand(n); }
inline Expr P(std::initializer_list<Expr> xs) { return normalize(Expr::plus(xs)); }
inline Expr T(std::initializer_list<Expr> xs) { return normalize(Expr::times(xs)); }
inline Expr tr(const Expr& x) { return transpose_of(normalize(x)); }
inline Expr iv(const Expr& x) { return inverse_of(normalize(x)); }
inline Expr neg(const Expr& x) { return negate(normalize(x)); }

/// Parses "lhs = rhs" in the operation syntax.
inline Equation eq(const std::string& text) { return parse_equation(text); }
inline Expr ex(const std::string& text) { return parse_equation(text + " = Z__").lhs; }

/// Arbitrary (not necessarily conforming) tree over a few names.
inline Expr random_tree(std::mt19937_64& rng, int depth) {
  static const char* names[] = {"A", "B", "C", "D"};
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 0 : 6);
  switch (pick(rng)) {
    case 0: {
      std::uniform_int_distribution<int> n(0, 4);
      int k = n(rng);
      return k == 4 ? Expr::zero() : Expr::operand(names[k]);
    }
    case 1: return Expr::plus({random_tree(rng, depth - 1), random_tree(rng, depth - 1)});
    case 2: return Expr::times({random_tree(rng, depth - 1), random_tree(rng, depth - 1)});
    case 3: return Expr::minus(random_tree(rng, depth - 1));
    case 4: return Expr::trans(random_tree(rng, depth - 1));
    case 5: return Expr::inv(random_tree(rng, depth - 1));
    default:
      return Expr::plus({random_tree(rng, depth - 1), Expr::times({random_tree(rng, depth - 1), random_tree(rng, depth - 1)})});
  }
}

/// Random tree with no Zero leaves, so every subterm of an n x n
/// instantiation is well defined.
inline Expr random_square_tree(std::mt19937_64& rng, int depth) {
  static const char* names[] = {"A", "B", "C"};
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 0 : 5);
  switch (pick(rng)) {
    case 0: return Expr::operand(names[std::uniform_int_distribution<int>(0, 2)(rng)]);
    case 1: return Expr::plus({random_square_tree(rng, depth - 1), random_square_tree(rng, depth - 1)});
    case 2: return Expr::times({random_square_tree(rng, depth - 1), random_square_tree(rng, depth - 1)});
    case 3: return Expr::minus(random_square_tree(rng, depth - 1));
    case 4: return Expr::trans(random_square_tree(rng, depth - 1));
    default: return Expr::inv(Expr::operand(names[std::uniform_int_distribution<int>(0, 2)(rng)]));
  }
}

/// Well-conditioned random n x n matrix (strongly diagonally dominant).
inline Matrix dominant_matrix(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = u(rng) + (i == j ? 2.0 * n : 0.0);
  return m;
}

// ---------------------------------------------------------------------------
// Random conforming operations

/// Builds a conforming expression of shape rows x cols, declaring operands as
/// it goes. Square shapes sometimes get structured operands.
class SpecBuilder {
public:
  explicit SpecBuilder(std::mt19937_64& rng) : rng_(rng) {}

  std::vector<OperandDecl> decls;

  Expr build(const std::string& rows, const std::string& cols, int depth) {
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 0 : 4);
    switch (pick(rng_)) {
      case 1: return Expr::plus({build(rows, cols, depth - 1), build(rows, cols, depth - 1)});
      case 2: {
        std::string mid = size_symbol();
        return Expr::times({build(rows, mid, depth - 1), build(mid, cols, depth - 1)});
      }
      case 3: return Expr::trans(build(cols, rows, depth - 1));
      case 4: return Expr::minus(build(rows, cols, depth - 1));
      default: return leaf(rows, cols);
    }
  }

  Expr leaf(const std::string& rows, const std::string& cols) {
    OperandDecl d;
    d.name = "M" + std::to_string(decls.size());
    d.kind = OperandKind::Matrix;
    d.dims = {SymSize::symbol(rows), SymSize::symbol(cols)};
    d.role = IoRole::Input;
    if (rows == cols) {
      std::uniform_int_distribution<int> s(0, 5);
      switch (s(rng_)) {
        case 0: d.properties = {Property::LowerTriangular}; break;
        case 1: d.properties = {Property::UpperTriangular}; break;
        case 2: d.properties = {Property::Symmetric}; break;
        case 3: d.properties = {Property::SPD, Property::Symmetric}; break;
        default: break;
      }
    }
    decls.push_back(d);
    return Expr::operand(d.name);
  }

  std::string size_symbol() {
    static const char* syms[] = {"m", "n", "p", "q"};
    return syms[std::uniform_int_distribution<int>(0, 3)(rng_)];
  }

private:
  std::mt19937_64& rng_;
};

/// A random valid operation `lhs = rhs` with one unknown operand.
inline OperationSpec random_spec(std::mt19937_64& rng, int depth = 3) {
  for (;;) {
    SpecBuilder b(rng);
    std::string r = b.size_symbol(), c = b.size_symbol();
    Expr lhs = b.build(r, c, depth);
    Expr rhs = b.leaf(r, c);
    OperationSpec spec;
    spec.name = "random";
    spec.solution_operator = "R";
    spec.operands = b.decls;
    std::uniform_int_distribution<std::size_t> who(0, spec.operands.size() - 1);
    spec.operands[who(rng)].role = IoRole::Output;
    spec.postcondition = normalize(Equation{lhs, rhs});
    try {
      validate_spec(spec);
    } catch (const Error&) {
      continue;  // a side cancelled to zero or an operand dropped out
    }
    return spec;
  }
}

/// Random split/keep choice for every size symbol, as a combination that
/// apply_rule accepts.
inline RuleCombination random_rules(const OperationSpec& spec, std::mt19937_64& rng) {
  std::map<std::string, bool> split;
  for (const auto& d : spec.operands)
    for (const auto& s : {d.dims.rows, d.dims.cols})
      for (const auto& [sym, c] : s.terms())
        if (!split.count(sym)) split[sym] = std::bernoulli_distribution(0.6)(rng);
  RuleCombination combo;
  for (const auto& d : spec.operands) {
    std::string rs = d.dims.rows.terms().begin()->first, cs = d.dims.cols.terms().begin()->first;
    bool sr = split[rs], sc = split[cs];
    PartitionRule r;
    r.operand = d.name;
    r.shape = sr && sc ? Shape::R2x2 : sr ? Shape::R2x1 : sc ? Shape::R1x2 : Shape::R1x1;
    if (sr) r.split_rows = "k_" + rs;
    if (sc) r.split_cols = "k_" + cs;
    combo.rules.push_back(r);
  }
  return combo;
}

/// Relative Frobenius error between the stacked blocked evaluation of `e`
/// and its direct evaluation, for one random instantiation.
inline double blocked_vs_unblocked(const OperationSpec& spec, const RuleCombination& rules, const Expr& e,
                                   std::mt19937_64& rng, std::size_t trial) {
  BlockContext ctx = make_context(spec, rules);
  BlockMatrix bm = block_expression(e, ctx.blocked);
  NumericBinding b;
  b.sizes = sample_sizes(spec, rules, rng, trial, 2, 5);
  for (const auto& d : spec.operands)
    b.values[d.name] = sample_operand(d, b.eval(d.dims.rows), b.eval(d.dims.cols), rng);
  bind_blocks(ctx, b);
  Matrix want = evaluate(e, b);
  Matrix got(want.rows(), want.cols());
  std::size_t i0 = 0;
  for (std::size_t r = 0; r < bm.rows; ++r) {
    std::size_t h = b.eval(bm.row_sizes[r]), j0 = 0;
    for (std::size_t c = 0; c < bm.cols; ++c) {
      std::size_t w = b.eval(bm.col_sizes[c]);
      got.set_block(i0, j0, evaluate(bm.at(r, c), b, base_solvers(), h, w));
      j0 += w;
    }
    i0 += h;
  }
  if (i0 != want.rows()) throw NumericError("stacked rows do not add up");
  return relative_residual(got, want);
}

}  // namespace testing_support
