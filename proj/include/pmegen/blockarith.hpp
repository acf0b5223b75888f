#pragma once

// Symbolic blocked arithmetic: substitute blockings into the postcondition,
// multiply/add block grids, and split the result into per-block equations.

#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "pmegen/binding.hpp"
#include "pmegen/errors.hpp"
#include "pmegen/expr.hpp"
#include "pmegen/opspec.hpp"
#include "pmegen/partition.hpp"

namespace pmegen {

/// Everything the later stages need to know about the blocks of one
/// rule combination.
struct BlockContext {
  std::map<std::string, BlockedOperand> blocked;  // by operand name
  std::map<std::string, PropertySet> properties;  // by block name
  std::map<std::string, Dimension> dims;
  std::map<std::string, OperandKind> kinds;
  std::set<std::string> input_blocks;
  std::set<std::string> output_blocks;
};

inline BlockContext make_context(const OperationSpec& spec, const RuleCombination& combo) {
  BlockContext ctx;
  for (const auto& d : spec.operands) {
    BlockedOperand b = apply_rule(d, combo.rule_for(d.name));
    for (const auto& [name, props] : b.block_properties) {
      ctx.properties[name] = props;
      ctx.dims[name] = b.block_dims.at(name);
      ctx.kinds[name] = b.block_kinds.at(name);
      (d.role == IoRole::Input ? ctx.input_blocks : ctx.output_blocks).insert(name);
    }
    ctx.blocked.emplace(d.name, std::move(b));
  }
  return ctx;
}

/// A grid of block expressions with symbolic row/column sizes.
struct BlockMatrix {
  std::size_t rows = 1, cols = 1;
  std::vector<Expr> cells;
  std::vector<SymSize> row_sizes, col_sizes;

  const Expr& at(std::size_t r, std::size_t c) const { return cells.at(r * cols + c); }
  Expr& at(std::size_t r, std::size_t c) { return cells.at(r * cols + c); }
};

/// Blocked form of an expression over partitioned operands.
inline BlockMatrix block_expression(const Expr& e, const std::map<std::string, BlockedOperand>& blocked) {
  switch (e.op()) {
    case Op::Operand: {
      auto it = blocked.find(e.name());
      if (it == blocked.end()) throw ContractViolation("operand '" + e.name() + "' has no blocking");
      const auto& b = it->second;
      return {b.rows, b.cols, b.blocks, b.row_sizes, b.col_sizes};
    }
    case Op::Minus: {
      BlockMatrix m = block_expression(e[0], blocked);
      for (auto& c : m.cells) c = negate(c);
      return m;
    }
    case Op::Transpose: {
      BlockMatrix m = block_expression(e[0], blocked);
      BlockMatrix t{m.cols, m.rows, {}, m.col_sizes, m.row_sizes};
      t.cells.resize(m.cells.size());
      for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) t.at(c, r) = transpose_of(m.at(r, c));
      return t;
    }
    case Op::Inverse: {
      BlockMatrix m = block_expression(e[0], blocked);
      if (m.rows != 1 || m.cols != 1)
        throw NonConformantError("inverse of a partitioned operand is not supported: " + e.key());
      m.cells[0] = inverse_of(m.cells[0]);
      return m;
    }
    case Op::Plus: {
      BlockMatrix acc = block_expression(e[0], blocked);
      for (std::size_t i = 1; i < e.size(); ++i) {
        BlockMatrix n = block_expression(e[i], blocked);
        if (n.row_sizes != acc.row_sizes || n.col_sizes != acc.col_sizes)
          throw NonConformantError("block grids of a sum do not conform: " + e.key());
        for (std::size_t k = 0; k < acc.cells.size(); ++k) acc.cells[k] = sum_of({acc.cells[k], n.cells[k]});
      }
      return acc;
    }
    case Op::Times: {
      BlockMatrix acc = block_expression(e[0], blocked);
      for (std::size_t i = 1; i < e.size(); ++i) {
        BlockMatrix n = block_expression(e[i], blocked);
        if (acc.col_sizes != n.row_sizes)
          throw NonConformantError("block grids of a product do not conform: " + e.key());
        BlockMatrix p{acc.rows, n.cols, {}, acc.row_sizes, n.col_sizes};
        p.cells.resize(p.rows * p.cols);
        for (std::size_t r = 0; r < p.rows; ++r)
          for (std::size_t c = 0; c < p.cols; ++c) {
            std::vector<Expr> terms;
            for (std::size_t k = 0; k < acc.cols; ++k) terms.push_back(product_of({acc.at(r, k), n.at(k, c)}));
            p.at(r, c) = sum_of(std::move(terms));
          }
        acc = std::move(p);
      }
      return acc;
    }
    case Op::Zero:
    case Op::Solved: break;
  }
  throw ContractViolation("cannot block expression node " + e.key());
}

/// Conformance of a rule assignment, computed from partition sizes alone
/// (independently of block_expression).
inline bool validate_conformance(const OperationSpec& spec, const RuleCombination& rules) {
  using Parts = std::vector<SymSize>;
  struct Sz {
    Parts rows, cols;
  };
  std::map<std::string, Sz> leaf;
  for (const auto& d : spec.operands) {
    const PartitionRule* r = nullptr;
    for (const auto& x : rules.rules)
      if (x.operand == d.name) r = &x;
    if (!r) return false;
    try {
      BlockedOperand b = apply_rule(d, *r);
      leaf[d.name] = {b.row_sizes, b.col_sizes};
    } catch (const ContractViolation&) {
      return false;
    }
  }
  struct Bad {};
  std::function<Sz(const Expr&)> walk = [&](const Expr& e) -> Sz {
    switch (e.op()) {
      case Op::Operand: {
        auto it = leaf.find(e.name());
        if (it == leaf.end()) throw Bad{};
        return it->second;
      }
      case Op::Minus: return walk(e[0]);
      case Op::Transpose: {
        Sz s = walk(e[0]);
        return {s.cols, s.rows};
      }
      case Op::Inverse: {
        Sz s = walk(e[0]);
        if (s.rows != s.cols || s.rows.size() != 1) throw Bad{};
        return s;
      }
      case Op::Plus: {
        Sz s = walk(e[0]);
        for (std::size_t i = 1; i < e.size(); ++i) {
          Sz n = walk(e[i]);
          if (n.rows != s.rows || n.cols != s.cols) throw Bad{};
        }
        return s;
      }
      case Op::Times: {
        Sz s = walk(e[0]);
        for (std::size_t i = 1; i < e.size(); ++i) {
          Sz n = walk(e[i]);
          if (s.cols != n.rows) throw Bad{};
          s = {s.rows, n.cols};
        }
        return s;
      }
      default: throw Bad{};
    }
  };
  try {
    Sz l = walk(spec.postcondition.lhs);
    Sz r = walk(spec.postcondition.rhs);
    return l.rows == r.rows && l.cols == r.cols;
  } catch (const Bad&) {
    return false;
  }
}

/// A combination that partitions nothing cannot yield a PME.
inline bool is_pme_candidate(const RuleCombination& rules) { return !rules.all_identity(); }

enum class QuadrantStatus { Unsolved, Solved, RedundantStar };

struct QuadrantEquation {
  std::string position;  // TL/TR/BL/BR, T/B, L/R, or "" for an unpartitioned grid
  Equation equation;
  QuadrantStatus status = QuadrantStatus::Unsolved;
  std::string partner;   // for RedundantStar
  std::string output;    // for Solved: the block it assigns ("" for pure tautologies)
};

struct BlockedEquationGrid {
  std::size_t rows = 1, cols = 1;
  std::vector<QuadrantEquation> cells;  // row-major
  std::vector<SymSize> row_sizes, col_sizes;

  QuadrantEquation& at(const std::string& position) {
    for (auto& c : cells)
      if (c.position == position) return c;
    throw ContractViolation("no quadrant '" + position + "'");
  }
  const QuadrantEquation& at(const std::string& position) const {
    return const_cast<BlockedEquationGrid*>(this)->at(position);
  }

  /// Scan order: TL, BL, TR, BR (column-major for 2x2), row-major otherwise.
  std::vector<std::size_t> scan_order() const {
    if (rows == 2 && cols == 2) return {0, 2, 1, 3};
    std::vector<std::size_t> o(cells.size());
    std::iota(o.begin(), o.end(), 0);
    return o;
  }
};

inline Equation transpose_of(const Equation& eq) { return {transpose_of(eq.lhs), transpose_of(eq.rhs)}; }

/// Marks each cell whose equation is the transpose of an earlier cell's
/// (in scan order) as redundant, pointing at that earlier partner.
inline BlockedEquationGrid detect_star(BlockedEquationGrid grid) {
  auto order = grid.scan_order();
  for (std::size_t j = 0; j < order.size(); ++j) {
    auto& cj = grid.cells[order[j]];
    if (cj.status == QuadrantStatus::RedundantStar) continue;
    for (std::size_t i = 0; i < j; ++i) {
      const auto& ci = grid.cells[order[i]];
      if (ci.status == QuadrantStatus::RedundantStar) continue;
      if (transpose_of(ci.equation) == cj.equation) {
        cj.status = QuadrantStatus::RedundantStar;
        cj.partner = ci.position;
        break;
      }
    }
  }
  return grid;
}

/// Distributes `=` over the blocks of the partitioned postcondition; each
/// cell is normalized and put in canonical form w.r.t. input/output roles.
inline BlockedEquationGrid blocked_postcondition(const OperationSpec& spec, const RuleCombination& rules) {
  if (!validate_conformance(spec, rules)) throw NonConformantError("rule combination does not conform: " + describe(rules));
  if (!is_pme_candidate(rules)) throw ContractViolation("identity-only combination is not a PME candidate");
  BlockContext ctx = make_context(spec, rules);
  BlockMatrix l = block_expression(spec.postcondition.lhs, ctx.blocked);
  BlockMatrix r = block_expression(spec.postcondition.rhs, ctx.blocked);
  if (l.row_sizes != r.row_sizes || l.col_sizes != r.col_sizes)
    throw NonConformantError("the two sides of the partitioned postcondition do not conform");

  BlockedEquationGrid grid;
  grid.rows = l.rows;
  grid.cols = l.cols;
  grid.row_sizes = l.row_sizes;
  grid.col_sizes = l.col_sizes;
  auto names = position_names(l.rows, l.cols);
  for (std::size_t i = 0; i < l.cells.size(); ++i) {
    QuadrantEquation q;
    q.position = names[i];
    q.equation = to_canonical_equation(Equation{l.cells[i], r.cells[i]}, ctx.input_blocks);
    if (is_tautology_candidate(q.equation, ctx.input_blocks)) q.status = QuadrantStatus::Solved;
    grid.cells.push_back(std::move(q));
  }
  return detect_star(std::move(grid));
}

}  // namespace pmegen
