#pragma once

// Partitioning rules per operand structure and the properties blocks inherit.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pmegen/errors.hpp"
#include "pmegen/expr.hpp"
#include "pmegen/opspec.hpp"
#include "pmegen/size.hpp"

namespace pmegen {

enum class Shape { R1x1, R1x2, R2x1, R2x2 };

inline const char* shape_name(Shape s) {
  switch (s) {
    case Shape::R1x1: return "1x1";
    case Shape::R1x2: return "1x2";
    case Shape::R2x1: return "2x1";
    case Shape::R2x2: return "2x2";
  }
  return "?";
}

inline std::optional<Shape> shape_from_name(const std::string& s) {
  for (Shape sh : {Shape::R1x1, Shape::R1x2, Shape::R2x1, Shape::R2x2})
    if (s == shape_name(sh)) return sh;
  return std::nullopt;
}

inline bool splits_rows(Shape s) { return s == Shape::R2x1 || s == Shape::R2x2; }
inline bool splits_cols(Shape s) { return s == Shape::R1x2 || s == Shape::R2x2; }

struct PartitionRule {
  Shape shape = Shape::R1x1;
  std::string operand;
  std::optional<std::string> split_rows;  // size symbol of the top block
  std::optional<std::string> split_cols;  // size symbol of the left block

  bool operator==(const PartitionRule&) const = default;
};

/// Block-grid of one operand after applying a rule. Cells hold block
/// references, the Zero leaf, or trans(<BL block>) for symmetric parents.
struct BlockedOperand {
  std::string operand;
  Shape shape = Shape::R1x1;
  std::size_t rows = 1, cols = 1;
  std::vector<Expr> blocks;  // row-major
  std::vector<SymSize> row_sizes, col_sizes;
  std::map<std::string, PropertySet> block_properties;
  std::map<std::string, Dimension> block_dims;
  std::map<std::string, OperandKind> block_kinds;
  bool parent_spd = false;

  const Expr& at(std::size_t r, std::size_t c) const { return blocks.at(r * cols + c); }
};

/// Position labels used for blocks and for quadrant equations.
inline std::vector<std::string> position_names(std::size_t rows, std::size_t cols) {
  if (rows == 2 && cols == 2) return {"TL", "TR", "BL", "BR"};
  if (rows == 2 && cols == 1) return {"T", "B"};
  if (rows == 1 && cols == 2) return {"L", "R"};
  return {""};
}

inline std::vector<Shape> admissible_rules(const OperandDecl& decl) {
  switch (decl.kind) {
    case OperandKind::Scalar: return {Shape::R1x1};
    case OperandKind::Vector: return {Shape::R1x1, Shape::R2x1};
    case OperandKind::Matrix: break;
  }
  if (is_structured(decl.properties)) return {Shape::R1x1, Shape::R2x2};
  return {Shape::R1x1, Shape::R1x2, Shape::R2x1, Shape::R2x2};
}

inline BlockedOperand apply_rule(const OperandDecl& decl, const PartitionRule& rule) {
  auto admissible = admissible_rules(decl);
  if (std::find(admissible.begin(), admissible.end(), rule.shape) == admissible.end())
    throw ContractViolation(std::string("rule ") + shape_name(rule.shape) + " is not admissible for operand '" +
                            decl.name + "'");
  if (splits_rows(rule.shape) != rule.split_rows.has_value() || splits_cols(rule.shape) != rule.split_cols.has_value())
    throw ContractViolation("split sizes do not match rule shape for operand '" + decl.name + "'");
  bool structured = is_structured(decl.properties);
  if (structured && rule.shape == Shape::R2x2 && *rule.split_rows != *rule.split_cols)
    throw ContractViolation("structured operand '" + decl.name + "' needs a square top-left block");

  BlockedOperand b;
  b.operand = decl.name;
  b.shape = rule.shape;
  b.parent_spd = decl.has(Property::SPD);
  b.rows = splits_rows(rule.shape) ? 2 : 1;
  b.cols = splits_cols(rule.shape) ? 2 : 1;
  if (b.rows == 2) {
    SymSize k = SymSize::symbol(*rule.split_rows);
    b.row_sizes = {k, decl.dims.rows - k};
  } else {
    b.row_sizes = {decl.dims.rows};
  }
  if (b.cols == 2) {
    SymSize k = SymSize::symbol(*rule.split_cols);
    b.col_sizes = {k, decl.dims.cols - k};
  } else {
    b.col_sizes = {decl.dims.cols};
  }

  auto names = position_names(b.rows, b.cols);
  auto block_ref = [&](std::size_t i, PropertySet props) {
    std::string nm = names[i].empty() ? decl.name : decl.name + "_" + names[i];
    std::size_t r = i / b.cols, c = i % b.cols;
    b.block_properties[nm] = std::move(props);
    b.block_dims[nm] = {b.row_sizes[r], b.col_sizes[c]};
    b.block_kinds[nm] = (decl.kind == OperandKind::Vector) ? OperandKind::Vector
                        : (decl.kind == OperandKind::Scalar) ? OperandKind::Scalar
                                                            : OperandKind::Matrix;
    return Expr::operand(nm);
  };

  if (rule.shape == Shape::R1x1) {
    b.blocks = {block_ref(0, decl.properties)};
    return b;
  }
  if (rule.shape != Shape::R2x2 || !structured) {
    for (std::size_t i = 0; i < b.rows * b.cols; ++i) b.blocks.push_back(block_ref(i, {}));
    return b;
  }

  // Structured 2x2: TL/BR inherit, off-diagonal blocks follow the structure.
  PropertySet diag;
  for (Property p : {Property::LowerTriangular, Property::UpperTriangular, Property::Symmetric, Property::SPD,
                     Property::Diagonal})
    if (decl.has(p)) diag.insert(p);
  Expr tl = block_ref(0, diag);
  Expr br = block_ref(3, diag);
  if (decl.has(Property::LowerTriangular)) {
    Expr bl = block_ref(2, {});
    b.blocks = {tl, Expr::zero(), bl, br};
  } else if (decl.has(Property::UpperTriangular)) {
    Expr tr = block_ref(1, {});
    b.blocks = {tl, tr, Expr::zero(), br};
  } else if (decl.has(Property::Diagonal)) {
    b.blocks = {tl, Expr::zero(), Expr::zero(), br};
  } else {  // symmetric / SPD
    Expr bl = block_ref(2, {});
    b.blocks = {tl, transpose_of(bl), bl, br};
  }
  return b;
}

struct PropertyFact {
  Expr expression;
  Property property;

  bool operator==(const PropertyFact& o) const { return expression == o.expression && property == o.property; }
};

/// SPD facts implied by a 2x2 blocking of an SPD matrix: both diagonal
/// blocks and both Schur complements.
inline std::vector<PropertyFact> spd_facts(const BlockedOperand& blocked) {
  if (!blocked.parent_spd) throw ContractViolation("spd_facts on non-SPD operand '" + blocked.operand + "'");
  if (blocked.shape == Shape::R1x1) return {{blocked.at(0, 0), Property::SPD}};
  if (blocked.shape != Shape::R2x2) throw ContractViolation("SPD operand blocked with a non-square rule");
  const Expr& tl = blocked.at(0, 0);
  const Expr& bl = blocked.at(1, 0);
  const Expr& br = blocked.at(1, 1);
  Expr schur_tl = sum_of({tl, negate(product_of({transpose_of(bl), inverse_of(br), bl}))});
  Expr schur_br = sum_of({br, negate(product_of({bl, inverse_of(tl), transpose_of(bl)}))});
  return {{tl, Property::SPD}, {br, Property::SPD}, {schur_tl, Property::SPD}, {schur_br, Property::SPD}};
}

}  // namespace pmegen
