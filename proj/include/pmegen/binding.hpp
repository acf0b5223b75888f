#pragma once

// Dimension binding over the postcondition tree and enumeration of the
// partitioning-rule combinations it admits.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pmegen/errors.hpp"
#include "pmegen/expr.hpp"
#include "pmegen/opspec.hpp"
#include "pmegen/partition.hpp"
#include "pmegen/union_find.hpp"

namespace pmegen {

enum class Axis { Rows, Cols };

struct DimensionVar {
  std::string operand;
  Axis axis = Axis::Rows;

  std::string str() const { return operand + (axis == Axis::Rows ? "_r" : "_c"); }
  auto operator<=>(const DimensionVar&) const = default;
};

struct DimensionGroup {
  std::vector<DimensionVar> members;  // first-encounter order
  SymSize size;
  bool partitionable = true;
};

/// Equivalence classes of operand axes, in order of first encounter during
/// the post-order walk of the postcondition.
struct Binding {
  std::vector<DimensionGroup> groups;

  std::size_t effective_groups() const {
    std::size_t g = 0;
    for (const auto& gr : groups) g += gr.partitionable ? 1 : 0;
    return g;
  }
  std::size_t group_of(const DimensionVar& v) const {
    for (std::size_t i = 0; i < groups.size(); ++i)
      for (const auto& m : groups[i].members)
        if (m == v) return i;
    throw ContractViolation("dimension " + v.str() + " is not bound");
  }
};

inline Binding bind_dimensions(const OperationSpec& spec) {
  std::vector<DimensionVar> vars;
  std::map<std::string, std::size_t> index;
  for (const auto& d : spec.operands) {
    index[d.name] = vars.size();
    vars.push_back({d.name, Axis::Rows});
    vars.push_back({d.name, Axis::Cols});
  }
  DisjointSet sets(vars.size());
  std::vector<std::size_t> encounter;
  std::vector<bool> seen(vars.size(), false);

  std::function<bool(const Expr&)> is_scalar = [&](const Expr& e) {
    if (e.is(Op::Operand)) {
      const OperandDecl* d = spec.find(e.name());
      return d && d->kind == OperandKind::Scalar;
    }
    if (e.is(Op::Minus) || e.is(Op::Transpose) || e.is(Op::Inverse)) return is_scalar(e[0]);
    if (e.is(Op::Times)) return std::all_of(e.children().begin(), e.children().end(), is_scalar);
    return false;
  };

  using Dims = std::pair<std::size_t, std::size_t>;
  std::function<Dims(const Expr&)> walk = [&](const Expr& e) -> Dims {
    switch (e.op()) {
      case Op::Operand: {
        auto it = index.find(e.name());
        if (it == index.end()) throw NonConformantError("undeclared operand '" + e.name() + "'");
        std::size_t r = it->second, c = it->second + 1;
        for (std::size_t v : {r, c})
          if (!seen[v]) {
            seen[v] = true;
            encounter.push_back(v);
          }
        if (is_structured(spec.find(e.name())->properties)) sets.unite(r, c);
        return {r, c};
      }
      case Op::Times: {
        // Scalar factors scale the product and take no part in the chain.
        std::optional<Dims> acc;
        Dims any{};
        for (std::size_t i = 0; i < e.size(); ++i) {
          Dims next = walk(e[i]);
          any = next;
          if (is_scalar(e[i])) continue;
          if (acc) sets.unite(acc->second, next.first);
          acc = acc ? Dims{acc->first, next.second} : next;
        }
        return acc ? *acc : any;
      }
      case Op::Plus: {
        Dims first = walk(e[0]);
        for (std::size_t i = 1; i < e.size(); ++i) {
          Dims next = walk(e[i]);
          sets.unite(first.first, next.first);
          sets.unite(first.second, next.second);
        }
        return first;
      }
      case Op::Minus: return walk(e[0]);
      case Op::Transpose: {
        Dims d = walk(e[0]);
        return {d.second, d.first};
      }
      case Op::Inverse: {
        Dims d = walk(e[0]);
        sets.unite(d.first, d.second);
        return d;
      }
      case Op::Zero:
      case Op::Solved: break;
    }
    throw ContractViolation("postcondition contains a node binding cannot handle: " + e.key());
  };

  Dims l = walk(spec.postcondition.lhs);
  Dims r = walk(spec.postcondition.rhs);
  sets.unite(l.first, r.first);
  sets.unite(l.second, r.second);

  auto size_of = [&](std::size_t v) {
    const OperandDecl* d = spec.find(vars[v].operand);
    return vars[v].axis == Axis::Rows ? d->dims.rows : d->dims.cols;
  };

  Binding out;
  std::map<std::size_t, std::size_t> root_to_group;
  for (std::size_t v : encounter) {
    std::size_t root = sets.find(v);
    auto [it, fresh] = root_to_group.emplace(root, out.groups.size());
    if (fresh) {
      out.groups.push_back({{}, size_of(v), true});
    }
    DimensionGroup& g = out.groups[it->second];
    if (!(size_of(v) == g.size))
      throw NonConformantError("non-conformant postcondition: " + vars[v].str() + " has size " + size_of(v).str() +
                               " but is bound to " + g.members.front().str() + " of size " + g.size.str());
    g.members.push_back(vars[v]);
    if (size_of(v).is_literal()) g.partitionable = false;
  }
  return out;
}

/// One viable assignment of partitioning rules (one per operand, in
/// declaration order) together with the per-group split choices.
struct RuleCombination {
  std::vector<PartitionRule> rules;
  std::vector<bool> group_split;

  const PartitionRule& rule_for(const std::string& operand) const {
    for (const auto& r : rules)
      if (r.operand == operand) return r;
    throw ContractViolation("no rule for operand '" + operand + "'");
  }
  bool all_identity() const {
    for (const auto& r : rules)
      if (r.shape != Shape::R1x1) return false;
    return true;
  }
  bool operator==(const RuleCombination&) const = default;
};

inline std::string describe(const RuleCombination& c) {
  std::string out;
  for (const auto& r : c.rules) {
    if (!out.empty()) out += "  ";
    out += r.operand + ": " + shape_name(r.shape);
    if (r.shape != Shape::R1x1) {
      out += "(";
      out += r.split_rows ? *r.split_rows : "-";
      out += ",";
      out += r.split_cols ? *r.split_cols : "-";
      out += ")";
    }
  }
  return out;
}

/// All 2^g - 1 split/keep choices over partitionable groups, excluding the
/// all-keep choice. Counting is binary with the first group as the most
/// significant bit.
inline std::vector<RuleCombination> enumerate_combinations(const OperationSpec& spec, const Binding& binding) {
  std::vector<std::size_t> effective;
  for (std::size_t i = 0; i < binding.groups.size(); ++i)
    if (binding.groups[i].partitionable) effective.push_back(i);
  if (effective.empty()) throw NoViablePartitionings("no viable partitionings for '" + spec.name + "'");
  if (effective.size() > 20) throw NoViablePartitionings("too many independent dimension groups");

  std::set<std::string> taken;
  for (const auto& d : spec.operands)
    for (const auto& s : {d.dims.rows, d.dims.cols})
      for (const auto& [sym, c] : s.terms()) taken.insert(sym);

  // Groups in order of their earliest member by declaration position.
  std::map<std::string, std::size_t> decl_pos;
  for (std::size_t i = 0; i < spec.operands.size(); ++i) decl_pos[spec.operands[i].name] = i;
  auto first_decl = [&](std::size_t g) {
    std::size_t best = SIZE_MAX;
    for (const auto& m : binding.groups[g].members)
      best = std::min(best, decl_pos[m.operand] * 2 + (m.axis == Axis::Rows ? 0 : 1));
    return best;
  };

  const std::size_t g = effective.size();
  std::vector<RuleCombination> out;
  for (std::size_t counter = 1; counter < (std::size_t{1} << g); ++counter) {
    std::vector<bool> split(binding.groups.size(), false);
    for (std::size_t i = 0; i < g; ++i)
      if (counter & (std::size_t{1} << (g - 1 - i))) split[effective[i]] = true;

    std::vector<std::size_t> split_groups;
    for (std::size_t i = 0; i < split.size(); ++i)
      if (split[i]) split_groups.push_back(i);
    std::stable_sort(split_groups.begin(), split_groups.end(),
                     [&](std::size_t a, std::size_t b) { return first_decl(a) < first_decl(b); });
    std::map<std::size_t, std::string> symbol;
    int next = 1;
    for (std::size_t gi : split_groups) {
      std::string s;
      do s = "k" + std::to_string(next++);
      while (taken.count(s));
      symbol[gi] = s;
    }

    RuleCombination combo;
    combo.group_split = split;
    for (const auto& d : spec.operands) {
      std::size_t gr = binding.group_of({d.name, Axis::Rows});
      std::size_t gc = binding.group_of({d.name, Axis::Cols});
      PartitionRule rule;
      rule.operand = d.name;
      bool sr = split[gr], sc = split[gc];
      rule.shape = sr && sc ? Shape::R2x2 : sr ? Shape::R2x1 : sc ? Shape::R1x2 : Shape::R1x1;
      if (sr) rule.split_rows = symbol[gr];
      if (sc) rule.split_cols = symbol[gc];
      combo.rules.push_back(std::move(rule));
    }
    out.push_back(std::move(combo));
  }
  return out;
}

}  // namespace pmegen
