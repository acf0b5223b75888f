#pragma once

// Text, LaTeX and JSON renderings of combinations, PMEs and patterns. The
// JSON form of a PME round-trips, so the other two can be regenerated from it.

#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmegen/binding.hpp"
#include "pmegen/engine.hpp"
#include "pmegen/expr.hpp"
#include "pmegen/knowledge.hpp"
#include "pmegen/opspec.hpp"

namespace pmegen {

using Json = nlohmann::ordered_json;

inline std::string describe(const DimensionGroup& g) {
  std::string out = "{";
  for (std::size_t i = 0; i < g.members.size(); ++i) out += (i ? ", " : "") + g.members[i].str();
  out += "}";
  if (!g.partitionable) out += " (size " + g.size.str() + ", not partitionable)";
  return out;
}

inline std::string render_combinations_text(const OperationSpec& spec, const DeriveResult& r) {
  std::ostringstream os;
  os << "operation " << spec.name << "\n";
  os << "dimension groups:";
  for (const auto& g : r.binding.groups) os << " " << describe(g);
  os << "\n";
  os << "combinations: " << r.combinations.size() << "\n";
  for (std::size_t i = 0; i < r.combinations.size(); ++i)
    os << "  [" << i + 1 << "] " << describe(r.combinations[i]) << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// PME renderings

inline std::string render_pme_text(const PME& pme) {
  std::ostringstream os;
  os << "PME [" << pme.combination << "] " << pme.operation << ": " << describe(pme.rules) << "\n";
  for (const auto& c : pme.cells) {
    std::string pos = c.position.empty() ? "all" : c.position;
    switch (c.kind) {
      case CellKind::Assign: os << "  " << pos << ": " << c.output << " = " << to_text(c.rhs) << "\n"; break;
      case CellKind::Star: os << "  " << pos << ": *\n"; break;
      case CellKind::Identity: os << "  " << pos << ": " << to_text(c.equation) << "\n"; break;
    }
  }
  return os.str();
}

inline std::string render_pme_latex(const PME& pme) {
  auto cell = [](const PmeCell& c) -> std::string {
    switch (c.kind) {
      case CellKind::Assign: return to_latex(Expr::operand(c.output)) + " = " + to_latex(c.rhs);
      case CellKind::Star: return "\\star";
      case CellKind::Identity: return to_latex(c.equation);
    }
    return {};
  };
  std::ostringstream os;
  os << "% " << pme.operation << ", combination " << pme.combination << ": " << describe(pme.rules) << "\n";
  std::string spec = pme.cols == 2 ? "c|c" : "c";
  os << "\\left(\\begin{array}{" << spec << "}\n";
  for (std::size_t r = 0; r < pme.rows; ++r) {
    for (std::size_t c = 0; c < pme.cols; ++c) os << (c ? " & " : "") << cell(pme.cells[r * pme.cols + c]);
    if (r + 1 < pme.rows) os << " \\\\ \\hline";
    os << "\n";
  }
  os << "\\end{array}\\right)\n";
  return os.str();
}

inline Json rule_to_json(const PartitionRule& r) {
  Json j;
  j["operand"] = r.operand;
  j["shape"] = shape_name(r.shape);
  j["split_rows"] = r.split_rows ? Json(*r.split_rows) : Json(nullptr);
  j["split_cols"] = r.split_cols ? Json(*r.split_cols) : Json(nullptr);
  return j;
}

inline Json pme_to_json(const PME& pme) {
  Json j;
  j["operation"] = pme.operation;
  j["combination"] = pme.combination;
  Json rules = Json::array();
  for (const auto& r : pme.rules.rules) rules.push_back(rule_to_json(r));
  j["rules"] = rules;
  j["rows"] = pme.rows;
  j["cols"] = pme.cols;
  Json cells = Json::array();
  for (const auto& c : pme.cells) {
    Json o;
    o["position"] = c.position;
    switch (c.kind) {
      case CellKind::Assign:
        o["kind"] = "assign";
        o["output"] = c.output;
        o["rhs"] = c.rhs.key();
        o["pattern"] = c.pattern;
        break;
      case CellKind::Star:
        o["kind"] = "star";
        o["partner"] = c.partner;
        break;
      case CellKind::Identity:
        o["kind"] = "identity";
        o["equation"] = c.equation.key();
        break;
    }
    cells.push_back(o);
  }
  j["cells"] = cells;
  j["order"] = pme.order;
  return j;
}

inline PME pme_from_json(const nlohmann::json& j) {
  auto str = [](const nlohmann::json& o, const char* k) -> std::string {
    if (!o.contains(k) || !o[k].is_string()) throw ParseError(0, 0, std::string("PME json: missing string '") + k + "'");
    return o[k].get<std::string>();
  };
  auto num = [](const nlohmann::json& o, const char* k) -> std::size_t {
    if (!o.contains(k) || !o[k].is_number_unsigned()) throw ParseError(0, 0, std::string("PME json: missing count '") + k + "'");
    return o[k].get<std::size_t>();
  };
  PME p;
  p.operation = str(j, "operation");
  p.combination = num(j, "combination");
  p.rows = num(j, "rows");
  p.cols = num(j, "cols");
  if (p.rows < 1 || p.rows > 2 || p.cols < 1 || p.cols > 2) throw ParseError(0, 0, "PME json: bad grid shape");
  if (!j.contains("rules") || !j["rules"].is_array()) throw ParseError(0, 0, "PME json: missing 'rules'");
  for (const auto& r : j["rules"]) {
    PartitionRule rule;
    rule.operand = str(r, "operand");
    auto shape = shape_from_name(str(r, "shape"));
    if (!shape) throw ParseError(0, 0, "PME json: bad shape for '" + rule.operand + "'");
    rule.shape = *shape;
    if (r.contains("split_rows") && r["split_rows"].is_string()) rule.split_rows = r["split_rows"].get<std::string>();
    if (r.contains("split_cols") && r["split_cols"].is_string()) rule.split_cols = r["split_cols"].get<std::string>();
    p.rules.rules.push_back(std::move(rule));
  }
  if (!j.contains("cells") || !j["cells"].is_array()) throw ParseError(0, 0, "PME json: missing 'cells'");
  for (const auto& c : j["cells"]) {
    PmeCell cell;
    cell.position = str(c, "position");
    std::string kind = str(c, "kind");
    if (kind == "assign") {
      cell.kind = CellKind::Assign;
      cell.output = str(c, "output");
      cell.rhs = parse_prefix(str(c, "rhs"));
      cell.pattern = str(c, "pattern");
    } else if (kind == "star") {
      cell.kind = CellKind::Star;
      cell.partner = str(c, "partner");
    } else if (kind == "identity") {
      cell.kind = CellKind::Identity;
      cell.equation = parse_prefix_equation(str(c, "equation"));
    } else {
      throw ParseError(0, 0, "PME json: unknown cell kind '" + kind + "'");
    }
    p.cells.push_back(std::move(cell));
  }
  if (p.cells.size() != p.rows * p.cols) throw ParseError(0, 0, "PME json: cell count does not match the grid");
  if (!j.contains("order") || !j["order"].is_array()) throw ParseError(0, 0, "PME json: missing 'order'");
  for (const auto& o : j["order"]) {
    if (!o.is_string()) throw ParseError(0, 0, "PME json: bad 'order' entry");
    p.order.push_back(o.get<std::string>());
    const PmeCell& c = p.at(p.order.back());
    if (c.kind != CellKind::Assign) throw ParseError(0, 0, "PME json: order names a non-assignment cell");
  }
  return p;
}

inline Json derive_to_json(const OperationSpec& spec, const DeriveResult& r) {
  Json j;
  j["format"] = "pmegen-derive/1";
  j["operation"] = spec.name;
  Json groups = Json::array();
  for (const auto& g : r.binding.groups) {
    Json members = Json::array();
    for (const auto& m : g.members) members.push_back(m.str());
    Json o;
    o["members"] = members;
    o["size"] = g.size.str();
    o["partitionable"] = g.partitionable;
    groups.push_back(o);
  }
  j["groups"] = groups;
  Json combos = Json::array();
  for (std::size_t i = 0; i < r.combinations.size(); ++i) {
    Json o;
    o["index"] = i + 1;
    Json rules = Json::array();
    for (const auto& rule : r.combinations[i].rules) rules.push_back(rule_to_json(rule));
    o["rules"] = rules;
    combos.push_back(o);
  }
  j["combinations"] = combos;
  Json pmes = Json::array();
  for (const auto& p : r.pmes) pmes.push_back(pme_to_json(p));
  j["pmes"] = pmes;
  Json fails = Json::array();
  for (const auto& [idx, diag] : r.failures) {
    Json o;
    o["combination"] = idx;
    o["diagnostic"] = diag;
    fails.push_back(o);
  }
  j["failures"] = fails;
  return j;
}

/// Accepts a single PME object or a derive document holding "pmes".
inline std::vector<PME> pmes_from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, 0, std::string("PME json: ") + e.what());
  }
  std::vector<PME> out;
  if (j.is_object() && j.contains("pmes")) {
    if (!j["pmes"].is_array()) throw ParseError(0, 0, "PME json: 'pmes' is not an array");
    for (const auto& p : j["pmes"]) out.push_back(pme_from_json(p));
  } else if (j.is_array()) {
    for (const auto& p : j) out.push_back(pme_from_json(p));
  } else {
    out.push_back(pme_from_json(j));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Patterns

inline std::string render_pattern(const Pattern& p) {
  std::ostringstream os;
  os << "pattern " << p.name << " (" << p.provenance << ")\n";
  for (const auto& s : p.slots) os << "  operand " << render_operand(s) << "\n";
  os << "  postcondition: " << to_dsl(p.templ) << "\n";
  os << "  solved: " << to_text(p.solved) << "\n";
  return os.str();
}

}  // namespace pmegen
