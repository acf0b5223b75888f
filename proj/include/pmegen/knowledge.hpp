#pragma once

// Patterns, the knowledge base that holds them, and its on-disk form.

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmegen/errors.hpp"
#include "pmegen/expr.hpp"
#include "pmegen/opspec.hpp"

namespace pmegen {

/// A recognizable equation shape. Every operand in `templ` is a slot; the
/// slot declarations carry the knownness and properties a match requires.
struct Pattern {
  std::string name;
  std::string provenance;         // "builtin" or "learned-from:<operation>"
  std::string solution_operator;  // empty for builtins with explicit solved forms
  std::vector<OperandDecl> slots;
  Equation templ;
  Equation solved;  // lhs is the output slot

  bool builtin() const { return provenance == "builtin"; }
  const OperandDecl* slot(const std::string& n) const {
    for (const auto& s : slots)
      if (s.name == n) return &s;
    return nullptr;
  }
  bool same_definition(const Pattern& o) const {
    return name == o.name && solution_operator == o.solution_operator && slots == o.slots && templ == o.templ &&
           solved == o.solved;
  }
};

/// The pattern an operation contributes once learned: output = Op(inputs...).
inline Pattern pattern_from_spec(const OperationSpec& spec) {
  auto outs = spec.outputs();
  if (outs.size() != 1)
    throw KnowledgeBaseError("operation '" + spec.name + "' must have exactly one unknown to become a pattern");
  std::vector<Expr> args;
  for (const auto* in : spec.inputs()) args.push_back(Expr::operand(in->name));
  Pattern p;
  p.name = spec.name;
  p.provenance = "learned-from:" + spec.name;
  p.solution_operator = spec.solution_operator;
  p.slots = spec.operands;
  p.templ = normalize(spec.postcondition);
  p.solved = {Expr::operand(outs.front()->name), Expr::solved(spec.solution_operator, std::move(args))};
  return p;
}

class KnowledgeBase {
public:
  const std::vector<Pattern>& builtins() const noexcept { return builtins_; }
  const std::vector<Pattern>& learned() const noexcept { return learned_; }

  /// Match order: learned patterns, most recent first, then builtins.
  std::vector<const Pattern*> ordered() const {
    std::vector<const Pattern*> out;
    for (auto it = learned_.rbegin(); it != learned_.rend(); ++it) out.push_back(&*it);
    for (const auto& p : builtins_) out.push_back(&p);
    return out;
  }

  const Pattern* find(const std::string& name) const {
    for (const auto& p : learned_)
      if (p.name == name) return &p;
    for (const auto& p : builtins_)
      if (p.name == name) return &p;
    return nullptr;
  }
  const Pattern* find_operator(const std::string& op) const {
    for (const auto& p : learned_)
      if (p.solution_operator == op) return &p;
    return nullptr;
  }

  /// Drops builtins named `name` or belonging to the family `name-*`.
  /// Returns how many were removed.
  std::size_t disable_builtin(const std::string& name) {
    auto before = builtins_.size();
    std::erase_if(builtins_, [&](const Pattern& p) { return p.name == name || p.name.rfind(name + "-", 0) == 0; });
    return before - builtins_.size();
  }

  void add_builtin(Pattern p) { builtins_.push_back(std::move(p)); }

  /// Appends a learned pattern. Re-adding an identical definition is a no-op;
  /// a different definition under a taken name is an error.
  void add_learned(Pattern p) {
    if (const Pattern* existing = find(p.name)) {
      if (existing->same_definition(p)) return;
      throw KnowledgeBaseError("conflicting redefinition of pattern '" + p.name + "'");
    }
    learned_.push_back(std::move(p));
  }

  bool operator==(const KnowledgeBase& o) const {
    auto eq = [](const std::vector<Pattern>& a, const std::vector<Pattern>& b) {
      if (a.size() != b.size()) return false;
      for (std::size_t i = 0; i < a.size(); ++i)
        if (!a[i].same_definition(b[i]) || a[i].provenance != b[i].provenance) return false;
      return true;
    };
    return eq(builtins_, o.builtins_) && eq(learned_, o.learned_);
  }

private:
  std::vector<Pattern> builtins_;
  std::vector<Pattern> learned_;
};

namespace detail {

inline Pattern builtin(const std::string& name, const std::string& operand_lines, const std::string& templ,
                       const std::string& solved) {
  OperationSpec spec = parse_operation("operation builtin\n" + operand_lines + "postcondition: " + templ +
                                       "\nsolve: Builtin\n");
  Pattern p;
  p.name = name;
  p.provenance = "builtin";
  p.slots = spec.operands;
  p.templ = spec.postcondition;
  p.solved = parse_equation(solved);
  return p;
}

}  // namespace detail

/// Elementary equation solvers known before anything is learned.
inline KnowledgeBase seed_builtins() {
  using detail::builtin;
  const std::string x_mn = "operand X : matrix(m,n), unknown\n";
  const std::string b_mn = "operand B : matrix(m,n), known\n";
  const std::string lo_m = "operand L : matrix(m,m), known, lower_triangular\n";
  const std::string up_m = "operand U : matrix(m,m), known, upper_triangular\n";
  const std::string lo_n = "operand L : matrix(n,n), known, lower_triangular\n";
  const std::string up_n = "operand U : matrix(n,n), known, upper_triangular\n";

  KnowledgeBase kb;
  kb.add_builtin(builtin("assign", x_mn + "operand E : matrix(m,n), known\n", "X = E", "X = E"));
  kb.add_builtin(builtin("add", x_mn + "operand E : matrix(m,n), known\noperand F : matrix(m,n), known\n",
                         "X + E = F", "X = F - E"));
  kb.add_builtin(builtin("transpose", "operand X : matrix(m,n), unknown\noperand E : matrix(n,m), known\n",
                         "trans(X) = E", "X = trans(E)"));

  // Triangular systems with multiple right-hand sides.
  kb.add_builtin(builtin("trsm-left-lower-trans", lo_m + x_mn + b_mn, "trans(L) * X = B", "X = trans(inv(L)) * B"));
  kb.add_builtin(builtin("trsm-left-upper-trans", up_m + x_mn + b_mn, "trans(U) * X = B", "X = trans(inv(U)) * B"));
  kb.add_builtin(builtin("trsm-left-lower", lo_m + x_mn + b_mn, "L * X = B", "X = inv(L) * B"));
  kb.add_builtin(builtin("trsm-left-upper", up_m + x_mn + b_mn, "U * X = B", "X = inv(U) * B"));
  kb.add_builtin(builtin("trsm-right-lower-trans", lo_n + x_mn + b_mn, "X * trans(L) = B", "X = B * trans(inv(L))"));
  kb.add_builtin(builtin("trsm-right-upper-trans", up_n + x_mn + b_mn, "X * trans(U) = B", "X = B * trans(inv(U))"));
  kb.add_builtin(builtin("trsm-right-lower", lo_n + x_mn + b_mn, "X * L = B", "X = B * inv(L)"));
  kb.add_builtin(builtin("trsm-right-upper", up_n + x_mn + b_mn, "X * U = B", "X = B * inv(U)"));

  // Division by a scalar.
  kb.add_builtin(builtin("scale-left", "operand s : scalar, known\n" + x_mn + b_mn, "s * X = B", "X = inv(s) * B"));
  kb.add_builtin(builtin("scale-right", "operand s : scalar, known\n" + x_mn + b_mn, "X * s = B", "X = B * inv(s)"));

  // Unstructured square systems.
  kb.add_builtin(builtin("solve-left", "operand A : matrix(m,m), known, general\n" + x_mn + b_mn, "A * X = B",
                         "X = inv(A) * B"));
  kb.add_builtin(builtin("solve-right", "operand A : matrix(n,n), known, general\n" + x_mn + b_mn, "X * A = B",
                         "X = B * inv(A)"));
  return kb;
}

/// Returns `kb` extended with the pattern of `spec`.
inline KnowledgeBase learn(const OperationSpec& spec, KnowledgeBase kb) {
  kb.add_learned(pattern_from_spec(spec));
  return kb;
}

// ---------------------------------------------------------------------------
// On-disk form: one JSON record per learned pattern. Builtins are seeded in
// code and never written.

inline const char* kKbFormat = "pmegen-kb/1";

inline nlohmann::ordered_json pattern_to_json(const Pattern& p) {
  nlohmann::ordered_json j;
  j["name"] = p.name;
  j["provenance"] = p.provenance;
  j["solution_operator"] = p.solution_operator;
  auto slots = nlohmann::ordered_json::array();
  for (const auto& s : p.slots) {
    nlohmann::ordered_json o;
    o["name"] = s.name;
    o["kind"] = kind_name(s.kind);
    o["rows"] = s.dims.rows.str();
    o["cols"] = s.dims.cols.str();
    o["io_role"] = s.role == IoRole::Input ? "input" : "output";
    auto props = nlohmann::ordered_json::array();
    for (Property pr : s.properties) props.push_back(property_name(pr));
    o["properties"] = props;
    slots.push_back(o);
  }
  j["slots"] = slots;
  j["postcondition"] = p.templ.key();
  j["solved"] = p.solved.key();
  return j;
}

inline Pattern pattern_from_json(const nlohmann::json& j) {
  auto str = [&](const nlohmann::json& o, const char* k) -> std::string {
    if (!o.contains(k) || !o[k].is_string()) throw KnowledgeBaseError(std::string("pattern record lacks '") + k + "'");
    return o[k].get<std::string>();
  };
  auto size = [](const std::string& s) {
    if (s == "1") return SymSize::literal(1);
    if (!is_identifier(s)) throw KnowledgeBaseError("bad slot size '" + s + "'");
    return SymSize::symbol(s);
  };
  Pattern p;
  p.name = str(j, "name");
  p.provenance = str(j, "provenance");
  p.solution_operator = str(j, "solution_operator");
  if (!j.contains("slots") || !j["slots"].is_array()) throw KnowledgeBaseError("pattern record lacks 'slots'");
  for (const auto& s : j["slots"]) {
    OperandDecl d;
    d.name = str(s, "name");
    std::string kind = str(s, "kind");
    if (kind == "matrix")
      d.kind = OperandKind::Matrix;
    else if (kind == "vector")
      d.kind = OperandKind::Vector;
    else if (kind == "scalar")
      d.kind = OperandKind::Scalar;
    else
      throw KnowledgeBaseError("bad slot kind '" + kind + "'");
    d.dims = {size(str(s, "rows")), size(str(s, "cols"))};
    std::string role = str(s, "io_role");
    if (role != "input" && role != "output") throw KnowledgeBaseError("bad io_role '" + role + "'");
    d.role = role == "input" ? IoRole::Input : IoRole::Output;
    for (const auto& pr : s.value("properties", nlohmann::json::array())) {
      auto prop = property_from_name(pr.get<std::string>());
      if (!prop) throw KnowledgeBaseError("bad property '" + pr.get<std::string>() + "'");
      d.properties.insert(*prop);
    }
    p.slots.push_back(std::move(d));
  }
  try {
    p.templ = parse_prefix_equation(str(j, "postcondition"));
    p.solved = parse_prefix_equation(str(j, "solved"));
  } catch (const ParseError& e) {
    throw KnowledgeBaseError("pattern '" + p.name + "': " + e.what());
  }
  return p;
}

/// Rebuilds the pattern through the operation validator and checks that the
/// record agrees with what learning that operation would produce.
inline void validate_learned(const Pattern& p) {
  if (p.provenance.rfind("learned-from:", 0) != 0)
    throw KnowledgeBaseError("pattern '" + p.name + "' has provenance '" + p.provenance + "'");
  OperationSpec spec;
  spec.name = p.name;
  spec.operands = p.slots;
  spec.postcondition = p.templ;
  spec.solution_operator = p.solution_operator;
  try {
    validate_spec(spec);
  } catch (const ParseError& e) {
    throw KnowledgeBaseError("pattern '" + p.name + "': " + e.what());
  }
  if (!(normalize(p.templ) == p.templ)) throw KnowledgeBaseError("pattern '" + p.name + "': template not normalized");
  Pattern expect = pattern_from_spec(spec);
  if (!expect.same_definition(p)) throw KnowledgeBaseError("pattern '" + p.name + "': solved form inconsistent");
}

inline std::string kb_to_string(const KnowledgeBase& kb) {
  nlohmann::ordered_json j;
  j["format"] = kKbFormat;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& p : kb.learned()) arr.push_back(pattern_to_json(p));
  j["patterns"] = arr;
  return j.dump(2) + "\n";
}

inline KnowledgeBase kb_from_string(const std::string& text, KnowledgeBase base = seed_builtins()) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw KnowledgeBaseError(std::string("knowledge base is not valid JSON: ") + e.what());
  }
  if (j.value("format", "") != kKbFormat) throw KnowledgeBaseError("unsupported knowledge base format");
  if (!j.contains("patterns") || !j["patterns"].is_array()) throw KnowledgeBaseError("knowledge base lacks 'patterns'");
  for (const auto& rec : j["patterns"]) {
    Pattern p = pattern_from_json(rec);
    validate_learned(p);
    base.add_learned(std::move(p));
  }
  return base;
}

/// Missing file means builtins only.
inline KnowledgeBase load_kb(const std::filesystem::path& path, KnowledgeBase base = seed_builtins()) {
  if (!std::filesystem::exists(path)) return base;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw KnowledgeBaseError("cannot read knowledge base " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return kb_from_string(ss.str(), std::move(base));
}

/// Writes to a sibling temporary and renames over the target.
inline void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw KnowledgeBaseError("cannot write " + tmp.string());
    out << kb_to_string(kb);
    if (!out.flush()) throw KnowledgeBaseError("cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw KnowledgeBaseError("cannot replace " + path.string() + ": " + ec.message());
}

}  // namespace pmegen
