#pragma once

// Operation descriptions: operand declarations (the precondition) plus the
// postcondition equation, and the line-oriented text format they live in.

#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pmegen/errors.hpp"
#include "pmegen/expr.hpp"
#include "pmegen/size.hpp"

namespace pmegen {

enum class Property { LowerTriangular, UpperTriangular, Symmetric, SPD, Diagonal, General };
enum class OperandKind { Matrix, Vector, Scalar };
enum class IoRole { Input, Output };

using PropertySet = std::set<Property>;

inline const char* property_name(Property p) {
  switch (p) {
    case Property::LowerTriangular: return "lower_triangular";
    case Property::UpperTriangular: return "upper_triangular";
    case Property::Symmetric: return "symmetric";
    case Property::SPD: return "spd";
    case Property::Diagonal: return "diagonal";
    case Property::General: return "general";
  }
  return "?";
}

inline std::optional<Property> property_from_name(std::string_view s) {
  for (Property p : {Property::LowerTriangular, Property::UpperTriangular, Property::Symmetric,
                     Property::SPD, Property::Diagonal, Property::General})
    if (s == property_name(p)) return p;
  return std::nullopt;
}

inline const char* kind_name(OperandKind k) {
  switch (k) {
    case OperandKind::Matrix: return "matrix";
    case OperandKind::Vector: return "vector";
    case OperandKind::Scalar: return "scalar";
  }
  return "?";
}

/// Structure that constrains partitioning (everything except General).
inline bool is_structured(const PropertySet& props) {
  for (Property p : props)
    if (p != Property::General) return true;
  return false;
}

struct OperandDecl {
  std::string name;
  OperandKind kind = OperandKind::Matrix;
  Dimension dims;
  IoRole role = IoRole::Input;
  PropertySet properties;

  bool has(Property p) const { return properties.count(p) > 0; }
  bool operator==(const OperandDecl&) const = default;
};

struct OperationSpec {
  std::string name;
  std::vector<OperandDecl> operands;
  Equation postcondition;
  std::string solution_operator;

  const OperandDecl* find(const std::string& operand) const {
    for (const auto& d : operands)
      if (d.name == operand) return &d;
    return nullptr;
  }
  std::vector<const OperandDecl*> inputs() const {
    std::vector<const OperandDecl*> out;
    for (const auto& d : operands)
      if (d.role == IoRole::Input) out.push_back(&d);
    return out;
  }
  std::vector<const OperandDecl*> outputs() const {
    std::vector<const OperandDecl*> out;
    for (const auto& d : operands)
      if (d.role == IoRole::Output) out.push_back(&d);
    return out;
  }

  bool operator==(const OperationSpec& o) const {
    return name == o.name && operands == o.operands && postcondition == o.postcondition &&
           solution_operator == o.solution_operator;
  }
};

inline bool is_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
  return true;
}

/// Checks the property rules of one declaration; returns a message or "".
inline std::string check_operand(OperandDecl& d) {
  if (d.has(Property::SPD)) d.properties.insert(Property::Symmetric);
  int tri = int(d.has(Property::LowerTriangular)) + int(d.has(Property::UpperTriangular)) +
            int(d.has(Property::Diagonal));
  if (tri > 1) return "operand '" + d.name + "': at most one of lower_triangular, upper_triangular, diagonal";
  if (is_structured(d.properties)) {
    if (d.kind != OperandKind::Matrix)
      return "operand '" + d.name + "': structural properties require a matrix, not a " + kind_name(d.kind);
    if (!d.dims.square()) return "operand '" + d.name + "': structural properties require square dimensions";
  }
  if (d.has(Property::General) && is_structured(d.properties))
    return "operand '" + d.name + "': general conflicts with structural properties";
  return {};
}

/// Whole-spec invariants shared by the parser and the renderer.
inline void validate_spec(OperationSpec& spec) {
  if (!is_identifier(spec.name)) throw ParseError(0, 0, "invalid operation name '" + spec.name + "'");
  if (spec.operands.empty()) throw ParseError(0, 0, "operation '" + spec.name + "' declares no operands");
  std::set<std::string> names;
  for (auto& d : spec.operands) {
    if (!names.insert(d.name).second) throw ParseError(0, 0, "duplicate operand '" + d.name + "'");
    if (auto msg = check_operand(d); !msg.empty()) throw ParseError(0, 0, msg);
  }
  if (spec.outputs().empty()) throw ParseError(0, 0, "operation '" + spec.name + "' has no unknown operand");
  if (!is_identifier(spec.solution_operator))
    throw ParseError(0, 0, "invalid solution operator '" + spec.solution_operator + "'");
  validate(spec.postcondition.lhs);
  validate(spec.postcondition.rhs);
  if (spec.postcondition.lhs.is_zero() || spec.postcondition.rhs.is_zero())
    throw ParseError(0, 0, "postcondition side cancels to zero");
  std::set<std::string> used = operands_of(spec.postcondition.lhs);
  for (const auto& n : operands_of(spec.postcondition.rhs)) used.insert(n);
  for (const auto& n : used)
    if (!names.count(n)) throw ParseError(0, 0, "undeclared operand '" + n + "' in postcondition");
  for (const auto& n : names)
    if (!used.count(n)) throw ParseError(0, 0, "operand '" + n + "' does not appear in the postcondition");
}

namespace detail {

struct Tok {
  enum Kind { Ident, Sym, End } kind;
  std::string text;
  std::size_t col;
};

inline std::vector<Tok> lex(std::string_view line, std::size_t line_no, std::size_t col0) {
  std::vector<Tok> out;
  std::size_t i = 0;
  while (i < line.size()) {
    char c = line[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t b = i;
      while (i < line.size() && (std::isalnum(static_cast<unsigned char>(line[i])) || line[i] == '_')) ++i;
      out.push_back({Tok::Ident, std::string(line.substr(b, i - b)), col0 + b});
    } else if (std::string_view("+-*()=,:").find(c) != std::string_view::npos) {
      out.push_back({Tok::Sym, std::string(1, c), col0 + i});
      ++i;
    } else {
      throw ParseError(line_no, col0 + i, std::string("unexpected character '") + c + "'");
    }
  }
  out.push_back({Tok::End, "", col0 + line.size()});
  return out;
}

class ExprParser {
public:
  ExprParser(std::vector<Tok> toks, std::size_t line) : t_(std::move(toks)), line_(line) {}

  Equation equation() {
    Expr l = expr();
    expect("=");
    Expr r = expr();
    if (peek().kind != Tok::End) fail("unexpected '" + peek().text + "'");
    return {l, r};
  }

  /// Operand names with the column where each first occurs.
  std::map<std::string, std::size_t> seen;

private:
  Expr expr() {
    std::vector<Expr> terms{term()};
    while (is("+") || is("-")) {
      bool neg = next().text == "-";
      Expr t = term();
      terms.push_back(neg ? Expr::minus(t) : t);
    }
    return terms.size() == 1 ? terms.front() : Expr::plus(std::move(terms));
  }
  Expr term() {
    std::vector<Expr> fs{factor()};
    while (is("*")) {
      next();
      fs.push_back(factor());
    }
    return fs.size() == 1 ? fs.front() : Expr::times(std::move(fs));
  }
  Expr factor() {
    if (is("-")) {
      next();
      return Expr::minus(factor());
    }
    if (is("(")) {
      next();
      Expr e = expr();
      expect(")");
      return e;
    }
    const Tok& tok = peek();
    if (tok.kind != Tok::Ident) fail(tok.kind == Tok::End ? "unexpected end of expression" : "unexpected '" + tok.text + "'");
    next();
    if (tok.text == "trans" || tok.text == "inv") {
      expect("(");
      Expr e = expr();
      expect(")");
      return tok.text == "trans" ? Expr::trans(e) : Expr::inv(e);
    }
    seen.emplace(tok.text, tok.col);
    return Expr::operand(tok.text);
  }

  const Tok& peek() const { return t_[i_]; }
  const Tok& next() { return t_[i_ < t_.size() - 1 ? i_++ : i_]; }
  bool is(const char* s) const { return peek().kind == Tok::Sym && peek().text == s; }
  void expect(const char* s) {
    if (!is(s)) fail(std::string("expected '") + s + "'");
    next();
  }
  [[noreturn]] void fail(const std::string& why) const { throw ParseError(line_, peek().col, why); }

  std::vector<Tok> t_;
  std::size_t i_ = 0;
  std::size_t line_;
};

}  // namespace detail

/// Parses a single `lhs = rhs` equation in the operation-file syntax and
/// normalizes it.
inline Equation parse_equation(std::string_view text) {
  detail::ExprParser p(detail::lex(text, 1, 1), 1);
  return normalize(p.equation());
}

/// Parses an operation description:
///
///     operation <name>
///       operand <name> : <matrix(r,c)|vector(r)|scalar> , <known|unknown> [, <property>]*
///       postcondition: <expr> = <expr>
///       solve: <OperatorName>
inline OperationSpec parse_operation(std::string_view text) {
  OperationSpec spec;
  bool have_op = false, have_post = false, have_solve = false;
  std::map<std::string, std::size_t> decl_line;
  std::map<std::string, std::size_t> used_at;
  std::size_t post_line = 0;

  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    auto toks = detail::lex(line, line_no, 1);
    if (toks.front().kind == detail::Tok::End) {
      if (end == text.size()) break;
      continue;
    }
    const auto& head = toks.front();
    auto fail = [&](std::size_t col, const std::string& why) -> void { throw ParseError(line_no, col, why); };

    if (!have_op) {
      if (head.text != "operation") fail(head.col, "expected 'operation <name>'");
      if (toks.size() != 3 || toks[1].kind != detail::Tok::Ident) fail(head.col, "expected 'operation <name>'");
      spec.name = toks[1].text;
      have_op = true;
    } else if (head.text == "operand") {
      if (have_post || have_solve) fail(head.col, "operands must precede the postcondition");
      std::size_t i = 1;
      auto tok = [&]() -> const detail::Tok& { return toks[std::min(i, toks.size() - 1)]; };
      auto want = [&](const char* s) {
        if (tok().text != s || tok().kind == detail::Tok::End) fail(tok().col, std::string("expected '") + s + "'");
        ++i;
      };
      auto ident = [&](const char* what) -> std::string {
        if (tok().kind != detail::Tok::Ident) fail(tok().col, std::string("expected ") + what);
        return toks[i++].text;
      };
      OperandDecl d;
      std::size_t name_col = tok().col;
      d.name = ident("operand name");
      if (d.name == "trans" || d.name == "inv") fail(name_col, "'" + d.name + "' is reserved");
      want(":");
      std::size_t kind_col = tok().col;
      std::string kind = ident("operand kind");
      if (kind == "matrix") {
        want("(");
        std::string r = ident("row size");
        want(",");
        std::string c = ident("column size");
        want(")");
        d.kind = OperandKind::Matrix;
        d.dims = {SymSize::symbol(r), SymSize::symbol(c)};
      } else if (kind == "vector") {
        want("(");
        std::string r = ident("size");
        want(")");
        d.kind = OperandKind::Vector;
        d.dims = {SymSize::symbol(r), SymSize::literal(1)};
      } else if (kind == "scalar") {
        d.kind = OperandKind::Scalar;
        d.dims = {SymSize::literal(1), SymSize::literal(1)};
      } else {
        fail(kind_col, "unknown operand kind '" + kind + "'");
      }
      want(",");
      std::size_t role_col = tok().col;
      std::string role = ident("known or unknown");
      if (role == "known")
        d.role = IoRole::Input;
      else if (role == "unknown")
        d.role = IoRole::Output;
      else
        fail(role_col, "expected known or unknown, got '" + role + "'");
      while (tok().kind != detail::Tok::End) {
        want(",");
        std::size_t pc = tok().col;
        std::string p = ident("property");
        auto prop = property_from_name(p);
        if (!prop) fail(pc, "unknown property '" + p + "'");
        d.properties.insert(*prop);
      }
      if (decl_line.count(d.name)) fail(name_col, "duplicate operand '" + d.name + "'");
      if (auto msg = check_operand(d); !msg.empty()) fail(name_col, msg);
      decl_line[d.name] = line_no;
      spec.operands.push_back(std::move(d));
    } else if (head.text == "postcondition") {
      if (have_post) fail(head.col, "duplicate postcondition");
      if (toks[1].text != ":") fail(toks[1].col, "expected ':'");
      std::vector<detail::Tok> rest(toks.begin() + 2, toks.end());
      detail::ExprParser p(std::move(rest), line_no);
      spec.postcondition = p.equation();
      for (const auto& [name, col] : p.seen)
        if (!decl_line.count(name)) fail(col, "undeclared operand '" + name + "' in postcondition");
      used_at = p.seen;
      post_line = line_no;
      have_post = true;
    } else if (head.text == "solve") {
      if (have_solve) fail(head.col, "duplicate solve");
      if (toks.size() != 4 || toks[1].text != ":" || toks[2].kind != detail::Tok::Ident)
        fail(head.col, "expected 'solve: <OperatorName>'");
      spec.solution_operator = toks[2].text;
      have_solve = true;
    } else {
      fail(head.col, "unexpected '" + head.text + "'");
    }
    if (end == text.size()) break;
  }

  if (!have_op) throw ParseError(line_no, 1, "missing 'operation <name>'");
  if (spec.operands.empty()) throw ParseError(line_no, 1, "no operands declared");
  if (!have_post) throw ParseError(line_no, 1, "missing postcondition");
  if (!have_solve) throw ParseError(line_no, 1, "missing 'solve: <OperatorName>'");
  for (const auto& d : spec.operands)
    if (!used_at.count(d.name))
      throw ParseError(decl_line[d.name], 1, "operand '" + d.name + "' does not appear in the postcondition");

  try {
    spec.postcondition = normalize(spec.postcondition);
    validate_spec(spec);
  } catch (const ParseError& e) {
    throw ParseError(post_line, 1, e.what());
  } catch (const StructuralError& e) {
    throw ParseError(post_line, 1, e.what());
  }
  return spec;
}

inline std::string render_operand(const OperandDecl& d) {
  std::string out = d.name + " : ";
  switch (d.kind) {
    case OperandKind::Matrix: out += "matrix(" + d.dims.rows.str() + "," + d.dims.cols.str() + ")"; break;
    case OperandKind::Vector: out += "vector(" + d.dims.rows.str() + ")"; break;
    case OperandKind::Scalar: out += "scalar"; break;
  }
  out += d.role == IoRole::Input ? ", known" : ", unknown";
  for (Property p : d.properties) out += std::string(", ") + property_name(p);
  return out;
}

/// Inverse of parse_operation. Refuses specs the parser would reject.
inline std::string render_spec(const OperationSpec& spec) {
  OperationSpec copy = spec;
  try {
    validate_spec(copy);
  } catch (const ParseError& e) {
    throw ContractViolation(std::string("cannot render invalid operation: ") + e.what());
  }
  std::ostringstream os;
  os << "operation " << spec.name << "\n";
  for (const auto& d : spec.operands) os << "  operand " << render_operand(d) << "\n";
  os << "  postcondition: " << to_dsl(spec.postcondition) << "\n";
  os << "  solve: " << spec.solution_operator << "\n";
  return os.str();
}

}  // namespace pmegen
