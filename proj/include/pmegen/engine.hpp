#pragma once

// The derivation loop: match quadrant equations against the knowledge base,
// mark outputs known, re-canonicalize, repeat until every quadrant is solved.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pmegen/binding.hpp"
#include "pmegen/blockarith.hpp"
#include "pmegen/errors.hpp"
#include "pmegen/expr.hpp"
#include "pmegen/knowledge.hpp"
#include "pmegen/opspec.hpp"
#include "pmegen/partition.hpp"
#include "pmegen/prover.hpp"

namespace pmegen {

struct TraceEntry {
  std::size_t iteration = 0;
  std::string position;
  std::string pattern;
  std::string output;
  std::size_t known_count = 0;
};

struct DerivationState {
  BlockContext ctx;
  BlockedEquationGrid grid;
  std::set<std::string> known;
  std::vector<Equation> tautologies;   // the solved quadrant equations
  std::vector<Equation> assignments;   // output = solved rhs
  std::vector<PropertyFact> facts;
  std::vector<TraceEntry> trace;

  /// Equations the SPD prover may rewrite with. Assignments whose right side
  /// is an opaque solution operator cannot help and are left out.
  std::vector<Equation> rewrite_rules() const {
    std::vector<Equation> out = tautologies;
    for (const auto& a : assignments) {
      bool opaque = false;
      std::function<void(const Expr&)> scan = [&](const Expr& x) {
        if (x.is(Op::Solved)) opaque = true;
        for (const auto& c : x.children()) scan(c);
      };
      scan(a.rhs);
      if (!opaque) out.push_back(a);
    }
    return out;
  }
};

/// State before the first iteration: the canonical grid, inputs known, and
/// the SPD facts of every SPD operand's blocks.
inline DerivationState initial_state(const OperationSpec& spec, const RuleCombination& rules) {
  DerivationState st;
  st.ctx = make_context(spec, rules);
  st.grid = blocked_postcondition(spec, rules);
  st.known = st.ctx.input_blocks;
  for (const auto& [name, b] : st.ctx.blocked)
    if (b.parent_spd)
      for (auto& f : spd_facts(b)) st.facts.push_back(std::move(f));
  for (const auto& c : st.grid.cells)
    if (c.status == QuadrantStatus::Solved) st.tautologies.push_back(c.equation);
  return st;
}

inline ProofResult prove_spd(const Expr& e, const DerivationState& st, ProverLimits limits = {}) {
  return prove_spd(e, st.rewrite_rules(), st.facts, st.ctx.properties, limits);
}

// ---------------------------------------------------------------------------
// Matching

using SlotBindings = std::map<std::string, Expr>;

struct MatchResult {
  std::string pattern;
  SlotBindings bindings;
  Equation matched;  // the quadrant equation as matched
  Equation solved;   // output block = expression over known blocks
};

namespace detail {

class Matcher {
public:
  using Cont = std::function<bool(const SlotBindings&)>;

  Matcher(const Pattern& p, const DerivationState& st) : p_(p), st_(st) {}

  bool equation(const Equation& target, const Cont& done) {
    return expr(p_.templ.lhs, target.lhs, {}, [&](const SlotBindings& b) { return expr(p_.templ.rhs, target.rhs, b, done); });
  }

private:
  bool slot(const std::string& name, const Expr& e, const SlotBindings& b, const Cont& k) {
    if (auto it = b.find(name); it != b.end()) return it->second == e && k(b);
    const OperandDecl* d = p_.slot(name);
    if (!d) return false;
    if (d->role == IoRole::Output) {
      if (!e.is(Op::Operand) || st_.known.count(e.name()) || !st_.ctx.output_blocks.count(e.name())) return false;
    } else if (!is_known(e, st_.known)) {
      return false;
    }
    SlotBindings nb = b;
    nb.emplace(name, e);
    return k(nb);
  }

  bool expr(const Expr& t, const Expr& e, const SlotBindings& b, const Cont& k) {
    if (t.is(Op::Operand)) return slot(t.name(), e, b, k);
    if (t.op() != e.op()) return false;
    switch (t.op()) {
      case Op::Zero: return k(b);
      case Op::Minus:
      case Op::Transpose:
      case Op::Inverse: return expr(t[0], e[0], b, k);
      case Op::Times: return factors(t.children(), 0, e.children(), 0, b, k);
      case Op::Plus: {
        if (t.size() != e.size()) return false;
        std::vector<bool> used(e.size(), false);
        return terms(t.children(), 0, e.children(), used, b, k);
      }
      case Op::Solved: {
        if (t.name() != e.name() || t.size() != e.size()) return false;
        return positional(t.children(), e.children(), 0, b, k);
      }
      case Op::Operand: break;
    }
    return false;
  }

  bool positional(const std::vector<Expr>& ts, const std::vector<Expr>& es, std::size_t i, const SlotBindings& b,
                  const Cont& k) {
    if (i == ts.size()) return k(b);
    return expr(ts[i], es[i], b, [&](const SlotBindings& nb) { return positional(ts, es, i + 1, nb, k); });
  }

  // An unbound slot inside a product may absorb a run of consecutive factors.
  bool factors(const std::vector<Expr>& ts, std::size_t ti, const std::vector<Expr>& es, std::size_t ei,
               const SlotBindings& b, const Cont& k) {
    if (ti == ts.size()) return ei == es.size() && k(b);
    if (ei >= es.size()) return false;
    const Expr& t = ts[ti];
    std::size_t rest = ts.size() - ti - 1;
    if (t.is(Op::Operand)) {
      if (auto it = b.find(t.name()); it != b.end()) {
        std::vector<Expr> run = it->second.is(Op::Times) ? it->second.children() : std::vector<Expr>{it->second};
        if (ei + run.size() > es.size() || !std::equal(run.begin(), run.end(), es.begin() + ei)) return false;
        return factors(ts, ti + 1, es, ei + run.size(), b, k);
      }
      for (std::size_t len = 1; ei + len + rest <= es.size(); ++len) {
        std::vector<Expr> run(es.begin() + ei, es.begin() + ei + len);
        Expr cand = len == 1 ? run.front() : product_of(run);
        if (slot(t.name(), cand, b,
                 [&](const SlotBindings& nb) { return factors(ts, ti + 1, es, ei + len, nb, k); }))
          return true;
      }
      return false;
    }
    return expr(t, es[ei], b, [&](const SlotBindings& nb) { return factors(ts, ti + 1, es, ei + 1, nb, k); });
  }

  bool terms(const std::vector<Expr>& ts, std::size_t ti, const std::vector<Expr>& es, std::vector<bool>& used,
             const SlotBindings& b, const Cont& k) {
    if (ti == ts.size()) return k(b);
    for (std::size_t j = 0; j < es.size(); ++j) {
      if (used[j]) continue;
      used[j] = true;
      bool ok = expr(ts[ti], es[j], b, [&](const SlotBindings& nb) { return terms(ts, ti + 1, es, used, nb, k); });
      used[j] = false;
      if (ok) return true;
    }
    return false;
  }

  const Pattern& p_;
  const DerivationState& st_;
};

/// Why a structurally matching binding is rejected, or "" if it is accepted.
inline std::string check_guards(const Pattern& p, const SlotBindings& b, const DerivationState& st) {
  const PropertyMap& props = st.ctx.properties;
  std::map<std::string, SymSize> sizes;
  auto unify = [&](const SymSize& want, const SymSize& got) {
    if (want.is_literal()) return want == got;
    std::string sym = want.terms().begin()->first;
    auto [it, fresh] = sizes.emplace(sym, got);
    return fresh || it->second == got;
  };
  for (const auto& d : p.slots) {
    const Expr& e = b.at(d.name);
    std::string what = d.name + " = " + to_text(e);
    if (auto dims = infer_dims(e, st.ctx.dims)) {
      if (!unify(d.dims.rows, dims->rows) || !unify(d.dims.cols, dims->cols))
        return what + " has size " + dims->str() + ", which does not fit " + d.dims.str();
    }
    if (d.role == IoRole::Output) {
      const PropertySet& have = props.at(e.name());
      for (Property pr : d.properties) {
        bool ok = have.count(pr) > 0 ||
                  ((pr == Property::LowerTriangular || pr == Property::UpperTriangular) && have.count(Property::Diagonal)) ||
                  (pr == Property::Symmetric && have.count(Property::SPD));
        if (!ok) return what + " is not declared " + property_name(pr);
      }
      continue;
    }
    bool spd_checked = false;
    for (Property pr : d.properties) {
      bool ok = true;
      switch (pr) {
        case Property::LowerTriangular: ok = is_lower(e, props); break;
        case Property::UpperTriangular: ok = is_upper(e, props); break;
        case Property::Diagonal: ok = is_diagonal(e, props); break;
        case Property::SPD:
          ok = prove_spd(e, st).proved;
          spd_checked = ok;
          break;
        case Property::Symmetric:
          ok = is_symmetric_structurally(e, props) ||
               (d.properties.count(Property::SPD) ? spd_checked || prove_spd(e, st).proved : false);
          break;
        case Property::General:
          ok = !(is_lower(e, props) || is_upper(e, props) || is_symmetric_structurally(e, props));
          break;
      }
      if (!ok) {
        if (pr == Property::General) return what + " has structure, but a structure-free operand is required";
        return what + " is not established to be " + property_name(pr);
      }
    }
  }
  return {};
}

}  // namespace detail

/// Tries the knowledge base's patterns in order on one canonical quadrant
/// equation. Guard failures of structural matches are appended to `reasons`.
inline std::optional<MatchResult> match_equation(const Equation& eq, const KnowledgeBase& kb,
                                                 const DerivationState& st,
                                                 std::vector<std::string>* reasons = nullptr) {
  std::vector<Equation> targets{eq};
  Equation te = transpose_of(eq);
  if (!(te == eq)) targets.push_back(te);

  for (const Pattern* p : kb.ordered()) {
    std::optional<MatchResult> found;
    detail::Matcher m(*p, st);
    for (const auto& target : targets) {
      bool ok = m.equation(target, [&](const SlotBindings& b) {
        std::string why = detail::check_guards(*p, b, st);
        if (!why.empty()) {
          if (reasons) {
            std::string r = p->name + ": " + why;
            if (std::find(reasons->begin(), reasons->end(), r) == reasons->end()) reasons->push_back(r);
          }
          return false;
        }
        Expr out = b.at(p->solved.lhs.name());
        found = MatchResult{p->name, b, target, {out, substitute(p->solved.rhs, b)}};
        return true;
      });
      if (ok) return found;
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// PMEs

enum class CellKind { Assign, Star, Identity };

struct PmeCell {
  std::string position;
  CellKind kind = CellKind::Assign;
  std::string output;   // Assign
  Expr rhs;             // Assign
  std::string pattern;  // Assign: the pattern that solved it
  std::string partner;  // Star
  Equation equation;    // Identity: the consistency condition left over

  bool operator==(const PmeCell& o) const {
    return position == o.position && kind == o.kind && output == o.output && rhs == o.rhs && pattern == o.pattern &&
           partner == o.partner && equation == o.equation;
  }
};

struct PME {
  std::string operation;
  std::size_t combination = 0;  // 1-based, in enumeration order
  RuleCombination rules;
  std::size_t rows = 1, cols = 1;
  std::vector<PmeCell> cells;      // grid order
  std::vector<std::string> order;  // positions of Assign cells, in solve order
  std::vector<TraceEntry> trace;
  std::vector<Pattern> learned;    // patterns picked up by nested derivation

  const PmeCell& at(const std::string& position) const {
    for (const auto& c : cells)
      if (c.position == position) return c;
    throw ContractViolation("PME has no cell '" + position + "'");
  }

  /// (output block, rhs) in solve order.
  std::vector<std::pair<std::string, Expr>> assignments() const {
    std::vector<std::pair<std::string, Expr>> out;
    for (const auto& pos : order) {
      const PmeCell& c = at(pos);
      out.emplace_back(c.output, c.rhs);
    }
    return out;
  }

  bool operator==(const PME& o) const {
    return operation == o.operation && combination == o.combination && rules.rules == o.rules.rules &&
           rows == o.rows && cols == o.cols && cells == o.cells && order == o.order;
  }
};

struct DeriveOptions {
  std::optional<std::filesystem::path> ops_dir;
  std::vector<std::string> active;  // operations being derived further up the stack
};

struct DeriveResult {
  Binding binding;
  std::vector<RuleCombination> combinations;
  std::vector<PME> pmes;
  std::vector<std::pair<std::size_t, std::string>> failures;  // combination index, diagnostic
  std::vector<Pattern> learned;                               // from nested derivations
};

inline DeriveResult derive_all(const OperationSpec& spec, const KnowledgeBase& kb, const DeriveOptions& opts = {},
                               std::optional<std::size_t> only = std::nullopt);

/// The knowledge base a derivation of `spec` works with: `kb` plus the
/// operation's own pattern, so sub-problems of the same kind are recognized.
inline KnowledgeBase working_kb(const OperationSpec& spec, KnowledgeBase kb) {
  if (spec.outputs().size() == 1) kb.add_learned(pattern_from_spec(spec));
  return kb;
}

namespace detail {

inline OperationSpec read_operation(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error("cannot read " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return parse_operation(ss.str());
  } catch (const ParseError& e) {
    throw ParseError(e.line(), e.column(), file.string() + ": " + e.what());
  }
}

/// Derives every not-yet-known operation in the operations directory and
/// returns the patterns that succeeded, in file-name order.
inline std::vector<Pattern> derive_nested(const OperationSpec& spec, const KnowledgeBase& kb,
                                          const DeriveOptions& opts, std::set<std::string>& tried) {
  std::vector<Pattern> out;
  if (!opts.ops_dir || !std::filesystem::is_directory(*opts.ops_dir)) return out;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(*opts.ops_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".op") files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  DeriveOptions sub = opts;
  sub.active.push_back(spec.name);
  for (const auto& f : files) {
    if (!tried.insert(f.string()).second) continue;
    OperationSpec op = read_operation(f);
    if (op.name == spec.name || kb.find(op.name) ||
        std::find(sub.active.begin(), sub.active.end(), op.name) != sub.active.end())
      continue;
    if (op.outputs().size() != 1) continue;
    try {
      DeriveResult r = derive_all(op, kb, sub);
      for (auto& p : r.learned) out.push_back(std::move(p));
      out.push_back(pattern_from_spec(op));
    } catch (const StuckDerivation&) {
    } catch (const NoViablePartitionings&) {
    }
  }
  return out;
}

}  // namespace detail

/// Runs the iteration for one rule combination.
inline PME derive_pme(const OperationSpec& spec, const RuleCombination& rules, const KnowledgeBase& kb,
                      const DeriveOptions& opts = {}, std::size_t combination_index = 0) {
  KnowledgeBase wkb = working_kb(spec, kb);
  DerivationState st = initial_state(spec, rules);
  PME pme;
  pme.operation = spec.name;
  pme.combination = combination_index;
  pme.rules = rules;
  pme.rows = st.grid.rows;
  pme.cols = st.grid.cols;

  std::map<std::string, std::string> pattern_of;
  std::set<std::string> tried_files;
  std::size_t iteration = 0;
  for (;;) {
    bool progress = false, pending = false;
    for (std::size_t idx : st.grid.scan_order()) {
      QuadrantEquation& cell = st.grid.cells[idx];
      if (cell.status != QuadrantStatus::Unsolved) continue;
      pending = true;
      auto m = match_equation(cell.equation, wkb, st);
      if (!m) continue;

      ++iteration;
      const std::string out = m->solved.lhs.name();
      cell.status = QuadrantStatus::Solved;
      cell.output = out;
      cell.equation = m->solved;
      pattern_of[cell.position] = m->pattern;
      st.tautologies.push_back(m->matched);
      st.assignments.push_back(m->solved);
      st.known.insert(out);
      pme.order.push_back(cell.position);
      st.trace.push_back({iteration, cell.position, m->pattern, out, st.known.size()});

      for (auto& other : st.grid.cells) {
        if (other.status != QuadrantStatus::Unsolved) continue;
        other.equation = to_canonical_equation(other.equation, st.known);
        if (is_tautology_candidate(other.equation, st.known)) {
          other.status = QuadrantStatus::Solved;
          st.tautologies.push_back(other.equation);
        }
      }
      progress = true;
      break;
    }
    if (!pending) break;
    if (progress) continue;

    auto extra = detail::derive_nested(spec, wkb, opts, tried_files);
    if (!extra.empty()) {
      for (auto& p : extra) {
        wkb.add_learned(p);
        pme.learned.push_back(std::move(p));
      }
      continue;
    }

    std::vector<StuckEquation> remaining;
    for (std::size_t idx : st.grid.scan_order()) {
      const QuadrantEquation& cell = st.grid.cells[idx];
      if (cell.status != QuadrantStatus::Unsolved) continue;
      StuckEquation s{cell.position, to_text(cell.equation), {}};
      match_equation(cell.equation, wkb, st, &s.reasons);
      if (s.reasons.empty()) s.reasons.push_back("no pattern in the knowledge base has the shape of this equation");
      remaining.push_back(std::move(s));
    }
    throw StuckDerivation(spec.name, std::move(remaining));
  }

  for (const auto& c : st.grid.cells) {
    PmeCell pc;
    pc.position = c.position;
    if (c.status == QuadrantStatus::RedundantStar) {
      pc.kind = CellKind::Star;
      pc.partner = c.partner;
    } else if (!c.output.empty()) {
      pc.kind = CellKind::Assign;
      pc.output = c.output;
      pc.rhs = c.equation.rhs;
      pc.pattern = pattern_of[c.position];
    } else {
      pc.kind = CellKind::Identity;
      pc.equation = c.equation;
    }
    pme.cells.push_back(std::move(pc));
  }
  pme.trace = std::move(st.trace);
  return pme;
}

/// Binding, enumeration and one derivation per combination (concurrently).
/// `only` restricts the run to one 1-based combination index.
inline DeriveResult derive_all(const OperationSpec& spec, const KnowledgeBase& kb, const DeriveOptions& opts,
                               std::optional<std::size_t> only) {
  DeriveResult res;
  res.binding = bind_dimensions(spec);
  res.combinations = enumerate_combinations(spec, res.binding);
  if (only && (*only == 0 || *only > res.combinations.size()))
    throw ContractViolation("combination " + std::to_string(*only) + " does not exist (there are " +
                            std::to_string(res.combinations.size()) + ")");

  struct Outcome {
    std::optional<PME> pme;
    std::optional<StuckDerivation> stuck;
  };
  std::vector<std::pair<std::size_t, std::future<Outcome>>> jobs;
  for (std::size_t i = 0; i < res.combinations.size(); ++i) {
    if (only && *only != i + 1) continue;
    jobs.emplace_back(i + 1, std::async(std::launch::async, [&, i] {
                        Outcome o;
                        try {
                          o.pme = derive_pme(spec, res.combinations[i], kb, opts, i + 1);
                        } catch (const StuckDerivation& e) {
                          o.stuck = e;
                        }
                        return o;
                      }));
  }

  std::vector<StuckEquation> all_remaining;
  for (auto& [index, job] : jobs) {
    Outcome o = job.get();
    if (o.pme) {
      for (const auto& p : o.pme->learned)
        if (std::none_of(res.learned.begin(), res.learned.end(), [&](const Pattern& q) { return q.name == p.name; }))
          res.learned.push_back(p);
      res.pmes.push_back(std::move(*o.pme));
    } else {
      res.failures.emplace_back(index, o.stuck->what());
      for (auto s : o.stuck->remaining()) {
        if (res.combinations.size() > 1) s.position = "combination " + std::to_string(index) + ", " + s.position;
        all_remaining.push_back(std::move(s));
      }
    }
  }
  if (res.pmes.empty()) throw StuckDerivation(spec.name, std::move(all_remaining));
  return res;
}

}  // namespace pmegen
