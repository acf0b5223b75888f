#pragma once

// Command-line front end. Everything writes to caller-supplied streams so
// the commands can be driven in-process.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pmegen/engine.hpp"
#include "pmegen/errors.hpp"
#include "pmegen/knowledge.hpp"
#include "pmegen/oracle.hpp"
#include "pmegen/render.hpp"

namespace pmegen::cli {

enum Exit : int { Ok = 0, ParseFailure = 1, NoPartitionings = 2, Stuck = 3, CheckFailure = 4 };

struct DeriveArgs {
  std::string op_file;
  std::optional<std::string> kb_path;
  std::optional<std::string> ops_dir;
  std::string format = "text";
  bool learn = false;
  std::optional<std::size_t> combination;
  std::vector<std::string> no_builtin;
};

struct CheckArgs {
  std::string op_file;
  std::string pme_file;
  std::size_t trials = 50;
  std::uint64_t seed = 1;
  double tolerance = 1e-8;
};

struct KbArgs {
  std::string action;  // list | show
  std::string name;
  std::optional<std::string> kb_path;
};

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline OperationSpec read_spec(const std::string& path) {
  std::string text = read_file(path);
  try {
    return parse_operation(text);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), e.column(), path + ":" + e.what());
  }
}

inline KnowledgeBase open_kb(const std::optional<std::string>& path) {
  if (!path) return seed_builtins();
  return load_kb(*path);
}

}  // namespace detail

inline int cmd_derive(const DeriveArgs& a, std::ostream& out, std::ostream& err) {
  OperationSpec spec;
  KnowledgeBase kb;
  try {
    spec = detail::read_spec(a.op_file);
    kb = detail::open_kb(a.kb_path);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return ParseFailure;
  }
  for (const auto& name : a.no_builtin) {
    if (kb.disable_builtin(name) == 0) {
      err << "error: no builtin pattern named '" << name << "'\n";
      return ParseFailure;
    }
  }
  if (a.learn && !a.kb_path) {
    err << "error: --learn needs a knowledge base path (--kb or PME_KB)\n";
    return ParseFailure;
  }

  DeriveOptions opts;
  if (a.ops_dir) opts.ops_dir = *a.ops_dir;
  DeriveResult res;
  try {
    res = derive_all(spec, kb, opts, a.combination);
  } catch (const NoViablePartitionings& e) {
    err << "error: " << e.what() << "\n";
    return NoPartitionings;
  } catch (const StuckDerivation& e) {
    err << "error: " << e.what() << "\n";
    return Stuck;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return ParseFailure;
  }

  if (a.format == "json") {
    out << derive_to_json(spec, res).dump(2) << "\n";
  } else if (a.format == "latex") {
    for (const auto& p : res.pmes) out << render_pme_latex(p) << "\n";
  } else {
    out << render_combinations_text(spec, res);
    for (const auto& p : res.pmes) out << "\n" << render_pme_text(p);
  }
  for (const auto& [idx, diag] : res.failures) err << "combination " << idx << ": " << diag << "\n";

  if (a.learn) {
    try {
      KnowledgeBase stored = detail::open_kb(a.kb_path);
      for (const auto& p : res.learned) stored.add_learned(p);
      stored = learn(spec, std::move(stored));
      save_kb(stored, *a.kb_path);
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
      return ParseFailure;
    }
  }
  return res.failures.empty() ? Ok : Stuck;
}

inline int cmd_check(const CheckArgs& a, std::ostream& out, std::ostream& err) {
  OperationSpec spec;
  std::vector<PME> pmes;
  try {
    spec = detail::read_spec(a.op_file);
    pmes = pmes_from_json_text(detail::read_file(a.pme_file));
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return ParseFailure;
  }
  if (a.trials == 0) {
    err << "warning: zero trials requested, nothing was checked\n";
    return Ok;
  }
  bool ok = true;
  for (const auto& p : pmes) {
    if (p.operation != spec.name) {
      err << "error: PME is for '" << p.operation << "', not '" << spec.name << "'\n";
      return ParseFailure;
    }
    CheckReport rep;
    try {
      rep = check_pme(p, spec, a.trials, a.seed, a.tolerance);
    } catch (const Error& e) {
      err << "error: " << e.what() << "\n";
      return ParseFailure;
    }
    out << "PME [" << p.combination << "] " << p.operation << "\n" << rep.str();
    if (const TrialReport* f = rep.first_failure()) {
      ok = false;
      err << "PME [" << p.combination << "] failed on trial " << f->trial + 1 << " (seed " << f->seed << ")\n";
    }
  }
  return ok ? Ok : CheckFailure;
}

inline int cmd_kb(const KbArgs& a, std::ostream& out, std::ostream& err) {
  KnowledgeBase kb;
  try {
    kb = detail::open_kb(a.kb_path);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return ParseFailure;
  }
  if (a.action == "list") {
    for (const auto& p : kb.builtins()) out << p.name << " (builtin)\n";
    for (const auto& p : kb.learned()) out << p.name << " (learned)\n";
    return Ok;
  }
  const Pattern* p = kb.find(a.name);
  if (!p) {
    err << "error: no pattern named '" << a.name << "'\n";
    return ParseFailure;
  }
  out << render_pattern(*p);
  return Ok;
}

/// Parses arguments and dispatches. `env_kb` is the PME_KB default.
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
               std::optional<std::string> env_kb = std::nullopt) {
  CLI::App app{"Generates partitioned matrix expressions from operation descriptions.", "pmegen"};
  app.require_subcommand(1);

  DeriveArgs d;
  auto* derive = app.add_subcommand("derive", "derive the PMEs of an operation");
  derive->add_option("file", d.op_file, "operation description")->required();
  derive->add_option("--kb", d.kb_path, "knowledge base file");
  derive->add_option("--ops-dir", d.ops_dir, "directory of .op files for nested derivations");
  derive->add_option("--format", d.format, "text, latex or json")->check(CLI::IsMember({"text", "latex", "json"}));
  derive->add_flag("--learn", d.learn, "store the operation's pattern in the knowledge base");
  derive->add_option("--combination", d.combination, "derive only combination N (1-based)");
  derive->add_option("--no-builtin", d.no_builtin, "disable a builtin pattern or family");

  CheckArgs c;
  auto* check = app.add_subcommand("check", "check PMEs numerically");
  check->add_option("file", c.op_file, "operation description")->required();
  check->add_option("pme", c.pme_file, "PME json (from derive --format json)")->required();
  check->add_option("--trials", c.trials, "number of random trials");
  check->add_option("--seed", c.seed, "seed of the first trial");
  check->add_option("--tolerance", c.tolerance, "maximum relative residual");

  KbArgs k;
  auto* kbcmd = app.add_subcommand("kb", "inspect the knowledge base");
  kbcmd->add_option("action", k.action, "list or show")->required()->check(CLI::IsMember({"list", "show"}));
  kbcmd->add_option("name", k.name, "pattern name (for show)");
  kbcmd->add_option("--kb", k.kb_path, "knowledge base file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? Ok : ParseFailure;
  }

  if (derive->parsed()) {
    if (!d.kb_path) d.kb_path = env_kb;
    return cmd_derive(d, out, err);
  }
  if (check->parsed()) return cmd_check(c, out, err);
  if (!k.kb_path) k.kb_path = env_kb;
  if (k.action == "show" && k.name.empty()) {
    err << "error: kb show needs a pattern name\n";
    return ParseFailure;
  }
  return cmd_kb(k, out, err);
}

}  // namespace pmegen::cli
