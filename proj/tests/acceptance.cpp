// Acceptance run: one line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>

#include "pmegen/cli.hpp"
#include "support.hpp"

using namespace pmegen;
using namespace testing_support;
namespace fs = std::filesystem;

namespace {

constexpr double kBlockedTol = 1e-12;
constexpr double kCholeskyTol = 1e-10;
constexpr double kSylvesterTol = 1e-8;
constexpr std::size_t kTrials = 50;
constexpr double kFastSeconds = 1.0;

struct Verdict {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      detail = what;
    }
  }
};

struct CliOutcome {
  int code;
  std::string out, err;
};

CliOutcome cli_run(std::vector<std::string> args) {
  args.insert(args.begin(), "pmegen");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("pmegen_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

Verdict cholesky_end_to_end(double& seconds) {
  Verdict v;
  auto t0 = std::chrono::steady_clock::now();
  DeriveResult r = derive_all(load_op("cholesky"), seed_builtins(), {}, std::nullopt);
  seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  v.require(r.combinations.size() == 1, "expected 1 combination, got " + std::to_string(r.combinations.size()));
  v.require(r.pmes.size() == 1, "expected 1 PME");
  if (!v.ok) return v;
  const PME& p = r.pmes[0];
  v.require(p.at("TL").rhs == Expr::solved("Gamma", {op("A_TL")}), "TL is " + to_text(p.at("TL").rhs));
  v.require(p.at("BL").rhs == ex("A_BL * trans(inv(L_TL))"), "BL is " + to_text(p.at("BL").rhs));
  v.require(p.at("BR").rhs == Expr::solved("Gamma", {ex("A_BR - L_BL * trans(L_BL)")}), "BR is " + to_text(p.at("BR").rhs));
  v.require(p.at("TR").kind == CellKind::Star && p.at("TR").partner == "BL", "TR is not starred");
  v.require(seconds < kFastSeconds, "took " + std::to_string(seconds) + " s");
  return v;
}

Verdict sylvester_combinations(double& seconds) {
  Verdict v;
  auto t0 = std::chrono::steady_clock::now();
  OperationSpec s = load_op("sylvester");
  Binding b = bind_dimensions(s);
  auto combos = enumerate_combinations(s, b);
  seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::set<std::set<std::string>> groups;
  for (const auto& g : b.groups) {
    std::set<std::string> m;
    for (const auto& x : g.members) m.insert(x.str());
    groups.insert(m);
  }
  v.require(groups == std::set<std::set<std::string>>{{"L_r", "L_c", "X_r", "C_r"}, {"U_r", "U_c", "X_c", "C_c"}},
            "unexpected dimension groups");
  std::vector<std::string> want{"L: 1x1  U: 2x2(k1,k1)  C: 1x2(-,k1)  X: 1x2(-,k1)",
                                "L: 2x2(k1,k1)  U: 1x1  C: 2x1(k1,-)  X: 2x1(k1,-)",
                                "L: 2x2(k1,k1)  U: 2x2(k2,k2)  C: 2x2(k1,k2)  X: 2x2(k1,k2)"};
  v.require(combos.size() == 3, "expected 3 combinations");
  for (std::size_t i = 0; i < combos.size() && i < want.size(); ++i)
    v.require(describe(combos[i]) == want[i], "combination " + std::to_string(i + 1) + " is " + describe(combos[i]));
  v.require(seconds < kFastSeconds, "took " + std::to_string(seconds) + " s");
  return v;
}

Verdict sylvester_pme(double&) {
  Verdict v;
  DeriveResult r = derive_all(load_op("sylvester"), seed_builtins(), {}, std::size_t{2});
  v.require(r.pmes.size() == 1, "no PME for combination 2");
  if (!v.ok) return v;
  const PME& p = r.pmes[0];
  v.require(p.at("T").output == "X_T" && p.at("T").rhs == Expr::solved("Omega", {op("L_TL"), op("U"), op("C_T")}),
            "T is " + to_text(p.at("T").rhs));
  v.require(p.at("B").output == "X_B" &&
                p.at("B").rhs == Expr::solved("Omega", {op("L_BR"), op("U"), ex("C_B - L_BL * X_T")}),
            "B is " + to_text(p.at("B").rhs));
  return v;
}

Verdict blocked_faithfulness(double&) {
  Verdict v;
  std::mt19937_64 rng(2024);
  double worst = 0;
  for (int i = 0; i < 200; ++i) {
    OperationSpec s = random_spec(rng);
    worst = std::max(worst, blocked_vs_unblocked(s, random_rules(s, rng), s.postcondition.lhs, rng, i % 3));
  }
  v.require(worst <= kBlockedTol, "max relative error " + fmt(worst));
  v.detail = v.ok ? "max relative error " + fmt(worst) : v.detail;
  return v;
}

Verdict numeric_oracle(double&) {
  Verdict v;
  double chol = 0, syl = 0;
  auto c = derive_all(load_op("cholesky"), seed_builtins(), {}, std::nullopt);
  for (const auto& p : c.pmes) {
    CheckReport r = check_pme(p, load_op("cholesky"), kTrials, 1, kCholeskyTol);
    v.require(r.passed(), "Cholesky PME failed:\n" + r.str());
    v.require(r.trials[0].sizes.at("k1") == 1 && r.trials[1].sizes.at("k1") == r.trials[1].sizes.at("n") - 1,
              "split extremes not covered");
    chol = std::max(chol, r.max_residual());
  }
  auto s = derive_all(load_op("sylvester"), seed_builtins(), {}, std::nullopt);
  v.require(s.pmes.size() == 3, "expected 3 Sylvester PMEs");
  for (const auto& p : s.pmes) {
    CheckReport r = check_pme(p, load_op("sylvester"), kTrials, 1, kSylvesterTol);
    v.require(r.passed(), "Sylvester PME " + std::to_string(p.combination) + " failed:\n" + r.str());
    syl = std::max(syl, r.max_residual());
  }
  if (v.ok) v.detail = "max residual cholesky " + fmt(chol) + ", sylvester " + fmt(syl);
  return v;
}

Verdict count_law(double&) {
  Verdict v;
  std::mt19937_64 rng(77);
  for (int i = 0; i < 100 && v.ok; ++i) {
    OperationSpec s = random_spec(rng);
    Binding b = bind_dimensions(s);
    auto combos = enumerate_combinations(s, b);
    v.require(combos.size() == (std::size_t{1} << b.effective_groups()) - 1, "count law broken for\n" + render_spec(s));
    for (const auto& c : combos) v.require(validate_conformance(s, c), "illegal blocking " + describe(c));
  }
  return v;
}

Verdict spd_prover(double&) {
  Verdict v;
  OperationSpec spec = load_op("cholesky");
  DerivationState st = initial_state(spec, enumerate_combinations(spec, bind_dimensions(spec)).front());
  st.tautologies = {eq("L_TL * trans(L_TL) = A_TL"), eq("L_BL * trans(L_TL) = A_BL")};
  ProofResult r = prove_spd(ex("A_BR - L_BL * trans(L_BL)"), st);
  v.require(r.proved, "A_BR - L_BL L_BL^T not proved SPD");
  v.require(!prove_spd(ex("B * C"), {}, {}, {{"B", {}}, {"C", {}}}).proved, "B * C accepted without facts");
  if (!v.ok) return v;

  // Every expression on the proof chain must be SPD numerically.
  std::mt19937_64 rng(7);
  std::size_t checked = 0;
  for (int t = 0; t < 100; ++t) {
    NumericBinding b;
    b.sizes["n"] = std::uniform_int_distribution<int>(2, 8)(rng);
    b.sizes["k1"] = std::uniform_int_distribution<int>(1, b.sizes["n"] - 1)(rng);
    b.values["A"] = sample_operand(spec.operands[0], b.sizes["n"], b.sizes["n"], rng);
    bind_blocks(st.ctx, b);
    b.values["L_TL"] = cholesky(b.values["A_TL"]);
    b.values["L_BL"] = trsm_right_lower_trans(b.values["L_TL"], b.values["A_BL"]);
    for (const auto& key : r.chain) {
      Matrix m = evaluate(parse_prefix(key), b);
      Matrix sym = 0.5 * (m + m.transpose());
      bool ok = symmetric_eigenvalues(sym).front() > 0;
      v.require(ok, "not SPD numerically: " + key);
      checked += ok;
    }
  }
  if (v.ok) v.detail = std::to_string(r.chain.size()) + " chain expressions, " + std::to_string(checked) + " instances";
  return v;
}

Verdict pattern_learning(double&) {
  Verdict v;
  fs::path dir = fresh_dir("learning");
  std::string kb = (dir / "k.kb").string();
  DeriveResult r = derive_all(load_op("cholesky"), seed_builtins(), {}, std::nullopt);
  v.require(!r.pmes.empty() && r.pmes[0].at("TL").pattern == "cholesky", "self-registration did not solve TL");
  v.require(cli_run({"derive", ops_path("cholesky.op"), "--kb", kb, "--learn"}).code == 0, "derive --learn failed");
  v.require(cli_run({"kb", "list", "--kb", kb}).out.find("cholesky (learned)") != std::string::npos,
            "cholesky not in the KB");

  std::string empty_kb = (dir / "empty.kb").string();
  CliOutcome stuck = cli_run({"derive", ops_path("cholesky.op"), "--kb", empty_kb, "--no-builtin", "trsm"});
  v.require(stuck.code == 3, "expected exit 3, got " + std::to_string(stuck.code));
  v.require(stuck.err.find("BL: L_BL * L_TL^T = A_BL") != std::string::npos, "diagnostic does not name BL");
  v.require(cli_run({"derive", ops_path("trsm.op"), "--kb", empty_kb, "--learn"}).code == 0, "learning trsm failed");
  CliOutcome again = cli_run({"derive", ops_path("cholesky.op"), "--kb", empty_kb, "--no-builtin", "trsm"});
  v.require(again.code == 0, "Cholesky still stuck after learning trsm");
  v.require(again.out.find("BL: L_BL = Trsm(L_TL, A_BL)") != std::string::npos, "BL not solved by Trsm");
  return v;
}

Verdict determinism(double&) {
  Verdict v;
  auto session = [](const fs::path& dir) {
    std::string kb = (dir / "k.kb").string(), empty = (dir / "e.kb").string();
    std::string transcript;
    std::vector<std::vector<std::string>> cmds;
    for (const char* n : {"cholesky", "sylvester", "trsm"})
      for (const char* f : {"text", "latex", "json"}) cmds.push_back({"derive", ops_path(std::string(n) + ".op"), "--format", f});
    cmds.push_back({"derive", ops_path("cholesky.op"), "--kb", kb, "--learn"});
    cmds.push_back({"kb", "list", "--kb", kb});
    cmds.push_back({"kb", "show", "cholesky", "--kb", kb});
    cmds.push_back({"derive", ops_path("cholesky.op"), "--kb", empty, "--no-builtin", "trsm"});
    cmds.push_back({"derive", ops_path("trsm.op"), "--kb", empty, "--learn"});
    cmds.push_back({"derive", ops_path("cholesky.op"), "--kb", empty, "--no-builtin", "trsm"});
    for (const auto& c : cmds) {
      CliOutcome o = cli_run(c);
      transcript += std::to_string(o.code) + "\n" + o.out;
    }
    fs::path json = dir / "c.json";
    std::ofstream(json) << cli_run({"derive", ops_path("cholesky.op"), "--format", "json"}).out;
    transcript += cli_run({"check", ops_path("cholesky.op"), json.string(), "--trials", "10"}).out;
    return std::make_tuple(transcript, read_text(kb), read_text(empty));
  };
  auto a = session(fresh_dir("det_a"));
  auto b = session(fresh_dir("det_b"));
  v.require(std::get<0>(a) == std::get<0>(b), "stdout differs between runs");
  v.require(std::get<1>(a) == std::get<1>(b) && std::get<2>(a) == std::get<2>(b), "KB files differ between runs");
  return v;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Verdict(double&)> run;
  };
  std::vector<Criterion> criteria{
      {"Cholesky end-to-end", cholesky_end_to_end},
      {"Sylvester groups and combinations", sylvester_combinations},
      {"Sylvester PME for combination 2", sylvester_pme},
      {"blocked arithmetic faithfulness (200 cases, 1e-12)", blocked_faithfulness},
      {"PME numeric oracle (50 trials, 1e-10 / 1e-8)", numeric_oracle},
      {"combination count law (100 specs)", count_law},
      {"SPD prover", spd_prover},
      {"pattern learning", pattern_learning},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    double inner = 0;
    auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].run(inner);
    } catch (const std::exception& e) {
      v.ok = false;
      v.detail = std::string("exception: ") + e.what();
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("[%s] %zu. %s (%.3f s)%s%s\n", v.ok ? "PASS" : "FAIL", i + 1, criteria[i].name, secs,
                v.detail.empty() ? "" : ": ", v.detail.c_str());
    failed += !v.ok;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
