#pragma once

// Numeric instantiation of symbolic results: random structured operands,
// evaluation of expressions (solution operators included), and the PME
// residual check.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pmegen/engine.hpp"
#include "pmegen/errors.hpp"
#include "pmegen/expr.hpp"
#include "pmegen/matrix.hpp"
#include "pmegen/opspec.hpp"
#include "pmegen/partition.hpp"

namespace pmegen {

using SolverFn = std::function<Matrix(const std::vector<Matrix>&)>;
using SolverTable = std::map<std::string, SolverFn>;

/// Gamma(A) Cholesky factor, Omega(L, U, C) triangular Sylvester solution,
/// Trsm(L, B) = B L^-T.
inline SolverTable base_solvers() {
  auto arity = [](const std::string& n, const std::vector<Matrix>& a, std::size_t k) {
    if (a.size() != k) throw NumericError(n + " expects " + std::to_string(k) + " arguments");
  };
  SolverTable t;
  t["Gamma"] = [=](const std::vector<Matrix>& a) {
    arity("Gamma", a, 1);
    return cholesky(a[0]);
  };
  t["Omega"] = [=](const std::vector<Matrix>& a) {
    arity("Omega", a, 3);
    return triangular_sylvester(a[0], a[1], a[2]);
  };
  t["Trsm"] = [=](const std::vector<Matrix>& a) {
    arity("Trsm", a, 2);
    return trsm_right_lower_trans(a[0], a[1]);
  };
  return t;
}

/// Sizes for every size symbol and a matrix for every named operand/block.
struct NumericBinding {
  std::map<std::string, int> sizes;
  std::map<std::string, Matrix> values;

  std::size_t eval(const SymSize& s) const {
    int v = s.evaluate(sizes);
    if (v < 0) throw NumericError("negative size " + s.str());
    return static_cast<std::size_t>(v);
  }
};

/// Evaluation result; nullopt stands for the sizeless Zero block.
using NumValue = std::optional<Matrix>;

inline NumValue evaluate_value(const Expr& e, const NumericBinding& b, const SolverTable& solvers) {
  switch (e.op()) {
    case Op::Zero: return std::nullopt;
    case Op::Operand: {
      auto it = b.values.find(e.name());
      if (it == b.values.end()) throw NumericError("unbound operand '" + e.name() + "'");
      return it->second;
    }
    case Op::Minus: {
      auto v = evaluate_value(e[0], b, solvers);
      if (!v) return v;
      return -*v;
    }
    case Op::Transpose: {
      auto v = evaluate_value(e[0], b, solvers);
      if (!v) return v;
      return v->transpose();
    }
    case Op::Inverse: {
      auto v = evaluate_value(e[0], b, solvers);
      if (!v) throw NumericError("inverse of zero");
      return inverse(*v);
    }
    case Op::Plus: {
      NumValue acc;
      for (const auto& t : e.children()) {
        auto v = evaluate_value(t, b, solvers);
        if (!v) continue;
        acc = acc ? *acc + *v : *v;
      }
      return acc;
    }
    case Op::Times: {
      NumValue acc;
      bool zero = false;
      for (const auto& f : e.children()) {
        auto v = evaluate_value(f, b, solvers);
        if (!v) {
          zero = true;
          continue;
        }
        acc = acc ? *acc * *v : *v;
      }
      if (zero) return std::nullopt;
      return acc;
    }
    case Op::Solved: {
      auto it = solvers.find(e.name());
      if (it == solvers.end()) throw NumericError("no base solver for '" + e.name() + "'");
      std::vector<Matrix> args;
      for (const auto& a : e.children()) {
        auto v = evaluate_value(a, b, solvers);
        if (!v) throw NumericError("zero argument to " + e.name());
        args.push_back(*v);
      }
      return it->second(args);
    }
  }
  return std::nullopt;
}

/// Evaluates `e`; a Zero result is materialized with the given shape.
inline Matrix evaluate(const Expr& e, const NumericBinding& b, const SolverTable& solvers = base_solvers(),
                       std::size_t zero_rows = 0, std::size_t zero_cols = 0) {
  auto v = evaluate_value(e, b, solvers);
  if (v) return *v;
  return Matrix(zero_rows, zero_cols);
}

// ---------------------------------------------------------------------------
// Sampling

/// Random matrix honoring the declared structure exactly.
inline Matrix sample_operand(const OperandDecl& d, std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> off(-1.0, 1.0), diag(1.0, 2.0);
  Matrix m(rows, cols);
  if (d.kind == OperandKind::Scalar) {
    m(0, 0) = diag(rng);
    return m;
  }
  if (d.has(Property::SPD)) {
    Matrix g(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) g(i, j) = off(rng);
    Matrix a = g.transpose() * g + static_cast<double>(rows) * Matrix::identity(rows);
    // Make symmetry exact after rounding.
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < i; ++j) a(j, i) = a(i, j);
    return a;
  }
  if (d.has(Property::Symmetric)) {
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j <= i; ++j) m(i, j) = m(j, i) = off(rng);
    return m;
  }
  bool lower = d.has(Property::LowerTriangular), upper = d.has(Property::UpperTriangular),
       diagonal = d.has(Property::Diagonal);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) {
      if (i == j && (lower || upper || diagonal)) {
        m(i, j) = diag(rng);
      } else if ((lower && j > i) || (upper && j < i) || diagonal) {
        m(i, j) = 0.0;
      } else {
        m(i, j) = off(rng);
      }
    }
  return m;
}

/// Base size symbols get 2..8; a split symbol k of parent size S gets 1..S-1,
/// with trial 0 forcing k = 1 and trial 1 forcing k = S - 1.
inline std::map<std::string, int> sample_sizes(const OperationSpec& spec, const RuleCombination& rules,
                                               std::mt19937_64& rng, std::size_t trial, int lo = 2, int hi = 8) {
  std::map<std::string, int> sizes;
  std::set<std::string> base;
  for (const auto& d : spec.operands)
    for (const auto& s : {d.dims.rows, d.dims.cols})
      for (const auto& [sym, c] : s.terms()) base.insert(sym);
  std::uniform_int_distribution<int> pick(lo, hi);
  for (const auto& s : base) sizes[s] = pick(rng);

  for (const auto& r : rules.rules) {
    const OperandDecl* d = spec.find(r.operand);
    auto place = [&](const std::optional<std::string>& sym, const SymSize& parent) {
      if (!sym || sizes.count(*sym)) return;
      int S = parent.evaluate(sizes);
      if (S < 2) throw NumericError("cannot split a dimension of size " + std::to_string(S));
      int k;
      if (trial == 0)
        k = 1;
      else if (trial == 1)
        k = S - 1;
      else
        k = std::uniform_int_distribution<int>(1, S - 1)(rng);
      sizes[*sym] = k;
    };
    place(r.split_rows, d->dims.rows);
    place(r.split_cols, d->dims.cols);
  }
  return sizes;
}

/// Full operands for every input, sampled with the given sizes.
inline NumericBinding sample_inputs(const OperationSpec& spec, std::map<std::string, int> sizes,
                                    std::mt19937_64& rng) {
  NumericBinding b;
  b.sizes = std::move(sizes);
  for (const auto& d : spec.operands) {
    if (d.role != IoRole::Input) continue;
    b.values[d.name] = sample_operand(d, b.eval(d.dims.rows), b.eval(d.dims.cols), rng);
  }
  return b;
}

/// Adds every block of every blocked operand that has a full value.
inline void bind_blocks(const BlockContext& ctx, NumericBinding& b) {
  for (const auto& [name, bo] : ctx.blocked) {
    auto it = b.values.find(name);
    if (it == b.values.end()) continue;
    const Matrix full = it->second;
    std::size_t i0 = 0;
    for (std::size_t r = 0; r < bo.rows; ++r) {
      std::size_t h = b.eval(bo.row_sizes[r]);
      std::size_t j0 = 0;
      for (std::size_t c = 0; c < bo.cols; ++c) {
        std::size_t w = b.eval(bo.col_sizes[c]);
        const Expr& cell = bo.at(r, c);
        if (cell.is(Op::Operand)) b.values[cell.name()] = full.block(i0, j0, h, w);
        j0 += w;
      }
      i0 += h;
    }
  }
}

/// Reassembles a full operand from its block grid (blocks, zeros and
/// transposed partners).
inline Matrix assemble(const BlockedOperand& bo, const NumericBinding& b, const SolverTable& solvers = base_solvers()) {
  std::size_t rows = 0, cols = 0;
  for (const auto& s : bo.row_sizes) rows += b.eval(s);
  for (const auto& s : bo.col_sizes) cols += b.eval(s);
  Matrix full(rows, cols);
  std::size_t i0 = 0;
  for (std::size_t r = 0; r < bo.rows; ++r) {
    std::size_t h = b.eval(bo.row_sizes[r]);
    std::size_t j0 = 0;
    for (std::size_t c = 0; c < bo.cols; ++c) {
      std::size_t w = b.eval(bo.col_sizes[c]);
      Matrix blk = evaluate(bo.at(r, c), b, solvers, h, w);
      if (blk.rows() != h || blk.cols() != w)
        throw NumericError("block " + bo.at(r, c).key() + " is " + blk.shape() + ", expected " +
                           std::to_string(h) + "x" + std::to_string(w));
      full.set_block(i0, j0, blk);
      j0 += w;
    }
    i0 += h;
  }
  return full;
}

// ---------------------------------------------------------------------------
// PME check

struct TrialReport {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::map<std::string, int> sizes;
  double residual = 0;
  bool passed = false;
  std::string error;  // numeric failure, if any
};

struct CheckReport {
  double tolerance = 1e-8;
  std::vector<TrialReport> trials;

  bool passed() const {
    for (const auto& t : trials)
      if (!t.passed) return false;
    return true;
  }
  double max_residual() const {
    double m = 0;
    for (const auto& t : trials) m = std::max(m, t.residual);
    return m;
  }
  const TrialReport* first_failure() const {
    for (const auto& t : trials)
      if (!t.passed) return &t;
    return nullptr;
  }

  std::string str() const {
    std::ostringstream os;
    os.precision(3);
    for (const auto& t : trials) {
      os << "trial " << t.trial + 1 << " seed=" << t.seed << " sizes:";
      for (const auto& [s, v] : t.sizes) os << " " << s << "=" << v;
      if (!t.error.empty())
        os << " error: " << t.error;
      else
        os << " residual=" << std::scientific << t.residual << std::defaultfloat;
      os << (t.passed ? " pass" : " FAIL") << "\n";
    }
    os << (passed() ? "PASS" : "FAIL") << " trials=" << trials.size() << " max_residual=" << std::scientific
       << max_residual() << " tolerance=" << tolerance << "\n";
    return os.str();
  }
};

/// One trial: sample inputs, evaluate the PME's assignments in solve order,
/// reassemble the outputs and measure the unblocked postcondition residual.
inline TrialReport check_trial(const PME& pme, const OperationSpec& spec, std::uint64_t seed, std::size_t trial,
                               double tol, const SolverTable& solvers = base_solvers()) {
  TrialReport rep;
  rep.trial = trial;
  rep.seed = seed;
  std::mt19937_64 rng(seed);
  try {
    auto sizes = sample_sizes(spec, pme.rules, rng, trial);
    NumericBinding b = sample_inputs(spec, sizes, rng);
    rep.sizes = b.sizes;
    BlockContext ctx = make_context(spec, pme.rules);
    bind_blocks(ctx, b);
    for (const auto& [out, rhs] : pme.assignments()) {
      const Dimension& d = ctx.dims.at(out);
      b.values[out] = evaluate(rhs, b, solvers, b.eval(d.rows), b.eval(d.cols));
    }
    for (const auto& d : spec.operands)
      if (d.role == IoRole::Output) b.values[d.name] = assemble(ctx.blocked.at(d.name), b, solvers);
    Matrix l = evaluate(spec.postcondition.lhs, b, solvers);
    Matrix r = evaluate(spec.postcondition.rhs, b, solvers);
    rep.residual = relative_residual(l, r);
    rep.passed = rep.residual <= tol;
  } catch (const NumericError& e) {
    rep.error = e.what();
    rep.passed = false;
  }
  return rep;
}

/// Trial t uses seed `seed + t`; trials 0 and 1 pin the split extremes.
inline CheckReport check_pme(const PME& pme, const OperationSpec& spec, std::size_t trials, std::uint64_t seed = 1,
                             double tol = 1e-8, const SolverTable& solvers = base_solvers()) {
  CheckReport rep;
  rep.tolerance = tol;
  for (std::size_t t = 0; t < trials; ++t) rep.trials.push_back(check_trial(pme, spec, seed + t, t, tol, solvers));
  return rep;
}

}  // namespace pmegen
