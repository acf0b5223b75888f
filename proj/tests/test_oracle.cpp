#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace pmegen;
using namespace testing_support;

namespace {

OperandDecl decl_of(const char* op_name, const char* operand) { return *load_op(op_name).find(operand); }

// vec(X) solves (I (x) L + U^T (x) I) vec(X) = vec(C), column-major vec.
Matrix kronecker_sylvester(const Matrix& l, const Matrix& u, const Matrix& c) {
  std::size_t m = l.rows(), n = u.rows();
  Matrix k(m * n, m * n), rhs(m * n, 1);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t row = j * m + i;
      rhs(row, 0) = c(i, j);
      for (std::size_t p = 0; p < m; ++p) k(row, j * m + p) += l(i, p);
      for (std::size_t q = 0; q < n; ++q) k(row, q * m + i) += u(q, j);
    }
  Matrix v = gauss_solve(k, rhs);
  Matrix x(m, n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i) x(i, j) = v(j * m + i, 0);
  return x;
}

PME derived(const char* op_name, std::size_t index = 0) {
  return derive_all(load_op(op_name), seed_builtins(), {}, std::nullopt).pmes.at(index);
}

}  // namespace

TEST(BaseSolvers, ScalarCholesky) {
  Matrix a(1, 1);
  a(0, 0) = 4;
  EXPECT_EQ(base_solvers().at("Gamma")({a})(0, 0), 2.0);
}

TEST(BaseSolvers, CholeskyReproducesA) {
  std::mt19937_64 rng(51);
  OperandDecl a = decl_of("cholesky", "A");
  for (std::size_t n = 1; n <= 16; ++n)
    for (int rep = 0; rep < 5; ++rep) {
      Matrix A = sample_operand(a, n, n, rng);
      Matrix l = cholesky(A);
      for (std::size_t i = 0; i < n; ++i) {
        ASSERT_GT(l(i, i), 0.0);
        for (std::size_t j = i + 1; j < n; ++j) ASSERT_EQ(l(i, j), 0.0);
      }
      ASSERT_LE(relative_residual(l * l.transpose(), A), 1e-12) << n;
    }
}

TEST(BaseSolvers, CholeskyThroughEvaluate) {
  std::mt19937_64 rng(52);
  NumericBinding b;
  b.values["A"] = sample_operand(decl_of("cholesky", "A"), 5, 5, rng);
  b.values["L"] = evaluate(Expr::solved("Gamma", {op("A")}), b);
  EXPECT_LE(relative_residual(evaluate(ex("L * trans(L)"), b), b.values["A"]), 1e-12);
}

TEST(BaseSolvers, SylvesterAgreesWithKroneckerSystem) {
  std::mt19937_64 rng(53);
  for (std::size_t m = 1; m <= 5; ++m)
    for (std::size_t n = 1; n <= 5; ++n) {
      Matrix l = sample_operand(decl_of("sylvester", "L"), m, m, rng);
      Matrix u = sample_operand(decl_of("sylvester", "U"), n, n, rng);
      Matrix c = sample_operand(decl_of("sylvester", "C"), m, n, rng);
      ASSERT_LE(relative_residual(triangular_sylvester(l, u, c), kronecker_sylvester(l, u, c)), 1e-9) << m << "x" << n;
    }
}

TEST(BaseSolvers, SylvesterResidual) {
  std::mt19937_64 rng(54);
  NumericBinding b;
  b.values["L"] = sample_operand(decl_of("sylvester", "L"), 4, 4, rng);
  b.values["U"] = sample_operand(decl_of("sylvester", "U"), 3, 3, rng);
  b.values["C"] = sample_operand(decl_of("sylvester", "C"), 4, 3, rng);
  for (std::size_t i = 0; i < 4; ++i) ASSERT_GE(b.values["L"](i, i), 1.0);
  b.values["X"] = evaluate(Expr::solved("Omega", {op("L"), op("U"), op("C")}), b);
  EXPECT_LE(relative_residual(evaluate(ex("L * X + X * U"), b), b.values["C"]), 1e-10);
}

TEST(BaseSolvers, TrsmAgreesWithInverse) {
  std::mt19937_64 rng(55);
  Matrix l = sample_operand(decl_of("trsm", "L"), 6, 6, rng);
  Matrix b = sample_operand(decl_of("trsm", "B"), 3, 6, rng);
  EXPECT_LE(relative_residual(trsm_right_lower_trans(l, b), b * inverse(l).transpose()), 1e-12);
}

TEST(BaseSolvers, Errors) {
  Matrix s(2, 2);
  s(0, 0) = s(0, 1) = s(1, 0) = s(1, 1) = 1;
  EXPECT_THROW(inverse(s), NumericError);
  Matrix near = s;
  near(1, 1) = 1 + 1e-15;
  EXPECT_THROW(inverse(near), NumericError);
  EXPECT_THROW(cholesky(-s), NumericError);
  EXPECT_THROW(base_solvers().at("Omega")({s}), NumericError);
  NumericBinding b;
  EXPECT_THROW(evaluate(op("A"), b), NumericError);
}

TEST(BaseSolvers, EigenvaluesOfKnownMatrix) {
  Matrix a(2, 2);
  a(0, 0) = 2;
  a(0, 1) = a(1, 0) = 1;
  a(1, 1) = 2;
  auto ev = symmetric_eigenvalues(a);
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_NEAR(ev[0], 1.0, 1e-12);
  EXPECT_NEAR(ev[1], 3.0, 1e-12);
}

TEST(Sampling, DeclaredStructureHoldsExactly) {
  std::mt19937_64 rng(56);
  OperandDecl spd = decl_of("cholesky", "A");
  for (int t = 0; t < 50; ++t) {
    std::size_t n = std::uniform_int_distribution<std::size_t>(2, 8)(rng);
    Matrix a = sample_operand(spd, n, n, rng);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) ASSERT_EQ(a(i, j), a(j, i));
    ASSERT_GT(symmetric_eigenvalues(a).front(), 0.0);
  }
}

TEST(Sampling, SplitExtremesAreForced) {
  OperationSpec s = load_op("cholesky");
  auto combo = enumerate_combinations(s, bind_dimensions(s)).front();
  for (int rep = 0; rep < 10; ++rep) {
    std::mt19937_64 rng(rep);
    auto first = sample_sizes(s, combo, rng, 0);
    EXPECT_EQ(first.at("k1"), 1);
    auto second = sample_sizes(s, combo, rng, 1);
    EXPECT_EQ(second.at("k1"), second.at("n") - 1);
    EXPECT_GE(second.at("n"), 2);
    EXPECT_LE(second.at("n"), 8);
  }
}

TEST(CheckPme, CholeskyPasses) {
  CheckReport r = check_pme(derived("cholesky"), load_op("cholesky"), 50);
  EXPECT_TRUE(r.passed()) << r.str();
  EXPECT_LE(r.max_residual(), 1e-10);
  EXPECT_EQ(r.trials.size(), 50u);
  EXPECT_EQ(r.trials[0].sizes.at("k1"), 1);
  EXPECT_EQ(r.trials[1].sizes.at("k1"), r.trials[1].sizes.at("n") - 1);
}

TEST(CheckPme, AllSylvesterPmesPass) {
  for (std::size_t i = 0; i < 3; ++i) {
    CheckReport r = check_pme(derived("sylvester", i), load_op("sylvester"), 50);
    EXPECT_TRUE(r.passed()) << r.str();
    EXPECT_LE(r.max_residual(), 1e-8);
  }
}

TEST(CheckPme, TrsmPmesPass) {
  for (std::size_t i = 0; i < 3; ++i) EXPECT_TRUE(check_pme(derived("trsm", i), load_op("trsm"), 20).passed());
}

TEST(CheckPme, CorruptedPmeFailsOnFirstTrial) {
  PME p = derived("cholesky");
  for (auto& c : p.cells)
    if (c.position == "BR") c.rhs = Expr::solved("Gamma", {op("A_BR")});
  CheckReport r = check_pme(p, load_op("cholesky"), 50);
  ASSERT_NE(r.first_failure(), nullptr);
  EXPECT_EQ(r.first_failure()->trial, 0u);
  EXPECT_EQ(r.first_failure()->seed, 1u);
  EXPECT_NE(r.str().find("FAIL"), std::string::npos);
}

TEST(CheckPme, ReproducibleFromSeed) {
  PME p = derived("sylvester", 2);
  OperationSpec s = load_op("sylvester");
  CheckReport a = check_pme(p, s, 10, 7), b = check_pme(p, s, 10, 7);
  EXPECT_EQ(a.str(), b.str());
  TrialReport t = check_trial(p, s, a.trials[4].seed, 4, 1e-8);
  EXPECT_EQ(t.residual, a.trials[4].residual);
}
