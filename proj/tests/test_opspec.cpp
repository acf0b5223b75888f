#include <gtest/gtest.h>

#include <random>

#include "support.hpp"

using namespace pmegen;
using namespace testing_support;

TEST(ParseOperation, Cholesky) {
  OperationSpec s = load_op("cholesky");
  EXPECT_EQ(s.name, "cholesky");
  EXPECT_EQ(s.solution_operator, "Gamma");
  ASSERT_EQ(s.operands.size(), 2u);
  EXPECT_EQ(s.operands[0].name, "A");
  EXPECT_EQ(s.operands[0].role, IoRole::Input);
  EXPECT_TRUE(s.operands[0].has(Property::SPD));
  EXPECT_TRUE(s.operands[0].has(Property::Symmetric));  // implied by spd
  EXPECT_EQ(s.operands[1].role, IoRole::Output);
  EXPECT_TRUE(s.operands[1].has(Property::LowerTriangular));
  EXPECT_EQ(s.postcondition.key(), "(eq (times L (trans L)) A)");
}

TEST(ParseOperation, SylvesterAndTrsm) {
  OperationSpec s = load_op("sylvester");
  EXPECT_EQ(s.postcondition.key(), "(eq (plus (times L X) (times X U)) C)");
  EXPECT_EQ(s.find("C")->dims.str(), "m x n");
  OperationSpec t = load_op("trsm");
  EXPECT_EQ(t.postcondition.key(), "(eq (times X (trans L)) B)");
  EXPECT_EQ(t.inputs().size(), 2u);
  EXPECT_EQ(t.outputs().front()->name, "X");
}

TEST(ParseOperation, VectorsAndScalars) {
  OperationSpec s = parse_operation(
      "operation axpy\n"
      "  operand a : scalar, known\n"
      "  operand x : vector(n), known\n"
      "  operand y : vector(n), unknown\n"
      "  postcondition: y = a * x\n"
      "  solve: Axpy\n");
  EXPECT_EQ(s.find("a")->kind, OperandKind::Scalar);
  EXPECT_TRUE(s.find("a")->dims.rows.is_one());
  EXPECT_EQ(s.find("x")->dims.str(), "n x 1");
}

namespace {

void expect_error_at(const std::string& text, std::size_t line, std::size_t col, const std::string& fragment) {
  try {
    parse_operation(text);
    FAIL() << "expected a parse error for:\n" << text;
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), line) << e.what();
    if (col) EXPECT_EQ(e.column(), col) << e.what();
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

const std::string kHead = "operation f\n";

}  // namespace

TEST(ParseOperation, ReportsLineAndColumn) {
  expect_error_at(kHead + "operand A : matrix(n,n), known\noperand X : matrix(n,n), unknown\npostcondition: X = A +\nsolve: F\n",
                  4, 23, "unexpected end");
  expect_error_at(kHead + "operand A : matrix(n,n), known, spd, lower_triangular, upper_triangular\n", 2, 9,
                  "at most one");
  expect_error_at(kHead + "operand A : matrix(m,n), known, lower_triangular\n", 2, 9, "square");
  expect_error_at(kHead + "operand A : tensor(n), known\n", 2, 13, "unknown operand kind");
  expect_error_at(kHead + "operand A : matrix(n,n), maybe\n", 2, 26, "known or unknown");
  expect_error_at(kHead + "operand A : matrix(n,n), known, pretty\n", 2, 33, "unknown property");
  expect_error_at(kHead + "operand A : matrix(n,n), known\npostcondition: A = B\nsolve: F\n", 3, 20, "undeclared");
  expect_error_at(kHead + "operand A : matrix(n,n), known\noperand A : matrix(n,n), unknown\n", 3, 9, "duplicate");
  expect_error_at(kHead + "operand A : matrix(n,n), known\noperand X : matrix(n,n), unknown\n"
                          "operand Y : matrix(n,n), known\npostcondition: X = A\nsolve: F\n",
                  4, 1, "does not appear");
  expect_error_at(kHead + "operand A : matrix(n,n), known\npostcondition: A = A\nsolve: F\n", 3, 1, "no unknown");
  expect_error_at(kHead + "operand A : matrix(n,n), known\noperand X : matrix(n,n), unknown\npostcondition: X = A\n", 5, 1,
                  "missing 'solve");
  expect_error_at("operand A : matrix(n,n), known\n", 1, 1, "expected 'operation");
  expect_error_at(kHead + "operand A : matrix(n,n), known\noperand X : matrix(n,n), unknown\npostcondition: X = A $ A\n",
                  4, 22, "unexpected character");
}

TEST(ParseOperation, CommentsAndBlankLinesAreIgnored) {
  OperationSpec s = parse_operation("# header\n\noperation g # trailing\n  operand A : matrix(n,n), known\n\n"
                                    "  operand X : matrix(n,n), unknown\n  postcondition: X = A\n  solve: G\n");
  EXPECT_EQ(s.name, "g");
  EXPECT_EQ(s.operands.size(), 2u);
}

TEST(ParseEquation, Normalizes) {
  EXPECT_EQ(parse_equation("trans(X * L) = B").key(), "(eq (times (trans L) (trans X)) B)");
  EXPECT_THROW(parse_equation("X = "), ParseError);
}

TEST(RenderSpec, RoundTripsTheExamples) {
  for (const char* n : {"cholesky", "sylvester", "trsm"}) {
    OperationSpec s = load_op(n);
    EXPECT_EQ(parse_operation(render_spec(s)), s) << n;
  }
}

TEST(RenderSpec, RefusesInvalidSpecs) {
  OperationSpec s = load_op("cholesky");
  s.operands.push_back(s.operands.front());
  EXPECT_THROW(render_spec(s), ContractViolation);
}

TEST(RenderSpecProperty, RandomSpecsRoundTrip) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 200; ++i) {
    OperationSpec s = random_spec(rng);
    std::string text = render_spec(s);
    OperationSpec back = parse_operation(text);
    ASSERT_EQ(back, s) << text;
    ASSERT_EQ(render_spec(back), text);
  }
}
