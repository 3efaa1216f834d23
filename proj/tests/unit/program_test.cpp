#include <gtest/gtest.h>

#include "tracelens/program.hpp"

using namespace tracelens;
using namespace tracelens::clp;

TEST(Program, LoadsClausesInSourceOrder) {
  auto p = Program::load(R"(
    % facts and rules
    bench(0).
    bench(N) :- N > 0, N1 is N - 1, bench(N1).
    /* block
       comment */
    p(-3, 'quoted atom', [a, b | T]) :- true.
  )");
  ASSERT_EQ(p.clauses().size(), 3u);
  auto idx = p.clauses_for("bench", 1);
  ASSERT_EQ(idx.size(), 2u);
  EXPECT_EQ(idx[0], 0u);
  EXPECT_EQ(idx[1], 1u);
  EXPECT_EQ(p.clauses()[1].body.size(), 3u);
  EXPECT_EQ(p.clauses()[1].var_count, 2u);
  EXPECT_TRUE(p.clauses()[2].body.empty());
  EXPECT_TRUE(p.defines("p", 3));
  EXPECT_FALSE(p.defines("p", 2));
  EXPECT_TRUE(p.clauses_for("nope", 0).empty());
}

TEST(Program, WritesTermsBack) {
  EXPECT_EQ(write_term(parse_term("X is 2-1")), "_0 is 2-1");
  EXPECT_EQ(write_term(parse_term("'$call$'(bench(2))")), "'$call$'(bench(2))");
  EXPECT_EQ(write_term(parse_term("[1,2|T]")), "[1,2|_0]");
  EXPECT_EQ(write_term(parse_term("a - (b - c)")), "a-(b-c)");
  EXPECT_EQ(write_term(parse_term("f(-1)")), "f(-1)");
  EXPECT_EQ(write_term(parse_term("2>0")), "2>0");
}

TEST(Program, GoalKeepsVariableNames) {
  auto g = parse_goal("queens(4, Qs)");
  ASSERT_EQ(g.var_names.size(), 1u);
  EXPECT_EQ(g.var_names[0], "Qs");
}

TEST(Program, ReportsErrorPositions) {
  try {
    Program::load("ok.\nbad(X :- true.\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_GT(e.column(), 1);
  }
  EXPECT_THROW(Program::load("p :- q"), ParseError);
  EXPECT_THROW(Program::load("X :- q."), ParseError);
  EXPECT_THROW(Program::load("p(."), ParseError);
  EXPECT_THROW(parse_goal("p(X"), ParseError);
}

TEST(Program, RejectsBuiltinHeads) {
  EXPECT_THROW(Program::load("X is Y :- true."), ParseError);
  EXPECT_THROW(Program::load("fd_post(X)."), ParseError);
  EXPECT_THROW(Program::load("true."), ParseError);
}

TEST(Program, BuiltinTable) {
  EXPECT_TRUE(is_builtin("is", 2));
  EXPECT_TRUE(is_builtin("fd_domain", 3));
  EXPECT_TRUE(is_builtin("fd_labeling", 1));
  EXPECT_FALSE(is_builtin("is", 3));
  EXPECT_FALSE(is_builtin("bench", 1));
  EXPECT_EQ(indicator("bench", 1), "bench/1");
}
