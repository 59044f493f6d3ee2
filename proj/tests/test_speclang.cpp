#include <gtest/gtest.h>

#include <array>

#include "adtest/speclang.hpp"
#include "support.hpp"

using namespace adtest;
using adtest::testing::Rng;

namespace {

SpecAst A(const char* n) { return SpecAst::atom(n); }
SpecAst Not(SpecAst a) { return SpecAst::negation(std::move(a)); }
SpecAst And(SpecAst a, SpecAst b) { return SpecAst::conjunction(std::move(a), std::move(b)); }
SpecAst Or(SpecAst a, SpecAst b) { return SpecAst::disjunction(std::move(a), std::move(b)); }
SpecAst Imp(SpecAst a, SpecAst b) { return SpecAst::implication(std::move(a), std::move(b)); }
SpecAst Iff(SpecAst a, SpecAst b) { return SpecAst::equivalence(std::move(a), std::move(b)); }

SpecSyntaxError syntax_error(const std::string& text) {
  try {
    parse_spec(text);
  } catch (const SpecSyntaxError& e) {
    return e;
  }
  ADD_FAILURE() << "no syntax error for '" << text << "'";
  return SpecSyntaxError("none", 0, 0);
}

}  // namespace

TEST(Parse, Disjunction) { EXPECT_EQ(parse_spec("mu1 or mu2"), Or(A("mu1"), A("mu2"))); }

TEST(Parse, ImplicationOfDisjunctions) {
  EXPECT_EQ(parse_spec("(mu1 or mu2) -> (mu3 or mu4)"), Imp(Or(A("mu1"), A("mu2")), Or(A("mu3"), A("mu4"))));
}

TEST(Parse, Precedence) {
  EXPECT_EQ(parse_spec("not mu1 and mu2 or mu3"), Or(And(Not(A("mu1")), A("mu2")), A("mu3")));
  EXPECT_EQ(parse_spec("a || b -> c <-> d"), Iff(Imp(Or(A("a"), A("b")), A("c")), A("d")));
  EXPECT_EQ(parse_spec("a -> b || c && !d"), Imp(A("a"), Or(A("b"), And(A("c"), Not(A("d"))))));
}

TEST(Parse, Associativity) {
  EXPECT_EQ(parse_spec("a -> b -> c"), Imp(A("a"), Imp(A("b"), A("c"))));
  EXPECT_EQ(parse_spec("a <-> b <-> c"), Iff(Iff(A("a"), A("b")), A("c")));
  EXPECT_EQ(parse_spec("a and b and c"), And(And(A("a"), A("b")), A("c")));
}

TEST(Parse, SpellingsAreInterchangeable) {
  EXPECT_EQ(parse_spec("!a && b || c -> d <-> e"), parse_spec("not a and b or c implies d iff e"));
}

TEST(Parse, WhitespaceAndComments) {
  EXPECT_EQ(parse_spec("  a\n  and # the second one\n  b\n"), And(A("a"), A("b")));
}

TEST(Parse, IncompleteImplication) {
  const auto e = syntax_error("mu1 ->");
  EXPECT_EQ(e.line(), 1);
  EXPECT_EQ(e.column(), 7);
  EXPECT_FALSE(e.expected().empty());
  EXPECT_NE(std::string(e.what()).find("expected"), std::string::npos);
}

TEST(Parse, ErrorPositions) {
  EXPECT_EQ(syntax_error("a and\n  (b or").line(), 2);
  EXPECT_EQ(syntax_error("a b").column(), 3);
  EXPECT_EQ(syntax_error("(a").column(), 3);
  EXPECT_EQ(syntax_error("a )").column(), 3);
  EXPECT_EQ(syntax_error("").line(), 1);
}

TEST(Parse, UnknownOperator) {
  const auto e = syntax_error("a & b");
  EXPECT_NE(std::string(e.what()).find("unknown operator"), std::string::npos);
  EXPECT_EQ(e.column(), 3);
  EXPECT_THROW(parse_spec("a => b"), SpecSyntaxError);
  EXPECT_THROW(parse_spec("a $ b"), SpecSyntaxError);
}

TEST(Parse, DeepNestingIsRejectedNotCrashing) {
  std::string deep(100000, '(');
  deep += "a";
  EXPECT_THROW(parse_spec(deep), SpecSyntaxError);
  std::string nots;
  for (int i = 0; i < 500; ++i) nots += "not ";
  EXPECT_EQ(to_nnf(parse_spec(nots + "a")), A("a"));
}

TEST(Printer, RoundTripsRandomFormulas) {
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const SpecAst ast = adtest::testing::random_ast(rng, 6);
    const std::string text = to_string(ast);
    EXPECT_EQ(parse_spec(text), ast) << text;
  }
}

TEST(Printer, MinimalParentheses) {
  EXPECT_EQ(to_string(parse_spec("(a and b) or c")), "a && b || c");
  EXPECT_EQ(to_string(parse_spec("a and (b or c)")), "a && (b || c)");
  EXPECT_EQ(to_string(parse_spec("(a -> b) -> c")), "(a -> b) -> c");
  EXPECT_EQ(to_string(parse_spec("not (not a)")), "!!a");
}

TEST(Nnf, ImplicationOfDisjunctions) {
  EXPECT_EQ(to_nnf(parse_spec("(mu1 or mu2) -> (mu3 or mu4)")),
            Or(And(Not(A("mu1")), Not(A("mu2"))), Or(A("mu3"), A("mu4"))));
}

TEST(Nnf, DoubleNegation) { EXPECT_EQ(to_nnf(Not(Not(A("mu1")))), A("mu1")); }

TEST(Nnf, Equivalence) {
  EXPECT_EQ(to_nnf(Iff(A("mu1"), A("mu2"))), Or(And(Not(A("mu1")), Not(A("mu2"))), And(A("mu1"), A("mu2"))));
}

TEST(Nnf, OutputIsNormalAndEquivalent) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const SpecAst ast = adtest::testing::random_ast(rng, 6);
    const SpecAst nnf = to_nnf(ast);
    ASSERT_TRUE(is_nnf(nnf)) << to_string(nnf);
    std::map<std::string, double> v;
    for (int k = 0; k < 4; ++k) v["p" + std::to_string(k)] = adtest::testing::uniform(rng, -5, 5);
    EXPECT_EQ(evaluate(nnf, [&](const std::string& n) { return v.at(n); }), adtest::testing::oracle_eval(ast, v));
  }
}

TEST(ParseTree, Figure2Shape) {
  const ParseTree t = compile_spec("(mu1 or mu2) -> (mu3 or mu4)");
  EXPECT_EQ(t.predicates(), (std::vector<std::string>{"mu1", "mu2", "mu3", "mu4"}));
  const auto expected = TreeNode::max({TreeNode::min({TreeNode::leaf(0, -1), TreeNode::leaf(1, -1)}),
                                       TreeNode::max({TreeNode::leaf(2, 1), TreeNode::leaf(3, 1)})});
  EXPECT_EQ(t.root(), expected);
}

TEST(ParseTree, SingleAtom) {
  const ParseTree t = compile_spec("mu1");
  EXPECT_EQ(t.root(), TreeNode::leaf(0, 1));
  EXPECT_EQ(t.size(), 1u);
}

TEST(ParseTree, RepeatedAtomSharesIndex) {
  const ParseTree t = build_parse_tree(And(A("mu1"), A("mu1")));
  EXPECT_EQ(t.size(), 1u);
  EXPECT_EQ(t.root(), TreeNode::min({TreeNode::leaf(0, 1), TreeNode::leaf(0, 1)}));
}

TEST(ParseTree, FlattensLeftChains) {
  const ParseTree t = compile_spec("a and b and c or d");
  EXPECT_EQ(t.root(), TreeNode::max({TreeNode::min({TreeNode::leaf(0, 1), TreeNode::leaf(1, 1), TreeNode::leaf(2, 1)}),
                                     TreeNode::leaf(3, 1)}));
}

TEST(ParseTree, RejectsNonNormalInput) {
  EXPECT_THROW(build_parse_tree(Imp(A("a"), A("b"))), std::invalid_argument);
  EXPECT_THROW(build_parse_tree(Not(And(A("a"), A("b")))), std::invalid_argument);
}

TEST(ParseTree, EveryPredicateAppearsAndIndicesAreValid) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const ParseTree t = build_parse_tree(to_nnf(adtest::testing::random_ast(rng, 6)));
    std::vector<int> seen(t.size(), 0);
    std::function<void(const TreeNode&)> walk = [&](const TreeNode& n) {
      if (n.kind == TreeNode::Kind::leaf) {
        ASSERT_GE(n.predicate, 0);
        ASSERT_LT(n.predicate, static_cast<int>(t.size()));
        ASSERT_TRUE(n.sign == 1 || n.sign == -1);
        seen[static_cast<std::size_t>(n.predicate)] = 1;
      }
      for (const auto& c : n.children) walk(c);
    };
    walk(t.root());
    for (int s : seen) EXPECT_EQ(s, 1);
  }
}

TEST(EvalTree, Examples) {
  EXPECT_EQ(eval_tree(compile_spec("mu1 or mu2"), std::array{0.2, -1.0}), 0.2);
  EXPECT_EQ(eval_tree(compile_spec("mu1 and mu2"), std::array{-1.0, 0.5}), -1.0);
  EXPECT_EQ(eval_tree(compile_spec("(mu1 or mu2) -> (mu3 or mu4)"), std::array{1.0, 1.0, -2.0, -3.0}), -1.0);
}

TEST(EvalTree, RejectsBadInput) {
  const ParseTree t = compile_spec("mu1 and mu2");
  EXPECT_THROW(eval_tree(t, std::array{1.0}), std::invalid_argument);
  EXPECT_THROW(eval_tree(t, std::array<double, 2>{1.0, NAN}), std::invalid_argument);
  EXPECT_THROW(eval_tree(t, std::array<double, 2>{1.0, INFINITY}), std::invalid_argument);
}

TEST(EvalTree, Boundedness) {
  Rng rng(13);
  for (int i = 0; i < 1000; ++i) {
    const ParseTree t = build_parse_tree(to_nnf(adtest::testing::random_ast(rng, 6)));
    const auto v = adtest::testing::random_values(rng, t.size());
    double lo = INFINITY, hi = -INFINITY;
    for (double x : v) {
      lo = std::min(lo, -std::abs(x));
      hi = std::max(hi, std::abs(x));
    }
    const double phi = eval_tree(t, v);
    EXPECT_LE(lo, phi);
    EXPECT_GE(hi, phi);
  }
}

TEST(RenderTree, Deterministic) {
  const ParseTree t = compile_spec("(mu1 or mu2) -> (mu3 or mu4)");
  EXPECT_EQ(render_tree(t),
            "max\n"
            "  min\n"
            "    -mu1 [#0]\n"
            "    -mu2 [#1]\n"
            "  max\n"
            "    +mu3 [#2]\n"
            "    +mu4 [#3]\n");
}

TEST(EvalTree, MonotoneInSignedLeafValues) {
  Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    const ParseTree t = build_parse_tree(to_nnf(adtest::testing::random_ast(rng, 6)));
    std::vector<double> lo(2 * t.size()), hi(2 * t.size());
    for (std::size_t k = 0; k < lo.size(); ++k) {
      lo[k] = adtest::testing::uniform(rng, -5, 5);
      hi[k] = lo[k] + (adtest::testing::pick(rng, 2) ? adtest::testing::uniform(rng, 0, 2) : 0.0);
    }
    auto eval = [&](const std::vector<double>& v) {
      return t.evaluate([&](int p, int sign) { return v[static_cast<std::size_t>(2 * p + (sign > 0))]; });
    };
    EXPECT_GE(eval(hi), eval(lo));
  }
}
