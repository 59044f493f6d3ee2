#pragma once

// Boolean safety specifications over named predicates: parsing, negation
// normal form, and the min/max parse tree used for quantitative evaluation.
//
// Grammar (lowest to highest precedence):
//
//   spec    := iff
//   iff     := implies ( ("<->" | "iff") implies )*        left-associative
//   implies := or ( ("->" | "implies") implies )?          right-associative
//   or      := and ( ("||" | "or") and )*
//   and     := unary ( ("&&" | "and") unary )*
//   unary   := ("!" | "not") unary | primary
//   primary := identifier | "(" spec ")"
//
// Quantitative semantics: atom -> its value, not -> negation, and -> min,
// or -> max. A value <= 0 is a violation.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "adtest/errors.hpp"

namespace adtest {

enum class SpecOp { atom, negation, conjunction, disjunction, implication, equivalence };

struct SpecAst {
  SpecOp op = SpecOp::atom;
  std::string name;               // atoms only
  std::vector<SpecAst> children;  // 1 for negation, 2 for binary operators

  static SpecAst atom(std::string name) { return {SpecOp::atom, std::move(name), {}}; }
  static SpecAst negation(SpecAst child) { return {SpecOp::negation, {}, {std::move(child)}}; }
  static SpecAst conjunction(SpecAst l, SpecAst r) { return binary(SpecOp::conjunction, std::move(l), std::move(r)); }
  static SpecAst disjunction(SpecAst l, SpecAst r) { return binary(SpecOp::disjunction, std::move(l), std::move(r)); }
  static SpecAst implication(SpecAst l, SpecAst r) { return binary(SpecOp::implication, std::move(l), std::move(r)); }
  static SpecAst equivalence(SpecAst l, SpecAst r) { return binary(SpecOp::equivalence, std::move(l), std::move(r)); }

  const SpecAst& left() const { return children.at(0); }
  const SpecAst& right() const { return children.at(1); }

  friend bool operator==(const SpecAst&, const SpecAst&) = default;

 private:
  static SpecAst binary(SpecOp op, SpecAst l, SpecAst r) {
    SpecAst node{op, {}, {}};
    node.children.reserve(2);
    node.children.push_back(std::move(l));
    node.children.push_back(std::move(r));
    return node;
  }
};

namespace detail {

enum class TokenKind { identifier, op_not, op_and, op_or, op_implies, op_iff, lparen, rparen, end };

struct Token {
  TokenKind kind;
  std::string text;
  int line;
  int column;
};

inline const char* token_name(TokenKind kind) {
  switch (kind) {
    case TokenKind::identifier: return "identifier";
    case TokenKind::op_not: return "'!'";
    case TokenKind::op_and: return "'&&'";
    case TokenKind::op_or: return "'||'";
    case TokenKind::op_implies: return "'->'";
    case TokenKind::op_iff: return "'<->'";
    case TokenKind::lparen: return "'('";
    case TokenKind::rparen: return "')'";
    case TokenKind::end: return "end of input";
  }
  return "?";
}

inline bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
inline bool is_ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

inline std::vector<Token> tokenize(std::string_view text) {
  static const std::unordered_map<std::string_view, TokenKind> keywords = {
      {"not", TokenKind::op_not},         {"and", TokenKind::op_and},
      {"or", TokenKind::op_or},           {"implies", TokenKind::op_implies},
      {"iff", TokenKind::op_iff},
  };
  // Longest spellings first so "<->" wins over a stray "<".
  static const std::pair<std::string_view, TokenKind> symbols[] = {
      {"<->", TokenKind::op_iff}, {"->", TokenKind::op_implies}, {"&&", TokenKind::op_and},
      {"||", TokenKind::op_or},   {"!", TokenKind::op_not},      {"(", TokenKind::lparen},
      {")", TokenKind::rparen},
  };

  std::vector<Token> tokens;
  int line = 1;
  int column = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t count) {
    for (std::size_t k = 0; k < count; ++k, ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
  };

  while (i < text.size()) {
    const char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == '#') {  // comment to end of line
      while (i < text.size() && text[i] != '\n') advance(1);
      continue;
    }
    if (is_ident_start(c)) {
      std::size_t j = i;
      while (j < text.size() && is_ident_char(text[j])) ++j;
      std::string word(text.substr(i, j - i));
      auto kw = keywords.find(word);
      tokens.push_back({kw == keywords.end() ? TokenKind::identifier : kw->second, word, line, column});
      advance(j - i);
      continue;
    }
    bool matched = false;
    for (const auto& [spelling, kind] : symbols) {
      if (text.substr(i, spelling.size()) == spelling) {
        tokens.push_back({kind, std::string(spelling), line, column});
        advance(spelling.size());
        matched = true;
        break;
      }
    }
    if (matched) continue;

    if (std::ispunct(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < text.size() && std::ispunct(static_cast<unsigned char>(text[j])) &&
             text[j] != '(' && text[j] != ')')
        ++j;
      throw SpecSyntaxError("unknown operator '" + std::string(text.substr(i, j - i)) + "'",
                            line, column);
    }
    throw SpecSyntaxError("unexpected character", line, column);
  }
  tokens.push_back({TokenKind::end, "", line, column});
  return tokens;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  SpecAst parse() {
    SpecAst ast = parse_iff();
    if (peek().kind != TokenKind::end) {
      fail("unexpected " + describe(peek()),
           {"'&&'", "'||'", "'->'", "'<->'", "end of input"});
    }
    return ast;
  }

 private:
  static constexpr int kMaxDepth = 2000;

  const Token& peek() const { return tokens_[pos_]; }
  Token take() { return tokens_[pos_++]; }

  static std::string describe(const Token& t) {
    if (t.kind == TokenKind::end) return "end of input";
    return "'" + t.text + "'";
  }

  [[noreturn]] void fail(const std::string& message, std::vector<std::string> expected) const {
    throw SpecSyntaxError(message, peek().line, peek().column, std::move(expected));
  }

  struct DepthGuard {
    int& depth;
    explicit DepthGuard(int& d, const Parser& p) : depth(d) {
      if (++depth > kMaxDepth) p.fail("nesting too deep", {});
    }
    ~DepthGuard() { --depth; }
  };

  SpecAst parse_iff() {
    SpecAst lhs = parse_implies();
    while (peek().kind == TokenKind::op_iff) {
      take();
      lhs = SpecAst::equivalence(std::move(lhs), parse_implies());
    }
    return lhs;
  }

  SpecAst parse_implies() {
    DepthGuard guard(depth_, *this);
    SpecAst lhs = parse_or();
    if (peek().kind == TokenKind::op_implies) {
      take();
      return SpecAst::implication(std::move(lhs), parse_implies());
    }
    return lhs;
  }

  SpecAst parse_or() {
    SpecAst lhs = parse_and();
    while (peek().kind == TokenKind::op_or) {
      take();
      lhs = SpecAst::disjunction(std::move(lhs), parse_and());
    }
    return lhs;
  }

  SpecAst parse_and() {
    SpecAst lhs = parse_unary();
    while (peek().kind == TokenKind::op_and) {
      take();
      lhs = SpecAst::conjunction(std::move(lhs), parse_unary());
    }
    return lhs;
  }

  SpecAst parse_unary() {
    DepthGuard guard(depth_, *this);
    if (peek().kind == TokenKind::op_not) {
      take();
      return SpecAst::negation(parse_unary());
    }
    return parse_primary();
  }

  SpecAst parse_primary() {
    const Token& t = peek();
    if (t.kind == TokenKind::identifier) return SpecAst::atom(take().text);
    if (t.kind == TokenKind::lparen) {
      take();
      SpecAst inner = parse_iff();
      if (peek().kind != TokenKind::rparen) {
        fail("unexpected " + describe(peek()), {"')'", "'&&'", "'||'", "'->'", "'<->'"});
      }
      take();
      return inner;
    }
    fail("unexpected " + describe(t), {"identifier", "'('", "'!'"});
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  int depth_ = 0;
};

inline int precedence(SpecOp op) {
  switch (op) {
    case SpecOp::equivalence: return 1;
    case SpecOp::implication: return 2;
    case SpecOp::disjunction: return 3;
    case SpecOp::conjunction: return 4;
    case SpecOp::negation: return 5;
    case SpecOp::atom: return 6;
  }
  return 0;
}

inline void print(const SpecAst& ast, std::string& out) {
  auto child = [&out](const SpecAst& c, bool parens) {
    if (parens) out += '(';
    print(c, out);
    if (parens) out += ')';
  };
  const int p = precedence(ast.op);
  switch (ast.op) {
    case SpecOp::atom:
      out += ast.name;
      return;
    case SpecOp::negation:
      out += '!';
      child(ast.left(), precedence(ast.left().op) < p);
      return;
    default: break;
  }
  const char* spelling = ast.op == SpecOp::conjunction   ? " && "
                         : ast.op == SpecOp::disjunction ? " || "
                         : ast.op == SpecOp::implication ? " -> "
                                                         : " <-> ";
  const bool right_assoc = ast.op == SpecOp::implication;
  const int lp = precedence(ast.left().op);
  const int rp = precedence(ast.right().op);
  child(ast.left(), lp < p || (lp == p && right_assoc));
  out += spelling;
  child(ast.right(), rp < p || (rp == p && !right_assoc));
}

inline SpecAst nnf(const SpecAst& ast, bool negated) {
  switch (ast.op) {
    case SpecOp::atom:
      return negated ? SpecAst::negation(ast) : ast;
    case SpecOp::negation:
      return nnf(ast.left(), !negated);
    case SpecOp::conjunction:
    case SpecOp::disjunction: {
      // De Morgan flips the connective under negation.
      const bool is_and = (ast.op == SpecOp::conjunction) != negated;
      SpecAst l = nnf(ast.left(), negated);
      SpecAst r = nnf(ast.right(), negated);
      return is_and ? SpecAst::conjunction(std::move(l), std::move(r))
                    : SpecAst::disjunction(std::move(l), std::move(r));
    }
    case SpecOp::implication:
      return nnf(SpecAst::disjunction(SpecAst::negation(ast.left()), ast.right()), negated);
    case SpecOp::equivalence:
      return nnf(SpecAst::disjunction(
                     SpecAst::conjunction(SpecAst::negation(ast.left()),
                                          SpecAst::negation(ast.right())),
                     SpecAst::conjunction(ast.left(), ast.right())),
                 negated);
  }
  throw std::invalid_argument("invalid specification node");
}

}  // namespace detail

/// Parses specification text into a syntax tree. Throws SpecSyntaxError
/// carrying line, column and the set of tokens that would have been accepted.
inline SpecAst parse_spec(std::string_view text) {
  if (text.empty()) throw SpecSyntaxError("empty specification", 1, 1, {"identifier", "'('", "'!'"});
  return detail::Parser(detail::tokenize(text)).parse();
}

/// Renders with the symbolic spellings and the minimum parentheses needed
/// for parse_spec to rebuild the identical tree.
inline std::string to_string(const SpecAst& ast) {
  std::string out;
  detail::print(ast, out);
  return out;
}

/// Direct recursive quantitative semantics on an unnormalized tree.
inline double evaluate(const SpecAst& ast, const std::function<double(const std::string&)>& value_of) {
  switch (ast.op) {
    case SpecOp::atom: return value_of(ast.name);
    case SpecOp::negation: return -evaluate(ast.left(), value_of);
    case SpecOp::conjunction: return std::min(evaluate(ast.left(), value_of), evaluate(ast.right(), value_of));
    case SpecOp::disjunction: return std::max(evaluate(ast.left(), value_of), evaluate(ast.right(), value_of));
    case SpecOp::implication: return std::max(-evaluate(ast.left(), value_of), evaluate(ast.right(), value_of));
    case SpecOp::equivalence: {
      const double a = evaluate(ast.left(), value_of);
      const double b = evaluate(ast.right(), value_of);
      return std::max(std::min(-a, -b), std::min(a, b));
    }
  }
  throw std::invalid_argument("invalid specification node");
}

inline bool is_nnf(const SpecAst& ast) {
  switch (ast.op) {
    case SpecOp::atom: return true;
    case SpecOp::negation: return ast.left().op == SpecOp::atom;
    case SpecOp::conjunction:
    case SpecOp::disjunction: return is_nnf(ast.left()) && is_nnf(ast.right());
    default: return false;
  }
}

/// Rewrites implication and equivalence, removes double negation and pushes
/// negation down to the atoms.
inline SpecAst to_nnf(const SpecAst& ast) { return detail::nnf(ast, false); }

struct TreeNode {
  enum class Kind { min, max, leaf };

  Kind kind = Kind::leaf;
  int predicate = 0;  // leaves only
  int sign = 1;       // leaves only, +1 or -1
  std::vector<TreeNode> children;

  friend bool operator==(const TreeNode&, const TreeNode&) = default;

  static TreeNode leaf(int predicate, int sign) { return {Kind::leaf, predicate, sign, {}}; }
  static TreeNode min(std::vector<TreeNode> c) { return {Kind::min, 0, 1, std::move(c)}; }
  static TreeNode max(std::vector<TreeNode> c) { return {Kind::max, 0, 1, std::move(c)}; }
};

// Min/max evaluation tree with signed predicate leaves. Immutable once built.
class ParseTree {
 public:
  ParseTree(TreeNode root, std::vector<std::string> predicates)
      : root_(std::move(root)), predicates_(std::move(predicates)) {}

  const TreeNode& root() const noexcept { return root_; }
  const std::vector<std::string>& predicates() const noexcept { return predicates_; }
  std::size_t size() const noexcept { return predicates_.size(); }

  int index_of(std::string_view name) const {
    auto it = std::find(predicates_.begin(), predicates_.end(), name);
    return it == predicates_.end() ? -1 : static_cast<int>(it - predicates_.begin());
  }

  // Evaluates with `leaf(predicate, sign)` supplying each leaf value.
  template <class LeafFn>
  double evaluate(LeafFn&& leaf) const {
    return evaluate_node(root_, leaf);
  }

 private:
  template <class LeafFn>
  static double evaluate_node(const TreeNode& node, LeafFn& leaf) {
    switch (node.kind) {
      case TreeNode::Kind::leaf:
        return leaf(node.predicate, node.sign);
      case TreeNode::Kind::min: {
        double v = std::numeric_limits<double>::infinity();
        for (const auto& c : node.children) v = std::min(v, evaluate_node(c, leaf));
        return v;
      }
      case TreeNode::Kind::max: {
        double v = -std::numeric_limits<double>::infinity();
        for (const auto& c : node.children) v = std::max(v, evaluate_node(c, leaf));
        return v;
      }
    }
    return 0.0;
  }

  TreeNode root_;
  std::vector<std::string> predicates_;
};

namespace detail {

inline TreeNode build_node(const SpecAst& ast, std::vector<std::string>& names) {
  switch (ast.op) {
    case SpecOp::atom:
    case SpecOp::negation: {
      const bool negated = ast.op == SpecOp::negation;
      const std::string& name = negated ? ast.left().name : ast.name;
      auto it = std::find(names.begin(), names.end(), name);
      int index = static_cast<int>(it - names.begin());
      if (it == names.end()) names.push_back(name);
      return TreeNode::leaf(index, negated ? -1 : 1);
    }
    case SpecOp::conjunction:
    case SpecOp::disjunction: {
      // Left-leaning chains of the same connective ("a && b && c") become one
      // n-ary node; an explicitly nested right operand stays nested.
      std::vector<const SpecAst*> chain;
      const SpecAst* cur = &ast;
      while (cur->op == ast.op) {
        chain.push_back(&cur->right());
        cur = &cur->left();
      }
      chain.push_back(cur);
      std::vector<TreeNode> children;
      children.reserve(chain.size());
      for (auto it = chain.rbegin(); it != chain.rend(); ++it) children.push_back(build_node(**it, names));
      return ast.op == SpecOp::conjunction ? TreeNode::min(std::move(children))
                                           : TreeNode::max(std::move(children));
    }
    default:
      throw std::invalid_argument("specification is not in negation normal form");
  }
}

inline void render(const TreeNode& node, const std::vector<std::string>& names, int depth,
                   std::ostringstream& out) {
  out << std::string(static_cast<std::size_t>(depth) * 2, ' ');
  switch (node.kind) {
    case TreeNode::Kind::min: out << "min\n"; break;
    case TreeNode::Kind::max: out << "max\n"; break;
    case TreeNode::Kind::leaf:
      out << (node.sign < 0 ? "-" : "+") << names[static_cast<std::size_t>(node.predicate)] << " [#"
          << node.predicate << "]\n";
      return;
  }
  for (const auto& c : node.children) render(c, names, depth + 1, out);
}

}  // namespace detail

/// and -> min, or -> max, atom -> +leaf, not(atom) -> -leaf. Predicate
/// names are numbered in first-occurrence order.
inline ParseTree build_parse_tree(const SpecAst& nnf) {
  if (!is_nnf(nnf)) throw std::invalid_argument("specification is not in negation normal form");
  std::vector<std::string> names;
  TreeNode root = detail::build_node(nnf, names);
  return ParseTree(std::move(root), std::move(names));
}

inline ParseTree compile_spec(std::string_view text) {
  return build_parse_tree(to_nnf(parse_spec(text)));
}

inline double eval_tree(const ParseTree& tree, std::span<const double> leaf_values) {
  if (leaf_values.size() != tree.size()) {
    throw std::invalid_argument("expected " + std::to_string(tree.size()) + " predicate values, got " +
                                std::to_string(leaf_values.size()));
  }
  for (double v : leaf_values) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite predicate value");
  }
  return tree.evaluate([&](int i, int sign) { return sign * leaf_values[static_cast<std::size_t>(i)]; });
}

/// Indented, deterministic rendering for debugging.
inline std::string render_tree(const ParseTree& tree) {
  std::ostringstream out;
  detail::render(tree.root(), tree.predicates(), 0, out);
  return out.str();
}

}  // namespace adtest
