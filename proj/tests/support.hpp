#pragma once

// Shared generators and independent oracles for the test suites.

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "adtest/speclang.hpp"

namespace adtest::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline int pick(Rng& rng, int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); }

/// Random formula over atoms p0..p{atoms-1}, every operator reachable.
inline SpecAst random_ast(Rng& rng, int depth, int atoms = 4) {
  if (depth <= 0 || pick(rng, 4) == 0) return SpecAst::atom("p" + std::to_string(pick(rng, atoms)));
  switch (pick(rng, 5)) {
    case 0: return SpecAst::negation(random_ast(rng, depth - 1, atoms));
    case 1: return SpecAst::conjunction(random_ast(rng, depth - 1, atoms), random_ast(rng, depth - 1, atoms));
    case 2: return SpecAst::disjunction(random_ast(rng, depth - 1, atoms), random_ast(rng, depth - 1, atoms));
    case 3: return SpecAst::implication(random_ast(rng, depth - 1, atoms), random_ast(rng, depth - 1, atoms));
    default: return SpecAst::equivalence(random_ast(rng, depth - 1, atoms), random_ast(rng, depth - 1, atoms));
  }
}

/// Quantitative semantics written out by hand: desugar, then min/max/negate.
inline double oracle_eval(const SpecAst& a, const std::map<std::string, double>& v) {
  switch (a.op) {
    case SpecOp::atom: return v.at(a.name);
    case SpecOp::negation: return -oracle_eval(a.children[0], v);
    case SpecOp::conjunction: return std::min(oracle_eval(a.children[0], v), oracle_eval(a.children[1], v));
    case SpecOp::disjunction: return std::max(oracle_eval(a.children[0], v), oracle_eval(a.children[1], v));
    case SpecOp::implication: {
      const SpecAst d = SpecAst::disjunction(SpecAst::negation(a.children[0]), a.children[1]);
      return oracle_eval(d, v);
    }
    case SpecOp::equivalence: {
      const auto& p = a.children[0];
      const auto& q = a.children[1];
      const SpecAst d = SpecAst::disjunction(SpecAst::conjunction(SpecAst::negation(p), SpecAst::negation(q)),
                                             SpecAst::conjunction(p, q));
      return oracle_eval(d, v);
    }
  }
  return NAN;
}

/// Values for the tree's predicates in tree order, plus the same as a map.
inline std::vector<double> random_values(Rng& rng, std::size_t n, double scale = 10.0) {
  std::vector<double> out(n);
  for (auto& x : out) x = uniform(rng, -scale, scale);
  return out;
}

/// Posterior of a zero-mean GP by explicit dense inversion.
struct DenseGp {
  Eigen::MatrixXd x;  // D x n
  Eigen::VectorXd y;
  double sf2, noise;
  Eigen::VectorXd ell;

  double k(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    return sf2 * std::exp(-0.5 * ((a - b).array() / ell.array()).square().sum());
  }

  Eigen::MatrixXd gram() const {
    const auto n = x.cols();
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) K(i, j) = k(x.col(i), x.col(j));
    return K;
  }

  std::pair<double, double> posterior(const Eigen::VectorXd& w) const {
    const auto n = x.cols();
    if (n == 0) return {0.0, sf2};
    const Eigen::MatrixXd inv = (gram() + noise * Eigen::MatrixXd::Identity(n, n)).inverse();
    Eigen::VectorXd kw(n);
    for (Eigen::Index i = 0; i < n; ++i) kw(i) = k(w, x.col(i));
    return {kw.dot(inv * y), std::max(0.0, sf2 - kw.dot(inv * kw))};
  }

  double log_det_information() const {
    const auto n = x.cols();
    const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) + gram() / noise;
    return Eigen::LLT<Eigen::MatrixXd>(m).matrixLLT().diagonal().array().log().sum() * 2.0;
  }
};

}  // namespace adtest::testing
