#pragma once

// The active-testing loop: per-predicate GP models, parse-tree composed
// lower confidence bound, and the verification certificate. Also the two
// comparison baselines (one GP on the composed value, uniform sampling) and
// convergence diagnostics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "adtest/acquisition.hpp"
#include "adtest/envs.hpp"
#include "adtest/errors.hpp"
#include "adtest/gp.hpp"
#include "adtest/random.hpp"
#include "adtest/speclang.hpp"

namespace adtest {

enum class Method { multi_gp, single_gp, random };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::multi_gp: return "multi-gp";
    case Method::single_gp: return "single-gp";
    case Method::random: return "random";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  if (s == "multi-gp") return Method::multi_gp;
  if (s == "single-gp") return Method::single_gp;
  if (s == "random") return Method::random;
  throw std::invalid_argument("unknown method '" + s + "' (expected multi-gp, single-gp or random)");
}

struct GpHyperparameters {
  double signal_variance = 1.0;
  std::vector<double> lengthscales;  // empty: a quarter of the search box width per dimension
  double noise_variance = 1e-4;
};

struct HistoryRow {
  int iteration = 0;  // 0 for initialization samples, 1..N afterwards
  std::string phase;  // "init", "bo" or "random"
  Eigen::VectorXd w;
  std::optional<Eigen::VectorXd> embedded;  // search coordinates when an embedding is used
  std::vector<double> mu;
  double phi = 0.0;
  std::optional<double> beta_sqrt;
  std::optional<double> acquisition;
  std::optional<double> information;  // sum of model mutual information after the update
};

struct RunConfig {
  int budget = 15;
  std::uint64_t seed = 0;
  Method method = Method::multi_gp;
  BetaSchedule beta = FixedBeta{3.0};
  OptimizerSettings optimizer;
  std::optional<int> embedding_dim;
  double delta = 0.05;
  int init_samples = 5;
  bool stop_on_verified = false;
  bool stop_on_counterexample = false;
  GpHyperparameters gp;
  std::map<std::string, GpHyperparameters> predicate_gp;  // per-predicate overrides
  std::function<void(const HistoryRow&)> progress;          // called after each evaluation

  void validate() const {
    if (budget < 1) throw std::invalid_argument("budget must be >= 1");
    if (init_samples < 0) throw std::invalid_argument("init_samples must be >= 0");
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
    if (embedding_dim && *embedding_dim < 1) throw std::invalid_argument("embedding dimension must be >= 1");
    adtest::validate(beta);
    optimizer.validate();
  }
};


struct Certificate {
  bool verified = false;
  double acquisition_minimum = 0.0;
  double beta_sqrt = 0.0;
  double delta = 0.0;
  // The minimum comes from multi-start local search, not a certified global optimizer.
  bool heuristic_optimum = true;
  int iteration = 0;
};

struct RunResult {
  Method method = Method::multi_gp;
  std::vector<std::string> predicates;
  std::vector<HistoryRow> history;
  std::size_t worst_index = 0;
  int counterexamples = 0;
  std::optional<Certificate> certificate;
  std::optional<Trajectory> worst_trajectory;
  bool stopped_early = false;

  const HistoryRow& worst() const { return history.at(worst_index); }
};

class RunError : public Error {
 public:
  RunError(int iteration, const std::string& what)
      : Error("iteration " + std::to_string(iteration) + ": " + what), iteration_(iteration) {}
  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

/// The specification bound to an environment: the parse tree, one binding per
/// tree predicate (same order) and the box of environment parameters.
struct Problem {
  ParseTree tree;
  std::vector<PredicateBinding> bindings;
  Domain domain;

  Problem(ParseTree t, std::vector<PredicateBinding> b, Domain d)
      : tree(std::move(t)), bindings(std::move(b)), domain(std::move(d)) {
    domain.validate();
    if (bindings.size() != tree.size()) throw std::invalid_argument("need one binding per predicate");
    for (std::size_t i = 0; i < bindings.size(); ++i)
      if (bindings[i].name != tree.predicates()[i])
        throw std::invalid_argument("binding '" + bindings[i].name + "' does not match predicate '" +
                                    tree.predicates()[i] + "'");
  }

  /// Orders `available` bindings by the tree's predicate list; throws naming
  /// the first predicate that has no binding.
  static Problem bind(ParseTree tree, const std::vector<PredicateBinding>& available, Domain domain) {
    std::vector<PredicateBinding> ordered;
    for (const auto& name : tree.predicates()) {
      auto it = std::find_if(available.begin(), available.end(), [&](const auto& b) { return b.name == name; });
      if (it == available.end()) throw std::invalid_argument("predicate '" + name + "' has no binding");
      ordered.push_back(*it);
    }
    return Problem(std::move(tree), std::move(ordered), std::move(domain));
  }
};

/// Verified when the (approximate) minimum of the composite LCB over the
/// domain is strictly positive.
inline Certificate check_certificate(const ParseTree& tree, std::span<const GpModel> models, double beta_sqrt,
                                     const Domain& domain, const OptimizerSettings& optimizer, RandomStream& rng,
                                     double delta) {
  for (const auto& m : models)
    if (m.size() == 0) throw std::invalid_argument("certificate needs every model trained on at least one point");
  const auto minimum = minimize_acquisition(
      [&](const Eigen::VectorXd& w) { return composite_lcb(tree, models, beta_sqrt, w); }, domain, optimizer, rng);
  Certificate c;
  c.acquisition_minimum = minimum.value;
  c.verified = minimum.value > 0.0;
  c.beta_sqrt = beta_sqrt;
  c.delta = delta;
  return c;
}

namespace detail {

inline GpModel make_model(const GpHyperparameters& hp, const Domain& search) {
  Eigen::VectorXd ls;
  if (hp.lengthscales.empty()) {
    ls = search.width() / 4.0;
  } else if (hp.lengthscales.size() == 1) {
    ls = Eigen::VectorXd::Constant(search.dim(), hp.lengthscales.front());
  } else {
    if (static_cast<Eigen::Index>(hp.lengthscales.size()) != search.dim())
      throw std::invalid_argument("lengthscale count does not match the search dimension");
    ls = Eigen::Map<const Eigen::VectorXd>(hp.lengthscales.data(), search.dim());
  }
  return GpModel(SquaredExponential{hp.signal_variance, ls}, hp.noise_variance);
}

class Runner {
 public:
  Runner(const Problem& problem, Environment& env, const RunConfig& config)
      : problem_(problem), env_(env), config_(config) {
    config_.validate();
    result_.method = config.method;
    result_.predicates = problem.tree.predicates();
  }

  RunResult run() {
    if (config_.method == Method::random) {
      run_random();
    } else {
      run_bayesian();
    }
    return std::move(result_);
  }

 private:
  void evaluate(int iteration, const char* phase, const Eigen::VectorXd& w,
                std::optional<Eigen::VectorXd> embedded) {
    HistoryRow row;
    row.iteration = iteration;
    row.phase = phase;
    row.w = w;
    row.embedded = std::move(embedded);
    Outcome outcome;
    try {
      outcome = env_.simulate(w);
      row.mu.reserve(problem_.bindings.size());
      for (const auto& b : problem_.bindings) row.mu.push_back(eval_predicate(b, outcome));
      row.phi = eval_tree(problem_.tree, row.mu);
    } catch (const RunError&) {
      throw;
    } catch (const std::exception& e) {
      throw RunError(iteration, std::string("simulation failed: ") + e.what());
    }
    const bool first = result_.history.empty();
    result_.history.push_back(std::move(row));
    const auto& added = result_.history.back();
    if (added.phi <= 0.0) ++result_.counterexamples;
    if (config_.progress) config_.progress(added);
    if (first || added.phi < result_.worst().phi) {
      result_.worst_index = result_.history.size() - 1;
      result_.worst_trajectory = std::move(outcome.trajectory);
    }
  }

  void run_random() {
    RandomStream rng(config_.seed, "random-baseline");
    for (int n = 1; n <= config_.budget; ++n) evaluate(n, "random", problem_.domain.sample(rng), std::nullopt);
  }

  void run_bayesian() {
    RandomStream init_rng(config_.seed, "init-samples");
    RandomStream opt_rng(config_.seed, "optimizer-restarts");

    std::optional<Embedding> embedding;
    Domain search = problem_.domain;
    if (config_.embedding_dim) {
      RandomStream emb_rng(config_.seed, "embedding");
      embedding = Embedding::random(problem_.domain.dim(), *config_.embedding_dim, emb_rng);
      search = embedding->low_box();
    }
    auto to_domain = [&](const Eigen::VectorXd& x) {
      return embedding ? embed(*embedding, x, problem_.domain) : x;
    };

    // Multi-GP models each predicate; single-GP models the composed value
    // through a one-leaf tree.
    const bool single = config_.method == Method::single_gp;
    const ParseTree model_tree = single ? ParseTree(TreeNode::leaf(0, 1), {"phi"}) : problem_.tree;
    BetaSchedule schedule = config_.beta;
    if (auto* t = std::get_if<TheoreticalBeta>(&schedule); t && single) {
      double total = 0.0;
      for (double b : t->rkhs_bounds) total += b;
      t->rkhs_bounds = {total};
    }
    std::vector<GpModel> models;
    for (const auto& name : model_tree.predicates()) {
      auto it = config_.predicate_gp.find(name);
      models.push_back(make_model(it != config_.predicate_gp.end() ? it->second : config_.gp, search));
    }
    auto update_models = [&](const Eigen::VectorXd& x) {
      const auto& row = result_.history.back();
      try {
        if (single) {
          models.front().observe(x, row.phi);
        } else {
          for (std::size_t i = 0; i < models.size(); ++i) models[i].observe(x, row.mu[i]);
        }
      } catch (const std::exception& e) {
        throw RunError(row.iteration, std::string("model update failed: ") + e.what());
      }
      double info = 0.0;
      for (const auto& m : models) info += m.mutual_information();
      result_.history.back().information = info;
    };

    for (int j = 0; j < config_.init_samples; ++j) {
      const Eigen::VectorXd x = search.sample(init_rng);
      evaluate(0, "init", to_domain(x), embedding ? std::optional(x) : std::nullopt);
      update_models(x);
    }

    auto acquisition_min = [&](double beta_sqrt, int iteration) {
      try {
        return minimize_acquisition(
            [&](const Eigen::VectorXd& x) { return composite_lcb(model_tree, models, beta_sqrt, x); }, search,
            config_.optimizer, opt_rng);
      } catch (const std::exception& e) {
        throw RunError(iteration, std::string("acquisition optimization failed: ") + e.what());
      }
    };

    int n = 1;
    for (; n <= config_.budget; ++n) {
      const double beta_sqrt = beta_sqrt_at(schedule, models, n);
      const auto minimum = acquisition_min(beta_sqrt, n);
      if (config_.stop_on_verified && minimum.value > 0.0 && models.front().size() > 0) {
        result_.certificate = Certificate{true, minimum.value, beta_sqrt, config_.delta, true, n};
        result_.stopped_early = true;
        return;
      }
      evaluate(n, "bo", to_domain(minimum.point), embedding ? std::optional(minimum.point) : std::nullopt);
      auto& row = result_.history.back();
      row.beta_sqrt = beta_sqrt;
      row.acquisition = minimum.value;
      update_models(minimum.point);
      if (config_.stop_on_counterexample && result_.history.back().phi <= 0.0) {
        result_.stopped_early = true;
        ++n;
        break;
      }
    }
    if (models.front().size() == 0) return;
    const double beta_sqrt = beta_sqrt_at(schedule, models, n);
    try {
      Certificate c = check_certificate(model_tree, models, beta_sqrt, search, config_.optimizer, opt_rng,
                                        config_.delta);
      c.iteration = n;
      result_.certificate = c;
    } catch (const std::exception& e) {
      throw RunError(n, std::string("certificate check failed: ") + e.what());
    }
  }

  const Problem& problem_;
  Environment& env_;
  RunConfig config_;
  RunResult result_;
};

}  // namespace detail

/// Bayesian active testing with one GP per predicate (config.method must be
/// multi-gp). Seeds the models with config.init_samples uniform draws first.
inline RunResult active_test(const Problem& problem, Environment& env, RunConfig config) {
  if (config.method != Method::multi_gp) throw std::invalid_argument("active_test runs the multi-gp method");
  return detail::Runner(problem, env, config).run();
}

/// single-gp: one GP on the composed value with the plain LCB acquisition.
/// random: budget i.i.d. uniform draws from the domain.
inline RunResult run_baseline(const Problem& problem, Environment& env, RunConfig config) {
  if (config.method == Method::multi_gp) throw std::invalid_argument("run_baseline needs single-gp or random");
  return detail::Runner(problem, env, config).run();
}

inline RunResult run(const Problem& problem, Environment& env, const RunConfig& config) {
  return detail::Runner(problem, env, config).run();
}

struct Diagnostics {
  double c1 = 0.0;  // 8 / log(1 + 1/noise)
  std::vector<int> iterations;
  std::vector<double> beta_sqrt;
  std::vector<double> information;   // accumulated mutual information after each iteration
  std::vector<double> regret_bound;  // sqrt(C1 * beta_n * n * info_n) / n
  std::optional<double> epsilon;
  std::optional<int> epsilon_iteration;  // first n with bound <= epsilon
};

inline Diagnostics convergence_diagnostics(const RunResult& result, double noise_variance,
                                           std::optional<double> epsilon = std::nullopt) {
  if (result.history.empty()) throw std::invalid_argument("diagnostics need a nonempty run");
  if (!(noise_variance > 0.0)) throw std::invalid_argument("noise variance must be positive");
  Diagnostics d;
  d.c1 = 8.0 / std::log1p(1.0 / noise_variance);
  d.epsilon = epsilon;
  for (const auto& row : result.history) {
    if (!row.beta_sqrt || !row.information) continue;
    const int n = row.iteration;
    const double beta = *row.beta_sqrt * *row.beta_sqrt;
    const double bound = std::sqrt(d.c1 * beta * n * *row.information) / n;
    d.iterations.push_back(n);
    d.beta_sqrt.push_back(*row.beta_sqrt);
    d.information.push_back(*row.information);
    d.regret_bound.push_back(bound);
    if (epsilon && !d.epsilon_iteration && bound <= *epsilon) d.epsilon_iteration = n;
  }
  return d;
}

}  // namespace adtest
