#pragma once

// Lower-confidence-bound acquisition composed through a parse tree, the
// confidence scaling schedule, multi-start minimization over a box, and the
// random linear embedding used for high-dimensional domains.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "adtest/errors.hpp"
#include "adtest/gp.hpp"
#include "adtest/nelder_mead.hpp"
#include "adtest/random.hpp"
#include "adtest/speclang.hpp"

namespace adtest {

struct Domain {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Domain() = default;
  Domain(Eigen::VectorXd lo, Eigen::VectorXd hi) : lower(std::move(lo)), upper(std::move(hi)) { validate(); }

  static Domain cube(Eigen::Index dim, double lo, double hi) {
    return Domain(Eigen::VectorXd::Constant(dim, lo), Eigen::VectorXd::Constant(dim, hi));
  }

  void validate() const {
    if (lower.size() == 0 || lower.size() != upper.size())
      throw std::invalid_argument("domain bounds must be nonempty and of equal dimension");
    if (!lower.allFinite() || !upper.allFinite()) throw std::invalid_argument("domain bounds must be finite");
    if ((lower.array() >= upper.array()).any())
      throw std::invalid_argument("domain lower bound must be below upper bound in every dimension");
  }

  Eigen::Index dim() const { return lower.size(); }
  Eigen::VectorXd center() const { return 0.5 * (lower + upper); }
  Eigen::VectorXd width() const { return upper - lower; }
  bool contains(const Eigen::VectorXd& w) const {
    return w.size() == dim() && (w.array() >= lower.array()).all() && (w.array() <= upper.array()).all();
  }
  Eigen::VectorXd clip(const Eigen::VectorXd& w) const { return w.cwiseMax(lower).cwiseMin(upper); }

  Eigen::VectorXd sample(RandomStream& rng) const {
    Eigen::VectorXd w(dim());
    for (Eigen::Index i = 0; i < dim(); ++i) w(i) = rng.uniform(lower(i), upper(i));
    return w;
  }
};

struct FixedBeta {
  double beta_sqrt = 3.0;
};

// beta^{1/2}_n = sum_i B_i + 4 sigma sqrt(1 + ln(1/delta) + sum_i I_i)
struct TheoreticalBeta {
  std::vector<double> rkhs_bounds;
  double delta = 0.05;
  double sigma = 0.01;
};

using BetaSchedule = std::variant<FixedBeta, TheoreticalBeta>;

inline void validate(const BetaSchedule& schedule) {
  if (const auto* fixed = std::get_if<FixedBeta>(&schedule)) {
    if (!(fixed->beta_sqrt > 0.0) || !std::isfinite(fixed->beta_sqrt))
      throw std::invalid_argument("fixed beta^(1/2) must be positive");
    return;
  }
  const auto& t = std::get<TheoreticalBeta>(schedule);
  if (!(t.delta > 0.0 && t.delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  if (!(t.sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  if (t.rkhs_bounds.empty()) throw std::invalid_argument("theoretical beta needs RKHS bounds");
  for (double b : t.rkhs_bounds)
    if (!(b > 0.0)) throw std::invalid_argument("RKHS bounds must be positive");
}

inline double beta_sqrt_at(const BetaSchedule& schedule, std::span<const GpModel> models, int iteration) {
  if (iteration < 1) throw std::invalid_argument("iteration must be >= 1");
  validate(schedule);
  if (const auto* fixed = std::get_if<FixedBeta>(&schedule)) return fixed->beta_sqrt;
  const auto& t = std::get<TheoreticalBeta>(schedule);
  if (t.rkhs_bounds.size() != models.size())
    throw std::invalid_argument("need one RKHS bound per predicate model");
  const double bound_sum = std::accumulate(t.rkhs_bounds.begin(), t.rkhs_bounds.end(), 0.0);
  double information = 0.0;
  for (const auto& m : models) information += m.mutual_information();
  return bound_sum + 4.0 * t.sigma * std::sqrt(1.0 + std::log(1.0 / t.delta) + information);
}

/// Parse-tree evaluation with each leaf replaced by the end of its confidence
/// interval that lower-bounds the signed predicate: sign * m - beta^{1/2} * s.
inline double composite_lcb(const ParseTree& tree, std::span<const GpModel> models, double beta_sqrt,
                            const Eigen::VectorXd& w) {
  if (models.size() != tree.size())
    throw std::invalid_argument("parse tree has " + std::to_string(tree.size()) + " predicates but " +
                                std::to_string(models.size()) + " models were given");
  thread_local std::vector<double> mean, stddev;
  mean.resize(models.size());
  stddev.resize(models.size());
  for (std::size_t i = 0; i < models.size(); ++i) {
    const Posterior p = models[i].posterior(w);
    mean[i] = p.mean;
    stddev[i] = p.stddev();
  }
  return tree.evaluate([&](int i, int sign) {
    const auto k = static_cast<std::size_t>(i);
    return sign * mean[k] - beta_sqrt * stddev[k];
  });
}

struct OptimizerSettings {
  int restarts = 50;
  double refine_fraction = 0.1;
  int local_budget = 200;
  double simplex_scale = 0.05;  // initial simplex edge, fraction of box width

  void validate() const {
    if (restarts < 1) throw std::invalid_argument("optimizer restarts must be >= 1");
    if (!(refine_fraction >= 0.0 && refine_fraction <= 1.0))
      throw std::invalid_argument("refine fraction must lie in [0, 1]");
    if (local_budget < 0) throw std::invalid_argument("local search budget must be >= 0");
    if (!(simplex_scale > 0.0)) throw std::invalid_argument("simplex scale must be positive");
  }
};

struct AcquisitionMinimum {
  Eigen::VectorXd point;
  double value = 0.0;
};

/// Uniform multi-start sampling followed by box-projected Nelder-Mead from the
/// best ceil(restarts * refine_fraction) samples. Ties keep the earliest
/// candidate. Deterministic given the stream state.
template <class Objective>
AcquisitionMinimum minimize_acquisition(Objective&& objective, const Domain& domain,
                                        const OptimizerSettings& settings, RandomStream& rng) {
  settings.validate();
  domain.validate();

  struct Candidate {
    Eigen::VectorXd point;
    double value;
  };
  std::vector<Candidate> candidates;
  candidates.reserve(static_cast<std::size_t>(settings.restarts));
  for (int r = 0; r < settings.restarts; ++r) {
    Eigen::VectorXd w = domain.sample(rng);
    const double v = objective(static_cast<const Eigen::VectorXd&>(w));
    if (std::isfinite(v)) candidates.push_back({std::move(w), v});
  }
  if (candidates.empty()) throw OptimizerError("acquisition objective was non-finite at every start point");

  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return candidates[a].value < candidates[b].value; });

  AcquisitionMinimum best{candidates[order.front()].point, candidates[order.front()].value};
  const auto refine = std::min(
      order.size(),
      static_cast<std::size_t>(std::ceil(settings.refine_fraction * settings.restarts - 1e-9)));
  const Eigen::VectorXd step = settings.simplex_scale * domain.width();
  for (std::size_t k = 0; k < refine && settings.local_budget > 0; ++k) {
    const auto& start = candidates[order[k]];
    SimplexResult local = nelder_mead(objective, start.point, step, domain.lower, domain.upper,
                                      settings.local_budget);
    if (local.value < best.value) {
      best.point = std::move(local.point);
      best.value = local.value;
    }
  }
  return best;
}

// Random linear embedding of a low-dimensional box into the domain.
struct Embedding {
  Eigen::MatrixXd matrix;  // D x d, i.i.d. standard normal

  static Embedding random(Eigen::Index ambient_dim, Eigen::Index low_dim, RandomStream& rng) {
    if (ambient_dim < 1 || low_dim < 1) throw std::invalid_argument("embedding dimensions must be >= 1");
    Embedding e{Eigen::MatrixXd(ambient_dim, low_dim)};
    for (Eigen::Index i = 0; i < ambient_dim; ++i)
      for (Eigen::Index j = 0; j < low_dim; ++j) e.matrix(i, j) = rng.normal();
    return e;
  }

  Eigen::Index ambient_dim() const { return matrix.rows(); }
  Eigen::Index low_dim() const { return matrix.cols(); }

  /// [-sqrt(d), sqrt(d)]^d
  Domain low_box() const {
    const double r = std::sqrt(static_cast<double>(low_dim()));
    return Domain::cube(low_dim(), -r, r);
  }
};

/// center + half_width * (A y), clipped into the domain.
inline Eigen::VectorXd embed(const Embedding& embedding, const Eigen::VectorXd& y, const Domain& domain) {
  if (y.size() != embedding.low_dim()) throw std::invalid_argument("embedded point has wrong dimension");
  if (domain.dim() != embedding.ambient_dim()) throw std::invalid_argument("domain and embedding disagree on dimension");
  const Eigen::VectorXd w = domain.center() + (0.5 * domain.width()).cwiseProduct(embedding.matrix * y);
  return domain.clip(w);
}

}  // namespace adtest
