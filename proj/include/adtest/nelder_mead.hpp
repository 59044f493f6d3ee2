#pragma once

// Derivative-free Nelder-Mead simplex search inside a box. Trial points are
// projected onto the box before evaluation; non-finite objective values are
// treated as +infinity.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace adtest {

struct SimplexResult {
  Eigen::VectorXd point;
  double value = std::numeric_limits<double>::infinity();
  int evaluations = 0;
};

template <class Objective>
SimplexResult nelder_mead(Objective&& objective, const Eigen::VectorXd& start, const Eigen::VectorXd& step,
                          const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, int max_evaluations,
                          double tolerance = 1e-12) {
  const Eigen::Index dim = start.size();
  const auto npts = static_cast<std::size_t>(dim + 1);
  SimplexResult best;
  best.point = start.cwiseMax(lower).cwiseMin(upper);

  auto evaluate = [&](Eigen::VectorXd& x) {
    x = x.cwiseMax(lower).cwiseMin(upper);
    double f = objective(static_cast<const Eigen::VectorXd&>(x));
    ++best.evaluations;
    if (!std::isfinite(f)) f = std::numeric_limits<double>::infinity();
    if (f < best.value) {
      best.value = f;
      best.point = x;
    }
    return f;
  };

  // Projection can flatten the simplex against a face of the box, so a
  // converged search restarts around its best point until that stops helping.
  for (;;) {
    const double round_start = best.value;
    std::vector<Eigen::VectorXd> simplex(npts, best.point);
    std::vector<double> values(npts);
    values[0] = best.evaluations == 0 ? evaluate(simplex[0]) : best.value;
    for (Eigen::Index i = 0; i < dim && best.evaluations < max_evaluations; ++i) {
      auto& x = simplex[static_cast<std::size_t>(i) + 1];
      // Step inward when the vertex would leave the box.
      x(i) += (x(i) + step(i) <= upper(i)) ? step(i) : -step(i);
      values[static_cast<std::size_t>(i) + 1] = evaluate(x);
    }
    if (best.evaluations >= max_evaluations) break;

    std::vector<std::size_t> order(npts);
    Eigen::VectorXd centroid(dim);
    while (best.evaluations < max_evaluations) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
      const std::size_t lo = order.front();
      const std::size_t hi = order.back();
      const std::size_t second = order[npts - 2];

      if (std::isfinite(values[hi]) &&
          std::abs(values[hi] - values[lo]) <= tolerance * (1.0 + std::abs(values[lo])))
        break;

      centroid.setZero();
      for (std::size_t k = 0; k < npts; ++k)
        if (k != hi) centroid += simplex[k];
      centroid /= static_cast<double>(dim);

      Eigen::VectorXd reflected = centroid + (centroid - simplex[hi]);
      const double fr = evaluate(reflected);
      if (fr < values[lo]) {
        if (best.evaluations >= max_evaluations) break;
        Eigen::VectorXd expanded = centroid + 2.0 * (centroid - simplex[hi]);
        const double fe = evaluate(expanded);
        if (fe < fr) {
          simplex[hi] = std::move(expanded);
          values[hi] = fe;
        } else {
          simplex[hi] = std::move(reflected);
          values[hi] = fr;
        }
        continue;
      }
      if (fr < values[second]) {
        simplex[hi] = std::move(reflected);
        values[hi] = fr;
        continue;
      }
      if (best.evaluations >= max_evaluations) break;
      const bool outside = fr < values[hi];
      Eigen::VectorXd contracted =
          outside ? Eigen::VectorXd(centroid + 0.5 * (reflected - centroid))
                  : Eigen::VectorXd(centroid + 0.5 * (simplex[hi] - centroid));
      const double fc = evaluate(contracted);
      if (fc < std::min(fr, values[hi])) {
        simplex[hi] = std::move(contracted);
        values[hi] = fc;
        continue;
      }
      // Shrink toward the best vertex.
      for (std::size_t k = 0; k < npts && best.evaluations < max_evaluations; ++k) {
        if (k == lo) continue;
        simplex[k] = simplex[lo] + 0.5 * (simplex[k] - simplex[lo]);
        values[k] = evaluate(simplex[k]);
      }
    }
    if (best.evaluations >= max_evaluations) break;
    if (std::isfinite(round_start) && !(best.value < round_start - tolerance * (1.0 + std::abs(round_start)))) break;
  }
  return best;
}

}  // namespace adtest
