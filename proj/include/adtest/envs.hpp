#pragma once

// Trajectories, predicate functionals over them, and the built-in closed-loop
// simulators. Every simulator is a pure function of the environment vector.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "adtest/acquisition.hpp"
#include "adtest/errors.hpp"

namespace adtest {

struct Trajectory {
  std::vector<double> time;
  std::map<std::string, std::vector<double>> channels;

  std::size_t length() const { return time.size(); }

  const std::vector<double>& channel(const std::string& name) const {
    auto it = channels.find(name);
    if (it == channels.end()) throw std::invalid_argument("trajectory has no channel '" + name + "'");
    return it->second;
  }

  void validate() const {
    if (time.empty()) throw std::invalid_argument("trajectory has no samples");
    for (std::size_t k = 0; k < time.size(); ++k) {
      if (!std::isfinite(time[k])) throw std::invalid_argument("trajectory timestamps must be finite");
      if (k > 0 && !(time[k] > time[k - 1]))
        throw std::invalid_argument("trajectory timestamps must be strictly increasing");
    }
    for (const auto& [name, values] : channels) {
      if (values.size() != time.size())
        throw std::invalid_argument("channel '" + name + "' length differs from the timestamps");
      for (double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument("channel '" + name + "' has a non-finite value");
    }
  }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

// offset + scale * c(t), with c(t) optionally replaced by |c(t)|.
struct ChannelExpr {
  std::string channel;
  double scale = 1.0;
  double offset = 0.0;
  bool absolute = false;

  double at(const std::vector<double>& values, std::size_t k) const {
    const double c = absolute ? std::abs(values[k]) : values[k];
    return offset + scale * c;
  }
};

struct Functional {
  enum class Kind {
    min_over_time,
    max_over_time,
    terminal,
    // (T - t_hit) / T where t_hit is the first time expr >= threshold and T
    // the deadline. When never reached, t_hit is the end of the trajectory
    // and shortfall_weight * (threshold - max expr) is subtracted.
    time_to_threshold,
    // offset + scale * sum_k |c(k+1) - c(k)|
    total_variation,
    // Value reported directly by an external simulator under the predicate name.
    reported,
  };

  Kind kind = Kind::min_over_time;
  ChannelExpr expr;
  double threshold = 0.0;
  double horizon = 0.0;  // deadline T; 0 means the trajectory's own time span
  double shortfall_weight = 0.0;
};

struct PredicateBinding {
  std::string name;
  Functional functional;
};

// What one simulator call produces: a trajectory, directly reported
// predicate values, or both.
struct Outcome {
  std::optional<Trajectory> trajectory;
  std::map<std::string, double> reported;
};

inline double eval_predicate(const PredicateBinding& binding, const Trajectory& traj) {
  const Functional& f = binding.functional;
  if (f.kind == Functional::Kind::reported)
    throw std::invalid_argument("predicate '" + binding.name + "' expects a reported value, not a trajectory");
  const auto& values = traj.channel(f.expr.channel);
  const std::size_t n = values.size();
  if (n == 0) throw std::invalid_argument("empty trajectory");

  switch (f.kind) {
    case Functional::Kind::min_over_time: {
      double v = f.expr.at(values, 0);
      for (std::size_t k = 1; k < n; ++k) v = std::min(v, f.expr.at(values, k));
      return v;
    }
    case Functional::Kind::max_over_time: {
      double v = f.expr.at(values, 0);
      for (std::size_t k = 1; k < n; ++k) v = std::max(v, f.expr.at(values, k));
      return v;
    }
    case Functional::Kind::terminal:
      return f.expr.at(values, n - 1);
    case Functional::Kind::time_to_threshold: {
      const double span = f.horizon > 0.0 ? f.horizon : traj.time.back() - traj.time.front();
      if (!(span > 0.0)) throw std::invalid_argument("time-to-threshold needs a positive horizon");
      double peak = f.expr.at(values, 0);
      for (std::size_t k = 0; k < n; ++k) {
        const double e = f.expr.at(values, k);
        if (e >= f.threshold) return (span - (traj.time[k] - traj.time.front())) / span;
        peak = std::max(peak, e);
      }
      const double elapsed = traj.time.back() - traj.time.front();
      return (span - elapsed) / span - f.shortfall_weight * (f.threshold - peak);
    }
    case Functional::Kind::total_variation: {
      const auto& c = values;
      double total = 0.0;
      for (std::size_t k = 1; k < n; ++k) {
        const double a = f.expr.absolute ? std::abs(c[k]) : c[k];
        const double b = f.expr.absolute ? std::abs(c[k - 1]) : c[k - 1];
        total += std::abs(a - b);
      }
      return f.expr.offset + f.expr.scale * total;
    }
    case Functional::Kind::reported: break;
  }
  throw std::invalid_argument("unknown functional");
}

/// Evaluates a binding on whatever the simulator produced.
inline double eval_predicate(const PredicateBinding& binding, const Outcome& outcome) {
  if (binding.functional.kind == Functional::Kind::reported) {
    auto it = outcome.reported.find(binding.name);
    if (it == outcome.reported.end())
      throw std::invalid_argument("simulator did not report predicate '" + binding.name + "'");
    return it->second;
  }
  if (!outcome.trajectory) throw std::invalid_argument("predicate '" + binding.name + "' needs a trajectory");
  return eval_predicate(binding, *outcome.trajectory);
}

// ---------------------------------------------------------------------------
// Built-in simulators

struct CarParams {
  double x_init = 0.0;
  double v_init = 3.0;
  double x_obstacle = 5.0;
  double dt = 0.1;
  int steps = 100;
  // a = position_gain * (x - x_s) + velocity_gain * v, clipped.
  double position_gain = -1.0;
  double velocity_gain = -2.5;
  double accel_min = -3.0;
  double accel_max = 3.0;
};

/// Double integrator under linear feedback on noisy obstacle readings, one
/// reading per step; forward Euler. Channels: x, v, a, xs.
inline Trajectory simulate_car(const Eigen::VectorXd& sensor, const CarParams& p = {}) {
  if (sensor.size() != p.steps)
    throw std::invalid_argument("car expects " + std::to_string(p.steps) + " sensor readings, got " +
                                std::to_string(sensor.size()));
  const auto n = static_cast<std::size_t>(p.steps) + 1;
  Trajectory traj;
  traj.time.resize(n);
  std::vector<double> x(n), v(n), a(n), xs(n);
  x[0] = p.x_init;
  v[0] = p.v_init;
  auto control = [&](double pos, double vel, double reading) {
    return std::clamp(p.position_gain * (pos - reading) + p.velocity_gain * vel, p.accel_min, p.accel_max);
  };
  for (std::size_t k = 0; k < n; ++k) {
    traj.time[k] = static_cast<double>(k) * p.dt;
    // The final sample reuses the last reading.
    xs[k] = sensor(static_cast<Eigen::Index>(std::min(k, n - 2)));
    a[k] = control(x[k], v[k], xs[k]);
    if (k + 1 < n) {
      x[k + 1] = x[k] + p.dt * v[k];
      v[k + 1] = v[k] + p.dt * a[k];
    }
  }
  traj.channels = {{"x", std::move(x)}, {"v", std::move(v)}, {"a", std::move(a)}, {"xs", std::move(xs)}};
  return traj;
}

inline Domain car_domain(const CarParams& p = {}) { return Domain::cube(p.steps, 4.5, 5.5); }

struct MountainCarParams {
  int horizon = 500;
  double gravity = 0.0025;
  double x_min = -1.2;
  double x_max = 0.6;
};

/// (x_init, v_init, x_goal, v_max, p_max)
inline Domain mountain_car_domain() {
  Eigen::VectorXd lo(5), hi(5);
  lo << -0.6, -0.025, 0.4, 0.55, 0.0005;
  hi << -0.4, 0.025, 0.6, 0.75, 0.0025;
  return Domain(lo, hi);
}

/// Hill-climbing car driven by the energy-pumping policy a = sign(v)
/// (a = +1 at rest). Runs until x >= x_goal or the horizon is exhausted.
/// Channels: x, v, a, dx = x - x_init, g = x - x_goal. Time is the step index.
inline Trajectory simulate_mountain_car(const Eigen::VectorXd& w, const MountainCarParams& p = {}) {
  const Domain box = mountain_car_domain();
  if (w.size() != 5) throw std::invalid_argument("mountain car expects 5 parameters");
  if (!box.contains(w)) throw std::invalid_argument("mountain car parameters outside their admissible box");
  const double x_init = w(0), v_init = w(1), x_goal = w(2), v_max = w(3), p_max = w(4);

  Trajectory traj;
  std::vector<double> xs, vs, as;
  double x = x_init;
  double v = v_init;
  for (int k = 0;; ++k) {
    const double a = v >= 0.0 ? 1.0 : -1.0;
    traj.time.push_back(static_cast<double>(k));
    xs.push_back(x);
    vs.push_back(v);
    as.push_back(a);
    if (x >= x_goal || k == p.horizon) break;
    v = std::clamp(v + p_max * a - p.gravity * std::cos(3.0 * x), -v_max, v_max);
    x = std::clamp(x + v, p.x_min, p.x_max);
    if (x <= p.x_min && v < 0.0) v = 0.0;
  }
  std::vector<double> dx(xs.size()), g(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    dx[k] = xs[k] - x_init;
    g[k] = xs[k] - x_goal;
  }
  traj.channels = {{"x", std::move(xs)}, {"v", std::move(vs)}, {"a", std::move(as)},
                   {"dx", std::move(dx)}, {"g", std::move(g)}};
  return traj;
}

/// Single-sample trajectory exposing w, sin(w) and cos(w) for a scalar w.
inline Trajectory simulate_sincos(const Eigen::VectorXd& w) {
  if (w.size() != 1) throw std::invalid_argument("sin/cos environment is one-dimensional");
  Trajectory traj;
  traj.time = {0.0};
  traj.channels = {{"w", {w(0)}}, {"sin", {std::sin(w(0))}}, {"cos", {std::cos(w(0))}}};
  return traj;
}

inline Domain sincos_domain() { return Domain::cube(1, 0.0, 10.0); }

// A simulator the engine can query. Built-in environments are stateless; an
// external one owns a child process and is therefore not const.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual Outcome simulate(const Eigen::VectorXd& w) = 0;
};

// Wraps a pure trajectory-producing function.
class TrajectoryEnvironment final : public Environment {
 public:
  using Simulator = std::function<Trajectory(const Eigen::VectorXd&)>;

  explicit TrajectoryEnvironment(Simulator simulator) : simulator_(std::move(simulator)) {}

  Outcome simulate(const Eigen::VectorXd& w) override { return {simulator_(w), {}}; }

 private:
  Simulator simulator_;
};

}  // namespace adtest
