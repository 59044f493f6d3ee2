#pragma once

// Run configuration files: JSON with a strict schema (unknown keys are
// rejected at every level). See configs/ for complete examples.

#include <cstdint>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "adtest/acquisition.hpp"
#include "adtest/engine.hpp"
#include "adtest/envs.hpp"
#include "adtest/errors.hpp"
#include "adtest/external.hpp"
#include "adtest/speclang.hpp"
#include "json.hpp"

namespace adtest {

struct EnvSpec {
  std::string kind;  // synthetic-sincos, car-collision, mountain-car, external
  CarParams car;
  MountainCarParams mountain_car;
  std::vector<std::string> command;
  double timeout_s = 60.0;
  Domain domain;
};

struct KnownMinimizer {
  std::vector<double> w;
  double radius = 0.1;
};

struct BenchSettings {
  int repeats = 10;
  std::vector<std::string> methods{"multi-gp", "random"};
  std::optional<KnownMinimizer> known_minimizer;
};

struct RunSettings {
  nlohmann::json raw;
  EnvSpec env;
  std::string specification;
  std::vector<PredicateBinding> bindings;
  RunConfig run;
  std::string method_token = "multi-gp";  // method, optionally suffixed "+embed"
  std::optional<int> embedding_dim;       // used by "+embed" methods
  std::optional<BetaSchedule> verify_beta;
  std::optional<double> epsilon;
  BenchSettings bench;
  std::string report_path = "adtest-report.json";
  std::string bench_dir = "adtest-bench";
};

namespace config_detail {

using nlohmann::json;

inline void check_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items())
    if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
T get(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError(where + ": missing required key '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  return obj.contains(key) ? get<T>(obj, key, where) : fallback;
}

// A bound may be a list or a scalar broadcast to `dim` entries.
inline Eigen::VectorXd bound(const json& v, std::optional<int> dim, const std::string& where) {
  if (v.is_number()) {
    if (!dim) throw ConfigError(where + ": scalar bounds need 'dim'");
    return Eigen::VectorXd::Constant(*dim, v.get<double>());
  }
  if (!v.is_array()) throw ConfigError(where + ": expected a number or a list of numbers");
  const auto values = v.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

inline Functional::Kind functional_kind(const std::string& s, const std::string& where) {
  if (s == "min-over-time") return Functional::Kind::min_over_time;
  if (s == "max-over-time") return Functional::Kind::max_over_time;
  if (s == "terminal") return Functional::Kind::terminal;
  if (s == "time-to-threshold") return Functional::Kind::time_to_threshold;
  if (s == "total-variation") return Functional::Kind::total_variation;
  if (s == "reported") return Functional::Kind::reported;
  throw ConfigError(where + ": unknown functional '" + s + "'");
}

inline BetaSchedule beta(const json& j, const std::string& where) {
  const auto mode = get<std::string>(j, "mode", where);
  if (mode == "fixed") {
    check_keys(j, {"mode", "beta_sqrt"}, where);
    return FixedBeta{get_or<double>(j, "beta_sqrt", 3.0, where)};
  }
  if (mode == "theoretical") {
    check_keys(j, {"mode", "rkhs_bounds", "sigma", "delta"}, where);
    TheoreticalBeta t;
    t.rkhs_bounds = get<std::vector<double>>(j, "rkhs_bounds", where);
    t.sigma = get<double>(j, "sigma", where);
    t.delta = get_or<double>(j, "delta", 0.05, where);
    return t;
  }
  throw ConfigError(where + ".mode: expected 'fixed' or 'theoretical'");
}

inline GpHyperparameters hyper(const json& j, const GpHyperparameters& base, const std::string& where) {
  GpHyperparameters hp = base;
  hp.signal_variance = get_or<double>(j, "signal_variance", hp.signal_variance, where);
  hp.noise_variance = get_or<double>(j, "noise_variance", hp.noise_variance, where);
  if (j.contains("lengthscales")) {
    const auto& l = j["lengthscales"];
    hp.lengthscales = l.is_number() ? std::vector<double>{l.get<double>()} : get<std::vector<double>>(j, "lengthscales", where);
  }
  if (!(hp.signal_variance > 0.0)) throw ConfigError(where + ".signal_variance must be positive");
  if (!(hp.noise_variance > 0.0)) throw ConfigError(where + ".noise_variance must be positive");
  for (double l : hp.lengthscales)
    if (!(l > 0.0)) throw ConfigError(where + ".lengthscales must be positive");
  return hp;
}

inline EnvSpec environment(const json& j) {
  const std::string where = "environment";
  check_keys(j, {"kind", "params", "domain"}, where);
  EnvSpec env;
  env.kind = get<std::string>(j, "kind", where);
  const json params = j.value("params", json::object());
  const std::string pw = where + ".params";
  std::optional<Domain> fallback;
  if (env.kind == "synthetic-sincos") {
    check_keys(params, {}, pw);
    fallback = sincos_domain();
  } else if (env.kind == "car-collision") {
    check_keys(params, {"x_init", "v_init", "x_obstacle", "dt", "steps", "position_gain", "velocity_gain",
                        "accel_min", "accel_max"},
               pw);
    auto& c = env.car;
    c.x_init = get_or(params, "x_init", c.x_init, pw);
    c.v_init = get_or(params, "v_init", c.v_init, pw);
    c.x_obstacle = get_or(params, "x_obstacle", c.x_obstacle, pw);
    c.dt = get_or(params, "dt", c.dt, pw);
    c.steps = get_or(params, "steps", c.steps, pw);
    c.position_gain = get_or(params, "position_gain", c.position_gain, pw);
    c.velocity_gain = get_or(params, "velocity_gain", c.velocity_gain, pw);
    c.accel_min = get_or(params, "accel_min", c.accel_min, pw);
    c.accel_max = get_or(params, "accel_max", c.accel_max, pw);
    if (c.steps < 1 || !(c.dt > 0.0)) throw ConfigError(pw + ": steps and dt must be positive");
    fallback = car_domain(c);
  } else if (env.kind == "mountain-car") {
    check_keys(params, {"horizon", "gravity"}, pw);
    env.mountain_car.horizon = get_or(params, "horizon", env.mountain_car.horizon, pw);
    env.mountain_car.gravity = get_or(params, "gravity", env.mountain_car.gravity, pw);
    if (env.mountain_car.horizon < 1) throw ConfigError(pw + ".horizon must be >= 1");
    fallback = mountain_car_domain();
  } else if (env.kind == "external") {
    check_keys(params, {"command", "timeout_s"}, pw);
    env.command = get<std::vector<std::string>>(params, "command", pw);
    env.timeout_s = get_or(params, "timeout_s", env.timeout_s, pw);
    if (env.command.empty()) throw ConfigError(pw + ".command must not be empty");
    if (!(env.timeout_s > 0.0)) throw ConfigError(pw + ".timeout_s must be positive");
  } else {
    throw ConfigError(where + ".kind: unknown environment '" + env.kind + "'");
  }

  if (j.contains("domain")) {
    const auto& d = j["domain"];
    const std::string dw = where + ".domain";
    check_keys(d, {"lower", "upper", "dim"}, dw);
    std::optional<int> dim;
    if (d.contains("dim")) dim = get<int>(d, "dim", dw);
    try {
      env.domain = Domain(bound(d.at("lower"), dim, dw + ".lower"), bound(d.at("upper"), dim, dw + ".upper"));
    } catch (const json::exception& e) {
      throw ConfigError(dw + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(dw + ": " + e.what());
    }
  } else if (fallback) {
    env.domain = *fallback;
  } else {
    throw ConfigError(where + ": external environments need an explicit domain");
  }
  return env;
}

inline PredicateBinding binding(const std::string& name, const json& j) {
  const std::string where = "predicates." + name;
  check_keys(j, {"functional", "channel", "scale", "offset", "absolute", "threshold", "horizon", "shortfall_weight"},
             where);
  PredicateBinding b;
  b.name = name;
  auto& f = b.functional;
  f.kind = functional_kind(get<std::string>(j, "functional", where), where);
  if (f.kind != Functional::Kind::reported) f.expr.channel = get<std::string>(j, "channel", where);
  f.expr.scale = get_or(j, "scale", f.expr.scale, where);
  f.expr.offset = get_or(j, "offset", f.expr.offset, where);
  f.expr.absolute = get_or(j, "absolute", f.expr.absolute, where);
  f.threshold = get_or(j, "threshold", f.threshold, where);
  f.horizon = get_or(j, "horizon", f.horizon, where);
  f.shortfall_weight = get_or(j, "shortfall_weight", f.shortfall_weight, where);
  return b;
}

}  // namespace config_detail

/// Splits "multi-gp+embed" into the method and whether the embedding is used.
inline std::pair<Method, bool> parse_method_token(const std::string& token) {
  const std::string suffix = "+embed";
  const bool embed = token.size() > suffix.size() && token.ends_with(suffix);
  const std::string base = embed ? token.substr(0, token.size() - suffix.size()) : token;
  try {
    const Method m = parse_method(base);
    if (embed && m == Method::random) throw ConfigError("random sampling has no embedding variant");
    return {m, embed};
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

/// Applies a method token to the run configuration.
inline void apply_method(RunSettings& s, const std::string& token) {
  const auto [method, embed] = parse_method_token(token);
  if (embed && !s.embedding_dim) throw ConfigError("method '" + token + "' needs 'embedding.dim' in the config");
  s.method_token = token;
  s.run.method = method;
  s.run.embedding_dim = embed ? s.embedding_dim : std::nullopt;
}

inline RunSettings parse_config(const nlohmann::json& j) {
  using namespace config_detail;
  check_keys(j, {"environment", "specification", "predicates", "gp", "beta", "delta", "optimizer", "embedding",
                 "method", "budget", "init_samples", "seed", "epsilon", "verify", "bench", "output"},
             "config");
  RunSettings s;
  s.raw = j;
  s.env = environment(get<json>(j, "environment", "config"));
  s.specification = get<std::string>(j, "specification", "config");
  const json predicates = get<json>(j, "predicates", "config");
  if (!predicates.is_object()) throw ConfigError("predicates: expected an object");
  for (const auto& [name, b] : predicates.items()) s.bindings.push_back(binding(name, b));

  auto& run = s.run;
  if (j.contains("gp")) {
    const auto& g = j["gp"];
    check_keys(g, {"signal_variance", "lengthscales", "noise_variance", "per_predicate"}, "gp");
    run.gp = hyper(g, run.gp, "gp");
    if (g.contains("per_predicate")) {
      for (const auto& [name, h] : g["per_predicate"].items()) {
        check_keys(h, {"signal_variance", "lengthscales", "noise_variance"}, "gp.per_predicate." + name);
        run.predicate_gp[name] = hyper(h, run.gp, "gp.per_predicate." + name);
      }
    }
  }
  if (j.contains("beta")) run.beta = beta(j["beta"], "beta");
  run.delta = get_or(j, "delta", run.delta, "config");
  if (j.contains("optimizer")) {
    const auto& o = j["optimizer"];
    check_keys(o, {"restarts", "refine_fraction", "local_budget", "simplex_scale"}, "optimizer");
    run.optimizer.restarts = get_or(o, "restarts", run.optimizer.restarts, "optimizer");
    run.optimizer.refine_fraction = get_or(o, "refine_fraction", run.optimizer.refine_fraction, "optimizer");
    run.optimizer.local_budget = get_or(o, "local_budget", run.optimizer.local_budget, "optimizer");
    run.optimizer.simplex_scale = get_or(o, "simplex_scale", run.optimizer.simplex_scale, "optimizer");
  }
  if (j.contains("embedding")) {
    check_keys(j["embedding"], {"dim"}, "embedding");
    s.embedding_dim = get<int>(j["embedding"], "dim", "embedding");
    if (*s.embedding_dim < 1) throw ConfigError("embedding.dim must be >= 1");
  }
  run.budget = get_or(j, "budget", run.budget, "config");
  run.init_samples = get_or(j, "init_samples", run.init_samples, "config");
  run.seed = get_or<std::uint64_t>(j, "seed", run.seed, "config");
  if (j.contains("epsilon")) s.epsilon = get<double>(j, "epsilon", "config");
  if (j.contains("verify")) {
    check_keys(j["verify"], {"beta"}, "verify");
    if (j["verify"].contains("beta")) s.verify_beta = beta(j["verify"]["beta"], "verify.beta");
  }
  if (j.contains("bench")) {
    const auto& b = j["bench"];
    check_keys(b, {"repeats", "methods", "known_minimizer"}, "bench");
    s.bench.repeats = get_or(b, "repeats", s.bench.repeats, "bench");
    s.bench.methods = get_or(b, "methods", s.bench.methods, "bench");
    if (b.contains("known_minimizer")) {
      const auto& k = b["known_minimizer"];
      check_keys(k, {"w", "radius"}, "bench.known_minimizer");
      s.bench.known_minimizer = KnownMinimizer{get<std::vector<double>>(k, "w", "bench.known_minimizer"),
                                               get_or(k, "radius", 0.1, "bench.known_minimizer")};
    }
  }
  if (j.contains("output")) {
    check_keys(j["output"], {"report", "bench_dir"}, "output");
    s.report_path = get_or(j["output"], "report", s.report_path, "output");
    s.bench_dir = get_or(j["output"], "bench_dir", s.bench_dir, "output");
  }
  apply_method(s, get_or<std::string>(j, "method", "multi-gp", "config"));
  try {
    run.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return s;
}

inline RunSettings load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_config(j);
}

/// Compiles the specification and orders the bindings by its predicates.
inline Problem make_problem(const RunSettings& s) {
  ParseTree tree = compile_spec(s.specification);
  try {
    return Problem::bind(std::move(tree), s.bindings, s.env.domain);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

inline std::unique_ptr<Environment> make_environment(const EnvSpec& env) {
  if (env.kind == "synthetic-sincos") return std::make_unique<TrajectoryEnvironment>(simulate_sincos);
  if (env.kind == "car-collision") {
    return std::make_unique<TrajectoryEnvironment>(
        [p = env.car](const Eigen::VectorXd& w) { return simulate_car(w, p); });
  }
  if (env.kind == "mountain-car") {
    return std::make_unique<TrajectoryEnvironment>(
        [p = env.mountain_car](const Eigen::VectorXd& w) { return simulate_mountain_car(w, p); });
  }
  if (env.kind == "external") {
    auto sim = std::make_unique<ExternalSimulator>(
        env.command, std::chrono::milliseconds(static_cast<long>(env.timeout_s * 1000.0)));
    if (sim->handshake().dim != env.domain.dim())
      throw ConfigError("external simulator declared dimension " + std::to_string(sim->handshake().dim) +
                        " but the domain has " + std::to_string(env.domain.dim()));
    return sim;
  }
  throw ConfigError("unknown environment '" + env.kind + "'");
}

}  // namespace adtest
