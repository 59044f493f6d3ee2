#pragma once

// Command implementations behind the adtest executable. Each returns the
// process exit code and writes human-readable output to the given streams.
//
//   falsify: 0 counterexample found, 1 none found, 2 error
//   verify:  0 verified or falsified (see the report's "falsified" flag),
//            1 budget exhausted without a verdict, 2 error
//   bench:   0 completed, 2 error (partial results are still written)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "adtest/config.hpp"
#include "adtest/engine.hpp"
#include "adtest/report.hpp"
#include "adtest/speclang.hpp"
#include "json.hpp"

namespace adtest {

struct FalsifyOptions {
  std::optional<int> budget;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::optional<std::string> out;
  std::function<void(const HistoryRow&)> progress;
};

struct VerifyOptions {
  std::optional<double> delta;
  std::optional<int> budget;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::function<void(const HistoryRow&)> progress;
};

struct BenchOptions {
  std::optional<int> repeats;
  std::optional<std::vector<std::string>> methods;
  std::optional<std::string> out_dir;
};

namespace cmd_detail {

inline nlohmann::json config_echo(const RunSettings& s) {
  nlohmann::json echo = s.raw;
  echo["method"] = s.method_token;
  echo["budget"] = s.run.budget;
  echo["seed"] = s.run.seed;
  echo["delta"] = s.run.delta;
  return echo;
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw Error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw Error("failed writing '" + path + "'");
}

inline void write_report(const std::string& path, const RunSettings& s, const RunResult& result) {
  std::optional<Diagnostics> diagnostics;
  if (result.method != Method::random && std::any_of(result.history.begin(), result.history.end(),
                                                       [](const auto& r) { return r.beta_sqrt.has_value(); }))
    diagnostics = convergence_diagnostics(result, s.run.gp.noise_variance, s.epsilon);
  const auto report = make_report(result, config_echo(s), diagnostics);
  validate_report(report);
  write_json(path, report);
}

inline double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline RunResult execute(const RunSettings& s) {
  const Problem problem = make_problem(s);
  auto env = make_environment(s.env);
  return run(problem, *env, s.run);
}

}  // namespace cmd_detail

/// First active iteration from which every proposed sample stays within
/// `radius` of the known minimizer until the end of the run. Initialization
/// samples are ignored; random runs have no proposals and never converge.
inline std::optional<int> convergence_iteration(const RunResult& result, const KnownMinimizer& target) {
  const Eigen::Map<const Eigen::VectorXd> star(target.w.data(), static_cast<Eigen::Index>(target.w.size()));
  std::optional<int> first;
  for (const auto& row : result.history) {
    if (row.phase != "bo") continue;
    const bool inside = row.w.size() == star.size() && (row.w - star).norm() <= target.radius;
    if (!inside) {
      first.reset();
    } else if (!first) {
      first = row.iteration;
    }
  }
  return first;
}

inline int cmd_falsify(const std::string& config_path, const FalsifyOptions& opts, std::ostream& out,
                       std::ostream& err) {
  try {
    RunSettings s = load_config(config_path);
    if (opts.budget) s.run.budget = *opts.budget;
    if (opts.seed) s.run.seed = *opts.seed;
    if (opts.method) apply_method(s, *opts.method);
    s.run.progress = opts.progress;
    try {
      s.run.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    const auto start = std::chrono::steady_clock::now();
    const RunResult result = cmd_detail::execute(s);
    const std::string path = opts.out.value_or(s.report_path);
    cmd_detail::write_report(path, s, result);
    const bool found = result.worst().phi <= 0.0;
    out << (found ? "COUNTEREXAMPLE" : "no counterexample") << ": worst phi=" << std::setprecision(6)
        << result.worst().phi << " counterexamples=" << result.counterexamples
        << " evaluations=" << result.history.size() << " wall=" << std::fixed << std::setprecision(2)
        << cmd_detail::seconds_since(start) << "s report=" << path << '\n';
    return found ? 0 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

inline int cmd_verify(const std::string& config_path, const VerifyOptions& opts, std::ostream& out,
                      std::ostream& err) {
  try {
    RunSettings s = load_config(config_path);
    if (opts.delta) {
      if (!(*opts.delta > 0.0 && *opts.delta < 1.0)) throw ConfigError("--delta must lie in (0, 1)");
      s.run.delta = *opts.delta;
    }
    if (opts.budget) s.run.budget = *opts.budget;
    if (opts.seed) s.run.seed = *opts.seed;
    if (s.run.method == Method::random) throw ConfigError("verification needs a GP method, not random");
    if (s.verify_beta) s.run.beta = *s.verify_beta;
    if (auto* t = std::get_if<TheoreticalBeta>(&s.run.beta)) t->delta = s.run.delta;
    s.run.stop_on_verified = true;
    s.run.stop_on_counterexample = true;
    s.run.progress = opts.progress;
    try {
      s.run.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    const auto start = std::chrono::steady_clock::now();
    const RunResult result = cmd_detail::execute(s);
    const std::string path = opts.out.value_or(s.report_path);
    cmd_detail::write_report(path, s, result);

    const bool falsified = result.worst().phi <= 0.0;
    const bool verified = !falsified && result.certificate && result.certificate->verified;
    out << std::setprecision(6);
    if (falsified) {
      out << "COUNTEREXAMPLE: phi=" << result.worst().phi;
    } else if (verified) {
      out << "VERIFIED with probability >= " << 1.0 - s.run.delta
          << " (acquisition minimum=" << result.certificate->acquisition_minimum
          << ", beta^1/2=" << result.certificate->beta_sqrt << ", heuristic global optimum)";
    } else {
      out << "UNDECIDED: worst phi=" << result.worst().phi;
    }
    out << " evaluations=" << result.history.size() << " wall=" << std::fixed << std::setprecision(2)
        << cmd_detail::seconds_since(start) << "s report=" << path << '\n';
    return (falsified || verified) ? 0 : 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
}

struct BenchRecord {
  std::string method;
  int repeat = 0;
  std::uint64_t seed = 0;
  int counterexamples = 0;
  double worst_phi = 0.0;
  std::vector<double> worst_w;
  std::optional<int> convergence;
  std::size_t evaluations = 0;
};

struct BenchAggregate {
  std::string method;
  int runs = 0;
  double count_mean = 0.0, count_stddev = 0.0;
  double worst_mean = 0.0, worst_stddev = 0.0;
  std::optional<double> convergence_median;  // over runs that converged
  int not_converged = 0;
};

inline std::pair<double, double> mean_stddev(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

/// Median over converged runs; runs that never converged count as +infinity.
inline std::optional<double> median_with_failures(std::vector<std::optional<int>> values) {
  if (values.empty()) return std::nullopt;
  std::vector<double> v;
  for (const auto& x : values) v.push_back(x ? *x : std::numeric_limits<double>::infinity());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const double m = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  if (!std::isfinite(m)) return std::nullopt;
  return m;
}

inline std::vector<BenchAggregate> aggregate(const std::vector<BenchRecord>& records,
                                             const std::vector<std::string>& methods, bool with_convergence) {
  std::vector<BenchAggregate> out;
  for (const auto& m : methods) {
    BenchAggregate a;
    a.method = m;
    std::vector<double> counts, worsts;
    std::vector<std::optional<int>> conv;
    for (const auto& r : records) {
      if (r.method != m) continue;
      ++a.runs;
      counts.push_back(r.counterexamples);
      worsts.push_back(r.worst_phi);
      conv.push_back(r.convergence);
      if (!r.convergence) ++a.not_converged;
    }
    std::tie(a.count_mean, a.count_stddev) = mean_stddev(counts);
    std::tie(a.worst_mean, a.worst_stddev) = mean_stddev(worsts);
    if (with_convergence) {
      a.convergence_median = median_with_failures(conv);
    } else {
      a.not_converged = 0;
    }
    out.push_back(a);
  }
  return out;
}

inline nlohmann::json bench_json(const std::vector<BenchRecord>& records, const std::vector<BenchAggregate>& aggs,
                                 const nlohmann::json& echo, bool with_convergence,
                                 const std::optional<std::string>& error) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : records) {
    runs.push_back({{"method", r.method},
                    {"repeat", r.repeat},
                    {"seed", r.seed},
                    {"counterexamples", r.counterexamples},
                    {"worst_phi", r.worst_phi},
                    {"worst_w", r.worst_w},
                    {"convergence_iteration", with_convergence && r.convergence ? nlohmann::json(*r.convergence)
                                                                                : nlohmann::json(nullptr)},
                    {"evaluations", r.evaluations}});
  }
  nlohmann::json table = nlohmann::json::array();
  for (const auto& a : aggs) {
    nlohmann::json row = {{"method", a.method},
                          {"runs", a.runs},
                          {"counterexamples_mean", a.count_mean},
                          {"counterexamples_stddev", a.count_stddev},
                          {"worst_phi_mean", a.worst_mean},
                          {"worst_phi_stddev", a.worst_stddev}};
    if (with_convergence) {
      row["convergence_median"] =
          a.convergence_median ? nlohmann::json(*a.convergence_median) : nlohmann::json(nullptr);
      row["not_converged"] = a.not_converged;
    }
    table.push_back(std::move(row));
  }
  nlohmann::json j = {{"schema", "adtest-bench/1"}, {"config", echo}, {"aggregates", table}, {"runs", runs}};
  if (error) j["error"] = *error;
  return j;
}

inline std::string bench_table(const std::vector<BenchAggregate>& aggs, bool with_convergence) {
  std::ostringstream t;
  t << std::left << std::setw(20) << "method" << std::right << std::setw(6) << "runs" << std::setw(14) << "cex mean"
    << std::setw(12) << "cex std" << std::setw(14) << "worst mean" << std::setw(12) << "worst std";
  if (with_convergence) t << std::setw(12) << "conv med" << std::setw(10) << "no conv";
  t << '\n';
  for (const auto& a : aggs) {
    t << std::left << std::setw(20) << a.method << std::right << std::setw(6) << a.runs << std::fixed
      << std::setprecision(2) << std::setw(14) << a.count_mean << std::setw(12) << a.count_stddev
      << std::setprecision(4) << std::setw(14) << a.worst_mean << std::setw(12) << a.worst_stddev;
    if (with_convergence) {
      t << std::setprecision(1) << std::setw(12)
        << (a.convergence_median ? std::to_string(*a.convergence_median).substr(0, 5) : std::string("-"))
        << std::setw(10) << a.not_converged;
    }
    t << '\n';
  }
  return t.str();
}

struct BenchOutcome {
  std::vector<BenchRecord> records;
  std::vector<BenchAggregate> aggregates;
};

/// Runs every method `repeats` times with seeds seed+0 .. seed+repeats-1.
inline BenchOutcome run_bench(const RunSettings& base, const std::vector<std::string>& methods, int repeats,
                              const std::function<void(const BenchRecord&)>& on_record = {}) {
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (methods.empty()) throw ConfigError("bench needs at least one method");
  const Problem problem = make_problem(base);
  BenchOutcome outcome;
  for (const auto& token : methods) {
    RunSettings s = base;
    apply_method(s, token);
    auto env = make_environment(s.env);
    for (int r = 0; r < repeats; ++r) {
      s.run.seed = base.run.seed + static_cast<std::uint64_t>(r);
      const RunResult result = run(problem, *env, s.run);
      BenchRecord rec;
      rec.method = token;
      rec.repeat = r;
      rec.seed = s.run.seed;
      rec.counterexamples = result.counterexamples;
      rec.worst_phi = result.worst().phi;
      rec.worst_w.assign(result.worst().w.data(), result.worst().w.data() + result.worst().w.size());
      if (base.bench.known_minimizer) rec.convergence = convergence_iteration(result, *base.bench.known_minimizer);
      rec.evaluations = result.history.size();
      outcome.records.push_back(rec);
      if (on_record) on_record(rec);
    }
  }
  outcome.aggregates = aggregate(outcome.records, methods, base.bench.known_minimizer.has_value());
  return outcome;
}

inline int cmd_bench(const std::string& config_path, const BenchOptions& opts, std::ostream& out, std::ostream& err) {
  std::optional<RunSettings> settings;
  std::vector<BenchRecord> partial;
  std::string dir;
  std::vector<std::string> methods;
  try {
    settings = load_config(config_path);
    const int repeats = opts.repeats.value_or(settings->bench.repeats);
    methods = opts.methods.value_or(settings->bench.methods);
    dir = opts.out_dir.value_or(settings->bench_dir);
    if (repeats < 1) throw ConfigError("--repeats must be >= 1");
    for (const auto& m : methods) {
      RunSettings probe = *settings;
      apply_method(probe, m);
    }
    const bool conv = settings->bench.known_minimizer.has_value();
    const auto result = run_bench(*settings, methods, repeats, [&](const BenchRecord& r) {
      partial.push_back(r);
      out << r.method << " #" << r.repeat << ": counterexamples=" << r.counterexamples
          << " worst phi=" << r.worst_phi << '\n';
    });
    const auto echo = cmd_detail::config_echo(*settings);
    cmd_detail::write_json(dir + "/bench.json", bench_json(result.records, result.aggregates, echo, conv, {}));
    const std::string table = bench_table(result.aggregates, conv);
    std::ofstream(dir + "/table.txt") << table;
    out << table;
    return 0;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    if (settings && !dir.empty() && !partial.empty()) {
      try {
        const bool conv = settings->bench.known_minimizer.has_value();
        cmd_detail::write_json(dir + "/bench.json",
                               bench_json(partial, aggregate(partial, methods, conv),
                                          cmd_detail::config_echo(*settings), conv, std::string(e.what())));
      } catch (const std::exception& e2) {
        err << "error: could not flush partial results: " << e2.what() << '\n';
      }
    }
    return 2;
  }
}

/// Debug rendering of a specification: normalized form and parse tree.
inline std::string print_tree(const std::string& spec_text) {
  const SpecAst ast = parse_spec(spec_text);
  const SpecAst nnf = to_nnf(ast);
  const ParseTree tree = build_parse_tree(nnf);
  std::ostringstream o;
  o << "spec: " << to_string(ast) << '\n' << "nnf:  " << to_string(nnf) << '\n' << "predicates:";
  for (std::size_t i = 0; i < tree.predicates().size(); ++i) o << " [#" << i << "] " << tree.predicates()[i];
  o << '\n' << render_tree(tree);
  return o.str();
}

}  // namespace adtest
