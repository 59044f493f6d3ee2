// Acceptance run: one PASS/FAIL line per criterion. Exits 1 if any fails.
//
//   acceptance            all criteria
//   acceptance 1 5 9      a subset

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "adtest/commands.hpp"
#include "support.hpp"

using namespace adtest;
namespace fs = std::filesystem;
using adtest::testing::Rng;
using adtest::testing::uniform;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

std::string config(const char* name) { return std::string(ADTEST_CONFIG_DIR) + "/" + name; }

double seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double x, int precision = 4) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(precision) << x;
  return o.str();
}

const BenchAggregate& find(const std::vector<BenchAggregate>& aggs, const std::string& method) {
  for (const auto& a : aggs)
    if (a.method == method) return a;
  throw std::runtime_error("no aggregate for " + method);
}

Verdict sincos_recovery() {
  const double target = 5.0 * std::numbers::pi / 4.0;
  RunSettings s = load_config(config("sincos.json"));
  s.run.budget = 15;
  const auto start = std::chrono::steady_clock::now();
  const auto bench = run_bench(s, {"multi-gp"}, 15);
  const double wall = seconds(start);
  int hits = 0;
  for (const auto& r : bench.records) hits += std::abs(r.worst_w.at(0) - target) <= 0.1 && r.worst_phi <= -0.04;
  return {hits >= 13 && wall < 10.0, std::to_string(hits) + "/15 repeats within 0.1 of 5pi/4 with phi <= -0.04, " +
                                          fmt(wall, 2) + " s (need >= 13/15, < 10 s)"};
}

Verdict single_gp_slower() {
  RunSettings s = load_config(config("sincos.json"));
  s.run.budget = 50;
  const auto bench = run_bench(s, {"multi-gp", "single-gp"}, 15);
  const auto& multi = find(bench.aggregates, "multi-gp");
  const auto& single = find(bench.aggregates, "single-gp");
  auto show = [](const std::optional<double>& m) { return m ? fmt(*m, 1) : std::string("inf"); };
  const bool ratio = multi.convergence_median && (!single.convergence_median ||
                                                  *single.convergence_median >= 2.0 * *multi.convergence_median);
  return {ratio && single.not_converged >= 1,
          "median convergence multi-gp " + show(multi.convergence_median) + ", single-gp " +
              show(single.convergence_median) + "; single-gp never converged in " +
              std::to_string(single.not_converged) + "/15 (need ratio >= 2 and >= 1 failure)"};
}

Verdict car_ordering() {
  const RunSettings s = load_config(config("car.json"));
  const auto start = std::chrono::steady_clock::now();
  const auto bench = run_bench(s, {"multi-gp", "multi-gp+embed", "random"}, 5);
  const double wall = seconds(start);
  const auto& full = find(bench.aggregates, "multi-gp");
  const auto& embed = find(bench.aggregates, "multi-gp+embed");
  const auto& rnd = find(bench.aggregates, "random");
  const bool ok = full.count_mean >= embed.count_mean && embed.count_mean >= rnd.count_mean &&
                  full.worst_mean <= rnd.worst_mean && wall < 900.0;
  return {ok, "mean counterexamples full " + fmt(full.count_mean, 1) + " >= embedded " + fmt(embed.count_mean, 1) +
                  " >= random " + fmt(rnd.count_mean, 1) + "; mean worst phi full " + fmt(full.worst_mean) +
                  " vs random " + fmt(rnd.worst_mean) + "; " + fmt(wall, 0) + " s (budget " +
                  std::to_string(s.run.budget) + ", < 900 s)"};
}

Verdict mountain_car_ordering() {
  const RunSettings s = load_config(config("mountain_car.json"));
  const auto bench = run_bench(s, {"multi-gp", "single-gp", "random"}, 5);
  const auto& multi = find(bench.aggregates, "multi-gp");
  const auto& single = find(bench.aggregates, "single-gp");
  const auto& rnd = find(bench.aggregates, "random");
  return {multi.count_mean >= single.count_mean && multi.count_mean >= rnd.count_mean,
          "mean counterexamples multi-gp " + fmt(multi.count_mean, 1) + ", single-gp " + fmt(single.count_mean, 1) +
              ", random " + fmt(rnd.count_mean, 1) + " (budget " + std::to_string(s.run.budget) + ")"};
}

Verdict gp_oracles() {
  Rng rng(2024);
  double posterior_err = 0.0, chol_err = 0.0, mi_err = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int n = 1 + adtest::testing::pick(rng, 40);
    const Eigen::Index d = 1 + adtest::testing::pick(rng, 5);
    Eigen::VectorXd ell(d);
    for (auto& l : ell) l = uniform(rng, 0.3, 2.0);
    const double sf2 = uniform(rng, 0.5, 2.0);
    const double noise = std::pow(10.0, uniform(rng, -4.0, -1.0));
    GpModel model({sf2, ell}, noise);
    adtest::testing::DenseGp dense{Eigen::MatrixXd(d, n), Eigen::VectorXd(n), sf2, noise, ell};
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd w(d);
      for (auto& x : w) x = uniform(rng, 0.0, 3.0);
      const double y = std::sin(w.sum()) + uniform(rng, -0.1, 0.1);
      model.observe(w, y);
      dense.x.col(i) = w;
      dense.y(i) = y;
    }
    for (int q = 0; q < 5; ++q) {
      Eigen::VectorXd w(d);
      for (auto& x : w) x = uniform(rng, -0.5, 3.5);
      const auto p = model.posterior(w);
      const auto [mean, var] = dense.posterior(w);
      posterior_err = std::max({posterior_err, std::abs(p.mean - mean), std::abs(p.variance - var)});
    }
    const Eigen::MatrixXd A = dense.gram() + noise * Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd L = Eigen::LLT<Eigen::MatrixXd>(A).matrixL();
    chol_err = std::max(chol_err, (model.cholesky() - L).cwiseAbs().maxCoeff());
    mi_err = std::max(mi_err, std::abs(model.mutual_information() - dense.log_det_information()));
  }
  std::ostringstream d;
  d << std::scientific << std::setprecision(2) << "200 cases: posterior max err " << posterior_err
    << ", cholesky max err " << chol_err << ", information max err " << mi_err << " (need 1e-8, 1e-8, 1e-6)";
  return {posterior_err <= 1e-8 && chol_err <= 1e-8 && mi_err <= 1e-6, d.str()};
}

Verdict semantics_fuzz() {
  Rng rng(6);
  int mismatches = 0;
  for (int f = 0; f < 1000; ++f) {
    const SpecAst ast = adtest::testing::random_ast(rng, 6);
    const ParseTree tree = build_parse_tree(to_nnf(ast));
    for (int a = 0; a < 10; ++a) {
      const auto values = adtest::testing::random_values(rng, tree.size());
      std::map<std::string, double> named;
      for (std::size_t i = 0; i < tree.size(); ++i) named[tree.predicates()[i]] = values[i];
      mismatches += eval_tree(tree, values) != adtest::testing::oracle_eval(ast, named);
    }
  }
  // Raising any signed leaf input never lowers the value.
  int violations = 0;
  for (int p = 0; p < 1000; ++p) {
    const ParseTree tree = build_parse_tree(to_nnf(adtest::testing::random_ast(rng, 6)));
    std::vector<double> v_pos(tree.size()), v_neg(tree.size()), u_pos(tree.size()), u_neg(tree.size());
    for (std::size_t i = 0; i < tree.size(); ++i) {
      v_pos[i] = uniform(rng, -5, 5);
      v_neg[i] = uniform(rng, -5, 5);
      u_pos[i] = v_pos[i] + (adtest::testing::pick(rng, 3) ? uniform(rng, 0, 3) : 0.0);
      u_neg[i] = v_neg[i] + (adtest::testing::pick(rng, 3) ? uniform(rng, 0, 3) : 0.0);
    }
    auto eval = [&](const std::vector<double>& pos, const std::vector<double>& neg) {
      return tree.evaluate([&](int i, int sign) {
        const auto k = static_cast<std::size_t>(i);
        return sign > 0 ? pos[k] : neg[k];
      });
    };
    violations += eval(u_pos, u_neg) < eval(v_pos, v_neg);
  }
  return {mismatches == 0 && violations == 0, std::to_string(mismatches) +
                                                  "/10000 evaluation mismatches, " + std::to_string(violations) +
                                                  "/1000 monotonicity violations"};
}

Verdict lcb_soundness() {
  Rng rng(7);
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const ParseTree tree = build_parse_tree(to_nnf(adtest::testing::random_ast(rng, 5)));
    const Eigen::Index d = 1 + adtest::testing::pick(rng, 3);
    std::vector<GpModel> models;
    for (std::size_t i = 0; i < tree.size(); ++i) {
      models.emplace_back(SquaredExponential{uniform(rng, 0.2, 3.0), Eigen::VectorXd::Constant(d, uniform(rng, 0.2, 2.0))},
                          std::pow(10.0, uniform(rng, -4, -1)));
      const int n = adtest::testing::pick(rng, 8);
      for (int k = 0; k < n; ++k) {
        Eigen::VectorXd x(d);
        for (auto& c : x) c = uniform(rng, 0, 1);
        models.back().observe(x, uniform(rng, -2, 2));
      }
    }
    Eigen::VectorXd w(d);
    for (auto& c : w) c = uniform(rng, 0, 1);
    const double beta_sqrt = uniform(rng, 0.0, 3.0);
    std::vector<double> truth(tree.size());
    for (std::size_t i = 0; i < tree.size(); ++i) {
      const auto p = models[i].posterior(w);
      truth[i] = p.mean + uniform(rng, -1, 1) * beta_sqrt * p.stddev();
    }
    violations += composite_lcb(tree, models, beta_sqrt, w) > eval_tree(tree, truth);
  }
  return {violations == 0, std::to_string(violations) + "/1000 tuples where the bound exceeds the true value"};
}

Verdict certificate_soundness() {
  using nlohmann::json;
  const fs::path dir = fs::temp_directory_path() / "adtest-acceptance-verify";
  fs::create_directories(dir);
  auto terminal = [](const char* channel, double scale, double offset) {
    return json{{"functional", "terminal"}, {"channel", channel}, {"scale", scale}, {"offset", offset}};
  };
  const std::vector<std::pair<std::string, json>> toys = {
      {"mu", {{"mu", terminal("sin", 1, 2.0)}}},
      {"mu1 and mu2", {{"mu1", terminal("sin", 1, 1.5)}, {"mu2", terminal("cos", 1, 1.5)}}},
      {"mu1 or mu2", {{"mu1", terminal("sin", 1, 0.8)}, {"mu2", terminal("cos", 1, 0.8)}}},
      {"not mu", {{"mu", terminal("sin", 1, -1.5)}}},
      {"mu1 implies mu2", {{"mu1", terminal("sin", 1, 0.5)}, {"mu2", terminal("cos", 1, 1.3)}}},
  };
  int verified = 0, false_certificates = 0;
  for (std::size_t k = 0; k < toys.size(); ++k) {
    const json cfg = {{"environment", {{"kind", "synthetic-sincos"}}},
                      {"specification", toys[k].first},
                      {"predicates", toys[k].second},
                      {"gp", {{"signal_variance", 4.0}, {"lengthscales", 2.0}, {"noise_variance", 1e-4}}},
                      {"beta", {{"mode", "fixed"}, {"beta_sqrt", 2.0}}},
                      {"budget", 40}};
    const std::string path = (dir / ("toy" + std::to_string(k) + ".json")).string();
    std::ofstream(path) << cfg.dump(2);
    std::ostringstream out, err;
    VerifyOptions opts;
    opts.out = (dir / ("toy" + std::to_string(k) + "-report.json")).string();
    cmd_verify(path, opts, out, err);
    if (out.str().rfind("VERIFIED", 0) != 0) continue;
    ++verified;
    const RunSettings s = load_config(path);
    const Problem problem = make_problem(s);
    double grid_min = INFINITY;
    for (int i = 0; i <= 10000; ++i) {
      const auto traj = simulate_sincos(Eigen::VectorXd::Constant(1, 10.0 * i / 10000.0));
      std::vector<double> mu;
      for (const auto& b : problem.bindings) mu.push_back(eval_predicate(b, traj));
      grid_min = std::min(grid_min, eval_tree(problem.tree, mu));
    }
    false_certificates += !(grid_min > 0.0);
  }
  fs::remove_all(dir);
  return {false_certificates == 0, std::to_string(verified) + "/5 safe toys verified, " +
                                       std::to_string(false_certificates) + " false certificates on a 10^4 grid"};
}

Verdict determinism() {
  const fs::path dir = fs::temp_directory_path() / "adtest-acceptance-determinism";
  fs::create_directories(dir);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  bool same = true;
  for (const char* name : {"sincos.json", "mountain_car.json"}) {
    std::string reports[2];
    for (int k = 0; k < 2; ++k) {
      FalsifyOptions opts;
      opts.out = (dir / ("run" + std::to_string(k) + ".json")).string();
      opts.budget = 30;
      std::ostringstream out, err;
      if (cmd_falsify(config(name), opts, out, err) == 2) return {false, name + std::string(": ") + err.str()};
      reports[k] = slurp(*opts.out);
    }
    same = same && !reports[0].empty() && reports[0] == reports[1];
  }
  fs::remove_all(dir);
  return {same, same ? "sincos and mountain-car reports byte-identical across two runs" : "reports differ"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, Verdict (*)()>> criteria = {
      {"sincos recovery", sincos_recovery},
      {"single-gp converges slower", single_gp_slower},
      {"car 100-D ordering", car_ordering},
      {"mountain-car ordering", mountain_car_ordering},
      {"GP oracles", gp_oracles},
      {"semantics fuzz", semantics_fuzz},
      {"confidence bound soundness", lcb_soundness},
      {"certificate soundness", certificate_soundness},
      {"determinism", determinism},
  };
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!wanted.empty() && !wanted.count(id)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << id << ". " << criteria[i].first << ": " << v.detail
              << std::endl;
  }
  return failed ? 1 : 0;
}
