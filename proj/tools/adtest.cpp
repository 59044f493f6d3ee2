// adtest: falsification and verification of closed-loop systems against
// boolean specifications over trajectory predicates.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "adtest/commands.hpp"

namespace {

void configure_logging() {
  const char* level = std::getenv("ADTEST_LOG");
  spdlog::set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
}

void log_row(const adtest::HistoryRow& row) {
  if (row.acquisition) {
    spdlog::info("{} {}: phi={:.6g} acquisition={:.6g} beta^1/2={:.4g}", row.phase, row.iteration, row.phi,
                 *row.acquisition, row.beta_sqrt.value_or(0.0));
  } else {
    spdlog::info("{} {}: phi={:.6g}", row.phase, row.iteration, row.phi);
  }
}

}  // namespace

int main(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Adversarial testing of closed-loop systems with Gaussian processes"};
  app.require_subcommand(0, 1);

  std::optional<std::string> tree_spec;
  app.add_option("--print-tree", tree_spec, "Print the normalized specification and its parse tree, then exit");

  std::string falsify_config;
  adtest::FalsifyOptions falsify;
  auto* f = app.add_subcommand("falsify", "Search for a counterexample");
  f->add_option("config", falsify_config, "Configuration file")->required();
  f->add_option("--budget", falsify.budget, "Number of active iterations");
  f->add_option("--seed", falsify.seed, "Root random seed");
  f->add_option("--method", falsify.method, "multi-gp, single-gp or random; append +embed for the embedding");
  f->add_option("--out", falsify.out, "Report path");

  std::string verify_config;
  adtest::VerifyOptions verify;
  auto* v = app.add_subcommand("verify", "Try to certify the specification, stopping at a counterexample");
  v->add_option("config", verify_config, "Configuration file")->required();
  v->add_option("--delta", verify.delta, "Failure probability of the certificate");
  v->add_option("--budget", verify.budget, "Number of active iterations");
  v->add_option("--seed", verify.seed, "Root random seed");
  v->add_option("--out", verify.out, "Report path");

  std::string bench_config;
  adtest::BenchOptions bench;
  auto* b = app.add_subcommand("bench", "Compare methods over seeded repeats");
  b->add_option("config", bench_config, "Configuration file")->required();
  b->add_option("--repeats", bench.repeats, "Repeats per method");
  b->add_option("--methods", bench.methods, "Methods to compare")->delimiter(',');
  b->add_option("--out", bench.out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (tree_spec) {
    try {
      std::cout << adtest::print_tree(*tree_spec);
      return 0;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 2;
    }
  }
  falsify.progress = log_row;
  verify.progress = log_row;
  if (f->parsed()) return adtest::cmd_falsify(falsify_config, falsify, std::cout, std::cerr);
  if (v->parsed()) return adtest::cmd_verify(verify_config, verify, std::cout, std::cerr);
  if (b->parsed()) return adtest::cmd_bench(bench_config, bench, std::cout, std::cerr);
  std::cerr << app.help();
  return 2;
}
