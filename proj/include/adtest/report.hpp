#pragma once

// Run reports as JSON. The layout is versioned by `schema`; doubles are
// written in shortest round-trip form so reports reproduce byte for byte.

#include <algorithm>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "adtest/engine.hpp"
#include "adtest/errors.hpp"
#include "adtest/external.hpp"
#include "json.hpp"

namespace adtest {

inline constexpr const char* kReportSchema = "adtest-report/1";

namespace detail {

inline nlohmann::json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

template <class T>
nlohmann::json opt(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace detail

inline nlohmann::json to_json(const Certificate& c) {
  return {{"verified", c.verified},
          {"acquisition_minimum", c.acquisition_minimum},
          {"beta_sqrt", c.beta_sqrt},
          {"delta", c.delta},
          {"heuristic_global_optimum", c.heuristic_optimum},
          {"iteration", c.iteration}};
}

inline nlohmann::json to_json(const Diagnostics& d) {
  return {{"c1", d.c1},
          {"iterations", d.iterations},
          {"beta_sqrt", d.beta_sqrt},
          {"mutual_information", d.information},
          {"regret_bound", d.regret_bound},
          {"epsilon", detail::opt(d.epsilon)},
          {"epsilon_iteration", detail::opt(d.epsilon_iteration)}};
}

inline nlohmann::json history_row_json(const HistoryRow& row, const std::vector<std::string>& predicates) {
  nlohmann::json mu = nlohmann::json::object();
  for (std::size_t i = 0; i < predicates.size(); ++i) mu[predicates[i]] = row.mu[i];
  return {{"iteration", row.iteration},
          {"phase", row.phase},
          {"w", detail::vec(row.w)},
          {"embedded", row.embedded ? detail::vec(*row.embedded) : nlohmann::json(nullptr)},
          {"mu", std::move(mu)},
          {"phi", row.phi},
          {"beta_sqrt", detail::opt(row.beta_sqrt)},
          {"acquisition", detail::opt(row.acquisition)},
          {"mutual_information", detail::opt(row.information)}};
}

inline nlohmann::json make_report(const RunResult& result, const nlohmann::json& config_echo,
                                  const std::optional<Diagnostics>& diagnostics) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : result.history) rows.push_back(history_row_json(row, result.predicates));
  const auto& worst = result.worst();
  return {{"schema", kReportSchema},
          {"config", config_echo},
          {"method", to_string(result.method)},
          {"predicates", result.predicates},
          {"history", std::move(rows)},
          {"worst",
           {{"index", result.worst_index},
            {"w", detail::vec(worst.w)},
            {"phi", worst.phi},
            {"trajectory", result.worst_trajectory ? to_json(*result.worst_trajectory) : nlohmann::json(nullptr)}}},
          {"counterexamples", result.counterexamples},
          {"falsified", worst.phi <= 0.0},
          {"stopped_early", result.stopped_early},
          {"certificate", result.certificate ? to_json(*result.certificate) : nlohmann::json(nullptr)},
          {"diagnostics", diagnostics ? to_json(*diagnostics) : nlohmann::json(nullptr)}};
}

/// Structural check of a report; throws Error describing the first problem.
inline void validate_report(const nlohmann::json& r) {
  auto need = [](const nlohmann::json& obj, const char* key, auto&& pred, const char* what) {
    if (!obj.is_object() || !obj.contains(key) || !pred(obj.at(key)))
      throw Error(std::string("report field '") + key + "' missing or not " + what);
  };
  auto is_num = [](const nlohmann::json& v) { return v.is_number(); };
  auto is_arr = [](const nlohmann::json& v) { return v.is_array(); };
  auto is_obj = [](const nlohmann::json& v) { return v.is_object(); };
  auto is_obj_or_null = [](const nlohmann::json& v) { return v.is_object() || v.is_null(); };

  if (r.value("schema", "") != kReportSchema) throw Error("report schema tag missing or unknown");
  need(r, "config", is_obj, "an object");
  need(r, "method", [](const auto& v) { return v.is_string(); }, "a string");
  need(r, "predicates", is_arr, "an array");
  need(r, "history", [](const auto& v) { return v.is_array() && !v.empty(); }, "a nonempty array");
  need(r, "worst", is_obj, "an object");
  need(r, "counterexamples", [](const auto& v) { return v.is_number_integer(); }, "an integer");
  need(r, "certificate", is_obj_or_null, "an object or null");
  need(r, "diagnostics", is_obj_or_null, "an object or null");

  const auto& predicates = r["predicates"];
  double worst = std::numeric_limits<double>::infinity();
  long count = 0;
  for (const auto& row : r["history"]) {
    need(row, "w", is_arr, "an array");
    need(row, "phi", is_num, "a number");
    need(row, "mu", is_obj, "an object");
    if (row["mu"].size() != predicates.size()) throw Error("history row predicate count mismatch");
    const double phi = row["phi"].get<double>();
    worst = std::min(worst, phi);
    if (phi <= 0.0) ++count;
  }
  need(r["worst"], "phi", is_num, "a number");
  if (r["worst"]["phi"].get<double>() != worst) throw Error("worst phi is not the history minimum");
  if (r["counterexamples"].get<long>() != count) throw Error("counterexample count disagrees with history");
}

}  // namespace adtest
