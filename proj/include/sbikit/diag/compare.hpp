#pragma once

// Side-by-side summary of inference runs: per-algorithm simulation budgets,
// marginal posterior means with central credible intervals, and predictive
// coverage when available. The table imposes no ranking; choosing between
// accuracy and cost is left to the reader. Rows keep the input order, and
// algorithm tags live in the JSON index because the CSV is numeric.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbikit/core/errors.hpp"
#include "sbikit/core/stats.hpp"
#include "sbikit/core/types.hpp"
#include "sbikit/io/csv.hpp"

namespace sbikit {

// One inference run to compare. predictive_coverage is the widest-band
// coverage from a posterior predictive check, NaN when no check was run; the
// trace is whatever per-iteration table the algorithm produced, possibly
// empty.
struct AlgorithmRun {
  std::string algorithm;
  std::vector<ParamVector> samples;
  std::uint64_t total_simulations = 0;
  double predictive_coverage = std::numeric_limits<double>::quiet_NaN();
  CsvTable trace;
};

struct ComparisonReport {
  std::vector<std::string> algorithms;
  std::vector<std::size_t> trace_rows;
  double ci_level = 0.95;
  CsvTable table;
};

inline ComparisonReport compare_report(const std::vector<AlgorithmRun>& runs,
                                       double ci_level = 0.95) {
  if (runs.empty()) throw DomainError("compare_report: no runs");
  if (!(ci_level > 0.0 && ci_level < 1.0))
    throw DomainError("compare_report: ci_level outside (0,1)");
  for (const auto& run : runs) {
    if (run.algorithm.empty())
      throw DomainError("compare_report: run without an algorithm tag");
    if (run.samples.empty())
      throw DomainError("compare_report: run '" + run.algorithm +
                        "' has no samples");
  }
  const std::size_t dim = runs[0].samples[0].size();
  for (const auto& run : runs)
    for (const auto& s : run.samples)
      if (s.size() != dim)
        throw DimensionError("compare_report: parameter dimension mismatch");

  ComparisonReport report;
  report.ci_level = ci_level;
  report.table.header = {"run", "n_samples", "total_simulations"};
  for (std::size_t j = 0; j < dim; ++j) {
    const std::string tag = "theta_" + std::to_string(j + 1);
    report.table.header.push_back(tag + "_mean");
    report.table.header.push_back(tag + "_lo");
    report.table.header.push_back(tag + "_hi");
  }
  report.table.header.push_back("predictive_coverage");

  const double p_lo = 0.5 * (1.0 - ci_level);
  const double p_hi = 0.5 * (1.0 + ci_level);
  std::vector<double> column;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& run = runs[r];
    report.algorithms.push_back(run.algorithm);
    report.trace_rows.push_back(run.trace.rows.size());
    std::vector<double> row;
    row.push_back(static_cast<double>(r + 1));
    row.push_back(static_cast<double>(run.samples.size()));
    row.push_back(static_cast<double>(run.total_simulations));
    column.resize(run.samples.size());
    for (std::size_t j = 0; j < dim; ++j) {
      for (std::size_t i = 0; i < run.samples.size(); ++i)
        column[i] = run.samples[i][j];
      row.push_back(mean(column));
      row.push_back(quantile(column, p_lo));
      row.push_back(quantile(column, p_hi));
    }
    row.push_back(run.predictive_coverage);
    report.table.rows.push_back(std::move(row));
  }
  return report;
}

// Maps CSV row indices back to algorithm tags and trace sizes.
inline std::string comparison_json(const ComparisonReport& report) {
  nlohmann::json j;
  j["ci_level"] = report.ci_level;
  j["runs"] = nlohmann::json::array();
  for (std::size_t r = 0; r < report.algorithms.size(); ++r) {
    nlohmann::json row;
    row["index"] = r + 1;
    row["algorithm"] = report.algorithms[r];
    row["n_samples"] = report.table.rows[r][1];
    row["total_simulations"] = report.table.rows[r][2];
    row["trace_rows"] = report.trace_rows[r];
    j["runs"].push_back(row);
  }
  return j.dump(2);
}

}  // namespace sbikit
