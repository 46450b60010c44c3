#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bayesviews/backtest.hpp"
#include "bayesviews/marketdata.hpp"

namespace bayesviews::cli {

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UsageError : CliError { using CliError::CliError; };
struct DateNotInRun : CliError { using CliError::CliError; };

/// Everything a run needs; defaults follow the reference setup
/// (delta 0.25, tau 0.05, 10,000 starting capital).
struct RunConfig {
  std::string data_dir;
  std::vector<std::string> strategies = {"vw"};
  std::vector<int> timespans = {90};
  double delta = 0.25;
  double tau = 0.05;
  learners::ModelConfig model;
  std::uint64_t seed = 42;
  std::optional<Date> start, end;
  std::string out_dir = "out";
  bool narrative = true;
  bool sortino = false;
  double random_view_bound = 0.02;
  double initial_capital = 10000.0;
};

/// Flat-JSON config file; unknown keys are rejected. CLI flags override
/// whatever the file sets.
RunConfig config_from_json(const std::string& text, RunConfig base = {});
RunConfig config_from_json_file(const std::string& path, RunConfig base = {});
void validate_config(const RunConfig& config);

/// Tickers appearing in a prices.csv, in order of first appearance.
std::vector<std::string> discover_tickers(const std::string& price_path);

/// load -> split-adjust -> fill -> optional date restriction.
marketdata::MarketFrame prepare_frame(const RunConfig& config);

/// One backtest of the grid: label like "markowitz90" (timespan suffix only
/// where the strategy uses one, so vw/nt rows never duplicate).
struct GridCell {
  std::string label;
  backtest::Strategy strategy;
};
std::vector<GridCell> expand_grid(const RunConfig& config);

/// Run every cell, write <label>.report.json / .values.csv / .weights.csv
/// plus a combined metrics_table.csv into the output directory.
/// Returns the completed reports in grid order.
std::vector<backtest::BacktestReport> run_backtests(const RunConfig& config,
                                                    std::ostream& log);

/// Render one day's story: observed sentiment, the views held, and the
/// reallocation needed to reach the next day's weights.
std::string render_narrative(const backtest::NarrativeRecord& record,
                             const std::vector<std::string>& tickers);
std::string narrative_to_json(const backtest::NarrativeRecord& record,
                              const std::vector<std::string>& tickers);

/// Locate the narrative record for a date inside a written report.
const backtest::NarrativeRecord& find_narrative(const backtest::BacktestReport& report,
                                                Date date);

// --- data validation ---------------------------------------------------

struct TickerCoverage {
  std::string ticker;
  Date first, last;
  int observed_days = 0;
  int missing_days = 0;
};

struct ValidationReport {
  bool ok = false;
  std::vector<std::string> errors;
  std::vector<std::string> warnings;  // e.g. split-like jumps without a split event
  std::vector<TickerCoverage> coverage;
  std::string render() const;
};

/// Schema check, per-ticker coverage, and a price-jump detector that flags
/// likely unadjusted splits (overnight ratio beyond 3x with no matching
/// splits.csv entry).
ValidationReport validate_data(const std::string& data_dir);

/// Percentages consistent with the weight series: fraction of asset i to
/// withdraw is max(0, 1 - w_next/w_cur) where w_cur > 0.
Eigen::VectorXd withdraw_fractions(const Eigen::VectorXd& w_cur, const Eigen::VectorXd& w_next);

}  // namespace bayesviews::cli
