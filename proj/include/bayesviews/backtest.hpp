#pragma once

#include <Eigen/Dense>

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "bayesviews/allocation.hpp"
#include "bayesviews/learners.hpp"
#include "bayesviews/marketdata.hpp"
#include "bayesviews/views.hpp"

namespace bayesviews::backtest {

struct BacktestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ZeroTotalCap : BacktestError { using BacktestError::BacktestError; };
struct LengthMismatch : BacktestError { using BacktestError::BacktestError; };
struct NonPositiveValue : BacktestError { using BacktestError::BacktestError; };
struct DegenerateVolatility : BacktestError { using BacktestError::BacktestError; };

/// The strategy grid. ORACLE is the hindsight reference that feeds the exact
/// optimal view returns back through the allocator; it is the only kind
/// allowed to read the next day's prices when deciding.
enum class StrategyKind { VW, MARKOWITZ, BL_RANDOM, BL_SENTIMENT, NT, NT_SENTIMENT, ORACLE };

StrategyKind parse_strategy(const std::string& name);
std::string strategy_name(StrategyKind kind);
/// VW and the neural-trading kinds need no covariance window.
bool strategy_uses_timespan(StrategyKind kind);
bool strategy_uses_model(StrategyKind kind);

struct Strategy {
  StrategyKind kind = StrategyKind::VW;
  int timespan = 90;  // covariance window, >= 31
  learners::ModelConfig model;
  std::uint64_t seed = 42;
  double random_view_bound = 0.02;  // per-day |Q| bound for BL_RANDOM
};

struct PortfolioState {
  double value = 0.0;
  Eigen::VectorXd weights_held;  // on the simplex
  Eigen::VectorXd weights_raw;   // pre-projection, kept for the RMSE metric
};

struct DailyRecord {
  Date date;
  double value = 0.0;         // at decision time
  double gross_return = 1.0;  // realized holding into the next day
  Eigen::VectorXd weights_raw, weights_held, w_star;
};

struct NarrativeRecord {
  Date date;
  double value = 0.0;
  std::vector<marketdata::SentimentRecord> sentiment;  // per asset
  Eigen::VectorXd view_q;                              // predicted view returns
  Eigen::VectorXd view_omega;                          // view variances
  double market_return = 0.0;                          // equilibrium Pi . w_cap
  Eigen::VectorXd weights_current;
  Eigen::VectorXd weights_next;  // filled once the next day is decided
  bool has_next = false;
};

struct Metrics {
  double rmse = 0.0;
  double ar = 0.0;
  double sr = 0.0;
  double mdd = 0.0;
  std::optional<double> sortino;
};

struct BacktestReport {
  std::string label;
  std::vector<std::string> tickers;
  std::vector<DailyRecord> daily;
  std::vector<double> values;      // daily.size() + 1: decision-day values plus the final mark
  std::vector<Date> value_dates;
  std::vector<double> gross;       // portfolio daily gross returns
  std::vector<double> vw_gross;    // value-weighted base series over the same days
  Metrics metrics;
  std::vector<NarrativeRecord> narrative;
};

struct BacktestConfig {
  double delta = 0.25;
  double tau = 0.05;
  double initial_capital = 10000.0;
  bool record_narrative = false;
  bool compute_sortino = false;
};

/// Daily-rebalanced simulation of one strategy over a prepared frame
/// (filled, split-adjusted). No shorting, fees or slippage; holdings are
/// marked close to close.
BacktestReport run(const Strategy& strategy, const marketdata::MarketFrame& frame,
                   const BacktestConfig& config);

/// Capitalization weights at day t.
Eigen::VectorXd vw_weights(const marketdata::MarketFrame& frame, int t);

/// Seeded uniform view returns in [-bound, bound] with the default
/// confidence omega0.
views::CanonicalViews random_views(std::mt19937_64& rng, int n, double bound,
                                   const Eigen::VectorXd& omega0);

double metric_rmse(const std::vector<Eigen::VectorXd>& realized,
                   const std::vector<Eigen::VectorXd>& optimal);
double metric_ar(const std::vector<double>& values, const std::vector<Date>& dates);
double metric_sr(const std::vector<double>& portfolio_gross, const std::vector<double>& vw_gross);
double metric_mdd(const std::vector<double>& values);
double metric_sortino(const std::vector<double>& portfolio_gross,
                      const std::vector<double>& vw_gross);

/// First decision day the strategy can run on.
int warmup_days(const Strategy& strategy);

// report output (JSON report, plot-ready values.csv / weights.csv)
void write_report_json(const BacktestReport& report, const std::string& path);
void write_values_csv(const BacktestReport& report, const std::string& path);
void write_weights_csv(const BacktestReport& report, const std::string& path);
std::string report_to_json(const BacktestReport& report);
BacktestReport report_from_json(const std::string& text);

}  // namespace bayesviews::backtest
