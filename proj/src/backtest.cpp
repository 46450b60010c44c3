#include "bayesviews/backtest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace bayesviews::backtest {

namespace {

using Eigen::VectorXd;

double sample_sd(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  if (n < 2) throw DegenerateVolatility("need at least two returns");
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(n - 1));
}

double downside_rms(const std::vector<double>& gross) {
  double ss = 0.0;
  for (double g : gross) {
    const double d = std::min(0.0, g - 1.0);
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(gross.size()));
}

}  // namespace

StrategyKind parse_strategy(const std::string& name) {
  if (name == "vw") return StrategyKind::VW;
  if (name == "markowitz") return StrategyKind::MARKOWITZ;
  if (name == "bl_random") return StrategyKind::BL_RANDOM;
  if (name == "bl_sentiment") return StrategyKind::BL_SENTIMENT;
  if (name == "nt") return StrategyKind::NT;
  if (name == "nt_sentiment") return StrategyKind::NT_SENTIMENT;
  if (name == "oracle") return StrategyKind::ORACLE;
  throw BacktestError("unknown strategy '" + name + "'");
}

std::string strategy_name(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::VW: return "vw";
    case StrategyKind::MARKOWITZ: return "markowitz";
    case StrategyKind::BL_RANDOM: return "bl_random";
    case StrategyKind::BL_SENTIMENT: return "bl_sentiment";
    case StrategyKind::NT: return "nt";
    case StrategyKind::NT_SENTIMENT: return "nt_sentiment";
    case StrategyKind::ORACLE: return "oracle";
  }
  return "?";
}

bool strategy_uses_timespan(StrategyKind kind) {
  return kind == StrategyKind::MARKOWITZ || kind == StrategyKind::BL_RANDOM ||
         kind == StrategyKind::BL_SENTIMENT || kind == StrategyKind::ORACLE;
}

bool strategy_uses_model(StrategyKind kind) {
  return kind == StrategyKind::BL_SENTIMENT || kind == StrategyKind::NT ||
         kind == StrategyKind::NT_SENTIMENT;
}

VectorXd vw_weights(const marketdata::MarketFrame& frame, int t) {
  const int n = frame.n_assets();
  VectorXd caps(n);
  for (int i = 0; i < n; ++i) caps(i) = frame.mcap(t, i);
  const double total = caps.sum();
  if (!(total > 0)) {
    throw ZeroTotalCap("total market capitalization is not positive on " +
                       frame.date(t).to_iso());
  }
  return caps / total;
}

views::CanonicalViews random_views(std::mt19937_64& rng, int n, double bound,
                                   const VectorXd& omega0) {
  if (!std::isfinite(bound) || bound < 0) throw BacktestError("view bound must be finite");
  views::CanonicalViews v;
  v.Q.resize(n);
  for (int i = 0; i < n; ++i) {
    const double u = static_cast<double>(rng() >> 11) * 0x1p-53;  // [0, 1)
    v.Q(i) = (2.0 * u - 1.0) * bound;
  }
  v.omega = omega0;
  return v;
}

int warmup_days(const Strategy& strategy) {
  switch (strategy.kind) {
    case StrategyKind::VW: return 0;
    case StrategyKind::MARKOWITZ:
    case StrategyKind::BL_RANDOM:
    case StrategyKind::ORACLE: return strategy.timespan + 1;
    case StrategyKind::NT:
    case StrategyKind::NT_SENTIMENT: return 31;
    case StrategyKind::BL_SENTIMENT: return std::max(31, strategy.timespan + 2);
  }
  return 0;
}

BacktestReport run(const Strategy& strategy, const marketdata::MarketFrame& frame,
                   const BacktestConfig& config) {
  const int n = frame.n_assets();
  const int t0 = warmup_days(strategy);
  if (strategy_uses_timespan(strategy.kind) && strategy.timespan < 31) {
    throw BacktestError("timespan must be at least 31 days");
  }
  if (frame.n_days() < t0 + 2) {
    throw alloc::InsufficientHistory("frame too short: warm-up needs " + std::to_string(t0) +
                                     " days plus a trading day");
  }

  // learner wiring for the model-driven strategies
  std::unique_ptr<learners::OnlineViewLoop> loop;
  if (strategy_uses_model(strategy.kind)) {
    learners::ModelConfig mc = strategy.model;
    mc.seed = strategy.seed;
    learners::LoopConfig lc;
    lc.timespan = strategy.timespan;
    lc.delta = config.delta;
    lc.tau = config.tau;
    lc.flags.use_sentiment = strategy.kind == StrategyKind::BL_SENTIMENT
                                 ? mc.use_sentiment
                                 : strategy.kind == StrategyKind::NT_SENTIMENT;
    lc.flags.use_capital = mc.use_capital;
    lc.weight_targets =
        strategy.kind == StrategyKind::NT || strategy.kind == StrategyKind::NT_SENTIMENT;

    const int input_dim = features::FeatureVector::flattened_size(n);
    auto base = learners::make_model(mc, input_dim, n);
    std::shared_ptr<learners::OnlineViewModel> model;
    if (lc.weight_targets) {
      model = std::make_shared<learners::NtModel>(std::move(base), n);
    } else {
      model = std::shared_ptr<learners::OnlineViewModel>(std::move(base));
    }
    loop = std::make_unique<learners::OnlineViewLoop>(model, lc);
  }

  std::mt19937_64 rng(strategy.seed);
  const auto audit = frame.access_audit();

  BacktestReport report;
  report.label = strategy_name(strategy.kind);
  report.tickers = frame.universe().tickers();

  double value = config.initial_capital;
  report.values.push_back(value);
  report.value_dates.push_back(frame.date(t0));

  for (int t = t0; t + 1 < frame.n_days(); ++t) {
    DailyRecord rec;
    rec.date = frame.date(t);
    rec.value = value;

    VectorXd raw(n), held(n);
    std::optional<NarrativeRecord> story;

    // --- decision phase: only rows <= t may be read (ORACLE excepted) ---
    const StrategyKind kind = strategy.kind;
    if (audit) audit->limit = (kind == StrategyKind::ORACLE) ? t + 1 : t;
    switch (kind) {
      case StrategyKind::VW: {
        raw = vw_weights(frame, t);
        held = raw;
        break;
      }
      case StrategyKind::NT:
      case StrategyKind::NT_SENTIMENT: {
        raw = loop->step(frame, t, value).prediction;
        held = alloc::project_simplex(raw);
        break;
      }
      case StrategyKind::MARKOWITZ:
      case StrategyKind::BL_RANDOM:
      case StrategyKind::BL_SENTIMENT:
      case StrategyKind::ORACLE: {
        views::CanonicalViews v;
        VectorXd qhat = VectorXd::Zero(n);
        if (kind == StrategyKind::BL_SENTIMENT) {
          // learner first: it estimates covariance at t-1 internally
          qhat = loop->step(frame, t, value).prediction;
        }
        alloc::RiskModel risk(alloc::estimate_covariance(frame, t, strategy.timespan),
                              config.delta, config.tau);
        const auto eq = alloc::equilibrium_returns(risk, vw_weights(frame, t));
        const VectorXd omega0 = alloc::default_confidence(risk);
        switch (kind) {
          case StrategyKind::MARKOWITZ:
            v.Q = VectorXd::Zero(n);
            v.omega = VectorXd::Constant(n, std::numeric_limits<double>::infinity());
            break;
          case StrategyKind::BL_RANDOM:
            v = random_views(rng, n, strategy.random_view_bound, omega0);
            break;
          case StrategyKind::BL_SENTIMENT:
            v.Q = qhat;
            v.omega = omega0;
            break;
          case StrategyKind::ORACLE: {
            VectorXd p_now(n), p_next(n);
            for (int i = 0; i < n; ++i) {
              p_now(i) = frame.price(t, i);
              p_next(i) = frame.price(t + 1, i);
            }
            const VectorXd w_star = alloc::optimal_one_hot(p_now, p_next);
            v.Q = alloc::invert_views(w_star, eq, risk, omega0);
            v.omega = omega0;
            break;
          }
          default: break;
        }
        const auto post = alloc::bl_posterior(eq, risk, v);
        raw = alloc::bl_weights(post, risk);
        held = alloc::project_simplex(raw);

        if (config.record_narrative && kind != StrategyKind::MARKOWITZ) {
          NarrativeRecord nr;
          nr.date = frame.date(t);
          nr.value = value;
          nr.sentiment.reserve(n);
          for (int i = 0; i < n; ++i) nr.sentiment.push_back(frame.sentiment(t, i));
          nr.view_q = v.Q;
          nr.view_omega = v.omega;
          nr.market_return = eq.pi.dot(eq.w_cap);
          nr.weights_current = held;
          story = std::move(nr);
        }
        break;
      }
    }

    // --- settlement: the realized return uses the next day's close ---
    if (audit) audit->limit = t + 1;
    double gross = 0.0;
    VectorXd gross_vec(n), p_now(n), p_next(n);
    for (int i = 0; i < n; ++i) {
      p_now(i) = frame.price(t, i);
      p_next(i) = frame.price(t + 1, i);
      gross_vec(i) = p_next(i) / p_now(i);
    }
    gross = held.dot(gross_vec);
    if (!(gross > 0)) {
      throw NonPositiveValue("portfolio value would become non-positive on " +
                             frame.date(t).to_iso());
    }

    rec.weights_raw = raw;
    rec.weights_held = held;
    rec.w_star = alloc::optimal_one_hot(p_now, p_next);
    rec.gross_return = gross;
    value *= gross;

    report.gross.push_back(gross);
    report.vw_gross.push_back(kind == StrategyKind::VW ? gross
                                                       : vw_weights(frame, t).dot(gross_vec));
    report.daily.push_back(std::move(rec));
    report.values.push_back(value);
    report.value_dates.push_back(frame.date(t + 1));

    if (story) {
      report.narrative.push_back(std::move(*story));
    }
    if (report.narrative.size() >= 2) {
      auto& prev = report.narrative[report.narrative.size() - 2];
      if (!prev.has_next) {
        prev.weights_next = report.narrative.back().weights_current;
        prev.has_next = true;
      }
    }
  }

  // metrics
  std::vector<VectorXd> realized, optimal;
  realized.reserve(report.daily.size());
  for (const auto& d : report.daily) {
    realized.push_back(d.weights_held);
    optimal.push_back(d.w_star);
  }
  report.metrics.rmse = metric_rmse(realized, optimal);
  report.metrics.ar = metric_ar(report.values, report.value_dates);
  report.metrics.sr = metric_sr(report.gross, report.vw_gross);
  report.metrics.mdd = metric_mdd(report.values);
  if (config.compute_sortino) {
    report.metrics.sortino = metric_sortino(report.gross, report.vw_gross);
  }
  return report;
}

double metric_rmse(const std::vector<VectorXd>& realized, const std::vector<VectorXd>& optimal) {
  if (realized.size() != optimal.size()) {
    throw LengthMismatch("weight series lengths differ: " + std::to_string(realized.size()) +
                         " vs " + std::to_string(optimal.size()));
  }
  if (realized.empty()) throw LengthMismatch("need at least one day of weights");
  double ss = 0.0;
  for (std::size_t t = 0; t < realized.size(); ++t) {
    ss += (realized[t] - optimal[t]).squaredNorm();
  }
  return std::sqrt(ss / static_cast<double>(realized.size()));
}

double metric_ar(const std::vector<double>& values, const std::vector<Date>& dates) {
  if (values.size() < 2 || values.size() != dates.size()) {
    throw LengthMismatch("value and date series must align with >= 2 points");
  }
  for (double v : values) {
    if (!(v > 0)) throw NonPositiveValue("portfolio values must be positive");
  }
  const int days = dates.back() - dates.front();
  if (days < 1) throw NonPositiveValue("value series spans no time");
  return std::pow(values.back() / values.front(), 365.0 / static_cast<double>(days)) - 1.0;
}

double metric_sr(const std::vector<double>& portfolio_gross,
                 const std::vector<double>& vw_gross) {
  if (portfolio_gross.size() != vw_gross.size() || portfolio_gross.empty()) {
    throw LengthMismatch("return series lengths differ");
  }
  double mean_ratio = 0.0;
  for (std::size_t t = 0; t < portfolio_gross.size(); ++t) {
    if (vw_gross[t] == 0.0) throw BacktestError("zero base gross return");
    mean_ratio += portfolio_gross[t] / vw_gross[t];
  }
  mean_ratio /= static_cast<double>(portfolio_gross.size());
  const double sd_p = sample_sd(portfolio_gross);
  const double sd_vw = sample_sd(vw_gross);
  if (sd_p == 0.0 || sd_vw == 0.0) {
    throw DegenerateVolatility("return volatility is zero");
  }
  return mean_ratio / (sd_p / sd_vw);
}

double metric_mdd(const std::vector<double>& values) {
  if (values.empty()) throw LengthMismatch("need at least one value");
  double peak = 0.0;
  double mdd = 0.0;
  for (double v : values) {
    if (!(v > 0)) throw NonPositiveValue("portfolio values must be positive");
    peak = std::max(peak, v);
    mdd = std::max(mdd, (peak - v) / peak);
  }
  return mdd;
}

double metric_sortino(const std::vector<double>& portfolio_gross,
                      const std::vector<double>& vw_gross) {
  if (portfolio_gross.size() != vw_gross.size() || portfolio_gross.empty()) {
    throw LengthMismatch("return series lengths differ");
  }
  double mean_ratio = 0.0;
  for (std::size_t t = 0; t < portfolio_gross.size(); ++t) {
    if (vw_gross[t] == 0.0) throw BacktestError("zero base gross return");
    mean_ratio += portfolio_gross[t] / vw_gross[t];
  }
  mean_ratio /= static_cast<double>(portfolio_gross.size());
  const double dd_p = downside_rms(portfolio_gross);
  const double dd_vw = downside_rms(vw_gross);
  if (dd_p == 0.0 || dd_vw == 0.0) {
    throw DegenerateVolatility("downside deviation is zero");
  }
  return mean_ratio / (dd_p / dd_vw);
}

}  // namespace bayesviews::backtest
