#include "bayesviews/cli.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace bayesviews::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, v);
  return buf;
}

void atomic_write(const std::string& path, const std::string& body) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw CliError("cannot write " + tmp);
    out << body;
  }
  fs::rename(tmp, path);
}

}  // namespace

RunConfig config_from_json(const std::string& text, RunConfig base) {
  json j = json::parse(text);
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "data_dir") base.data_dir = value.get<std::string>();
    else if (key == "strategy") {
      base.strategies = value.is_array() ? value.get<std::vector<std::string>>()
                                         : split_csv_list(value.get<std::string>());
    } else if (key == "timespan") {
      base.timespans.clear();
      if (value.is_array()) {
        for (const auto& v : value) base.timespans.push_back(v.get<int>());
      } else if (value.is_number()) {
        base.timespans.push_back(value.get<int>());
      } else {
        for (const auto& v : split_csv_list(value.get<std::string>())) {
          base.timespans.push_back(std::stoi(v));
        }
      }
    } else if (key == "delta") base.delta = value.get<double>();
    else if (key == "tau") base.tau = value.get<double>();
    else if (key == "model") base.model.model = value.get<std::string>();
    else if (key == "d") base.model.d = value.get<double>();
    else if (key == "m_activate") base.model.m_activate = value.get<int>();
    else if (key == "bptt_horizon") base.model.bptt_horizon = value.get<int>();
    else if (key == "learning_rate") base.model.learning_rate = value.get<double>();
    else if (key == "sentiment" || key == "use_sentiment") {
      base.model.use_sentiment =
          value.is_boolean() ? value.get<bool>() : value.get<std::string>() == "on";
    } else if (key == "use_capital") base.model.use_capital = value.get<bool>();
    else if (key == "seed") base.seed = value.get<std::uint64_t>();
    else if (key == "start") base.start = Date::parse_iso(value.get<std::string>());
    else if (key == "end") base.end = Date::parse_iso(value.get<std::string>());
    else if (key == "out") base.out_dir = value.get<std::string>();
    else if (key == "narrative") base.narrative = value.get<bool>();
    else if (key == "sortino") base.sortino = value.get<bool>();
    else if (key == "random_view_bound") base.random_view_bound = value.get<double>();
    else if (key == "initial_capital") base.initial_capital = value.get<double>();
    else throw UsageError("unknown config key '" + key + "'");
  }
  return base;
}

RunConfig config_from_json_file(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str(), std::move(base));
}

void validate_config(const RunConfig& config) {
  if (config.data_dir.empty()) {
    throw UsageError("no data directory (use --data-dir or BAYESVIEWS_DATA_DIR)");
  }
  if (config.strategies.empty()) throw UsageError("no strategies requested");
  for (const auto& s : config.strategies) {
    try {
      backtest::parse_strategy(s);
    } catch (const backtest::BacktestError& e) {
      throw UsageError(e.what());
    }
  }
  for (int t : config.timespans) {
    if (t < 31) throw UsageError("timespan must be at least 31 days, got " + std::to_string(t));
  }
  if (config.timespans.empty()) throw UsageError("no timespan given");
  if (!(config.delta > 0) || !(config.tau > 0)) throw UsageError("delta and tau must be positive");
  if (config.model.model != "lstm" && config.model.model != "denfis") {
    throw UsageError("model must be 'lstm' or 'denfis'");
  }
  if (!(config.initial_capital > 0)) throw UsageError("initial capital must be positive");
  if (config.start && config.end && *config.end < *config.start) {
    throw UsageError("end date precedes start date");
  }
}

std::vector<std::string> discover_tickers(const std::string& price_path) {
  std::ifstream in(price_path);
  if (!in) throw CliError("cannot open " + price_path);
  std::string line;
  if (!std::getline(in, line)) throw CliError("empty file " + price_path);

  std::stringstream header(line);
  std::string col;
  int ticker_col = -1, idx = 0;
  while (std::getline(header, col, ',')) {
    while (!col.empty() && (col.back() == '\r' || col.back() == ' ')) col.pop_back();
    if (col == "ticker") ticker_col = idx;
    ++idx;
  }
  if (ticker_col < 0) throw marketdata::MissingColumn("column 'ticker' missing in " + price_path);

  std::vector<std::string> tickers;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::stringstream row(line);
    std::string field;
    for (int c = 0; std::getline(row, field, ','); ++c) {
      if (c == ticker_col) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
        if (seen.insert(field).second) tickers.push_back(field);
        break;
      }
    }
  }
  return tickers;
}

marketdata::MarketFrame prepare_frame(const RunConfig& config) {
  const fs::path dir(config.data_dir);
  const auto tickers = discover_tickers((dir / "prices.csv").string());
  if (tickers.empty()) throw CliError("no tickers found in " + (dir / "prices.csv").string());
  marketdata::AssetUniverse universe(tickers);

  auto frame = marketdata::load_csv((dir / "prices.csv").string(), (dir / "volumes.csv").string(),
                                    (dir / "mcap.csv").string(), (dir / "sentiment.csv").string(),
                                    universe);
  if (fs::exists(dir / "splits.csv")) {
    frame = marketdata::adjust_splits(frame, marketdata::load_splits_csv((dir / "splits.csv").string()));
  }
  frame = marketdata::fill_missing(frame);
  if (config.start || config.end) {
    const Date lo = config.start.value_or(frame.date(0));
    const Date hi = config.end.value_or(frame.date(frame.n_days() - 1));
    frame = marketdata::restrict_dates(frame, lo, hi);
  }
  return frame;
}

std::vector<GridCell> expand_grid(const RunConfig& config) {
  std::vector<GridCell> cells;
  std::set<std::string> labels;
  for (const auto& name : config.strategies) {
    const auto kind = backtest::parse_strategy(name);
    for (int span : config.timespans) {
      backtest::Strategy s;
      s.kind = kind;
      s.timespan = span;
      s.model = config.model;
      s.seed = config.seed;
      s.random_view_bound = config.random_view_bound;
      std::string label = name;
      if (backtest::strategy_uses_timespan(kind)) label += std::to_string(span);
      if (labels.insert(label).second) {
        cells.push_back(GridCell{label, s});
      }
    }
  }
  return cells;
}

std::vector<backtest::BacktestReport> run_backtests(const RunConfig& config, std::ostream& log) {
  validate_config(config);
  const auto frame = prepare_frame(config);
  fs::create_directories(config.out_dir);

  backtest::BacktestConfig bc;
  bc.delta = config.delta;
  bc.tau = config.tau;
  bc.initial_capital = config.initial_capital;
  bc.record_narrative = config.narrative;
  bc.compute_sortino = config.sortino;

  std::vector<backtest::BacktestReport> reports;
  std::ostringstream table;
  table << "strategy,rmse,sr,mdd_pct,ar_pct";
  if (config.sortino) table << ",sortino";
  table << '\n';

  for (const auto& cell : expand_grid(config)) {
    log << "running " << cell.label << " over " << frame.n_days() << " days..." << std::endl;
    auto report = backtest::run(cell.strategy, frame, bc);
    report.label = cell.label;

    const fs::path base = fs::path(config.out_dir) / cell.label;
    atomic_write(base.string() + ".report.json", backtest::report_to_json(report) + "\n");
    backtest::write_values_csv(report, base.string() + ".values.csv.tmp");
    fs::rename(base.string() + ".values.csv.tmp", base.string() + ".values.csv");
    backtest::write_weights_csv(report, base.string() + ".weights.csv.tmp");
    fs::rename(base.string() + ".weights.csv.tmp", base.string() + ".weights.csv");

    table << cell.label << ',' << fmt("%.4f", report.metrics.rmse) << ','
          << fmt("%.4f", report.metrics.sr) << ',' << fmt("%.2f", report.metrics.mdd * 100.0)
          << ',' << fmt("%.2f", report.metrics.ar * 100.0);
    if (config.sortino) table << ',' << fmt("%.4f", report.metrics.sortino.value_or(0.0));
    table << '\n';

    log << "  rmse=" << fmt("%.4f", report.metrics.rmse) << " sr=" << fmt("%.2f", report.metrics.sr)
        << " mdd=" << fmt("%.2f%%", report.metrics.mdd * 100.0)
        << " ar=" << fmt("%.2f%%", report.metrics.ar * 100.0)
        << " final=" << fmt("%.2f", report.values.back()) << std::endl;
    reports.push_back(std::move(report));
  }

  atomic_write((fs::path(config.out_dir) / "metrics_table.csv").string(), table.str());
  return reports;
}

Eigen::VectorXd withdraw_fractions(const Eigen::VectorXd& w_cur, const Eigen::VectorXd& w_next) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(w_cur.size());
  for (int i = 0; i < w_cur.size(); ++i) {
    if (w_cur(i) > 0) out(i) = std::max(0.0, 1.0 - w_next(i) / w_cur(i));
  }
  return out;
}

namespace {

std::string opinions_phrase(const marketdata::SentimentRecord& r, const std::string& ticker) {
  if (r.is_empty()) return "no opinion on " + ticker + " stock";
  std::ostringstream s;
  s << r.pos_count << " positive opinion" << (r.pos_count == 1 ? "" : "s") << " of polarity "
    << fmt("%+.2f", r.pos_intensity) << ", " << r.neg_count << " negative opinion"
    << (r.neg_count == 1 ? "" : "s") << " of polarity " << fmt("%+.2f", r.neg_intensity) << " on "
    << ticker << " stock";
  return s.str();
}

std::string join_clauses(const std::vector<std::string>& parts) {
  std::ostringstream s;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) s << (i + 1 == parts.size() ? "; and " : "; ");
    s << parts[i];
  }
  return s.str();
}

}  // namespace

std::string render_narrative(const backtest::NarrativeRecord& record,
                             const std::vector<std::string>& tickers) {
  const int n = static_cast<int>(tickers.size());
  std::ostringstream out;

  std::vector<std::string> mood;
  for (int i = 0; i < n; ++i) mood.push_back(opinions_phrase(record.sentiment[i], tickers[i]));
  out << "On " << record.date.to_iso() << ", we observe " << join_clauses(mood) << ".\n";

  // confidence: normalized inverse view variance across the held views
  double total_precision = 0.0;
  for (int i = 0; i < n; ++i) {
    if (std::isfinite(record.view_omega(i)) && record.view_omega(i) > 0) {
      total_precision += 1.0 / record.view_omega(i);
    }
  }
  std::vector<std::string> viewlines;
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(record.view_omega(i)) || !(record.view_omega(i) > 0)) continue;
    const double confidence = (1.0 / record.view_omega(i)) / total_precision * 100.0;
    const double outperf = (record.view_q(i) - record.market_return) * 100.0;
    viewlines.push_back(fmt("%.2f%%", confidence) + " confidence that " + tickers[i] +
                        " will outperform the market by " + fmt("%+.2f%%", outperf));
  }
  if (!viewlines.empty()) {
    out << "Given the historical prices and trading volumes of the stocks, we have "
        << join_clauses(viewlines) << ".\n";
  }

  std::vector<std::string> holdings;
  for (int i = 0; i < n; ++i) {
    if (record.weights_current(i) > 5e-5) {
      holdings.push_back(fmt("%.2f%%", record.weights_current(i) * 100.0) + " on " + tickers[i]);
    }
  }
  out << "Our current portfolio invests " << join_clauses(holdings) << ".";

  if (!record.has_next) return out.str() + "\n";

  const auto withdraw = withdraw_fractions(record.weights_current, record.weights_next);
  std::vector<std::string> outflows, inflows;
  for (int i = 0; i < n; ++i) {
    if (record.weights_current(i) > 5e-5 && withdraw(i) > 5e-5) {
      if (withdraw(i) > 1.0 - 5e-5) {
        outflows.push_back("all the investment on " + tickers[i]);
      } else {
        outflows.push_back(fmt("%.2f%%", withdraw(i) * 100.0) + " of the investment on " +
                           tickers[i]);
      }
    }
    if (record.weights_next(i) > record.weights_current(i) + 5e-5) {
      inflows.push_back(tickers[i]);
    }
  }
  out << " By " << (record.date + 1).to_iso() << ", we should ";
  if (outflows.empty()) {
    out << "keep the current allocation.";
  } else {
    out << "withdraw " << join_clauses(outflows) << ", and re-invest "
        << (outflows.size() == 1 ? "it" : "them") << " onto ";
    for (std::size_t i = 0; i < inflows.size(); ++i) {
      if (i > 0) out << (i + 1 == inflows.size() ? " and " : ", ");
      out << inflows[i];
    }
    out << ".";
  }
  out << '\n';
  return out.str();
}

std::string narrative_to_json(const backtest::NarrativeRecord& record,
                              const std::vector<std::string>& tickers) {
  json j;
  j["date"] = record.date.to_iso();
  j["value"] = record.value;
  json per_asset = json::array();
  double total_precision = 0.0;
  for (int i = 0; i < record.view_omega.size(); ++i) {
    if (std::isfinite(record.view_omega(i)) && record.view_omega(i) > 0) {
      total_precision += 1.0 / record.view_omega(i);
    }
  }
  const auto withdraw = record.has_next
                            ? withdraw_fractions(record.weights_current, record.weights_next)
                            : Eigen::VectorXd();
  for (std::size_t i = 0; i < tickers.size(); ++i) {
    const int k = static_cast<int>(i);
    json a;
    a["ticker"] = tickers[i];
    a["pos_count"] = record.sentiment[i].pos_count;
    a["neg_count"] = record.sentiment[i].neg_count;
    a["pos_intensity"] = record.sentiment[i].pos_intensity;
    a["neg_intensity"] = record.sentiment[i].neg_intensity;
    if (std::isfinite(record.view_omega(k)) && record.view_omega(k) > 0) {
      a["confidence_pct"] = (1.0 / record.view_omega(k)) / total_precision * 100.0;
      a["outperform_market_pct"] = (record.view_q(k) - record.market_return) * 100.0;
    }
    a["weight_current"] = record.weights_current(k);
    if (record.has_next) {
      a["weight_next"] = record.weights_next(k);
      a["withdraw_fraction"] = withdraw(k);
    }
    per_asset.push_back(std::move(a));
  }
  j["assets"] = std::move(per_asset);
  j["market_return"] = record.market_return;
  return j.dump(2);
}

const backtest::NarrativeRecord& find_narrative(const backtest::BacktestReport& report,
                                                Date date) {
  for (const auto& r : report.narrative) {
    if (r.date == date) return r;
  }
  throw DateNotInRun("no narrative record for " + date.to_iso() + " in report '" + report.label +
                     "' (was the backtest run with narrative logging?)");
}

ValidationReport validate_data(const std::string& data_dir) {
  ValidationReport report;
  const fs::path dir(data_dir);

  for (const char* name : {"prices.csv", "volumes.csv", "mcap.csv", "sentiment.csv"}) {
    if (!fs::exists(dir / name)) {
      report.errors.push_back(std::string("missing file: ") + name);
    }
  }
  if (!report.errors.empty()) return report;

  std::vector<marketdata::SplitEvent> splits;
  if (fs::exists(dir / "splits.csv")) {
    try {
      splits = marketdata::load_splits_csv((dir / "splits.csv").string());
    } catch (const marketdata::DataError& e) {
      report.errors.push_back(e.what());
    }
  }

  try {
    const auto tickers = discover_tickers((dir / "prices.csv").string());
    if (tickers.empty()) {
      report.errors.push_back("prices.csv contains no data rows");
      return report;
    }
    marketdata::AssetUniverse universe(tickers);
    const auto frame = marketdata::load_csv(
        (dir / "prices.csv").string(), (dir / "volumes.csv").string(), (dir / "mcap.csv").string(),
        (dir / "sentiment.csv").string(), universe);

    for (int i = 0; i < frame.n_assets(); ++i) {
      TickerCoverage cov;
      cov.ticker = frame.universe().ticker(i);
      Date first, last;
      bool any = false;
      double prev_price = std::numeric_limits<double>::quiet_NaN();
      Date prev_date;
      for (int t = 0; t < frame.n_days(); ++t) {
        const double p = frame.price_matrix()(t, i);
        if (std::isnan(p)) continue;
        if (!any) first = frame.date(t);
        any = true;
        last = frame.date(t);
        ++cov.observed_days;

        if (!std::isnan(prev_price)) {
          const double jump = p / prev_price;
          if (jump >= 3.0 || jump <= 1.0 / 3.0) {
            const bool explained =
                std::any_of(splits.begin(), splits.end(), [&](const marketdata::SplitEvent& ev) {
                  return ev.ticker == cov.ticker && ev.date > prev_date &&
                         ev.date <= frame.date(t);
                });
            if (!explained) {
              report.warnings.push_back("price of " + cov.ticker + " jumps by " +
                                        fmt("%.2f", jump) + "x into " + frame.date(t).to_iso() +
                                        " with no matching splits.csv entry");
            }
          }
        }
        prev_price = p;
        prev_date = frame.date(t);
      }
      if (any) {
        cov.first = first;
        cov.last = last;
        cov.missing_days = (last - first + 1) - cov.observed_days;
      }
      report.coverage.push_back(cov);
    }
  } catch (const marketdata::DataError& e) {
    report.errors.push_back(e.what());
  }

  report.ok = report.errors.empty();
  return report;
}

std::string ValidationReport::render() const {
  std::ostringstream out;
  if (ok) {
    out << "OK\n";
    out << "ticker,first,last,observed_days,missing_days\n";
    for (const auto& c : coverage) {
      out << c.ticker << ',' << c.first.to_iso() << ',' << c.last.to_iso() << ','
          << c.observed_days << ',' << c.missing_days << '\n';
    }
  } else {
    for (const auto& e : errors) out << "error: " << e << '\n';
  }
  for (const auto& w : warnings) out << "warning: " << w << '\n';
  return out.str();
}

}  // namespace bayesviews::cli
