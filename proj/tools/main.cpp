#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "bayesviews/cli.hpp"

namespace {

using namespace bayesviews;

struct CommonFlags {
  std::string config_file;
  std::string data_dir;
  std::string strategy;
  std::string timespan;
  double delta = -1;
  double tau = -1;
  std::string model;
  std::string sentiment;
  std::string start, end;
  std::int64_t seed = -1;
  std::string out;
  std::string explain_date;
  bool sortino = false;
  bool no_narrative = false;
};

void add_common_options(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_file, "flat JSON config file; flags override it");
  cmd->add_option("--data-dir", f.data_dir, "directory with prices/volumes/mcap/sentiment CSVs");
  cmd->add_option("--strategy", f.strategy,
                  "comma list: vw,markowitz,bl_random,bl_sentiment,nt,nt_sentiment,oracle");
  cmd->add_option("--timespan", f.timespan, "covariance window in days (comma list, e.g. 90,180)");
  cmd->add_option("--delta", f.delta, "risk aversion coefficient");
  cmd->add_option("--tau", f.tau, "confidence scalar of the equilibrium estimate");
  cmd->add_option("--model", f.model, "view generator: denfis|lstm");
  cmd->add_option("--sentiment", f.sentiment, "on|off: feed sentiment features to the model");
  cmd->add_option("--start", f.start, "first date (ISO), inclusive");
  cmd->add_option("--end", f.end, "last date (ISO), inclusive");
  cmd->add_option("--seed", f.seed, "seed for model init and random views");
  cmd->add_option("--out", f.out, "output directory for reports");
  cmd->add_flag("--sortino", f.sortino, "also report the downside-risk ratio");
  cmd->add_flag("--no-narrative", f.no_narrative, "skip per-day narrative logging");
}

cli::RunConfig build_config(const CommonFlags& f) {
  cli::RunConfig cfg;
  if (const char* env = std::getenv("BAYESVIEWS_DATA_DIR")) cfg.data_dir = env;
  if (!f.config_file.empty()) cfg = cli::config_from_json_file(f.config_file, std::move(cfg));

  // flags win over the config file
  if (!f.data_dir.empty()) cfg.data_dir = f.data_dir;
  if (!f.strategy.empty()) {
    cfg.strategies.clear();
    std::stringstream ss(f.strategy);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) cfg.strategies.push_back(item);
    }
  }
  if (!f.timespan.empty()) {
    cfg.timespans.clear();
    std::stringstream ss(f.timespan);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!item.empty()) cfg.timespans.push_back(std::stoi(item));
    }
  }
  if (f.delta > 0) cfg.delta = f.delta;
  if (f.tau > 0) cfg.tau = f.tau;
  if (!f.model.empty()) cfg.model.model = f.model;
  if (!f.sentiment.empty()) {
    if (f.sentiment != "on" && f.sentiment != "off") {
      throw cli::UsageError("--sentiment expects on|off");
    }
    cfg.model.use_sentiment = f.sentiment == "on";
  }
  if (!f.start.empty()) cfg.start = Date::parse_iso(f.start);
  if (!f.end.empty()) cfg.end = Date::parse_iso(f.end);
  if (f.seed >= 0) cfg.seed = static_cast<std::uint64_t>(f.seed);
  if (!f.out.empty()) cfg.out_dir = f.out;
  if (f.sortino) cfg.sortino = true;
  if (f.no_narrative) cfg.narrative = false;
  return cfg;
}

int cmd_backtest(const CommonFlags& flags) {
  auto cfg = build_config(flags);
  cli::validate_config(cfg);
  const auto reports = cli::run_backtests(cfg, std::cout);
  std::cout << "wrote " << reports.size() << " report(s) and metrics_table.csv to " << cfg.out_dir
            << std::endl;
  return 0;
}

int cmd_explain(const CommonFlags& flags, const std::string& report_path) {
  if (flags.explain_date.empty()) throw cli::UsageError("--explain-date is required");
  const Date date = Date::parse_iso(flags.explain_date);

  std::string path = report_path;
  if (path.empty()) {
    auto cfg = build_config(flags);
    if (cfg.strategies.size() != 1) {
      throw cli::UsageError("explain needs --report or a single --strategy with --out");
    }
    auto cells = cli::expand_grid(cfg);
    path = cfg.out_dir + "/" + cells.front().label + ".report.json";
  }
  std::ifstream in(path);
  if (!in) throw cli::CliError("cannot read report " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto report = backtest::report_from_json(ss.str());
  const auto& record = cli::find_narrative(report, date);

  std::cout << cli::render_narrative(record, report.tickers) << '\n';
  std::cout << cli::narrative_to_json(record, report.tickers) << std::endl;
  return 0;
}

int cmd_validate(const CommonFlags& flags) {
  auto cfg = build_config(flags);
  if (cfg.data_dir.empty()) {
    throw cli::UsageError("no data directory (use --data-dir or BAYESVIEWS_DATA_DIR)");
  }
  const auto report = cli::validate_data(cfg.data_dir);
  std::cout << report.render();
  return report.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian market views: Black-Litterman allocation with learned views"};
  app.require_subcommand(1);

  CommonFlags back_flags, explain_flags, validate_flags;
  std::string report_path;

  auto* back = app.add_subcommand("backtest", "run the strategy grid and write reports");
  add_common_options(back, back_flags);

  auto* explain = app.add_subcommand("explain", "print one day's narrative from a report");
  add_common_options(explain, explain_flags);
  explain->add_option("--report", report_path, "path to a .report.json file");
  explain->add_option("--explain-date", explain_flags.explain_date, "date to explain (ISO)");

  auto* validate = app.add_subcommand("validate-data", "schema and coverage checks on a data dir");
  add_common_options(validate, validate_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (back->parsed()) return cmd_backtest(back_flags);
    if (explain->parsed()) return cmd_explain(explain_flags, report_path);
    if (validate->parsed()) return cmd_validate(validate_flags);
  } catch (const cli::UsageError& e) {
    std::cerr << "usage error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 2;
}
