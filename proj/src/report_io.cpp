#include "bayesviews/backtest.hpp"

#include <nlohmann/json.hpp>

#include <fstream>

namespace bayesviews::backtest {

namespace {

using nlohmann::json;

json vec_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vec_from_json(const json& j) {
  Eigen::VectorXd v(static_cast<int>(j.size()));
  for (int i = 0; i < v.size(); ++i) v(i) = j.at(i).get<double>();
  return v;
}

}  // namespace

std::string report_to_json(const BacktestReport& report) {
  json j;
  j["label"] = report.label;
  j["tickers"] = report.tickers;

  json metrics;
  metrics["rmse"] = report.metrics.rmse;
  metrics["ar"] = report.metrics.ar;
  metrics["sr"] = report.metrics.sr;
  metrics["mdd"] = report.metrics.mdd;
  if (report.metrics.sortino) metrics["sortino"] = *report.metrics.sortino;
  j["metrics"] = std::move(metrics);

  json daily = json::array();
  for (const auto& d : report.daily) {
    json row;
    row["date"] = d.date.to_iso();
    row["value"] = d.value;
    row["gross_return"] = d.gross_return;
    row["weights_raw"] = vec_to_json(d.weights_raw);
    row["weights_held"] = vec_to_json(d.weights_held);
    row["w_star"] = vec_to_json(d.w_star);
    daily.push_back(std::move(row));
  }
  j["daily"] = std::move(daily);
  j["final_value"] = report.values.back();

  if (!report.narrative.empty()) {
    json stories = json::array();
    for (const auto& s : report.narrative) {
      json row;
      row["date"] = s.date.to_iso();
      row["value"] = s.value;
      json senti = json::array();
      for (const auto& r : s.sentiment) {
        senti.push_back({{"pos_count", r.pos_count},
                         {"neg_count", r.neg_count},
                         {"pos_intensity", r.pos_intensity},
                         {"neg_intensity", r.neg_intensity}});
      }
      row["sentiment"] = std::move(senti);
      row["view_q"] = vec_to_json(s.view_q);
      row["view_omega"] = vec_to_json(s.view_omega);
      row["market_return"] = s.market_return;
      row["weights_current"] = vec_to_json(s.weights_current);
      if (s.has_next) row["weights_next"] = vec_to_json(s.weights_next);
      stories.push_back(std::move(row));
    }
    j["narrative"] = std::move(stories);
  }
  return j.dump(2);
}

BacktestReport report_from_json(const std::string& text) {
  const json j = json::parse(text);
  BacktestReport report;
  report.label = j.at("label").get<std::string>();
  report.tickers = j.at("tickers").get<std::vector<std::string>>();
  report.metrics.rmse = j.at("metrics").at("rmse").get<double>();
  report.metrics.ar = j.at("metrics").at("ar").get<double>();
  report.metrics.sr = j.at("metrics").at("sr").get<double>();
  report.metrics.mdd = j.at("metrics").at("mdd").get<double>();
  if (j.at("metrics").contains("sortino")) {
    report.metrics.sortino = j.at("metrics").at("sortino").get<double>();
  }
  for (const auto& row : j.at("daily")) {
    DailyRecord d;
    d.date = Date::parse_iso(row.at("date").get<std::string>());
    d.value = row.at("value").get<double>();
    d.gross_return = row.at("gross_return").get<double>();
    d.weights_raw = vec_from_json(row.at("weights_raw"));
    d.weights_held = vec_from_json(row.at("weights_held"));
    d.w_star = vec_from_json(row.at("w_star"));
    report.values.push_back(d.value);
    report.value_dates.push_back(d.date);
    report.gross.push_back(d.gross_return);
    report.daily.push_back(std::move(d));
  }
  if (!report.daily.empty()) {
    report.values.push_back(j.at("final_value").get<double>());
    report.value_dates.push_back(report.daily.back().date + 1);
  }
  if (j.contains("narrative")) {
    for (const auto& row : j.at("narrative")) {
      NarrativeRecord s;
      s.date = Date::parse_iso(row.at("date").get<std::string>());
      s.value = row.at("value").get<double>();
      for (const auto& r : row.at("sentiment")) {
        marketdata::SentimentRecord rec;
        rec.pos_count = r.at("pos_count").get<std::int64_t>();
        rec.neg_count = r.at("neg_count").get<std::int64_t>();
        rec.pos_intensity = r.at("pos_intensity").get<double>();
        rec.neg_intensity = r.at("neg_intensity").get<double>();
        s.sentiment.push_back(rec);
      }
      s.view_q = vec_from_json(row.at("view_q"));
      s.view_omega = vec_from_json(row.at("view_omega"));
      s.market_return = row.at("market_return").get<double>();
      s.weights_current = vec_from_json(row.at("weights_current"));
      if (row.contains("weights_next")) {
        s.weights_next = vec_from_json(row.at("weights_next"));
        s.has_next = true;
      }
      report.narrative.push_back(std::move(s));
    }
  }
  return report;
}

void write_report_json(const BacktestReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw BacktestError("cannot write " + path);
  out << report_to_json(report) << '\n';
}

void write_values_csv(const BacktestReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw BacktestError("cannot write " + path);
  out << "date,value\n";
  char buf[48];
  for (std::size_t k = 0; k < report.values.size(); ++k) {
    std::snprintf(buf, sizeof(buf), "%.10f", report.values[k]);
    out << report.value_dates[k].to_iso() << ',' << buf << '\n';
  }
}

void write_weights_csv(const BacktestReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw BacktestError("cannot write " + path);
  out << "date";
  for (const auto& t : report.tickers) out << ",held_" << t;
  for (const auto& t : report.tickers) out << ",raw_" << t;
  out << '\n';
  char buf[48];
  for (const auto& d : report.daily) {
    out << d.date.to_iso();
    for (int i = 0; i < d.weights_held.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.10f", d.weights_held(i));
      out << ',' << buf;
    }
    for (int i = 0; i < d.weights_raw.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.10f", d.weights_raw(i));
      out << ',' << buf;
    }
    out << '\n';
  }
}

}  // namespace bayesviews::backtest
