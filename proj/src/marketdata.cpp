#include "bayesviews/marketdata.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace bayesviews::marketdata {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string where(const std::string& file, std::size_t line) {
  return file + ":" + std::to_string(line);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim spaces and a possible trailing CR
    auto b = field.find_first_not_of(" \t\r");
    auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double(const std::string& s, const std::string& file, std::size_t line) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw MalformedRow("unparseable number '" + s + "' at " + where(file, line));
  }
  return v;
}

std::int64_t parse_count(const std::string& s, const std::string& file, std::size_t line) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size() || v < 0) {
    throw MalformedRow("expected a nonnegative count, got '" + s + "' at " + where(file, line));
  }
  return v;
}

Date parse_date(const std::string& s, const std::string& file, std::size_t line) {
  try {
    return Date::parse_iso(s);
  } catch (const std::invalid_argument& e) {
    throw MalformedRow(std::string(e.what()) + " at " + where(file, line));
  }
}

/// Streams a CSV file row by row, resolving columns by header name.
class CsvReader {
 public:
  CsvReader(const std::string& path, const std::vector<std::string>& required)
      : path_(path), in_(path) {
    if (!in_) throw DataError("cannot open " + path);
    std::string header;
    if (!std::getline(in_, header)) throw MissingColumn("empty file: " + path);
    line_no_ = 1;
    auto names = split_line(header);
    for (const auto& col : required) {
      auto it = std::find(names.begin(), names.end(), col);
      if (it == names.end()) {
        throw MissingColumn("column '" + col + "' missing in " + where(path, 1));
      }
      columns_.push_back(static_cast<int>(it - names.begin()));
    }
    n_header_fields_ = names.size();
  }

  /// Next row's required fields, in the order requested. False at EOF.
  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (line.empty() || line == "\r") continue;
      auto parts = split_line(line);
      if (parts.size() < n_header_fields_) {
        throw MalformedRow("expected " + std::to_string(n_header_fields_) + " fields at " +
                           where(path_, line_no_));
      }
      fields.clear();
      for (int c : columns_) fields.push_back(parts[c]);
      return true;
    }
    return false;
  }

  std::size_t line() const { return line_no_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
  std::vector<int> columns_;
  std::size_t n_header_fields_ = 0;
};

struct ValueCell {
  Date date;
  int asset;
};

struct CellLess {
  bool operator()(const ValueCell& a, const ValueCell& b) const {
    if (a.date != b.date) return a.date < b.date;
    return a.asset < b.asset;
  }
};

}  // namespace

AssetUniverse::AssetUniverse(std::vector<std::string> tickers) : tickers_(std::move(tickers)) {
  if (tickers_.empty()) throw std::invalid_argument("asset universe must contain at least one ticker");
  std::unordered_set<std::string> seen;
  for (const auto& t : tickers_) {
    if (t.empty()) throw std::invalid_argument("empty ticker in asset universe");
    if (!seen.insert(t).second) throw std::invalid_argument("duplicate ticker '" + t + "'");
  }
}

int AssetUniverse::index_of(const std::string& ticker) const {
  auto it = std::find(tickers_.begin(), tickers_.end(), ticker);
  return it == tickers_.end() ? -1 : static_cast<int>(it - tickers_.begin());
}

MarketFrame::MarketFrame(AssetUniverse universe, std::vector<Date> dates)
    : universe_(std::move(universe)), dates_(std::move(dates)) {
  for (std::size_t i = 1; i < dates_.size(); ++i) {
    if (!(dates_[i - 1] < dates_[i])) {
      throw std::invalid_argument("frame dates must be strictly increasing");
    }
  }
  const int t = static_cast<int>(dates_.size());
  const int n = universe_.n();
  price_ = Eigen::MatrixXd::Constant(t, n, kNaN);
  volume_ = Eigen::MatrixXd::Constant(t, n, kNaN);
  mcap_ = Eigen::MatrixXd::Constant(t, n, kNaN);
  sentiment_.assign(static_cast<std::size_t>(t) * n, SentimentRecord{});
}

int MarketFrame::index_of(Date d) const {
  auto it = std::lower_bound(dates_.begin(), dates_.end(), d);
  if (it == dates_.end() || *it != d) return -1;
  return static_cast<int>(it - dates_.begin());
}

MarketFrame load_csv(const std::string& price_path, const std::string& volume_path,
                     const std::string& mcap_path, const std::string& sentiment_path,
                     const AssetUniverse& universe) {
  std::unordered_map<std::string, int> requested;
  for (int i = 0; i < universe.n(); ++i) requested[universe.ticker(i)] = i;

  // One pass per value file: (date, requested-asset) -> value.
  auto read_value_file = [&](const std::string& path, bool positive_price,
                             std::map<ValueCell, double, CellLess>& out,
                             std::set<std::string>& tickers_seen) {
    CsvReader reader(path, {"date", "ticker", "value"});
    std::vector<std::string> f;
    while (reader.next(f)) {
      auto it = requested.find(f[1]);
      if (it == requested.end()) {
        throw UnknownTicker("ticker '" + f[1] + "' not in the requested universe at " +
                            where(path, reader.line()));
      }
      Date d = parse_date(f[0], path, reader.line());
      double v = parse_double(f[2], path, reader.line());
      if (positive_price && v <= 0.0) {
        throw NonPositivePrice("price " + f[2] + " <= 0 at " + where(path, reader.line()));
      }
      if (!positive_price && v < 0.0) {
        throw MalformedRow("negative value " + f[2] + " at " + where(path, reader.line()));
      }
      tickers_seen.insert(f[1]);
      auto [pos, inserted] = out.emplace(ValueCell{d, it->second}, v);
      if (!inserted) {
        throw DuplicateDateTicker("duplicate (" + f[0] + ", " + f[1] + ") at " +
                                  where(path, reader.line()));
      }
    }
  };

  std::map<ValueCell, double, CellLess> prices, volumes, mcaps;
  std::set<std::string> price_tickers, other;
  read_value_file(price_path, true, prices, price_tickers);
  read_value_file(volume_path, false, volumes, other);
  read_value_file(mcap_path, false, mcaps, other);

  std::map<ValueCell, SentimentRecord, CellLess> sentiments;
  {
    CsvReader reader(sentiment_path,
                     {"date", "ticker", "pos_count", "neg_count", "pos_intensity", "neg_intensity"});
    std::vector<std::string> f;
    while (reader.next(f)) {
      auto it = requested.find(f[1]);
      if (it == requested.end()) {
        throw UnknownTicker("ticker '" + f[1] + "' not in the requested universe at " +
                            where(sentiment_path, reader.line()));
      }
      SentimentRecord rec;
      rec.pos_count = parse_count(f[2], sentiment_path, reader.line());
      rec.neg_count = parse_count(f[3], sentiment_path, reader.line());
      rec.pos_intensity = parse_double(f[4], sentiment_path, reader.line());
      rec.neg_intensity = parse_double(f[5], sentiment_path, reader.line());
      if (rec.pos_intensity < 0.0 || rec.neg_intensity > 0.0) {
        throw MalformedRow("intensity signs invalid at " + where(sentiment_path, reader.line()));
      }
      Date d = parse_date(f[0], sentiment_path, reader.line());
      auto [pos, inserted] = sentiments.emplace(ValueCell{d, it->second}, rec);
      if (!inserted) {
        throw DuplicateDateTicker("duplicate (" + f[0] + ", " + f[1] + ") at " +
                                  where(sentiment_path, reader.line()));
      }
    }
  }

  // The frame universe is the intersection of the requested universe with the
  // tickers that actually have price data, in requested order.
  std::vector<std::string> kept;
  for (int i = 0; i < universe.n(); ++i) {
    if (price_tickers.count(universe.ticker(i))) kept.push_back(universe.ticker(i));
  }
  if (kept.empty()) {
    throw UnknownTicker("none of the requested tickers have price rows in " + price_path);
  }
  AssetUniverse frame_universe(kept);
  std::vector<int> remap(universe.n(), -1);
  for (int i = 0; i < universe.n(); ++i) remap[i] = frame_universe.index_of(universe.ticker(i));

  std::set<Date> date_set;
  auto collect_dates = [&](const auto& cells) {
    for (const auto& [cell, v] : cells) {
      if (remap[cell.asset] >= 0) date_set.insert(cell.date);
    }
  };
  collect_dates(prices);
  collect_dates(volumes);
  collect_dates(mcaps);
  collect_dates(sentiments);

  MarketFrame frame(frame_universe, std::vector<Date>(date_set.begin(), date_set.end()));
  auto fill = [&](const std::map<ValueCell, double, CellLess>& cells, auto setter) {
    for (const auto& [cell, v] : cells) {
      int i = remap[cell.asset];
      if (i < 0) continue;
      (frame.*setter)(frame.index_of(cell.date), i, v);
    }
  };
  fill(prices, &MarketFrame::set_price);
  fill(volumes, &MarketFrame::set_volume);
  fill(mcaps, &MarketFrame::set_mcap);
  for (const auto& [cell, rec] : sentiments) {
    int i = remap[cell.asset];
    if (i < 0) continue;
    frame.set_sentiment(frame.index_of(cell.date), i, rec);
  }
  return frame;
}

MarketFrame fill_missing(const MarketFrame& frame) {
  if (frame.n_days() == 0) return frame;
  const int n = frame.n_assets();
  const Date first = frame.date(0);
  const Date last = frame.date(frame.n_days() - 1);

  std::vector<Date> dates;
  dates.reserve(last - first + 1);
  for (Date d = first; d <= last; ++d) dates.push_back(d);

  MarketFrame out(frame.universe(), dates);
  struct Last {
    double price = kNaN, volume = kNaN, mcap = kNaN;
  };
  std::vector<Last> carry(n);

  for (int t = 0; t < out.n_days(); ++t) {
    int src = frame.index_of(out.date(t));
    for (int i = 0; i < n; ++i) {
      if (src >= 0) {
        double p = frame.price_matrix()(src, i);
        double v = frame.volume_matrix()(src, i);
        double m = frame.mcap_matrix()(src, i);
        if (!std::isnan(p)) carry[i].price = p;
        if (!std::isnan(v)) carry[i].volume = v;
        if (!std::isnan(m)) carry[i].mcap = m;
        out.set_sentiment(t, i, frame.sentiment(src, i));
      }
      auto require = [&](double val, const char* field) {
        if (std::isnan(val)) {
          throw NoHistoricalValue("no " + std::string(field) + " for '" +
                                  frame.universe().ticker(i) + "' at or before " +
                                  first.to_iso());
        }
        return val;
      };
      out.set_price(t, i, require(carry[i].price, "price"));
      out.set_volume(t, i, require(carry[i].volume, "volume"));
      out.set_mcap(t, i, require(carry[i].mcap, "market cap"));
    }
  }
  return out;
}

MarketFrame adjust_splits(const MarketFrame& frame, const std::vector<SplitEvent>& events) {
  MarketFrame out = frame;
  if (frame.n_days() == 0) {
    if (!events.empty()) throw EventOutOfRange("split event on an empty frame");
    return out;
  }
  for (const auto& ev : events) {
    if (!(ev.ratio > 0.0)) {
      throw EventOutOfRange("split ratio must be positive for '" + ev.ticker + "'");
    }
    const int i = frame.universe().index_of(ev.ticker);
    if (i < 0) {
      throw EventOutOfRange("split ticker '" + ev.ticker + "' not in the frame universe");
    }
    if (ev.date < frame.date(0) || ev.date > frame.date(frame.n_days() - 1)) {
      throw EventOutOfRange("split date " + ev.date.to_iso() + " outside the frame range");
    }
    for (int t = 0; t < out.n_days() && out.date(t) < ev.date; ++t) {
      double p = out.price_matrix()(t, i);
      double v = out.volume_matrix()(t, i);
      if (!std::isnan(p)) out.set_price(t, i, p / ev.ratio);
      if (!std::isnan(v)) out.set_volume(t, i, v * ev.ratio);
    }
  }
  return out;
}

void write_csv(const MarketFrame& frame, const std::string& price_path,
               const std::string& volume_path, const std::string& mcap_path,
               const std::string& sentiment_path) {
  auto write_values = [&](const std::string& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "date,ticker,value\n";
    char buf[48];
    for (int t = 0; t < frame.n_days(); ++t) {
      for (int i = 0; i < frame.n_assets(); ++i) {
        if (std::isnan(m(t, i))) continue;
        std::snprintf(buf, sizeof(buf), "%.17g", m(t, i));
        out << frame.date(t).to_iso() << ',' << frame.universe().ticker(i) << ',' << buf << '\n';
      }
    }
  };
  write_values(price_path, frame.price_matrix());
  write_values(volume_path, frame.volume_matrix());
  write_values(mcap_path, frame.mcap_matrix());

  std::ofstream out(sentiment_path);
  if (!out) throw DataError("cannot write " + sentiment_path);
  out << "date,ticker,pos_count,neg_count,pos_intensity,neg_intensity\n";
  char buf[48];
  for (int t = 0; t < frame.n_days(); ++t) {
    for (int i = 0; i < frame.n_assets(); ++i) {
      const auto& r = frame.sentiment(t, i);
      out << frame.date(t).to_iso() << ',' << frame.universe().ticker(i) << ',' << r.pos_count
          << ',' << r.neg_count << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", r.pos_intensity);
      out << buf << ',';
      std::snprintf(buf, sizeof(buf), "%.17g", r.neg_intensity);
      out << buf << '\n';
    }
  }
}

MarketFrame restrict_dates(const MarketFrame& frame, Date start, Date end) {
  std::vector<Date> dates;
  std::vector<int> rows;
  for (int t = 0; t < frame.n_days(); ++t) {
    if (frame.date(t) >= start && frame.date(t) <= end) {
      dates.push_back(frame.date(t));
      rows.push_back(t);
    }
  }
  MarketFrame out(frame.universe(), dates);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (int i = 0; i < frame.n_assets(); ++i) {
      out.set_price(static_cast<int>(k), i, frame.price_matrix()(rows[k], i));
      out.set_volume(static_cast<int>(k), i, frame.volume_matrix()(rows[k], i));
      out.set_mcap(static_cast<int>(k), i, frame.mcap_matrix()(rows[k], i));
      out.set_sentiment(static_cast<int>(k), i, frame.sentiment(rows[k], i));
    }
  }
  return out;
}

std::vector<SplitEvent> load_splits_csv(const std::string& path) {
  CsvReader reader(path, {"date", "ticker", "ratio"});
  std::vector<SplitEvent> events;
  std::vector<std::string> f;
  while (reader.next(f)) {
    SplitEvent ev;
    ev.date = parse_date(f[0], path, reader.line());
    ev.ticker = f[1];
    ev.ratio = parse_double(f[2], path, reader.line());
    if (!(ev.ratio > 0.0)) {
      throw MalformedRow("split ratio must be positive at " + where(path, reader.line()));
    }
    events.push_back(ev);
  }
  return events;
}

}  // namespace bayesviews::marketdata
