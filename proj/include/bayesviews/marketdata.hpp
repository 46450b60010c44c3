#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "bayesviews/date.hpp"

namespace bayesviews::marketdata {

// --- error types -----------------------------------------------------------

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MissingColumn : DataError { using DataError::DataError; };
struct UnknownTicker : DataError { using DataError::DataError; };
struct NonPositivePrice : DataError { using DataError::DataError; };
struct DuplicateDateTicker : DataError { using DataError::DataError; };
struct MalformedRow : DataError { using DataError::DataError; };
struct NoHistoricalValue : DataError { using DataError::DataError; };
struct EventOutOfRange : DataError { using DataError::DataError; };

// --- domain types ----------------------------------------------------------

/// Ordered asset universe. Every vector/matrix in the library is indexed by
/// this ordering, fixed for the lifetime of a run.
class AssetUniverse {
 public:
  explicit AssetUniverse(std::vector<std::string> tickers);

  int n() const { return static_cast<int>(tickers_.size()); }
  const std::vector<std::string>& tickers() const { return tickers_; }
  const std::string& ticker(int i) const { return tickers_.at(i); }

  /// Index of a ticker, or -1 when absent.
  int index_of(const std::string& ticker) const;

  bool operator==(const AssetUniverse& other) const { return tickers_ == other.tickers_; }

 private:
  std::vector<std::string> tickers_;
};

/// One day of public-mood data for one asset. An all-zero record means
/// "no opinion" and is how missing days are represented after filling.
struct SentimentRecord {
  std::int64_t pos_count = 0;
  std::int64_t neg_count = 0;
  double pos_intensity = 0.0;  // >= 0
  double neg_intensity = 0.0;  // <= 0

  bool is_empty() const {
    return pos_count == 0 && neg_count == 0 && pos_intensity == 0.0 && neg_intensity == 0.0;
  }
  bool operator==(const SentimentRecord&) const = default;
};

struct SplitEvent {
  std::string ticker;
  Date date;
  double ratio = 1.0;  // new shares per old share, > 0
};

/// Attachable read monitor. Strategy code reads the frame through the
/// element accessors below; while an audit is attached, any access to a row
/// beyond `limit` is counted as a violation. Used to prove the trading loop
/// never looks ahead of the current date.
struct AccessAudit {
  std::atomic<std::int64_t> limit{std::numeric_limits<std::int64_t>::max()};
  std::atomic<std::int64_t> max_row{-1};
  std::atomic<std::int64_t> violations{0};

  void note(std::int64_t row) {
    std::int64_t prev = max_row.load(std::memory_order_relaxed);
    while (row > prev && !max_row.compare_exchange_weak(prev, row)) {
    }
    if (row > limit.load(std::memory_order_relaxed)) {
      violations.fetch_add(1, std::memory_order_relaxed);
    }
  }
};

/// Date-aligned panel of prices, volumes, market caps and sentiment for an
/// ordered universe. Missing numeric values are NaN until fill_missing runs;
/// missing sentiment days are all-zero records.
class MarketFrame {
 public:
  MarketFrame(AssetUniverse universe, std::vector<Date> dates);

  const AssetUniverse& universe() const { return universe_; }
  int n_assets() const { return universe_.n(); }
  int n_days() const { return static_cast<int>(dates_.size()); }
  const std::vector<Date>& dates() const { return dates_; }
  Date date(int t) const { return dates_.at(t); }

  /// Row index of a date, or -1 when the frame does not contain it.
  int index_of(Date d) const;

  double price(int t, int i) const { note(t); return price_(t, i); }
  double volume(int t, int i) const { note(t); return volume_(t, i); }
  double mcap(int t, int i) const { note(t); return mcap_(t, i); }
  const SentimentRecord& sentiment(int t, int i) const {
    note(t);
    return sentiment_[static_cast<std::size_t>(t) * universe_.n() + i];
  }

  // Bulk access for I/O and tests; not routed through the audit.
  const Eigen::MatrixXd& price_matrix() const { return price_; }
  const Eigen::MatrixXd& volume_matrix() const { return volume_; }
  const Eigen::MatrixXd& mcap_matrix() const { return mcap_; }

  void set_price(int t, int i, double v) { price_(t, i) = v; }
  void set_volume(int t, int i, double v) { volume_(t, i) = v; }
  void set_mcap(int t, int i, double v) { mcap_(t, i) = v; }
  void set_sentiment(int t, int i, SentimentRecord r) {
    sentiment_[static_cast<std::size_t>(t) * universe_.n() + i] = r;
  }

  void attach_access_audit(std::shared_ptr<AccessAudit> audit) { audit_ = std::move(audit); }
  void detach_access_audit() { audit_.reset(); }
  const std::shared_ptr<AccessAudit>& access_audit() const { return audit_; }

 private:
  void note(int t) const {
    if (audit_) audit_->note(t);
  }

  AssetUniverse universe_;
  std::vector<Date> dates_;
  Eigen::MatrixXd price_, volume_, mcap_;  // T x n
  std::vector<SentimentRecord> sentiment_;  // T*n, row-major
  std::shared_ptr<AccessAudit> audit_;
};

// --- operations ------------------------------------------------------------

/// Load the four CSV snapshots into one frame covering the intersection of
/// the requested universe and the tickers present in the price file. Rows
/// whose ticker is not in the requested universe are rejected.
MarketFrame load_csv(const std::string& price_path, const std::string& volume_path,
                     const std::string& mcap_path, const std::string& sentiment_path,
                     const AssetUniverse& universe);

/// Expand to a contiguous daily calendar and fill gaps with the most recent
/// prior observation (never a future one). Sentiment gaps become all-zero
/// records. Idempotent.
MarketFrame fill_missing(const MarketFrame& frame);

/// Apply share splits: prices strictly before the event date are divided by
/// the ratio, volumes multiplied; market cap is unaffected. Keeps the daily
/// gross-return series continuous across the split date.
MarketFrame adjust_splits(const MarketFrame& frame, const std::vector<SplitEvent>& events);

/// Write a frame back out as the four CSV files (17 significant digits, so
/// numeric fields round-trip exactly through load_csv).
void write_csv(const MarketFrame& frame, const std::string& price_path,
               const std::string& volume_path, const std::string& mcap_path,
               const std::string& sentiment_path);

/// Restrict a frame to dates within [start, end] (inclusive).
MarketFrame restrict_dates(const MarketFrame& frame, Date start, Date end);

/// Daily split events parsed from splits.csv (`date,ticker,ratio`).
std::vector<SplitEvent> load_splits_csv(const std::string& path);

}  // namespace bayesviews::marketdata
