#pragma once

#include <Eigen/Dense>

#include <deque>
#include <vector>

#include "bayesviews/marketdata.hpp"

namespace bayesviews::features {

using marketdata::MarketFrame;

struct InsufficientHistory : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Lag block for one series at time t: the value today, the three previous
/// days, and the 30-day moving average ending today.
Eigen::VectorXd lag_features(const Eigen::VectorXd& series, int t);

/// Per-asset sentiment tuple (pos_count, neg_count, pos_intensity,
/// neg_intensity) for day t; an all-zero row means no opinions.
Eigen::MatrixXd sentiment_features(const MarketFrame& frame, int t);

struct FeatureFlags {
  bool use_sentiment = true;
  bool use_capital = false;
};

/// Causal per-feature z-scoring over a trailing window. The state is owned
/// by a single consumer and advanced in time order; statistics only ever see
/// data at or before the current day.
class NormalizerState {
 public:
  explicit NormalizerState(int n_features, int window = 90);

  int n_features() const { return static_cast<int>(history_.size()); }
  int window() const { return window_; }
  int last_t() const { return last_t_; }

  /// Push raw values for day t (monotonically nondecreasing t; repeated
  /// same-t calls do not double-count) and return the z-scored vector.
  Eigen::VectorXd normalize(int t, const Eigen::VectorXd& raw);

  /// Affine inverse of the most recent normalization for one feature.
  double denormalize(int feature, double z) const;

  double mean(int feature) const { return mean_(feature); }
  double stddev(int feature) const { return sd_(feature); }

 private:
  int window_;
  int last_t_ = -1;
  std::vector<std::deque<double>> history_;
  Eigen::VectorXd mean_, sd_;
};

/// Layout of the flattened model input [p, v, s, c]: per asset five price
/// lags, five volume lags and the four sentiment fields, then one capital
/// slot. Length n*14 + 1.
struct FeatureVector {
  Eigen::MatrixXd price_lags;   // n x 5
  Eigen::MatrixXd volume_lags;  // n x 5
  Eigen::MatrixXd sentiment;    // n x 4
  double capital = 0.0;
  Eigen::VectorXd flattened;    // n*14 + 1, normalized

  static int flattened_size(int n) { return n * 14 + 1; }
};

/// Assemble and normalize the model input for day t. Reads only frame rows
/// at or before t. The normalizer must be the one used for earlier days of
/// the same run.
FeatureVector assemble_input(const MarketFrame& frame, int t, double capital,
                             NormalizerState& normalizer, const FeatureFlags& flags = {});

/// Debug dump: one row per day from the first runnable day, `date` plus the
/// flattened feature columns.
void dump_features_csv(const MarketFrame& frame, const std::string& path,
                       const FeatureFlags& flags = {}, double capital = 0.0);

}  // namespace bayesviews::features
