#include "bayesviews/features.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace bayesviews::features {

namespace {
constexpr int kLagCount = 5;
constexpr int kMaWindow = 30;
constexpr int kSentimentFields = 4;
constexpr double kSdFloor = 1e-8;
}  // namespace

Eigen::VectorXd lag_features(const Eigen::VectorXd& series, int t) {
  if (t < kMaWindow || t >= series.size()) {
    throw InsufficientHistory("lag features need index >= " + std::to_string(kMaWindow) +
                              " and < " + std::to_string(series.size()) + ", got " +
                              std::to_string(t));
  }
  Eigen::VectorXd out(kLagCount);
  out(0) = series(t);
  out(1) = series(t - 1);
  out(2) = series(t - 2);
  out(3) = series(t - 3);
  out(4) = series.segment(t - kMaWindow + 1, kMaWindow).mean();
  return out;
}

Eigen::MatrixXd sentiment_features(const MarketFrame& frame, int t) {
  if (t < 0 || t >= frame.n_days()) throw InsufficientHistory("sentiment index out of range");
  const int n = frame.n_assets();
  Eigen::MatrixXd out(n, kSentimentFields);
  for (int i = 0; i < n; ++i) {
    const auto& r = frame.sentiment(t, i);
    out(i, 0) = static_cast<double>(r.pos_count);
    out(i, 1) = static_cast<double>(r.neg_count);
    out(i, 2) = r.pos_intensity;
    out(i, 3) = r.neg_intensity;
  }
  return out;
}

NormalizerState::NormalizerState(int n_features, int window)
    : window_(window), history_(n_features) {
  if (n_features < 1 || window < 2) {
    throw std::invalid_argument("normalizer needs >= 1 feature and a window of >= 2 days");
  }
  mean_ = Eigen::VectorXd::Zero(n_features);
  sd_ = Eigen::VectorXd::Constant(n_features, kSdFloor);
}

Eigen::VectorXd NormalizerState::normalize(int t, const Eigen::VectorXd& raw) {
  if (raw.size() != n_features()) {
    throw std::invalid_argument("normalizer feature count mismatch");
  }
  if (t < last_t_) {
    throw std::invalid_argument("normalizer must be advanced in time order");
  }
  const bool push = t > last_t_;
  last_t_ = t;

  Eigen::VectorXd z(raw.size());
  for (int f = 0; f < raw.size(); ++f) {
    auto& h = history_[f];
    if (push) {
      h.push_back(raw(f));
      if (static_cast<int>(h.size()) > window_) h.pop_front();
    } else if (!h.empty()) {
      h.back() = raw(f);
    } else {
      h.push_back(raw(f));
    }
    double m = 0.0;
    for (double v : h) m += v;
    m /= static_cast<double>(h.size());
    double var = 0.0;
    for (double v : h) var += (v - m) * (v - m);
    var /= static_cast<double>(h.size());
    mean_(f) = m;
    sd_(f) = std::max(std::sqrt(var), kSdFloor);
    z(f) = (raw(f) - m) / sd_(f);
  }
  return z;
}

double NormalizerState::denormalize(int feature, double z) const {
  return z * sd_(feature) + mean_(feature);
}

void dump_features_csv(const MarketFrame& frame, const std::string& path,
                       const FeatureFlags& flags, double capital) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  const int n = frame.n_assets();
  out << "date";
  for (int i = 0; i < n; ++i) {
    const auto& t = frame.universe().ticker(i);
    for (const char* lag : {"p0", "p1", "p2", "p3", "pma30"}) out << ',' << t << '_' << lag;
  }
  for (int i = 0; i < n; ++i) {
    const auto& t = frame.universe().ticker(i);
    for (const char* lag : {"v0", "v1", "v2", "v3", "vma30"}) out << ',' << t << '_' << lag;
  }
  for (int i = 0; i < n; ++i) {
    const auto& t = frame.universe().ticker(i);
    for (const char* f : {"pos_count", "neg_count", "pos_int", "neg_int"}) out << ',' << t << '_' << f;
  }
  out << ",capital\n";

  NormalizerState norm(FeatureVector::flattened_size(n));
  char buf[48];
  for (int t = kMaWindow; t < frame.n_days(); ++t) {
    const auto fv = assemble_input(frame, t, capital, norm, flags);
    out << frame.date(t).to_iso();
    for (int k = 0; k < fv.flattened.size(); ++k) {
      std::snprintf(buf, sizeof(buf), "%.10g", fv.flattened(k));
      out << ',' << buf;
    }
    out << '\n';
  }
}

FeatureVector assemble_input(const MarketFrame& frame, int t, double capital,
                             NormalizerState& normalizer, const FeatureFlags& flags) {
  const int n = frame.n_assets();
  if (t < kMaWindow || t >= frame.n_days()) {
    throw InsufficientHistory("assemble_input needs t >= " + std::to_string(kMaWindow));
  }
  if (normalizer.n_features() != FeatureVector::flattened_size(n)) {
    throw std::invalid_argument("normalizer sized for a different universe");
  }

  FeatureVector fv;
  fv.price_lags.resize(n, kLagCount);
  fv.volume_lags.resize(n, kLagCount);
  fv.sentiment.resize(n, kSentimentFields);
  fv.capital = flags.use_capital ? capital : 0.0;

  // lag blocks read the frame through the audited accessors
  for (int i = 0; i < n; ++i) {
    fv.price_lags(i, 0) = frame.price(t, i);
    fv.price_lags(i, 1) = frame.price(t - 1, i);
    fv.price_lags(i, 2) = frame.price(t - 2, i);
    fv.price_lags(i, 3) = frame.price(t - 3, i);
    fv.volume_lags(i, 0) = frame.volume(t, i);
    fv.volume_lags(i, 1) = frame.volume(t - 1, i);
    fv.volume_lags(i, 2) = frame.volume(t - 2, i);
    fv.volume_lags(i, 3) = frame.volume(t - 3, i);
    double pma = 0.0, vma = 0.0;
    for (int d = t - kMaWindow + 1; d <= t; ++d) {
      pma += frame.price(d, i);
      vma += frame.volume(d, i);
    }
    fv.price_lags(i, 4) = pma / kMaWindow;
    fv.volume_lags(i, 4) = vma / kMaWindow;
  }
  if (flags.use_sentiment) {
    fv.sentiment = sentiment_features(frame, t);
  } else {
    fv.sentiment.setZero();
  }

  Eigen::VectorXd raw(FeatureVector::flattened_size(n));
  int at = 0;
  for (int i = 0; i < n; ++i) {
    raw.segment(at, kLagCount) = fv.price_lags.row(i);
    at += kLagCount;
  }
  for (int i = 0; i < n; ++i) {
    raw.segment(at, kLagCount) = fv.volume_lags.row(i);
    at += kLagCount;
  }
  for (int i = 0; i < n; ++i) {
    raw.segment(at, kSentimentFields) = fv.sentiment.row(i);
    at += kSentimentFields;
  }
  raw(at) = fv.capital;

  fv.flattened = normalizer.normalize(t, raw);
  return fv;
}

}  // namespace bayesviews::features
