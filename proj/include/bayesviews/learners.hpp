#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>

#include "bayesviews/allocation.hpp"
#include "bayesviews/features.hpp"
#include "bayesviews/marketdata.hpp"

namespace bayesviews::learners {

struct LearnerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionMismatch : LearnerError { using LearnerError::LearnerError; };
struct NonFiniteLoss : LearnerError { using LearnerError::LearnerError; };
struct NoRules : LearnerError { using LearnerError::LearnerError; };

/// Stateful online learner mapping feature vectors to per-asset view
/// returns. predict never changes state; update advances it exactly once;
/// snapshot/restore round-trips the full state bit-exactly.
class OnlineViewModel {
 public:
  virtual ~OnlineViewModel() = default;

  virtual Eigen::VectorXd predict(const Eigen::VectorXd& x) const = 0;
  virtual double update(const Eigen::VectorXd& x, const Eigen::VectorXd& target) = 0;
  virtual void reset() = 0;
  virtual std::string snapshot() const = 0;
  virtual void restore(const std::string& blob) = 0;

  /// Whether predict can be called yet (DENFIS needs a first rule).
  virtual bool ready() const { return true; }
};

/// Runtime model selection, mirroring the config keys
/// model / d / m_activate / bptt_horizon / learning_rate / seed /
/// use_sentiment / use_capital.
struct ModelConfig {
  std::string model = "lstm";  // "lstm" | "denfis"
  double d = 0.21;
  int m_activate = 3;
  int bptt_horizon = 30;
  double learning_rate = 1e-3;
  std::uint64_t seed = 42;
  bool use_sentiment = true;
  bool use_capital = false;
};

std::unique_ptr<OnlineViewModel> make_model(const ModelConfig& cfg, int input_dim,
                                            int output_dim);

/// Map raw scores onto the simplex with a normalized exponential.
Eigen::VectorXd weights_from_scores(const Eigen::VectorXd& scores);

/// Neural-trading baseline: the wrapped model is trained directly on the
/// hindsight-optimal one-hot weights and its raw outputs are mapped through
/// a normalized exponential, so predictions always lie on the simplex.
class NtModel : public OnlineViewModel {
 public:
  explicit NtModel(std::unique_ptr<OnlineViewModel> base, int output_dim);

  Eigen::VectorXd predict(const Eigen::VectorXd& x) const override;
  double update(const Eigen::VectorXd& x, const Eigen::VectorXd& target) override;
  void reset() override { base_->reset(); }
  std::string snapshot() const override;
  void restore(const std::string& blob) override;
  bool ready() const override { return true; }  // uniform weights until trained

  const OnlineViewModel& base() const { return *base_; }

 private:
  std::unique_ptr<OnlineViewModel> base_;
  int output_dim_;
};

/// One day of the online protocol: what the learner was fed and produced.
struct LoopStep {
  int t = 0;
  Eigen::VectorXd target_prev;  // what the model was just trained on
  Eigen::VectorXd prediction;   // emitted for day t
  double loss = 0.0;
};

struct LoopConfig {
  int timespan = 90;
  double delta = 0.25;
  double tau = 0.05;
  features::FeatureFlags flags;
  /// Train on one-hot optimal weights instead of inverse-optimized view
  /// returns (the neural-trading wiring).
  bool weight_targets = false;
};

/// Drives a model through the online protocol. Each step t first realizes
/// yesterday's training pair — the optimal target for t-1 only became
/// computable once day t's prices arrived — updates the model on it, and
/// then predicts for day t. Nothing after row t is ever read.
class OnlineViewLoop {
 public:
  OnlineViewLoop(std::shared_ptr<OnlineViewModel> model, LoopConfig cfg);

  /// First day the loop can run on (warm-up for lags and covariance).
  int first_step() const;

  LoopStep step(const marketdata::MarketFrame& frame, int t, double capital);

  const OnlineViewModel& model() const { return *model_; }

 private:
  std::shared_ptr<OnlineViewModel> model_;
  LoopConfig cfg_;
  std::unique_ptr<features::NormalizerState> normalizer_;
  Eigen::VectorXd prev_x_;
  int last_t_ = -1;
};

}  // namespace bayesviews::learners
