#include "bayesviews/learners.hpp"

#include <cmath>

#include "bayesviews/denfis.hpp"
#include "bayesviews/detail/blob.hpp"
#include "bayesviews/lstm.hpp"

namespace bayesviews::learners {

using Eigen::VectorXd;

std::unique_ptr<OnlineViewModel> make_model(const ModelConfig& cfg, int input_dim,
                                            int output_dim) {
  if (cfg.model == "lstm") {
    LstmConfig c;
    c.input_dim = input_dim;
    c.output_dim = output_dim;
    c.bptt_horizon = cfg.bptt_horizon;
    c.learning_rate = cfg.learning_rate;
    c.seed = cfg.seed;
    return std::make_unique<LstmModel>(c);
  }
  if (cfg.model == "denfis") {
    DenfisConfig c;
    c.input_dim = input_dim;
    c.output_dim = output_dim;
    c.d = cfg.d;
    c.m_activate = cfg.m_activate;
    return std::make_unique<DenfisModel>(c);
  }
  throw LearnerError("unknown model '" + cfg.model + "' (expected lstm or denfis)");
}

VectorXd weights_from_scores(const VectorXd& scores) {
  const double m = scores.maxCoeff();
  VectorXd w = (scores.array() - m).exp();
  return w / w.sum();
}

NtModel::NtModel(std::unique_ptr<OnlineViewModel> base, int output_dim)
    : base_(std::move(base)), output_dim_(output_dim) {
  if (!base_) throw LearnerError("NT wrapper needs a base model");
}

VectorXd NtModel::predict(const VectorXd& x) const {
  if (!base_->ready()) {
    return VectorXd::Constant(output_dim_, 1.0 / output_dim_);
  }
  return weights_from_scores(base_->predict(x));
}

double NtModel::update(const VectorXd& x, const VectorXd& target) {
  return base_->update(x, target);
}

std::string NtModel::snapshot() const {
  detail::BlobWriter w;
  w.tag("BVNT1");
  w.i32(output_dim_);
  const std::string inner = base_->snapshot();
  w.u64(inner.size());
  return w.str() + inner;
}

void NtModel::restore(const std::string& blob) {
  detail::BlobReader r(blob);
  r.expect("BVNT1");
  output_dim_ = r.i32();
  const auto inner_size = r.u64();
  base_->restore(blob.substr(blob.size() - inner_size));
}

OnlineViewLoop::OnlineViewLoop(std::shared_ptr<OnlineViewModel> model, LoopConfig cfg)
    : model_(std::move(model)), cfg_(cfg) {
  if (!model_) throw LearnerError("online loop needs a model");
}

int OnlineViewLoop::first_step() const {
  // features need 30 days of history at t-1; view targets additionally need
  // a full covariance window at t-1
  const int feature_ready = 31;
  if (cfg_.weight_targets) return feature_ready;
  return std::max(feature_ready, cfg_.timespan + 2);
}

LoopStep OnlineViewLoop::step(const marketdata::MarketFrame& frame, int t, double capital) {
  const int n = frame.n_assets();
  if (t < first_step() || t >= frame.n_days()) {
    throw LearnerError("loop step " + std::to_string(t) + " outside the runnable range");
  }
  if (last_t_ >= 0 && t != last_t_ + 1) {
    throw LearnerError("loop must advance one day at a time");
  }
  if (!normalizer_) {
    normalizer_ = std::make_unique<features::NormalizerState>(
        features::FeatureVector::flattened_size(n));
    prev_x_ = features::assemble_input(frame, t - 1, capital, *normalizer_, cfg_.flags).flattened;
  }

  // Yesterday's optimal target only became computable with today's prices.
  VectorXd price_prev(n), price_now(n);
  for (int i = 0; i < n; ++i) {
    price_prev(i) = frame.price(t - 1, i);
    price_now(i) = frame.price(t, i);
  }
  const VectorXd w_star_prev = alloc::optimal_one_hot(price_prev, price_now);

  VectorXd target;
  if (cfg_.weight_targets) {
    target = w_star_prev;
  } else {
    alloc::RiskModel risk(alloc::estimate_covariance(frame, t - 1, cfg_.timespan), cfg_.delta,
                          cfg_.tau);
    VectorXd caps(n);
    for (int i = 0; i < n; ++i) caps(i) = frame.mcap(t - 1, i);
    const auto eq = alloc::equilibrium_returns(risk, caps / caps.sum());
    target = alloc::invert_views(w_star_prev, eq, risk, alloc::default_confidence(risk));
  }

  LoopStep out;
  out.t = t;
  out.target_prev = target;
  out.loss = model_->update(prev_x_, target);

  prev_x_ = features::assemble_input(frame, t, capital, *normalizer_, cfg_.flags).flattened;
  out.prediction = model_->predict(prev_x_);
  last_t_ = t;
  return out;
}

}  // namespace bayesviews::learners
