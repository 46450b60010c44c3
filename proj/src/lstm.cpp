#include "bayesviews/lstm.hpp"

#include <cmath>
#include <random>

#include "bayesviews/detail/blob.hpp"

namespace bayesviews::learners {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd sigmoid(const VectorXd& a) {
  return a.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

struct GateCache {
  VectorXd z;       // [h_prev; x]
  VectorXd i, f, o, g;
  VectorXd c_prev, c, tc, h;
};

GateCache cell_forward(const VectorXd& x, const LstmCellState& prev, const LstmCellParams& p) {
  GateCache cc;
  cc.z.resize(prev.h.size() + x.size());
  cc.z << prev.h, x;
  cc.i = sigmoid(p.Wi * cc.z + p.bi);
  cc.f = sigmoid(p.Wf * cc.z + p.bf);
  cc.o = sigmoid(p.Wo * cc.z + p.bo);
  cc.g = (p.Wc * cc.z + p.bc).array().tanh();
  cc.c_prev = prev.c;
  cc.c = cc.f.cwiseProduct(prev.c) + cc.i.cwiseProduct(cc.g);
  cc.tc = cc.c.array().tanh();
  cc.h = cc.o.cwiseProduct(cc.tc);
  return cc;
}

}  // namespace

LstmCellState lstm_cell_step(const VectorXd& x, const LstmCellState& prev,
                             const LstmCellParams& p) {
  const auto units = p.bi.size();
  if (prev.h.size() != units || prev.c.size() != units ||
      p.Wi.rows() != units || p.Wi.cols() != units + x.size() ||
      p.Wf.rows() != units || p.Wo.rows() != units || p.Wc.rows() != units) {
    throw DimensionMismatch("LSTM cell shapes do not match the input");
  }
  auto cc = cell_forward(x, prev, p);
  return LstmCellState{cc.h, cc.c};
}

struct LstmModel::Caches {
  std::vector<std::vector<GateCache>> steps;  // [step][layer]
  VectorXd h_top, d, y;
  VectorXd dy_scratch;
  std::vector<LstmCellState> states_before_last;
  std::vector<LstmCellState> final_states;
};

// parameter table layout: 8 tensors per layer, then dense and head
namespace {
constexpr int kPerLayer = 8;
enum { kWi, kWf, kWo, kWc, kBi, kBf, kBo, kBc };
}  // namespace

LstmModel::LstmModel(LstmConfig cfg) : cfg_(cfg) {
  if (cfg_.input_dim < 1 || cfg_.output_dim < 1 || cfg_.units < 1 || cfg_.num_layers < 1 ||
      cfg_.dense_units < 1 || cfg_.bptt_horizon < 1) {
    throw LearnerError("LSTM configuration values must be positive");
  }
  init_params();
}

void LstmModel::init_params() {
  params_.clear();
  std::mt19937_64 rng(cfg_.seed);
  auto uniform = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1p-53; };
  auto make = [&](const std::string& name, int rows, int cols, bool weights) {
    Param p;
    p.name = name;
    if (weights) {
      const double s = cfg_.init_scale / std::sqrt(static_cast<double>(cols));
      p.value = MatrixXd::NullaryExpr(rows, cols, [&](Eigen::Index, Eigen::Index) {
        return (2.0 * uniform() - 1.0) * s;
      });
    } else {
      p.value = MatrixXd::Zero(rows, cols);
    }
    p.grad = MatrixXd::Zero(rows, cols);
    p.ms = MatrixXd::Zero(rows, cols);
    params_.push_back(std::move(p));
  };

  for (int l = 0; l < cfg_.num_layers; ++l) {
    const int in = (l == 0) ? cfg_.input_dim : cfg_.units;
    const std::string tag = "layer" + std::to_string(l) + ".";
    make(tag + "Wi", cfg_.units, cfg_.units + in, true);
    make(tag + "Wf", cfg_.units, cfg_.units + in, true);
    make(tag + "Wo", cfg_.units, cfg_.units + in, true);
    make(tag + "Wc", cfg_.units, cfg_.units + in, true);
    make(tag + "bi", cfg_.units, 1, false);
    make(tag + "bf", cfg_.units, 1, false);
    make(tag + "bo", cfg_.units, 1, false);
    make(tag + "bc", cfg_.units, 1, false);
  }
  make("dense.W", cfg_.dense_units, cfg_.units, true);
  make("dense.b", cfg_.dense_units, 1, false);
  make("head.W", cfg_.output_dim, cfg_.dense_units, true);
  make("head.b", cfg_.output_dim, 1, false);

  window_.clear();
  steps_ = 0;
}

LstmCellParams LstmModel::layer_params(int l) const {
  const auto& p = params_;
  const int b = l * kPerLayer;
  LstmCellParams out;
  out.Wi = p[b + kWi].value;
  out.Wf = p[b + kWf].value;
  out.Wo = p[b + kWo].value;
  out.Wc = p[b + kWc].value;
  out.bi = p[b + kBi].value.col(0);
  out.bf = p[b + kBf].value.col(0);
  out.bo = p[b + kBo].value.col(0);
  out.bc = p[b + kBc].value.col(0);
  return out;
}

std::vector<LstmCellState> LstmModel::zero_states() const {
  std::vector<LstmCellState> s(cfg_.num_layers);
  for (auto& st : s) {
    st.h = VectorXd::Zero(cfg_.units);
    st.c = VectorXd::Zero(cfg_.units);
  }
  return s;
}

std::vector<LstmModel::WindowEntry> LstmModel::pending_window(const VectorXd& x) const {
  if (x.size() != cfg_.input_dim) {
    throw DimensionMismatch("input has length " + std::to_string(x.size()) + ", expected " +
                            std::to_string(cfg_.input_dim));
  }
  std::vector<WindowEntry> pending(window_.begin(), window_.end());
  pending.push_back(WindowEntry{x, {}});
  if (static_cast<int>(pending.size()) > cfg_.bptt_horizon) {
    pending.erase(pending.begin());
  }
  return pending;
}

double LstmModel::replay(const std::vector<WindowEntry>& window, const VectorXd& target,
                         Caches* caches, std::vector<LstmCellState>* final_states) const {
  std::vector<LstmCellState> states =
      window.front().states_before.empty() ? zero_states() : window.front().states_before;

  Caches local;
  Caches& cc = caches ? *caches : local;
  cc.steps.assign(window.size(), {});

  for (std::size_t t = 0; t < window.size(); ++t) {
    if (t + 1 == window.size()) cc.states_before_last = states;
    VectorXd input = window[t].input;
    cc.steps[t].resize(cfg_.num_layers);
    for (int l = 0; l < cfg_.num_layers; ++l) {
      cc.steps[t][l] = cell_forward(input, states[l], layer_params(l));
      states[l] = LstmCellState{cc.steps[t][l].h, cc.steps[t][l].c};
      input = states[l].h;
    }
  }

  cc.h_top = states.back().h;
  cc.d = (params_[cfg_.num_layers * kPerLayer].value * cc.h_top +
          params_[cfg_.num_layers * kPerLayer + 1].value.col(0))
             .array()
             .tanh();
  cc.y = params_[cfg_.num_layers * kPerLayer + 2].value * cc.d +
         params_[cfg_.num_layers * kPerLayer + 3].value.col(0);
  cc.final_states = states;
  if (final_states) *final_states = states;

  if (target.size() == 0) return 0.0;
  return (cc.y - target).squaredNorm() / static_cast<double>(cfg_.output_dim);
}

void LstmModel::backprop(const std::vector<WindowEntry>& window, const Caches& cc) {
  const int L = cfg_.num_layers;
  const int U = cfg_.units;
  const int dense_at = L * kPerLayer;

  // head and dense
  const VectorXd dy = cc.dy_scratch;  // set by compute_gradients
  params_[dense_at + 2].grad += dy * cc.d.transpose();
  params_[dense_at + 3].grad += dy;
  VectorXd dd = params_[dense_at + 2].value.transpose() * dy;
  VectorXd da = dd.cwiseProduct((1.0 - cc.d.array().square()).matrix());
  params_[dense_at].grad += da * cc.h_top.transpose();
  params_[dense_at + 1].grad += da;
  const VectorXd dh_top = params_[dense_at].value.transpose() * da;

  std::vector<VectorXd> dh(L, VectorXd::Zero(U));
  std::vector<VectorXd> dc(L, VectorXd::Zero(U));

  for (int t = static_cast<int>(window.size()) - 1; t >= 0; --t) {
    VectorXd dx_above;
    for (int l = L - 1; l >= 0; --l) {
      VectorXd dh_in = dh[l];
      if (l == L - 1 && t + 1 == static_cast<int>(window.size())) dh_in += dh_top;
      if (l < L - 1) dh_in += dx_above;

      const GateCache& g = cc.steps[t][l];
      const VectorXd do_ = dh_in.cwiseProduct(g.tc);
      const VectorXd dtc = dh_in.cwiseProduct(g.o);
      const VectorXd dcc = dc[l] + dtc.cwiseProduct((1.0 - g.tc.array().square()).matrix());
      const VectorXd di = dcc.cwiseProduct(g.g);
      const VectorXd dg = dcc.cwiseProduct(g.i);
      const VectorXd df = dcc.cwiseProduct(g.c_prev);

      const VectorXd dai = di.cwiseProduct(g.i).cwiseProduct((1.0 - g.i.array()).matrix());
      const VectorXd daf = df.cwiseProduct(g.f).cwiseProduct((1.0 - g.f.array()).matrix());
      const VectorXd dao = do_.cwiseProduct(g.o).cwiseProduct((1.0 - g.o.array()).matrix());
      const VectorXd dac = dg.cwiseProduct((1.0 - g.g.array().square()).matrix());

      const int b = l * kPerLayer;
      params_[b + kWi].grad += dai * g.z.transpose();
      params_[b + kWf].grad += daf * g.z.transpose();
      params_[b + kWo].grad += dao * g.z.transpose();
      params_[b + kWc].grad += dac * g.z.transpose();
      params_[b + kBi].grad += dai;
      params_[b + kBf].grad += daf;
      params_[b + kBo].grad += dao;
      params_[b + kBc].grad += dac;

      VectorXd dz = params_[b + kWi].value.transpose() * dai +
                    params_[b + kWf].value.transpose() * daf +
                    params_[b + kWo].value.transpose() * dao +
                    params_[b + kWc].value.transpose() * dac;
      dh[l] = dz.head(U);
      dc[l] = dcc.cwiseProduct(g.f);
      dx_above = dz.tail(dz.size() - U);
    }
  }
}

Eigen::VectorXd LstmModel::predict(const VectorXd& x) const {
  Caches cc;
  replay(pending_window(x), VectorXd(), &cc, nullptr);
  return cc.y;
}

double LstmModel::evaluate_loss(const VectorXd& x, const VectorXd& target) const {
  if (target.size() != cfg_.output_dim) throw DimensionMismatch("target length mismatch");
  return replay(pending_window(x), target, nullptr, nullptr);
}

void LstmModel::compute_gradients(const VectorXd& x, const VectorXd& target) {
  if (target.size() != cfg_.output_dim) throw DimensionMismatch("target length mismatch");
  for (auto& p : params_) p.grad.setZero();
  const auto pending = pending_window(x);
  Caches cc;
  replay(pending, target, &cc, nullptr);
  cc.dy_scratch = (2.0 / cfg_.output_dim) * (cc.y - target);
  backprop(pending, cc);
}

double LstmModel::update(const VectorXd& x, const VectorXd& target) {
  if (target.size() != cfg_.output_dim) throw DimensionMismatch("target length mismatch");
  for (auto& p : params_) p.grad.setZero();

  auto pending = pending_window(x);
  Caches cc;
  const double loss = replay(pending, target, &cc, nullptr);
  if (!std::isfinite(loss)) {
    throw NonFiniteLoss("training diverged: loss is not finite");
  }
  cc.dy_scratch = (2.0 / cfg_.output_dim) * (cc.y - target);
  backprop(pending, cc);

  for (auto& p : params_) {
    p.ms = cfg_.rms_decay * p.ms + (1.0 - cfg_.rms_decay) * p.grad.cwiseProduct(p.grad);
    p.value -= cfg_.learning_rate *
               p.grad.cwiseQuotient((p.ms.cwiseSqrt().array() + cfg_.rms_epsilon).matrix());
  }

  pending.back().states_before = cc.states_before_last;
  window_.assign(pending.begin(), pending.end());
  ++steps_;
  return loss;
}

void LstmModel::reset() { init_params(); }

std::string LstmModel::snapshot() const {
  detail::BlobWriter w;
  w.tag("BVLSTM1");
  w.i32(cfg_.input_dim);
  w.i32(cfg_.output_dim);
  w.i32(cfg_.units);
  w.i32(cfg_.num_layers);
  w.i32(cfg_.dense_units);
  w.i32(cfg_.bptt_horizon);
  w.f64(cfg_.learning_rate);
  w.f64(cfg_.rms_decay);
  w.f64(cfg_.rms_epsilon);
  w.f64(cfg_.init_scale);
  w.u64(cfg_.seed);
  w.u64(steps_);
  w.i32(static_cast<std::int32_t>(params_.size()));
  for (const auto& p : params_) {
    w.mat(p.value);
    w.mat(p.ms);
  }
  w.i32(static_cast<std::int32_t>(window_.size()));
  for (const auto& e : window_) {
    w.vec(e.input);
    w.i32(static_cast<std::int32_t>(e.states_before.size()));
    for (const auto& s : e.states_before) {
      w.vec(s.h);
      w.vec(s.c);
    }
  }
  return w.str();
}

void LstmModel::restore(const std::string& blob) {
  detail::BlobReader r(blob);
  r.expect("BVLSTM1");
  LstmConfig cfg;
  cfg.input_dim = r.i32();
  cfg.output_dim = r.i32();
  cfg.units = r.i32();
  cfg.num_layers = r.i32();
  cfg.dense_units = r.i32();
  cfg.bptt_horizon = r.i32();
  cfg.learning_rate = r.f64();
  cfg.rms_decay = r.f64();
  cfg.rms_epsilon = r.f64();
  cfg.init_scale = r.f64();
  cfg.seed = r.u64();
  cfg_ = cfg;
  init_params();
  steps_ = r.u64();
  const int np = r.i32();
  if (np != static_cast<int>(params_.size())) {
    throw LearnerError("checkpoint parameter count mismatch");
  }
  for (auto& p : params_) {
    p.value = r.mat();
    p.ms = r.mat();
  }
  window_.clear();
  const int nw = r.i32();
  for (int k = 0; k < nw; ++k) {
    WindowEntry e;
    e.input = r.vec();
    const int ns = r.i32();
    e.states_before.resize(ns);
    for (auto& s : e.states_before) {
      s.h = r.vec();
      s.c = r.vec();
    }
    window_.push_back(std::move(e));
  }
}

}  // namespace bayesviews::learners
