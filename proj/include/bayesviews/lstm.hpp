#pragma once

#include <deque>
#include <vector>

#include "bayesviews/learners.hpp"

namespace bayesviews::learners {

/// Gate parameters of a single LSTM cell layer. Weight matrices act on the
/// concatenation [h_prev; x].
struct LstmCellParams {
  Eigen::MatrixXd Wi, Wf, Wo, Wc;  // units x (units + input)
  Eigen::VectorXd bi, bf, bo, bc;  // units
};

struct LstmCellState {
  Eigen::VectorXd h, c;
};

/// One cell step: sigmoid gates on [h_prev; x], tanh candidate,
/// c = f.*c_prev + i.*cand, h = o.*tanh(c).
LstmCellState lstm_cell_step(const Eigen::VectorXd& x, const LstmCellState& prev,
                             const LstmCellParams& p);

struct LstmConfig {
  int input_dim = 0;
  int output_dim = 0;
  int units = 3;
  int num_layers = 2;
  int dense_units = 50;
  int bptt_horizon = 30;
  double learning_rate = 1e-3;
  double rms_decay = 0.9;
  double rms_epsilon = 1e-8;
  double init_scale = 1.0;  // 0 gives an all-zero network
  std::uint64_t seed = 42;
};

/// Stacked LSTM with a tanh dense layer and a linear head, trained online on
/// the MSE of the view-return vector with rmsprop. Gradients are
/// backpropagated through a truncated window of the most recent inputs;
/// predict replays the same window, so prediction and training see the
/// identical forward pass.
class LstmModel : public OnlineViewModel {
 public:
  /// Named parameter tensor with its gradient and rmsprop accumulator.
  /// Vectors are stored as single-column matrices.
  struct Param {
    std::string name;
    Eigen::MatrixXd value, grad, ms;
  };

  explicit LstmModel(LstmConfig cfg);

  Eigen::VectorXd predict(const Eigen::VectorXd& x) const override;
  double update(const Eigen::VectorXd& x, const Eigen::VectorXd& target) override;
  void reset() override;
  std::string snapshot() const override;
  void restore(const std::string& blob) override;

  /// Loss of the forward pass update() would run, without touching state.
  double evaluate_loss(const Eigen::VectorXd& x, const Eigen::VectorXd& target) const;
  /// Fill every Param::grad for the same pass, without stepping.
  void compute_gradients(const Eigen::VectorXd& x, const Eigen::VectorXd& target);

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }
  const LstmConfig& config() const { return cfg_; }

 private:
  struct WindowEntry {
    Eigen::VectorXd input;
    std::vector<LstmCellState> states_before;  // per layer, at entry time
  };
  struct Caches;

  LstmCellParams layer_params(int layer) const;
  std::vector<LstmCellState> zero_states() const;
  std::vector<WindowEntry> pending_window(const Eigen::VectorXd& x) const;
  double replay(const std::vector<WindowEntry>& window, const Eigen::VectorXd& target,
                Caches* caches, std::vector<LstmCellState>* final_states) const;
  void backprop(const std::vector<WindowEntry>& window, const Caches& caches);
  void init_params();

  LstmConfig cfg_;
  std::vector<Param> params_;
  std::deque<WindowEntry> window_;
  std::uint64_t steps_ = 0;
};

}  // namespace bayesviews::learners
