#pragma once

#include <Eigen/Dense>

#include <stdexcept>

#include "bayesviews/marketdata.hpp"
#include "bayesviews/views.hpp"

namespace bayesviews::alloc {

struct AllocationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InsufficientHistory : AllocationError { using AllocationError::AllocationError; };
struct SingularCovariance : AllocationError { using AllocationError::AllocationError; };
struct SingularPrecision : AllocationError { using AllocationError::AllocationError; };

/// Covariance of daily returns plus the two scalars steering the blend:
/// delta (risk aversion) and tau (confidence of the equilibrium estimate).
struct RiskModel {
  Eigen::MatrixXd sigma;
  double delta = 0.25;
  double tau = 0.05;

  RiskModel(Eigen::MatrixXd sigma_, double delta_, double tau_);
  int n() const { return static_cast<int>(sigma.rows()); }
};

/// Reverse-optimized market equilibrium: the expected returns under which
/// the capitalization weights are mean-variance optimal.
struct Equilibrium {
  Eigen::VectorXd pi;     // equilibrium risk premiums
  Eigen::VectorXd w_cap;  // capitalization weights, on the simplex
};

struct BLPosterior {
  Eigen::VectorXd mu;       // posterior expected returns
  Eigen::MatrixXd sigma;    // posterior covariance
};

/// Sample covariance of daily simple returns over the trailing window
/// [t - timespan, t), ridge-regularized when near-singular.
Eigen::MatrixXd estimate_covariance(const marketdata::MarketFrame& frame, int t, int timespan);

/// Unconstrained mean-variance solution w = (delta Sigma)^-1 mu.
Eigen::VectorXd markowitz_weights(const Eigen::VectorXd& mu, const RiskModel& risk);

/// Pi = delta * Sigma * w_cap, the returns for which w_cap is optimal.
Equilibrium equilibrium_returns(const RiskModel& risk, const Eigen::VectorXd& w_cap);

/// Default per-asset view variance: the diagonal of tau * Sigma.
Eigen::VectorXd default_confidence(const RiskModel& risk);

/// Blend the equilibrium prior with canonical views. Infinite omega entries
/// contribute zero precision (no view); zero entries are treated as
/// near-exact views.
BLPosterior bl_posterior(const Equilibrium& eq, const RiskModel& risk,
                         const views::CanonicalViews& v);

/// w = (delta * posterior_sigma)^-1 * posterior_mu.
Eigen::VectorXd bl_weights(const BLPosterior& post, const RiskModel& risk);

/// Hindsight-optimal daily allocation: all capital on the asset with the
/// largest gross return, lowest index on ties.
Eigen::VectorXd optimal_one_hot(const Eigen::VectorXd& price_t, const Eigen::VectorXd& price_next);

/// Inverse optimization: the view returns Q* whose posterior weights equal
/// w_star. Round trip: bl_weights(bl_posterior(eq, risk, {Q*, omega})) == w_star.
Eigen::VectorXd invert_views(const Eigen::VectorXd& w_star, const Equilibrium& eq,
                             const RiskModel& risk, const Eigen::VectorXd& omega);

/// Euclidean projection onto {w : w_i >= 0, sum w_i = 1}.
Eigen::VectorXd project_simplex(const Eigen::VectorXd& w);

}  // namespace bayesviews::alloc
