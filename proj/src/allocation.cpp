#include "bayesviews/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace bayesviews::alloc {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Near-exact views: a zero omega entry would produce an infinite precision,
// so it is floored at a value that still dominates every realistic prior.
constexpr double kOmegaFloor = 1e-120;

MatrixXd spd_inverse(const MatrixXd& m, const char* what) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw SingularCovariance(std::string(what) + " is not positive definite");
  }
  return llt.solve(MatrixXd::Identity(m.rows(), m.cols()));
}

}  // namespace

RiskModel::RiskModel(MatrixXd sigma_, double delta_, double tau_)
    : sigma(std::move(sigma_)), delta(delta_), tau(tau_) {
  if (sigma.rows() != sigma.cols() || sigma.rows() < 1) {
    throw AllocationError("covariance matrix must be square and non-empty");
  }
  if (!(delta > 0) || !std::isfinite(delta) || !(tau > 0) || !std::isfinite(tau)) {
    throw AllocationError("delta and tau must be finite and positive");
  }
  const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-9 * std::max(1.0, sigma.cwiseAbs().maxCoeff())) {
    throw AllocationError("covariance matrix is not symmetric");
  }
  Eigen::LLT<MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw SingularCovariance("covariance matrix is not positive definite");
  }
}

MatrixXd estimate_covariance(const marketdata::MarketFrame& frame, int t, int timespan) {
  const int n = frame.n_assets();
  if (timespan < 2) throw AllocationError("timespan must be at least 2 days");
  if (t < timespan + 1 || t >= frame.n_days()) {
    throw InsufficientHistory("need " + std::to_string(timespan + 1) + " prices before day " +
                              std::to_string(t));
  }

  MatrixXd returns(timespan, n);
  for (int d = 0; d < timespan; ++d) {
    const int row = t - timespan + d;
    for (int i = 0; i < n; ++i) {
      const double prev = frame.price(row - 1, i);
      const double cur = frame.price(row, i);
      if (!(prev > 0) || !(cur > 0)) {
        throw InsufficientHistory("non-positive price in the covariance window for '" +
                                  frame.universe().ticker(i) + "'");
      }
      returns(d, i) = cur / prev - 1.0;
    }
  }

  const Eigen::RowVectorXd mean = returns.colwise().mean();
  const MatrixXd centered = returns.rowwise() - mean;
  MatrixXd cov = centered.transpose() * centered / static_cast<double>(timespan - 1);
  cov = 0.5 * (cov + cov.transpose());

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (lo < 1e-10 * std::max(hi, 0.0)) {
    const double meandiag = cov.diagonal().mean();
    const double scale = meandiag > 0 ? meandiag : 1.0;
    cov += 1e-8 * scale * MatrixXd::Identity(n, n);
  }
  return cov;
}

VectorXd markowitz_weights(const VectorXd& mu, const RiskModel& risk) {
  if (mu.size() != risk.n()) throw AllocationError("mu has wrong length");
  Eigen::LLT<MatrixXd> llt(risk.sigma);
  if (llt.info() != Eigen::Success) throw SingularCovariance("covariance is singular");
  return llt.solve(mu) / risk.delta;
}

Equilibrium equilibrium_returns(const RiskModel& risk, const VectorXd& w_cap) {
  if (w_cap.size() != risk.n()) throw AllocationError("w_cap has wrong length");
  if (w_cap.minCoeff() < -1e-9 || std::abs(w_cap.sum() - 1.0) > 1e-6) {
    throw AllocationError("capitalization weights must be nonnegative and sum to 1");
  }
  Equilibrium eq;
  eq.w_cap = w_cap;
  eq.pi = risk.delta * risk.sigma * w_cap;
  return eq;
}

VectorXd default_confidence(const RiskModel& risk) {
  return risk.tau * risk.sigma.diagonal();
}

BLPosterior bl_posterior(const Equilibrium& eq, const RiskModel& risk,
                         const views::CanonicalViews& v) {
  const int n = risk.n();
  if (v.n() != n || eq.pi.size() != n) throw AllocationError("posterior inputs disagree on n");
  for (int i = 0; i < n; ++i) {
    if (std::isnan(v.omega(i)) || v.omega(i) < 0) {
      throw AllocationError("omega entries must be nonnegative (inf allowed)");
    }
  }

  const MatrixXd tau_sigma_inv = spd_inverse(risk.tau * risk.sigma, "tau * Sigma");
  VectorXd omega_inv(n);
  for (int i = 0; i < n; ++i) {
    if (std::isinf(v.omega(i))) omega_inv(i) = 0.0;
    else omega_inv(i) = 1.0 / std::max(v.omega(i), kOmegaFloor);
  }

  MatrixXd precision = tau_sigma_inv;
  precision.diagonal() += omega_inv;
  Eigen::LLT<MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw SingularPrecision("combined precision matrix is not positive definite");
  }
  const MatrixXd blend = llt.solve(MatrixXd::Identity(n, n));

  BLPosterior post;
  post.sigma = risk.sigma + blend;
  post.sigma = 0.5 * (post.sigma + post.sigma.transpose());
  post.mu = llt.solve(tau_sigma_inv * eq.pi + omega_inv.asDiagonal() * v.Q);
  return post;
}

VectorXd bl_weights(const BLPosterior& post, const RiskModel& risk) {
  Eigen::LLT<MatrixXd> llt(post.sigma);
  if (llt.info() != Eigen::Success) {
    throw SingularCovariance("posterior covariance is not positive definite");
  }
  return llt.solve(post.mu) / risk.delta;
}

VectorXd optimal_one_hot(const VectorXd& price_t, const VectorXd& price_next) {
  if (price_t.size() != price_next.size() || price_t.size() < 1) {
    throw AllocationError("price vectors must have equal, positive length");
  }
  if (price_t.minCoeff() <= 0 || price_next.minCoeff() <= 0) {
    throw AllocationError("prices must be positive");
  }
  int best = 0;
  double best_gross = price_next(0) / price_t(0);
  for (int i = 1; i < price_t.size(); ++i) {
    const double g = price_next(i) / price_t(i);
    if (g > best_gross) {
      best_gross = g;
      best = i;
    }
  }
  VectorXd w = VectorXd::Zero(price_t.size());
  w(best) = 1.0;
  return w;
}

VectorXd invert_views(const VectorXd& w_star, const Equilibrium& eq, const RiskModel& risk,
                      const VectorXd& omega) {
  const int n = risk.n();
  if (w_star.size() != n || omega.size() != n) throw AllocationError("inputs disagree on n");
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(omega(i)) || !(omega(i) > 0)) {
      throw AllocationError("omega entries must be finite and positive");
    }
  }

  const MatrixXd tau_sigma_inv = spd_inverse(risk.tau * risk.sigma, "tau * Sigma");
  MatrixXd precision = tau_sigma_inv;
  precision.diagonal() += omega.cwiseInverse();
  Eigen::LLT<MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw SingularPrecision("combined precision matrix is not positive definite");
  }
  const MatrixXd post_sigma = risk.sigma + llt.solve(MatrixXd::Identity(n, n));

  const MatrixXd omega_tsi = omega.asDiagonal() * tau_sigma_inv;
  return risk.delta * (omega_tsi + MatrixXd::Identity(n, n)) * post_sigma * w_star -
         omega_tsi * eq.pi;
}

VectorXd project_simplex(const VectorXd& w) {
  const int n = static_cast<int>(w.size());
  if (n < 1) throw AllocationError("cannot project an empty vector");
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(w(i))) throw AllocationError("weights must be finite");
  }

  std::vector<double> u(w.data(), w.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cumsum = 0.0;
  double theta = 0.0;
  int support = 0;
  for (int j = 0; j < n; ++j) {
    cumsum += u[j];
    const double candidate = (cumsum - 1.0) / (j + 1);
    if (u[j] - candidate > 0) {
      theta = candidate;
      support = j + 1;
    }
  }
  (void)support;
  VectorXd out(n);
  for (int i = 0; i < n; ++i) out(i) = std::max(0.0, w(i) - theta);
  // guard against accumulated rounding
  const double s = out.sum();
  if (s > 0) out /= s;
  return out;
}

}  // namespace bayesviews::alloc
