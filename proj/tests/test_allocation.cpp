#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bayesviews/allocation.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace bayesviews;
using namespace bayesviews::alloc;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

views::CanonicalViews make_views(const VectorXd& q, const VectorXd& omega) {
  views::CanonicalViews v;
  v.Q = q;
  v.omega = omega;
  return v;
}
}  // namespace

TEST_CASE("covariance window: perfectly correlated pair") {
  // second asset is a scaled copy of the first, so correlation is 1
  using marketdata::AssetUniverse;
  using marketdata::MarketFrame;
  std::vector<Date> dates;
  for (int t = 0; t < 60; ++t) dates.push_back(Date(2020, 1, 1) + t);
  MarketFrame frame(AssetUniverse({"X", "Y"}), dates);
  std::mt19937_64 rng(8);
  double p = 100.0;
  for (int t = 0; t < 60; ++t) {
    if (t > 0) p *= std::exp(0.01 * testutil::gauss(rng));
    frame.set_price(t, 0, p);
    frame.set_price(t, 1, 3.0 * p);
    frame.set_volume(t, 0, 1);
    frame.set_volume(t, 1, 1);
    frame.set_mcap(t, 0, 1);
    frame.set_mcap(t, 1, 1);
  }
  const MatrixXd cov = estimate_covariance(frame, 55, 40);
  CHECK(cov(0, 1) == doctest::Approx(std::sqrt(cov(0, 0) * cov(1, 1))).epsilon(1e-6));
}

TEST_CASE("covariance of constant prices is the ridge") {
  using marketdata::AssetUniverse;
  using marketdata::MarketFrame;
  std::vector<Date> dates;
  for (int t = 0; t < 50; ++t) dates.push_back(Date(2020, 1, 1) + t);
  MarketFrame frame(AssetUniverse({"X", "Y"}), dates);
  for (int t = 0; t < 50; ++t) {
    frame.set_price(t, 0, 10.0);
    frame.set_price(t, 1, 20.0);
    frame.set_volume(t, 0, 1);
    frame.set_volume(t, 1, 1);
    frame.set_mcap(t, 0, 1);
    frame.set_mcap(t, 1, 1);
  }
  const MatrixXd cov = estimate_covariance(frame, 45, 40);
  CHECK(cov(0, 0) == doctest::Approx(1e-8));
  CHECK(cov(1, 1) == doctest::Approx(1e-8));
  CHECK(cov(0, 1) == doctest::Approx(0.0));
  CHECK_THROWS_AS(estimate_covariance(frame, 30, 40), InsufficientHistory);
}

TEST_CASE("covariance matches a hand loop on the trailing window") {
  const auto frame = testutil::synthetic_frame(3, 120, 17);
  const int t = 100, span = 60;
  const MatrixXd cov = estimate_covariance(frame, t, span);
  // direct two-pass computation over returns r_d, d in [t-span, t)
  MatrixXd r(span, 3);
  for (int d = 0; d < span; ++d) {
    for (int i = 0; i < 3; ++i) {
      r(d, i) = frame.price_matrix()(t - span + d, i) / frame.price_matrix()(t - span + d - 1, i) - 1.0;
    }
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double mi = r.col(i).mean(), mj = r.col(j).mean();
      double s = 0;
      for (int d = 0; d < span; ++d) s += (r(d, i) - mi) * (r(d, j) - mj);
      s /= span - 1;
      CHECK(cov(i, j) == doctest::Approx(s).epsilon(1e-9));
    }
  }
}

TEST_CASE("markowitz closed forms") {
  RiskModel risk(MatrixXd::Identity(2, 2), 0.25, 0.05);
  VectorXd mu(2);
  mu << 0.1, 0.1;
  const VectorXd w = markowitz_weights(mu, risk);
  CHECK(w(0) == doctest::Approx(0.4));
  CHECK(w(1) == doctest::Approx(0.4));

  RiskModel unit(MatrixXd::Identity(3, 3), 1.0, 0.05);
  const VectorXd e1 = VectorXd::Unit(3, 0);
  CHECK((markowitz_weights(e1, unit) - e1).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("markowitz solution beats random perturbations of the objective") {
  std::mt19937_64 rng(4242);
  const int n = 4;
  const MatrixXd sigma = testutil::random_spd(rng, n, 1e-3);
  const VectorXd mu = testutil::random_vector(rng, n, 0.01);
  RiskModel risk(sigma, 0.25, 0.05);
  const VectorXd w = markowitz_weights(mu, risk);
  const double best = oracles::mv_utility(w, mu, sigma, risk.delta);
  for (int trial = 0; trial < 10000; ++trial) {
    const VectorXd probe = w + testutil::random_vector(rng, n, 0.05);
    CHECK(oracles::mv_utility(probe, mu, sigma, risk.delta) <= best + 1e-12);
  }
}

TEST_CASE("equilibrium returns and their round trip") {
  RiskModel risk(MatrixXd::Identity(2, 2), 0.25, 0.05);
  VectorXd w(2);
  w << 0.5, 0.5;
  const auto eq = equilibrium_returns(risk, w);
  CHECK(eq.pi(0) == doctest::Approx(0.125));
  CHECK(eq.pi(1) == doctest::Approx(0.125));

  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5;
    RiskModel r2(testutil::random_spd(rng, n, 1e-3), 0.25, 0.05);
    const VectorXd caps = testutil::random_simplex(rng, n);
    const auto eq2 = equilibrium_returns(r2, caps);
    const VectorXd back = markowitz_weights(eq2.pi, r2);
    CHECK((back - caps).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("default confidence is the diagonal of tau Sigma") {
  RiskModel risk((Eigen::Vector2d(0.04, 0.01)).asDiagonal(), 0.25, 0.05);
  const VectorXd omega = default_confidence(risk);
  CHECK(omega(0) == doctest::Approx(0.002));
  CHECK(omega(1) == doctest::Approx(0.0005));

  CHECK_THROWS_AS(RiskModel(MatrixXd::Identity(2, 2), 0.25, 0.0), AllocationError);

  std::mt19937_64 rng(5);
  const MatrixXd sigma = testutil::random_spd(rng, 4, 1e-3);
  RiskModel dense(sigma, 0.25, 0.05);
  CHECK((default_confidence(dense) - 0.05 * sigma.diagonal()).cwiseAbs().maxCoeff() < 1e-18);
}

TEST_CASE("posterior collapses to the prior or the views in the confidence limits") {
  std::mt19937_64 rng(606);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3;
    RiskModel risk(testutil::random_spd(rng, n, 2e-4), 0.25, 0.05);
    const auto eq = equilibrium_returns(risk, testutil::random_simplex(rng, n));
    const VectorXd q = testutil::random_vector(rng, n, 0.01);

    const auto vague = bl_posterior(eq, risk, make_views(q, VectorXd::Constant(n, 1e12)));
    CHECK((vague.mu - eq.pi).cwiseAbs().maxCoeff() < 1e-6);

    const auto sharp = bl_posterior(eq, risk, make_views(q, VectorXd::Constant(n, 1e-12)));
    CHECK((sharp.mu - q).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("posterior agrees with a quadrature Bayes oracle in one dimension") {
  const double sigma2 = 2.3e-4, delta = 0.25, tau = 0.05;
  RiskModel risk(sigma2 * MatrixXd::Identity(1, 1), delta, tau);
  VectorXd w1(1);
  w1 << 1.0;
  const auto eq = equilibrium_returns(risk, w1);
  const double q = 0.013, omega = 3e-5;
  const auto post = bl_posterior(eq, risk, make_views(VectorXd::Constant(1, q),
                                                      VectorXd::Constant(1, omega)));
  const auto ref = oracles::grid_bayes_1d(eq.pi(0), tau * sigma2, q, omega);
  CHECK(post.mu(0) == doctest::Approx(ref.mean).epsilon(1e-7));
  // posterior covariance = sample covariance + blended estimation variance
  CHECK(post.sigma(0, 0) - sigma2 == doctest::Approx(ref.var).epsilon(1e-6));
}

TEST_CASE("posterior agrees with the covariance-form oracle for random instances") {
  std::mt19937_64 rng(321);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3;
    RiskModel risk(testutil::random_spd(rng, n, 2e-4), 0.25, 0.05);
    const auto eq = equilibrium_returns(risk, testutil::random_simplex(rng, n));
    const VectorXd q = testutil::random_vector(rng, n, 0.01);
    VectorXd omega(n);
    for (int i = 0; i < n; ++i) omega(i) = testutil::uniform(rng, 1e-6, 1e-4);

    const auto post = bl_posterior(eq, risk, make_views(q, omega));
    const auto ref = oracles::bl_posterior_general(MatrixXd::Identity(n, n), q,
                                                   omega.asDiagonal(), eq.pi, risk.tau,
                                                   risk.sigma);
    CHECK((post.mu - ref.mu).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((post.sigma - ref.sigma).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("no-view posterior weights are the scaled market weights") {
  std::mt19937_64 rng(11);
  const int n = 4;
  RiskModel risk(testutil::random_spd(rng, n, 1e-3), 0.25, 0.05);
  const VectorXd caps = testutil::random_simplex(rng, n);
  const auto eq = equilibrium_returns(risk, caps);
  const auto post = bl_posterior(eq, risk, make_views(VectorXd::Zero(n),
                                                      VectorXd::Constant(n, kInf)));
  CHECK((post.sigma - 1.05 * risk.sigma).cwiseAbs().maxCoeff() < 1e-12);
  const VectorXd w = bl_weights(post, risk);
  CHECK((w - caps / 1.05).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("bl_weights inverts a constructed posterior exactly") {
  std::mt19937_64 rng(12);
  const int n = 3;
  const MatrixXd sigma_bar = testutil::random_spd(rng, n, 1e-3);
  RiskModel risk(MatrixXd::Identity(n, n), 0.25, 0.05);
  const VectorXd v = testutil::random_vector(rng, n);
  BLPosterior post;
  post.sigma = sigma_bar;
  post.mu = risk.delta * sigma_bar * v;
  CHECK((bl_weights(post, risk) - v).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("bl_weights maximizes the posterior objective") {
  std::mt19937_64 rng(13);
  const int n = 4;
  RiskModel risk(testutil::random_spd(rng, n, 1e-3), 0.25, 0.05);
  const auto eq = equilibrium_returns(risk, testutil::random_simplex(rng, n));
  VectorXd omega(n);
  for (int i = 0; i < n; ++i) omega(i) = testutil::uniform(rng, 1e-6, 1e-4);
  const auto post = bl_posterior(eq, risk, make_views(testutil::random_vector(rng, n, 0.01),
                                                      omega));
  const VectorXd w = bl_weights(post, risk);
  const double best = oracles::mv_utility(w, post.mu, post.sigma, risk.delta);
  for (int trial = 0; trial < 10000; ++trial) {
    const VectorXd probe = w + testutil::random_vector(rng, n, 0.05);
    CHECK(oracles::mv_utility(probe, post.mu, post.sigma, risk.delta) <= best + 1e-12);
  }
}

TEST_CASE("one-hot argmax with deterministic tie-break") {
  VectorXd pt(2), pn(2);
  pt << 1, 1;
  pn << 1.10, 1.05;
  CHECK(optimal_one_hot(pt, pn)(0) == 1.0);

  VectorXd flat_t = VectorXd::Constant(4, 2.0);
  VectorXd flat_n = VectorXd::Constant(4, 2.2);
  const VectorXd w = optimal_one_hot(flat_t, flat_n);
  CHECK(w(0) == 1.0);
  CHECK(w.sum() == 1.0);

  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 5; ++trial) {
    VectorXd a(5), b(5);
    for (int i = 0; i < 5; ++i) {
      a(i) = testutil::uniform(rng, 1.0, 100.0);
      b(i) = testutil::uniform(rng, 1.0, 100.0);
    }
    const VectorXd got = optimal_one_hot(a, b);
    int best = 0;
    for (int i = 1; i < 5; ++i) {
      if (b(i) / a(i) > b(best) / a(best)) best = i;
    }
    CHECK(got(best) == 1.0);
  }
}

TEST_CASE("one-hot vector maximizes the elementwise-return objective by enumeration") {
  std::mt19937_64 rng(15);
  VectorXd pt(6), pn(6);
  for (int i = 0; i < 6; ++i) {
    pt(i) = testutil::uniform(rng, 5.0, 50.0);
    pn(i) = testutil::uniform(rng, 5.0, 50.0);
  }
  const VectorXd w_star = optimal_one_hot(pt, pn);
  const double value = w_star.cwiseQuotient(pt).cwiseProduct(pn).sum();
  for (int i = 0; i < 6; ++i) {
    CHECK(value >= VectorXd::Unit(6, i).cwiseQuotient(pt).cwiseProduct(pn).sum() - 1e-15);
  }
}

TEST_CASE("inverse views match a hand-expanded scalar formula") {
  const double sigma2 = 4e-4, delta = 0.25, tau = 0.05, omega = 2e-5, wstar = 0.8;
  RiskModel risk(sigma2 * MatrixXd::Identity(1, 1), delta, tau);
  VectorXd w1(1);
  w1 << 1.0;
  const auto eq = equilibrium_returns(risk, w1);
  const double pi = eq.pi(0);

  const double blend = 1.0 / (1.0 / (tau * sigma2) + 1.0 / omega);
  const double sigma_bar = sigma2 + blend;
  const double expected = delta * (omega / (tau * sigma2) + 1.0) * sigma_bar * wstar -
                          (omega / (tau * sigma2)) * pi;
  const VectorXd got = invert_views(VectorXd::Constant(1, wstar), eq, risk,
                                    VectorXd::Constant(1, omega));
  CHECK(got(0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("forward-then-inverse recovers the original views") {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 5;
    RiskModel risk(testutil::random_spd(rng, n, 2e-4), 0.25, 0.05);
    const auto eq = equilibrium_returns(risk, testutil::random_simplex(rng, n));
    const VectorXd omega = default_confidence(risk);
    const VectorXd q0 = testutil::random_vector(rng, n, 0.01);

    const auto post = bl_posterior(eq, risk, make_views(q0, omega));
    const VectorXd w = bl_weights(post, risk);
    const VectorXd q_back = invert_views(w, eq, risk, omega);
    CHECK((q_back - q0).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("inverse-then-forward recovers one-hot targets") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 5;
    RiskModel risk(testutil::random_spd(rng, n, 2e-4), 0.25, 0.05);
    const auto eq = equilibrium_returns(risk, testutil::random_simplex(rng, n));
    const VectorXd omega = default_confidence(risk);
    const VectorXd w_star = VectorXd::Unit(n, static_cast<int>(testutil::uniform(rng, 0, n)));

    const VectorXd q_star = invert_views(w_star, eq, risk, omega);
    const auto post = bl_posterior(eq, risk, make_views(q_star, omega));
    CHECK((bl_weights(post, risk) - w_star).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("simplex projection closed cases") {
  VectorXd on(3);
  on << 0.2, 0.3, 0.5;
  CHECK((project_simplex(on) - on).cwiseAbs().maxCoeff() < 1e-12);

  VectorXd off(2);
  off << 2.0, -1.0;
  const VectorXd p = project_simplex(off);
  CHECK(p(0) == doctest::Approx(1.0));
  CHECK(p(1) == doctest::Approx(0.0));
}

TEST_CASE("simplex projection matches a grid search") {
  std::mt19937_64 rng(18);
  SUBCASE("two assets") {
    for (int trial = 0; trial < 20; ++trial) {
      const VectorXd w = testutil::random_vector(rng, 2, 2.0);
      const VectorXd p = project_simplex(w);
      double best = std::numeric_limits<double>::max();
      const int steps = 20000;
      for (int k = 0; k <= steps; ++k) {
        VectorXd cand(2);
        cand << double(k) / steps, 1.0 - double(k) / steps;
        best = std::min(best, (cand - w).squaredNorm());
      }
      CHECK((p - w).squaredNorm() <= best + 1e-12);
      CHECK(best - (p - w).squaredNorm() < 1e-7);  // grid resolution bound
      CHECK(p.minCoeff() >= 0.0);
      CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
  SUBCASE("three assets") {
    for (int trial = 0; trial < 5; ++trial) {
      const VectorXd w = testutil::random_vector(rng, 3, 2.0);
      const VectorXd p = project_simplex(w);
      double best = std::numeric_limits<double>::max();
      const int steps = 400;
      for (int a = 0; a <= steps; ++a) {
        for (int b = 0; b <= steps - a; ++b) {
          VectorXd cand(3);
          cand << double(a) / steps, double(b) / steps, double(steps - a - b) / steps;
          best = std::min(best, (cand - w).squaredNorm());
        }
      }
      CHECK((p - w).squaredNorm() <= best + 1e-12);
      CHECK(best - (p - w).squaredNorm() < 1e-4);
    }
  }
}

TEST_CASE("shrinkage: the blended variance is below both inputs") {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 4;
    const MatrixXd sigma = testutil::random_spd(rng, n, 2e-4);
    RiskModel risk(sigma, 0.25, 0.05);
    VectorXd omega(n);
    for (int i = 0; i < n; ++i) omega(i) = testutil::uniform(rng, 1e-6, 1e-4);
    const auto eq = equilibrium_returns(risk, testutil::random_simplex(rng, n));
    const auto post = bl_posterior(eq, risk, make_views(VectorXd::Zero(n), omega));

    const MatrixXd blend = post.sigma - sigma;  // M = [(tauS)^-1 + Omega^-1]^-1
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(risk.tau * sigma - blend);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
    for (int i = 0; i < n; ++i) CHECK(blend(i, i) <= omega(i) + 1e-12);
  }
}

TEST_CASE("posterior mean lies between prior and view for diagonal models") {
  std::mt19937_64 rng(20);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 3;
    VectorXd vars(n), omega(n);
    for (int i = 0; i < n; ++i) {
      vars(i) = testutil::uniform(rng, 1e-5, 1e-3);
      omega(i) = testutil::uniform(rng, 1e-6, 1e-4);
    }
    RiskModel risk(vars.asDiagonal(), 0.25, 0.05);
    const auto eq = equilibrium_returns(risk, testutil::random_simplex(rng, n));
    const VectorXd q = testutil::random_vector(rng, n, 0.02);
    const auto post = bl_posterior(eq, risk, make_views(q, omega));
    for (int i = 0; i < n; ++i) {
      CHECK(post.mu(i) >= std::min(eq.pi(i), q(i)) - 1e-12);
      CHECK(post.mu(i) <= std::max(eq.pi(i), q(i)) + 1e-12);
    }
  }
}
