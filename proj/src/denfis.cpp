#include "bayesviews/denfis.hpp"

#include <algorithm>
#include <cmath>

#include "bayesviews/detail/blob.hpp"

namespace bayesviews::learners {

namespace {
using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd regressor(const VectorXd& x) {
  VectorXd phi(x.size() + 1);
  phi(0) = 1.0;
  phi.tail(x.size()) = x;
  return phi;
}

// Cluster distance is Euclidean scaled by sqrt(dim): the activation range d
// then reads as an RMS per-dimension deviation, which keeps one value of d
// meaningful for inputs of any width.
double cluster_distance(const VectorXd& a, const VectorXd& b) {
  return (a - b).norm() / std::sqrt(static_cast<double>(a.size()));
}
}  // namespace

DenfisModel::DenfisModel(DenfisConfig cfg) : cfg_(cfg) {
  if (cfg_.input_dim < 1 || cfg_.output_dim < 1 || !(cfg_.d > 0) || cfg_.m_activate < 1) {
    throw LearnerError("DENFIS configuration values must be positive");
  }
}

double DenfisModel::membership(const FuzzyRule& rule, const VectorXd& x) {
  double mu = 1.0;
  for (int j = 0; j < x.size(); ++j) {
    const double m = 1.0 - 2.0 * std::abs(x(j) - rule.center(j)) / rule.width;
    if (m <= 0.0) return 0.0;
    mu *= m;
  }
  return mu;
}

std::vector<DenfisModel::Activation> DenfisModel::activate(const VectorXd& x) const {
  std::vector<std::pair<double, int>> by_dist;
  by_dist.reserve(rules_.size());
  for (int r = 0; r < static_cast<int>(rules_.size()); ++r) {
    by_dist.emplace_back(cluster_distance(x, rules_[r].center), r);
  }
  std::sort(by_dist.begin(), by_dist.end());
  const int m = std::min<int>(cfg_.m_activate, static_cast<int>(by_dist.size()));

  std::vector<Activation> act(m);
  double total = 0.0;
  for (int k = 0; k < m; ++k) {
    act[k].rule = by_dist[k].second;
    act[k].weight = membership(rules_[act[k].rule], x);
    total += act[k].weight;
  }
  if (total <= 1e-300) {
    // outside every triangle: fall back to inverse-squared-distance voting
    total = 0.0;
    for (int k = 0; k < m; ++k) {
      act[k].weight = 1.0 / (1e-12 + by_dist[k].first * by_dist[k].first);
      total += act[k].weight;
    }
  }
  for (auto& a : act) a.weight /= total;
  return act;
}

VectorXd DenfisModel::predict(const VectorXd& x) const {
  if (x.size() != cfg_.input_dim) throw DimensionMismatch("input length mismatch");
  if (rules_.empty()) throw NoRules("DENFIS has no rules yet; update it first");
  const VectorXd phi = regressor(x);
  VectorXd out = VectorXd::Zero(cfg_.output_dim);
  for (const auto& a : activate(x)) {
    out += a.weight * (rules_[a.rule].coeff * phi);
  }
  return out;
}

double DenfisModel::update(const VectorXd& x, const VectorXd& target) {
  if (x.size() != cfg_.input_dim) throw DimensionMismatch("input length mismatch");
  if (target.size() != cfg_.output_dim) throw DimensionMismatch("target length mismatch");
  for (int i = 0; i < target.size(); ++i) {
    if (!std::isfinite(target(i))) throw NonFiniteLoss("target contains non-finite values");
  }

  const VectorXd before = rules_.empty() ? VectorXd::Zero(cfg_.output_dim) : predict(x);
  const double loss = (before - target).squaredNorm() / cfg_.output_dim;

  // ECM step: absorb into the nearest cluster, widen it, or spawn a rule.
  const double threshold = cfg_.d / 2.0;
  int nearest = -1;
  double dmin = std::numeric_limits<double>::infinity();
  for (int r = 0; r < static_cast<int>(rules_.size()); ++r) {
    const double dist = cluster_distance(x, rules_[r].center);
    if (dist < dmin) {
      dmin = dist;
      nearest = r;
    }
  }

  const bool saturated = static_cast<int>(rules_.size()) >= cfg_.max_rules;
  if (nearest < 0 || (dmin > threshold && !saturated)) {
    FuzzyRule rule;
    rule.center = x;
    rule.width = cfg_.d;
    rule.radius = 0.0;
    rule.count = 1;
    rule.coeff = MatrixXd::Zero(cfg_.output_dim, cfg_.input_dim + 1);
    rule.coeff.col(0) = target;  // new rule starts as a constant consequent
    rule.rls_p = cfg_.rls_init * MatrixXd::Identity(cfg_.input_dim + 1, cfg_.input_dim + 1);
    rules_.push_back(std::move(rule));
  } else {
    FuzzyRule& rule = rules_[nearest];
    rule.count += 1;
    rule.center += (x - rule.center) / static_cast<double>(rule.count);
    if (dmin > rule.radius) {
      rule.radius = std::min(threshold, std::max(rule.radius, cluster_distance(x, rule.center)));
    }
  }

  // Weighted RLS on the activated consequents.
  const VectorXd phi = regressor(x);
  for (const auto& a : activate(x)) {
    if (a.weight < 1e-12) continue;
    FuzzyRule& rule = rules_[a.rule];
    const VectorXd p_phi = rule.rls_p * phi;
    const double denom = 1.0 / a.weight + phi.dot(p_phi);
    const VectorXd gain = p_phi / denom;
    const VectorXd err = target - rule.coeff * phi;
    rule.coeff += err * gain.transpose();
    rule.rls_p -= gain * p_phi.transpose();
    rule.rls_p = 0.5 * (rule.rls_p + rule.rls_p.transpose());
  }
  return loss;
}

void DenfisModel::reset() { rules_.clear(); }

std::string DenfisModel::snapshot() const {
  detail::BlobWriter w;
  w.tag("BVDENF1");
  w.i32(cfg_.input_dim);
  w.i32(cfg_.output_dim);
  w.f64(cfg_.d);
  w.i32(cfg_.m_activate);
  w.f64(cfg_.rls_init);
  w.i32(cfg_.max_rules);
  w.i32(static_cast<std::int32_t>(rules_.size()));
  for (const auto& r : rules_) {
    w.vec(r.center);
    w.f64(r.width);
    w.f64(r.radius);
    w.u64(static_cast<std::uint64_t>(r.count));
    w.mat(r.coeff);
    w.mat(r.rls_p);
  }
  return w.str();
}

void DenfisModel::restore(const std::string& blob) {
  detail::BlobReader r(blob);
  r.expect("BVDENF1");
  DenfisConfig cfg;
  cfg.input_dim = r.i32();
  cfg.output_dim = r.i32();
  cfg.d = r.f64();
  cfg.m_activate = r.i32();
  cfg.rls_init = r.f64();
  cfg.max_rules = r.i32();
  cfg_ = cfg;
  rules_.clear();
  const int nr = r.i32();
  for (int k = 0; k < nr; ++k) {
    FuzzyRule rule;
    rule.center = r.vec();
    rule.width = r.f64();
    rule.radius = r.f64();
    rule.count = static_cast<long>(r.u64());
    rule.coeff = r.mat();
    rule.rls_p = r.mat();
    rules_.push_back(std::move(rule));
  }
}

}  // namespace bayesviews::learners
