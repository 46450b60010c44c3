#pragma once

#include <vector>

#include "bayesviews/learners.hpp"

namespace bayesviews::learners {

/// First-order Takagi-Sugeno-Kang rule grown by the evolving clustering
/// method. Memberships are symmetric triangles of full width `width` around
/// the center; the consequent is an affine map of the input, refined by
/// recursive least squares.
struct FuzzyRule {
  Eigen::VectorXd center;  // b, also the ECM cluster center
  double width = 0.0;      // d, activation range
  double radius = 0.0;     // current ECM cluster radius, <= width / 2
  long count = 0;          // samples absorbed by the cluster
  Eigen::MatrixXd coeff;   // output_dim x (1 + input_dim)
  Eigen::MatrixXd rls_p;   // RLS covariance, (1 + input_dim)^2
};

struct DenfisConfig {
  int input_dim = 0;
  int output_dim = 0;
  double d = 0.21;   // membership activation range; new-cluster threshold is d/2
  int m_activate = 3;
  double rls_init = 1e4;
  // When small d meets a wide input stream, clustering would otherwise grow
  // one rule per sample without bound; at the cap the nearest cluster
  // absorbs the sample instead.
  int max_rules = 512;
};

/// Online neuro-fuzzy view model: one-pass clustering decides which rules
/// exist, the m nearest rules vote with membership-product weights, and
/// their consequents are fit by weighted recursive least squares.
class DenfisModel : public OnlineViewModel {
 public:
  explicit DenfisModel(DenfisConfig cfg);

  Eigen::VectorXd predict(const Eigen::VectorXd& x) const override;
  double update(const Eigen::VectorXd& x, const Eigen::VectorXd& target) override;
  void reset() override;
  std::string snapshot() const override;
  void restore(const std::string& blob) override;
  bool ready() const override { return !rules_.empty(); }

  int rule_count() const { return static_cast<int>(rules_.size()); }
  const std::vector<FuzzyRule>& rules() const { return rules_; }
  const DenfisConfig& config() const { return cfg_; }

  /// Per-dimension triangular membership product of x under a rule.
  static double membership(const FuzzyRule& rule, const Eigen::VectorXd& x);

 private:
  struct Activation {
    int rule = 0;
    double weight = 0.0;
  };
  std::vector<Activation> activate(const Eigen::VectorXd& x) const;

  DenfisConfig cfg_;
  std::vector<FuzzyRule> rules_;
};

}  // namespace bayesviews::learners
