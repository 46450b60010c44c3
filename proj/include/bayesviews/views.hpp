#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>

namespace bayesviews::views {

struct ViewError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimensionMismatch : ViewError { using ViewError::ViewError; };
struct NotSymmetric : ViewError { using ViewError::ViewError; };
struct DependentViews : ViewError { using ViewError::ViewError; };
struct SingularSystem : ViewError { using ViewError::ViewError; };

/// General market views: k statements "the portfolio P.row(j) has expected
/// return Q(j) with variance Omega(j,j)". Rows of P sum to 0 (relative view)
/// or 1 (absolute view). Omega is symmetric PSD.
struct ViewSet {
  Eigen::MatrixXd P;      // k x n
  Eigen::VectorXd Q;      // k
  Eigen::MatrixXd Omega;  // k x k

  int k() const { return static_cast<int>(P.rows()); }
  int n() const { return static_cast<int>(P.cols()); }
};

/// Views in the strict per-asset form: the loading matrix is implicitly the
/// identity, Omega is the diagonal of the confidence matrix. An infinite
/// omega entry encodes "no view" on that asset (zero precision); its Q entry
/// is an unused placeholder.
struct CanonicalViews {
  Eigen::VectorXd Q;      // n
  Eigen::VectorXd omega;  // n, entries >= 0, +inf allowed

  int n() const { return static_cast<int>(Q.size()); }
  bool has_view(int i) const { return std::isfinite(omega(i)); }
};

struct CompatibilityReport {
  bool compatible = false;
  int rank_P = 0;
  bool independent = false;
  /// When incompatible: coefficients c with c'P ~ 0 but c'Q != 0, scaled so
  /// the largest magnitude entry is 1 and the first nonzero entry positive.
  std::optional<Eigen::VectorXd> witness;
};

/// Rank / compatibility analysis of a view set. Independence means rank(P)
/// equals the number of views; compatibility means Q lies in the row-reach
/// of P, i.e. rank([P|Q]) == rank(P). Independent views are always
/// compatible.
CompatibilityReport check_compatibility(const ViewSet& views, double tol = 1e-10);

/// Rotate a view set so the confidence matrix becomes diagonal, using the
/// spectral decomposition Omega = V diag(...) V'. The rotated set (V'P, V'Q,
/// diag) represents the same information; the Black-Litterman posterior is
/// unchanged. Returns the input untouched when Omega is already diagonal.
ViewSet diagonalize_confidence(const ViewSet& views, double tol = 1e-10);

/// Convert an independent mixed relative/absolute view set into one-hot
/// absolute views on the mentioned assets, solving the view equations plus a
/// market-weighted anchor per connected group of assets (redundant anchors
/// are dropped by rank pivoting; leftover freedom is resolved minimum-norm).
/// View uncertainty is propagated linearly through the solve. strict_rows
/// enforces the 0/1 row-sum invariant; canonicalize turns it off for the
/// rotated intermediate, whose rows are recombinations.
ViewSet to_absolute(const ViewSet& views, const Eigen::VectorXd& w, double tol = 1e-10,
                    bool strict_rows = true);

/// Full canonicalization: diagonalize the confidence, convert to one-hot
/// absolute views and pad unmentioned assets with an infinite omega entry.
CanonicalViews canonicalize(const ViewSet& views, const Eigen::VectorXd& w, double tol = 1e-10);

/// JSON (de)serialization. Canonical form uses the string "inf" as the
/// no-view sentinel in omega_diag.
std::string to_json(const ViewSet& views);
std::string to_json(const CanonicalViews& views);
ViewSet viewset_from_json(const std::string& text);
CanonicalViews canonical_from_json(const std::string& text);

}  // namespace bayesviews::views
