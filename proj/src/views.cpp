#include "bayesviews/views.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace bayesviews::views {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_dims(const ViewSet& v) {
  if (v.P.rows() != v.Q.size() || v.Omega.rows() != v.Omega.cols() ||
      v.Omega.rows() != v.P.rows()) {
    throw DimensionMismatch("view matrices have inconsistent dimensions: P " +
                            std::to_string(v.P.rows()) + "x" + std::to_string(v.P.cols()) +
                            ", Q " + std::to_string(v.Q.size()) + ", Omega " +
                            std::to_string(v.Omega.rows()) + "x" + std::to_string(v.Omega.cols()));
  }
  if (v.P.rows() < 1 || v.P.cols() < 1) {
    throw DimensionMismatch("a view set needs k >= 1 views on n >= 1 assets");
  }
}

int svd_rank(const Eigen::JacobiSVD<MatrixXd>& svd, double tol) {
  if (svd.singularValues().size() == 0) return 0;
  const double cutoff = tol * svd.singularValues()(0);
  int r = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i) {
    if (svd.singularValues()(i) > cutoff) ++r;
  }
  return r;
}

/// Scale so max |entry| is 1 and the first nonzero entry is positive.
VectorXd normalize_direction(VectorXd c) {
  double m = c.cwiseAbs().maxCoeff();
  if (m > 0) c /= m;
  for (int i = 0; i < c.size(); ++i) {
    if (std::abs(c(i)) > 1e-12) {
      if (c(i) < 0) c = -c;
      break;
    }
  }
  return c;
}

bool is_one_hot_row(const Eigen::RowVectorXd& row, double tol) {
  int hits = 0;
  bool unit = false;
  for (int i = 0; i < row.size(); ++i) {
    if (std::abs(row(i)) > tol) {
      ++hits;
      unit = std::abs(row(i) - 1.0) <= tol;
    }
  }
  return hits == 1 && unit;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

/// Keeps rows that enlarge the row space (modified Gram-Schmidt with a
/// relative residual cutoff). Returns indices of kept rows.
std::vector<int> independent_rows(const MatrixXd& rows, double tol) {
  std::vector<VectorXd> basis;
  std::vector<int> kept;
  for (int r = 0; r < rows.rows(); ++r) {
    VectorXd v = rows.row(r).transpose();
    const double norm0 = v.norm();
    if (norm0 <= 0) continue;
    for (const auto& b : basis) v -= b.dot(v) * b;
    // second pass for numerical safety
    for (const auto& b : basis) v -= b.dot(v) * b;
    if (v.norm() > std::max(tol, 1e-12) * norm0) {
      basis.push_back(v.normalized());
      kept.push_back(r);
    }
  }
  return kept;
}

}  // namespace

CompatibilityReport check_compatibility(const ViewSet& views, double tol) {
  validate_dims(views);
  if (!(tol > 0)) throw std::invalid_argument("tolerance must be positive");

  const int k = views.k();
  Eigen::JacobiSVD<MatrixXd> svd(views.P, Eigen::ComputeFullU);
  CompatibilityReport report;
  report.rank_P = svd_rank(svd, tol);
  report.independent = (report.rank_P == k);

  MatrixXd aug(k, views.n() + 1);
  aug.leftCols(views.n()) = views.P;
  aug.col(views.n()) = views.Q;
  Eigen::JacobiSVD<MatrixXd> svd_aug(aug);
  const int rank_aug = svd_rank(svd_aug, tol);
  report.compatible = (rank_aug == report.rank_P);

  if (!report.compatible) {
    // A contradiction lives in the left null space of P: coefficients that
    // cancel the portfolios but not the stated returns.
    const MatrixXd null_basis = svd.matrixU().rightCols(k - report.rank_P);
    VectorXd c = null_basis * (null_basis.transpose() * views.Q);
    report.witness = normalize_direction(std::move(c));
  }
  return report;
}

ViewSet diagonalize_confidence(const ViewSet& views, double tol) {
  validate_dims(views);
  const auto& omega = views.Omega;
  const double scale = std::max(1.0, omega.cwiseAbs().maxCoeff());
  if ((omega - omega.transpose()).cwiseAbs().maxCoeff() > tol * scale) {
    throw NotSymmetric("confidence matrix is not symmetric");
  }

  double offdiag = 0.0;
  for (int i = 0; i < omega.rows(); ++i) {
    for (int j = 0; j < omega.cols(); ++j) {
      if (i != j) offdiag = std::max(offdiag, std::abs(omega(i, j)));
    }
  }
  if (offdiag <= tol * omega.cwiseAbs().maxCoeff() || omega.rows() == 1) {
    return views;  // already diagonal
  }

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (omega + omega.transpose()));
  VectorXd evals = eig.eigenvalues();
  MatrixXd evecs = eig.eigenvectors();
  const double emax = evals.cwiseAbs().maxCoeff();
  if (evals.minCoeff() < -tol * std::max(emax, 1.0)) {
    throw NotSymmetric("confidence matrix is not positive semidefinite");
  }

  const int k = views.k();
  ViewSet out;
  out.P.resize(k, views.n());
  out.Q.resize(k);
  out.Omega = MatrixXd::Zero(k, k);
  // descending eigenvalues, deterministic eigenvector signs
  for (int c = 0; c < k; ++c) {
    const int src = k - 1 - c;
    VectorXd v = evecs.col(src);
    for (int i = 0; i < v.size(); ++i) {
      if (std::abs(v(i)) > 1e-12) {
        if (v(i) < 0) v = -v;
        break;
      }
    }
    out.Omega(c, c) = std::max(0.0, evals(src));
    out.P.row(c) = v.transpose() * views.P;
    out.Q(c) = v.dot(views.Q);
  }
  return out;
}

ViewSet to_absolute(const ViewSet& views, const VectorXd& w, double tol, bool strict_rows) {
  validate_dims(views);
  const int k = views.k();
  const int n = views.n();
  if (w.size() != n) throw DimensionMismatch("capital weight vector has wrong length");
  if (w.minCoeff() < -1e-9 || std::abs(w.sum() - 1.0) > 1e-6) {
    throw ViewError("capital weights must be nonnegative and sum to 1");
  }
  if (strict_rows) {
    for (int j = 0; j < k; ++j) {
      const double s = views.P.row(j).sum();
      if (std::abs(s) > 1e-6 && std::abs(s - 1.0) > 1e-6) {
        throw ViewError("view row " + std::to_string(j) + " sums to " + std::to_string(s) +
                        "; expected 0 (relative) or 1 (absolute)");
      }
    }
  }

  bool all_one_hot = true;
  for (int j = 0; j < k && all_one_hot; ++j) {
    all_one_hot = is_one_hot_row(views.P.row(j), tol);
  }
  if (all_one_hot) return views;

  const auto report = check_compatibility(views, tol);
  if (!report.independent) {
    throw DependentViews("views are not independent (rank " + std::to_string(report.rank_P) +
                         " < k = " + std::to_string(k) + ")");
  }

  // Mentioned assets and their connected grouping through view supports.
  std::vector<int> mentioned;
  std::vector<int> col_of(n, -1);
  UnionFind uf(n);
  for (int j = 0; j < k; ++j) {
    int first = -1;
    for (int i = 0; i < n; ++i) {
      if (std::abs(views.P(j, i)) > tol) {
        if (col_of[i] < 0) {
          col_of[i] = 0;
          mentioned.push_back(i);
        }
        if (first < 0) first = i;
        else uf.unite(i, first);
      }
    }
  }
  std::sort(mentioned.begin(), mentioned.end());
  const int m = static_cast<int>(mentioned.size());
  for (int c = 0; c < m; ++c) col_of[mentioned[c]] = c;

  std::vector<int> roots;
  for (int i : mentioned) {
    int r = uf.find(i);
    if (std::find(roots.begin(), roots.end(), r) == roots.end()) roots.push_back(r);
  }

  // Stack the view equations and one capital-weighted anchor per group; the
  // right-hand side stays linear in Q so uncertainty can be propagated.
  const int n_rows = k + static_cast<int>(roots.size());
  MatrixXd A = MatrixXd::Zero(n_rows, m);
  MatrixXd B = MatrixXd::Zero(n_rows, k);
  for (int j = 0; j < k; ++j) {
    for (int c = 0; c < m; ++c) A(j, c) = views.P(j, mentioned[c]);
    B(j, j) = 1.0;
  }
  for (std::size_t g = 0; g < roots.size(); ++g) {
    const int row = k + static_cast<int>(g);
    for (int c = 0; c < m; ++c) {
      if (uf.find(mentioned[c]) == roots[g]) A(row, c) = w(mentioned[c]);
    }
    for (int j = 0; j < k; ++j) {
      int lead = -1;
      for (int i = 0; i < n && lead < 0; ++i) {
        if (std::abs(views.P(j, i)) > tol) lead = i;
      }
      if (lead >= 0 && uf.find(lead) == roots[g]) {
        // the view's long side carries its stated return into the group total
        double wplus = 0.0;
        for (int i = 0; i < n; ++i) wplus += std::max(views.P(j, i), 0.0) * w(i);
        B(row, j) = wplus;
      }
    }
  }

  const auto kept = independent_rows(A, tol);
  MatrixXd As(kept.size(), m), Bs(kept.size(), k);
  for (std::size_t r = 0; r < kept.size(); ++r) {
    As.row(r) = A.row(kept[r]);
    Bs.row(r) = B.row(kept[r]);
  }

  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(As);
  const MatrixXd G = cod.solve(Bs);  // m x k, minimum-norm where underdetermined
  const VectorXd q_abs = G * views.Q;

  const VectorXd resid = A.topRows(k) * q_abs - views.Q;
  if (resid.cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, views.Q.cwiseAbs().maxCoeff())) {
    throw SingularSystem("absolute-view system could not be solved consistently");
  }

  ViewSet out;
  out.P = MatrixXd::Zero(m, n);
  for (int c = 0; c < m; ++c) out.P(c, mentioned[c]) = 1.0;
  out.Q = q_abs;
  MatrixXd prop = G * views.Omega * G.transpose();
  out.Omega = 0.5 * (prop + prop.transpose());
  return out;
}

CanonicalViews canonicalize(const ViewSet& views, const VectorXd& w, double tol) {
  validate_dims(views);
  const int n = views.n();

  CanonicalViews out;
  out.Q = VectorXd::Zero(n);
  out.omega = VectorXd::Constant(n, kInf);

  const bool identity_p = views.k() == n && views.P.isApprox(MatrixXd::Identity(n, n), tol);
  bool diag_omega = true;
  for (int i = 0; i < views.Omega.rows() && diag_omega; ++i) {
    for (int j = 0; j < views.Omega.cols(); ++j) {
      if (i != j && std::abs(views.Omega(i, j)) > tol) diag_omega = false;
    }
  }
  if (identity_p && diag_omega) {
    out.Q = views.Q;
    out.omega = views.Omega.diagonal();
    return out;
  }

  const ViewSet rotated = diagonalize_confidence(views, tol);
  const ViewSet absolute = to_absolute(rotated, w, tol, /*strict_rows=*/false);
  for (int r = 0; r < absolute.k(); ++r) {
    int asset = -1;
    absolute.P.row(r).cwiseAbs().maxCoeff(&asset);
    out.Q(asset) = absolute.Q(r);
    out.omega(asset) = std::max(absolute.Omega(r, r), 0.0);
  }
  return out;
}

// --- JSON ------------------------------------------------------------------

namespace {

nlohmann::json matrix_to_json(const MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

MatrixXd matrix_from_json(const nlohmann::json& j) {
  const int rows = static_cast<int>(j.size());
  const int cols = rows > 0 ? static_cast<int>(j.at(0).size()) : 0;
  MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
  }
  return m;
}

}  // namespace

std::string to_json(const ViewSet& views) {
  nlohmann::json j;
  j["P"] = matrix_to_json(views.P);
  j["Q"] = std::vector<double>(views.Q.data(), views.Q.data() + views.Q.size());
  j["Omega"] = matrix_to_json(views.Omega);
  return j.dump();
}

std::string to_json(const CanonicalViews& views) {
  nlohmann::json j;
  j["Q"] = std::vector<double>(views.Q.data(), views.Q.data() + views.Q.size());
  nlohmann::json omega = nlohmann::json::array();
  for (int i = 0; i < views.n(); ++i) {
    if (std::isfinite(views.omega(i))) omega.push_back(views.omega(i));
    else omega.push_back("inf");
  }
  j["omega_diag"] = std::move(omega);
  return j.dump();
}

ViewSet viewset_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ViewSet v;
  v.P = matrix_from_json(j.at("P"));
  const auto& q = j.at("Q");
  v.Q.resize(static_cast<int>(q.size()));
  for (int i = 0; i < v.Q.size(); ++i) v.Q(i) = q.at(i).get<double>();
  v.Omega = matrix_from_json(j.at("Omega"));
  validate_dims(v);
  return v;
}

CanonicalViews canonical_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  CanonicalViews v;
  const auto& q = j.at("Q");
  const auto& om = j.at("omega_diag");
  if (q.size() != om.size()) throw DimensionMismatch("Q and omega_diag lengths differ");
  v.Q.resize(static_cast<int>(q.size()));
  v.omega.resize(static_cast<int>(om.size()));
  for (std::size_t i = 0; i < q.size(); ++i) {
    v.Q(static_cast<int>(i)) = q.at(i).get<double>();
    const auto& o = om.at(i);
    v.omega(static_cast<int>(i)) = o.is_string() ? kInf : o.get<double>();
    if (v.omega(static_cast<int>(i)) < 0) throw ViewError("omega entries must be nonnegative");
  }
  return v;
}

}  // namespace bayesviews::views
