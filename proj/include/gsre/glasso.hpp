#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "graph.hpp"

namespace gsre {

/// Column-centered S = Z^T Z / n.
inline Eigen::MatrixXd empirical_covariance(const Eigen::MatrixXd& X) {
  if (X.rows() < 2) throw InputError("covariance needs at least two samples");
  const Eigen::MatrixXd Z = X.rowwise() - X.colwise().mean();
  Eigen::MatrixXd S = Z.transpose() * Z / static_cast<double>(X.rows());
  return (S + S.transpose()) / 2.0;
}

/// Columns centered and scaled to unit (1/n) variance. Constant columns stay zero.
inline Eigen::MatrixXd standardize_columns(const Eigen::MatrixXd& X) {
  Eigen::MatrixXd Z = X.rowwise() - X.colwise().mean();
  for (Index j = 0; j < Z.cols(); ++j) {
    const double sd = std::sqrt(Z.col(j).squaredNorm() / static_cast<double>(Z.rows()));
    if (sd > 0.0) Z.col(j) /= sd;
  }
  return Z;
}

struct GlassoOptions {
  /// outer stop: max |change| of an updated covariance column in a full sweep
  double tol = 1e-8;
  int max_iter = 1000;
  /// inner lasso coordinate descent
  double inner_tol = 1e-12;
  int inner_max_iter = 10000;
  /// evaluate the penalized log-likelihood after every sweep
  bool record_objective = false;
};

struct PrecisionEstimate {
  Eigen::MatrixXd omega;
  /// working covariance W, with W_ii = s_ii
  Eigen::MatrixXd sigma_hat;
  double penalty = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<double> objective_history;
};

/// log det Omega - tr(S Omega) - penalty * sum_{i != j} |omega_ij|; -inf unless Omega is positive definite.
inline double glasso_objective(const Eigen::MatrixXd& omega, const Eigen::MatrixXd& S, double penalty) {
  Eigen::LLT<Eigen::MatrixXd> llt(omega);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double off = omega.cwiseAbs().sum() - omega.diagonal().cwiseAbs().sum();
  return logdet - (S.cwiseProduct(omega)).sum() - penalty * off;
}

namespace detail {

/// min 1/2 b^T V b - b^T s + penalty ||b||_1 by cyclic coordinate descent, warm-started from b.
inline bool glasso_lasso(const Eigen::MatrixXd& V, const Eigen::VectorXd& s, double penalty, Eigen::VectorXd& b,
                         const GlassoOptions& opts) {
  const Index m = s.size();
  Eigen::VectorXd vb = V * b;
  for (int it = 0; it < opts.inner_max_iter; ++it) {
    double delta = 0.0;
    for (Index k = 0; k < m; ++k) {
      const double vkk = V(k, k);
      const double r = s[k] - (vb[k] - vkk * b[k]);
      const double nb = (r > penalty ? r - penalty : (r < -penalty ? r + penalty : 0.0)) / vkk;
      const double d = nb - b[k];
      if (d != 0.0) {
        vb += d * V.col(k);
        b[k] = nb;
        delta = std::max(delta, std::abs(d));
      }
    }
    if (delta <= opts.inner_tol) return true;
  }
  return false;
}

inline Eigen::MatrixXd drop_index(const Eigen::MatrixXd& A, Index j) {
  const Index p = A.rows();
  Eigen::MatrixXd out(p - 1, p - 1);
  for (Index r = 0, rr = 0; r < p; ++r) {
    if (r == j) continue;
    for (Index c = 0, cc = 0; c < p; ++c) {
      if (c == j) continue;
      out(rr, cc++) = A(r, c);
    }
    ++rr;
  }
  return out;
}

inline Eigen::VectorXd drop_entry(const Eigen::VectorXd& v, Index j) {
  Eigen::VectorXd out(v.size() - 1);
  for (Index r = 0, rr = 0; r < v.size(); ++r)
    if (r != j) out[rr++] = v[r];
  return out;
}

/// Omega from W and the per-column lasso coefficients: theta_jj = 1/(w_jj - w_12^T b), theta_12 = -b theta_jj.
inline Eigen::MatrixXd precision_from_columns(const Eigen::MatrixXd& W, const Eigen::MatrixXd& B) {
  const Index p = W.rows();
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(p, p);
  for (Index j = 0; j < p; ++j) {
    double dot = 0.0;
    for (Index r = 0, rr = 0; r < p; ++r) {
      if (r == j) continue;
      dot += W(r, j) * B(rr, j);
      ++rr;
    }
    const double theta = 1.0 / (W(j, j) - dot);
    omega(j, j) = theta;
    for (Index r = 0, rr = 0; r < p; ++r) {
      if (r == j) continue;
      omega(r, j) = -B(rr, j) * theta;
      ++rr;
    }
  }
  return (omega + omega.transpose()) / 2.0;
}

}  // namespace detail

/**
 * Graphical lasso by block coordinate descent over columns (Friedman, Hastie
 * and Tibshirani): each column of the working covariance W solves a lasso
 * problem on the remaining block. Only off-diagonal entries are penalized,
 * so W_ii = s_ii. The returned Omega is symmetrized.
 */
inline PrecisionEstimate graphical_lasso(const Eigen::MatrixXd& S, double penalty, const GlassoOptions& opts = {}) {
  if (S.rows() != S.cols()) throw InputError("covariance matrix must be square");
  if (!(penalty >= 0.0) || !std::isfinite(penalty)) throw InputError("glasso penalty must be nonnegative");
  if (!S.allFinite()) throw InputError("covariance matrix must be finite");
  const Index p = S.rows();
  if (p == 0) throw InputError("covariance matrix is empty");
  const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
  if ((S - S.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) throw NotPSD("covariance matrix is not symmetric");
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -1e-10 * scale) throw NotPSD("covariance matrix is not positive semidefinite");
  }
  for (Index j = 0; j < p; ++j)
    if (!(S(j, j) > 0.0)) throw NotPSD("covariance has a zero variance at index " + std::to_string(j + 1));

  PrecisionEstimate est;
  est.penalty = penalty;
  Eigen::MatrixXd W = S;
  if (p == 1) {
    est.omega = Eigen::MatrixXd::Constant(1, 1, 1.0 / S(0, 0));
    est.sigma_hat = W;
    est.converged = true;
    return est;
  }
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(p - 1, p);

  for (int it = 1; it <= opts.max_iter; ++it) {
    double change = 0.0;
    for (Index j = 0; j < p; ++j) {
      const Eigen::MatrixXd V = detail::drop_index(W, j);
      const Eigen::VectorXd s12 = detail::drop_entry(S.col(j), j);
      Eigen::VectorXd b = B.col(j);
      if (!detail::glasso_lasso(V, s12, penalty, b, opts))
        throw MaxIterationsExceeded("graphical lasso column solve", b, 0.0,
                                    static_cast<std::size_t>(opts.inner_max_iter));
      B.col(j) = b;
      const Eigen::VectorXd w12 = V * b;
      for (Index r = 0, rr = 0; r < p; ++r) {
        if (r == j) continue;
        change = std::max(change, std::abs(W(r, j) - w12[rr]));
        W(r, j) = w12[rr];
        W(j, r) = w12[rr];
        ++rr;
      }
    }
    est.iterations = it;
    if (opts.record_objective)
      est.objective_history.push_back(glasso_objective(detail::precision_from_columns(W, B), S, penalty));
    if (change <= opts.tol) {
      est.converged = true;
      break;
    }
  }
  est.omega = detail::precision_from_columns(W, B);
  est.sigma_hat = W;
  if (!est.converged) {
    throw MaxIterationsExceeded("graphical lasso",
                                Eigen::Map<const Eigen::VectorXd>(est.omega.data(), est.omega.size()), 0.0,
                                static_cast<std::size_t>(opts.max_iter));
  }
  return est;
}

inline constexpr double kDefaultGlassoPenalty = 0.1;

struct GraphEstimate {
  PredictorGraph graph;
  PrecisionEstimate precision;
};

/**
 * Standardize columns, estimate the precision matrix, read off the graph.
 * A constant column has no correlation information; it becomes an isolated node.
 */
inline GraphEstimate estimate_graph(const Eigen::MatrixXd& X, double penalty = kDefaultGlassoPenalty,
                                    double edge_tol = 1e-8, const GlassoOptions& opts = {}) {
  if (X.rows() < 2) throw InputError("graph estimation needs at least two samples");
  Eigen::MatrixXd S = empirical_covariance(standardize_columns(X));
  for (Index j = 0; j < S.rows(); ++j) {
    if (S(j, j) <= 0.0) {
      S.row(j).setZero();
      S.col(j).setZero();
      S(j, j) = 1.0;
    }
  }
  GraphEstimate out;
  out.precision = graphical_lasso(S, penalty, opts);
  out.graph = from_precision(out.precision.omega, edge_tol);
  return out;
}

}  // namespace gsre
