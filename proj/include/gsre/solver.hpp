#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "graph.hpp"
#include "linalg.hpp"
#include "prox.hpp"

namespace gsre {

enum class Loss {
  /// ||y - X b||_2 / sqrt(n)  (GSRE)
  sqrt_loss,
  /// ||y - X b||_2^2 / (2n)  (SRIG)
  least_squares,
};

/// min loss(y - X b) + (lambda / n) ||b||_{G,tau}
struct Problem {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  PredictorGraph graph;
  NodeWeights weights;
  double lambda = 1.0;
  Loss loss = Loss::sqrt_loss;

  Index n() const noexcept { return X.rows(); }
  Index p() const noexcept { return X.cols(); }

  void validate() const {
    if (X.rows() < 2) throw InputError("need at least two observations");
    if (y.size() != X.rows())
      throw InputError("response has " + std::to_string(y.size()) + " rows, design has " +
                       std::to_string(X.rows()));
    if (graph.size() != X.cols())
      throw InputError("graph has " + std::to_string(graph.size()) + " nodes, design has " +
                       std::to_string(X.cols()) + " columns");
    if (weights.size() != X.cols()) throw InputError("node weights do not match the design");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InputError("lambda must be positive and finite");
    if (!X.allFinite() || !y.allFinite()) throw InputError("design and response must be finite");
  }
};

struct AdmmSettings {
  /// augmented-Lagrangian penalty
  double rho = 1.0;
  /// dual step size, in (0, (1 + sqrt 5) / 2)
  double gamma = 1.618;
  double tol_primal = 1e-7;
  double tol_dual = 1e-7;
  int max_iter = 20000;
  double support_tol = 1e-6;
  ProxOptions prox{};
  /// Evaluate the objective (needs a graph-norm solve) when the fit finishes.
  bool evaluate_objective = true;
  /// Small residuals alone do not certify a fit whose residual y - X b is
  /// tiny (the square-root certificate divides by it): keep iterating until
  /// the KKT certificate is also below this. Non-positive disables the check.
  double kkt_tol = 1e-4;

  void validate() const {
    if (!(rho > 0.0)) throw InputError("admm rho must be positive");
    if (!(gamma > 0.0 && gamma < (1.0 + std::sqrt(5.0)) / 2.0))
      throw InputError("admm gamma must lie in (0, (1 + sqrt 5) / 2)");
    if (!(tol_primal > 0.0 && tol_dual > 0.0)) throw InputError("admm tolerances must be positive");
    if (max_iter <= 0) throw InputError("admm max_iter must be positive");
    if (!(prox.switch_ratio > 0.0 && prox.switch_ratio <= 1.0))
      throw InputError("projection switch ratio must lie in (0, 1]");
  }
};

/**
 * Solves (I_p + X^T X) b = rhs. When p > n the n x n system I_n + X X^T is
 * factored and the Sherman-Morrison-Woodbury identity
 *   (I_p + X^T X)^{-1} = I_p - X^T (I_n + X X^T)^{-1} X
 * is applied; otherwise the p x p matrix is factored directly.
 */
class SmwCache {
 public:
  enum class Path { woodbury, direct };

  SmwCache() = default;

  explicit SmwCache(const Eigen::MatrixXd& X, std::optional<Path> force = std::nullopt) : X_(X) {
    path_ = force.value_or(X.cols() > X.rows() ? Path::woodbury : Path::direct);
    if (path_ == Path::woodbury) {
      Eigen::MatrixXd m = X * X.transpose();
      m.diagonal().array() += 1.0;
      llt_.compute(m);
    } else {
      Eigen::MatrixXd m = X.transpose() * X;
      m.diagonal().array() += 1.0;
      llt_.compute(m);
    }
    if (llt_.info() != Eigen::Success)
      throw NumericalBreakdown("factorization of I + X^T X failed; the design is corrupt");
  }

  Path path() const noexcept { return path_; }
  const Eigen::MatrixXd& design() const noexcept { return X_; }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    if (path_ == Path::woodbury) {
      const Eigen::VectorXd t = llt_.solve(X_ * rhs);
      return rhs - X_.transpose() * t;
    }
    return llt_.solve(rhs);
  }

 private:
  Eigen::MatrixXd X_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Path path_ = Path::direct;
};

/// Per-iteration residuals of the ADMM scheme.
struct AdmmResiduals {
  /// ||X b - u - y|| / sqrt(n)
  double primal_fit = 0.0;
  /// ||b - v|| / sqrt(p)
  double primal_consensus = 0.0;
  /// rho ||X^T du + dv|| / sqrt(p)
  double dual = 0.0;
};

/// Iterates of the split problem  min ||u||/sqrt(n) + (lambda/n)||v||  s.t.  X b - u = y, b - v = 0.
struct AdmmWorkspace {
  Eigen::VectorXd beta;
  Eigen::VectorXd u;
  Eigen::VectorXd v;
  Eigen::VectorXd z;
  Eigen::VectorXd w;
  std::shared_ptr<const SmwCache> smw;
  /// Projection dual state carried from one v-update to the next.
  ProjectionWarmStart projection;
  int iteration = 0;
  std::vector<AdmmResiduals> history;

  /// beta = v = 0, u = -y, z = w = 0.
  static AdmmWorkspace cold(const Problem& prob, std::shared_ptr<const SmwCache> cache = nullptr) {
    AdmmWorkspace ws;
    ws.beta = Eigen::VectorXd::Zero(prob.p());
    ws.v = Eigen::VectorXd::Zero(prob.p());
    ws.w = Eigen::VectorXd::Zero(prob.p());
    ws.u = -prob.y;
    ws.z = Eigen::VectorXd::Zero(prob.n());
    ws.smw = cache ? std::move(cache) : std::make_shared<const SmwCache>(prob.X);
    return ws;
  }

  bool matches(const Problem& prob) const {
    return beta.size() == prob.p() && v.size() == prob.p() && w.size() == prob.p() && u.size() == prob.n() &&
           z.size() == prob.n() && cache_matches(prob);
  }

  bool cache_matches(const Problem& prob) const {
    return smw && smw->design().rows() == prob.n() && smw->design().cols() == prob.p() && smw->design() == prob.X;
  }
};

/**
 * One ADMM sweep: beta, then u and v (independent given beta), then the two
 * dual updates with step gamma * rho. Returns the residuals of the new iterate.
 */
inline AdmmResiduals admm_step(AdmmWorkspace& ws, const Problem& prob, const AdmmSettings& settings) {
  const double rho = settings.rho;
  const double n = static_cast<double>(prob.n());
  const Eigen::VectorXd& y = prob.y;
  const Eigen::MatrixXd& X = prob.X;

  const Eigen::VectorXd rhs = ws.v - ws.w / rho + X.transpose() * (ws.u + y - ws.z / rho);
  ws.beta = ws.smw->solve(rhs);
  const Eigen::VectorXd xb = X * ws.beta;

  Eigen::VectorXd u_new;
  if (prob.loss == Loss::sqrt_loss) {
    u_new = prox_l2(xb - y + ws.z / rho, 1.0 / (rho * std::sqrt(n)));
  } else {
    u_new = (rho * (xb - y) + ws.z) / (1.0 / n + rho);
  }
  Eigen::VectorXd v_new =
      prox_graph_norm(ws.beta + ws.w / rho, prob.graph, prob.weights, prob.lambda / (rho * n), settings.prox,
                      &ws.projection)
          .value;

  AdmmResiduals res;
  res.dual = rho * (X.transpose() * (u_new - ws.u) + (v_new - ws.v)).norm() / std::sqrt(static_cast<double>(prob.p()));
  ws.u = std::move(u_new);
  ws.v = std::move(v_new);

  const Eigen::VectorXd fit_gap = xb - ws.u - y;
  const Eigen::VectorXd cons_gap = ws.beta - ws.v;
  ws.z += settings.gamma * rho * fit_gap;
  ws.w += settings.gamma * rho * cons_gap;
  res.primal_fit = fit_gap.norm() / std::sqrt(n);
  res.primal_consensus = cons_gap.norm() / std::sqrt(static_cast<double>(prob.p()));
  ++ws.iteration;
  return res;
}

enum class FitStatus { converged, max_iter, failed };

inline const char* to_string(FitStatus s) {
  switch (s) {
    case FitStatus::converged: return "Converged";
    case FitStatus::max_iter: return "MaxIter";
    case FitStatus::failed: return "Failed";
  }
  return "?";
}

struct KktCertificate {
  /// max_i (q_i - threshold_i)_+ / threshold_i
  double max_violation = 0.0;
  /// (q_i - threshold_i) / threshold_i, negative when node i is strictly feasible
  Eigen::VectorXd per_node_slack;
};

/**
 * Dual-feasibility check for optimality: with r = y - X b,
 *   q_i = ||X_{N_i}^T r|| / ||r||  against  lambda tau_i / sqrt(n)   (square-root loss)
 *   q_i = ||X_{N_i}^T r||          against  lambda tau_i            (least squares)
 * Throws ResidualZero for the square-root loss when ||r|| < residual_floor.
 */
inline KktCertificate kkt_certificate(const Problem& prob, const Eigen::VectorXd& beta_hat,
                                      double residual_floor = 1e-14) {
  const Eigen::VectorXd r = prob.y - prob.X * beta_hat;
  const double rn = r.norm();
  const bool sqrt_loss = prob.loss == Loss::sqrt_loss;
  if (sqrt_loss && rn < residual_floor)
    throw ResidualZero("residual is zero; the square-root loss certificate is undefined");
  const Eigen::VectorXd xtr = prob.X.transpose() * r;
  KktCertificate cert;
  cert.per_node_slack.resize(prob.p());
  for (Index i = 0; i < prob.p(); ++i) {
    const double q = block_norm(xtr, prob.graph.neighborhood(i)) / (sqrt_loss ? rn : 1.0);
    const double thr = sqrt_loss ? prob.lambda * prob.weights[i] / std::sqrt(static_cast<double>(prob.n()))
                                 : prob.lambda * prob.weights[i];
    cert.per_node_slack[i] = (q - thr) / thr;
    cert.max_violation = std::max(cert.max_violation, cert.per_node_slack[i]);
  }
  return cert;
}

/// loss(y - X b) + (lambda / n) ||b||_{G,tau}
inline double objective(const Problem& prob, const Eigen::VectorXd& beta, const GraphNormOptions& opts = {}) {
  const double n = static_cast<double>(prob.n());
  const double rn = (prob.y - prob.X * beta).norm();
  const double loss = prob.loss == Loss::sqrt_loss ? rn / std::sqrt(n) : rn * rn / (2.0 * n);
  return loss + prob.lambda / n * graph_norm(beta, prob.graph, prob.weights, opts).value;
}

struct FitResult {
  double lambda = 0.0;
  Eigen::VectorXd beta_hat;
  std::vector<Index> support;
  std::optional<double> objective;
  int iterations = 0;
  /// Empty when the certificate is undefined (interpolating square-root fit).
  std::optional<double> kkt_certificate;
  FitStatus status = FitStatus::failed;
  std::string message;
  double rss = 0.0;
  double response_ss = 0.0;
  /// The u-update collapsed to zero: the fit interpolates the training data.
  bool interpolating = false;
  AdmmResiduals final_residuals{};
};

inline std::vector<Index> support_of(const Eigen::VectorXd& beta, double tol) {
  std::vector<Index> s;
  for (Index i = 0; i < beta.size(); ++i)
    if (std::abs(beta[i]) > tol) s.push_back(i);
  return s;
}

namespace detail {

inline void check_finite(const AdmmWorkspace& ws) {
  if (!ws.beta.allFinite() || !ws.u.allFinite() || !ws.v.allFinite() || !ws.z.allFinite() || !ws.w.allFinite())
    throw NumericalBreakdown("ADMM iterate became non-finite at iteration " + std::to_string(ws.iteration));
}

/// KKT certificate of the current iterate within kkt_tol, or undefined (interpolating).
inline bool certified(const Problem& prob, const AdmmWorkspace& ws, const AdmmSettings& settings) {
  if (settings.kkt_tol <= 0.0) return true;
  if (prob.loss == Loss::sqrt_loss && ws.u.squaredNorm() == 0.0) return true;
  try {
    return kkt_certificate(prob, ws.v).max_violation <= settings.kkt_tol;
  } catch (const ResidualZero&) {
    return true;
  }
}

inline void finish(FitResult& res, const Problem& prob, const AdmmWorkspace& ws, const AdmmSettings& settings) {
  res.lambda = prob.lambda;
  res.beta_hat = ws.v;
  res.support = support_of(res.beta_hat, settings.support_tol);
  res.rss = (prob.y - prob.X * res.beta_hat).squaredNorm();
  res.response_ss = prob.y.squaredNorm();
  res.interpolating = prob.loss == Loss::sqrt_loss && ws.u.squaredNorm() == 0.0 && res.response_ss > 0.0;
  if (!res.interpolating) {
    try {
      res.kkt_certificate = kkt_certificate(prob, res.beta_hat).max_violation;
    } catch (const ResidualZero&) {
      res.interpolating = res.response_ss > 0.0;
    }
  }
  if (settings.evaluate_objective) res.objective = objective(prob, res.beta_hat);
}

}  // namespace detail

/**
 * Runs ADMM until both primal residuals are below tol_primal and the dual
 * residual is below tol_dual, or max_iter sweeps. A warm start continues from
 * the given iterates (its SMW factorization is reused when it matches X).
 * Non-convergence is reported through status; non-finite iterates throw
 * NumericalBreakdown.
 */
inline FitResult fit(const Problem& prob, const AdmmSettings& settings, AdmmWorkspace* warm_start = nullptr) {
  prob.validate();
  settings.validate();
  AdmmWorkspace local;
  AdmmWorkspace& ws = warm_start ? *warm_start : local;
  if (!warm_start || !ws.matches(prob)) {
    ws = AdmmWorkspace::cold(prob, warm_start && ws.cache_matches(prob) ? ws.smw : nullptr);
  }
  ws.history.clear();
  ws.projection.dykstra_stalled = false;

  FitResult res;
  res.status = FitStatus::max_iter;
  int next_kkt_check = 0;
  for (int it = 0; it < settings.max_iter; ++it) {
    const AdmmResiduals r = admm_step(ws, prob, settings);
    ws.history.push_back(r);
    res.iterations = it + 1;
    res.final_residuals = r;
    detail::check_finite(ws);
    if (r.primal_fit <= settings.tol_primal && r.primal_consensus <= settings.tol_primal &&
        r.dual <= settings.tol_dual && (next_kkt_check <= it || settings.kkt_tol <= 0.0)) {
      if (detail::certified(prob, ws, settings)) {
        res.status = FitStatus::converged;
        break;
      }
      next_kkt_check = it + 10;
    }
  }
  detail::finish(res, prob, ws, settings);
  return res;
}

}  // namespace gsre
