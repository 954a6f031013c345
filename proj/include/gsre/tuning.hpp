#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "graph.hpp"
#include "linalg.hpp"
#include "solver.hpp"

namespace gsre {

struct PilotLambda {
  double value = 0.0;
  /// max_i ||X_{N_i}||_op^2
  double zeta = 0.0;
  /// 16 log(2p / alpha) <= n - d_max and d_i < n for all i
  bool hypothesis_holds = false;
  std::string note;
};

enum class PilotMode {
  /// throw HypothesisViolated when the sample-size condition fails
  strict,
  /// compute anyway and report the failure in PilotLambda
  flag,
};

/// max_i ||X_{N_i}||_op^2, one power iteration per distinct neighborhood.
inline double neighborhood_zeta(const Eigen::MatrixXd& X, const PredictorGraph& g) {
  if (g.size() != X.cols()) throw InputError("graph does not match the design");
  std::map<std::vector<Index>, double> seen;
  double zeta = 0.0;
  for (Index i = 0; i < g.size(); ++i) {
    const auto nb = g.neighborhood(i);
    std::vector<Index> key(nb.begin(), nb.end());
    auto it = seen.find(key);
    if (it == seen.end()) {
      const Eigen::MatrixXd sub = select_columns(X, nb);
      const double v = largest_eigenvalue_psd(sub.transpose() * sub);
      it = seen.emplace(std::move(key), v).first;
    }
    zeta = std::max(zeta, it->second);
  }
  return zeta;
}

/**
 * Noise-level-free tuning value
 *   lambda = n rbar sqrt(2 zeta d_max) / (tau_min sqrt(n - d_max)) (1 + sqrt(2 log(2p/alpha) / d_min)),
 * rbar = (r + 1) / (r - 1). Natural logarithms throughout.
 */
inline PilotLambda lambda_pilot(const Eigen::MatrixXd& X, const PredictorGraph& g, const NodeWeights& w,
                                double alpha, double r, PilotMode mode = PilotMode::strict) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  if (!(r > 1.0)) throw InputError("r must exceed 1");
  if (w.size() != X.cols()) throw InputError("node weights do not match the design");
  const double n = static_cast<double>(X.rows());
  const double p = static_cast<double>(X.cols());
  const double dmax = static_cast<double>(g.max_degree());
  const double dmin = static_cast<double>(g.min_degree());
  const double log_term = std::log(2.0 * p / alpha);

  PilotLambda out;
  out.hypothesis_holds = true;
  if (!(dmax < n)) {
    out.hypothesis_holds = false;
    out.note = "largest neighborhood (" + std::to_string(g.max_degree()) + ") is not smaller than n";
  } else if (16.0 * log_term > n - dmax) {
    out.hypothesis_holds = false;
    out.note = "16 log(2p/alpha) = " + std::to_string(16.0 * log_term) + " exceeds n - d_max = " +
               std::to_string(n - dmax);
  }
  if (!out.hypothesis_holds && mode == PilotMode::strict) throw HypothesisViolated(out.note);
  if (!(dmax < n)) throw HypothesisViolated(out.note + "; the formula is undefined");

  out.zeta = neighborhood_zeta(X, g);
  const double rbar = (r + 1.0) / (r - 1.0);
  out.value = n * rbar * std::sqrt(2.0 * out.zeta * dmax) / (w.min() * std::sqrt(n - dmax)) *
              (1.0 + std::sqrt(2.0 * log_term / dmin));
  return out;
}

/// V = max_i sqrt(n) ||X_{N_i}^T eps|| / (tau_i ||eps||); the pilot value bounds rbar * V with high probability.
inline double pilot_statistic(const Eigen::MatrixXd& X, const PredictorGraph& g, const NodeWeights& w,
                              const Eigen::VectorXd& eps) {
  const double en = eps.norm();
  if (en == 0.0) throw InputError("noise vector is zero");
  const Eigen::VectorXd xte = X.transpose() * eps;
  double v = 0.0;
  for (Index i = 0; i < g.size(); ++i) v = std::max(v, block_norm(xte, g.neighborhood(i)) / w[i]);
  return std::sqrt(static_cast<double>(X.rows())) * v / en;
}

enum class GridRule { pilot, exponent_grid, explicit_values };

/// How the exponent grid maps to lambda.
enum class GridScale {
  /// lambda = 2^e sqrt(n/2) ||X||
  normalized,
  /// lambda = sqrt(n) 2^e sqrt(n/2) ||X||: the same grid for a loss written
  /// without the 1/sqrt(n) factor, converted to this objective's scale
  unnormalized_loss,
};

struct GridOptions {
  double max_exp = -5.0;
  double min_exp = -13.0;
  double step = 0.2;
  GridScale scale = GridScale::normalized;
};

struct LambdaGrid {
  /// strictly positive, strictly descending
  std::vector<double> values;
  GridRule rule = GridRule::explicit_values;
  std::vector<double> exponents;

  std::size_t size() const noexcept { return values.size(); }
};

/// Sorts descending and drops duplicates; every value must be positive and finite.
inline LambdaGrid make_grid(std::vector<double> values, GridRule rule = GridRule::explicit_values) {
  if (values.empty()) throw InputError("lambda grid is empty");
  for (double v : values)
    if (!(v > 0.0) || !std::isfinite(v)) throw InputError("lambda values must be positive and finite");
  std::sort(values.begin(), values.end(), std::greater<>());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  LambdaGrid g;
  g.values = std::move(values);
  g.rule = rule;
  return g;
}

/// lambda_k = 2^{e_k} sqrt(n/2) ||X||_op with e_k = max_exp - k step down to min_exp (41 values by default).
inline LambdaGrid lambda_grid_exponent(const Eigen::MatrixXd& X, const GridOptions& opts = {}) {
  if (!(opts.step > 0.0)) throw InputError("grid step must be positive");
  if (!(opts.max_exp >= opts.min_exp)) throw InputError("grid max exponent must be >= min exponent");
  const double opn = operator_norm(X);
  if (!(opn > 0.0)) throw InputError("design matrix is zero");
  const double n = static_cast<double>(X.rows());
  const double base = std::sqrt(n / 2.0) * opn * (opts.scale == GridScale::unnormalized_loss ? std::sqrt(n) : 1.0);
  const auto count = static_cast<std::size_t>(std::floor((opts.max_exp - opts.min_exp) / opts.step + 1e-9)) + 1;
  LambdaGrid g;
  g.rule = GridRule::exponent_grid;
  for (std::size_t k = 0; k < count; ++k) {
    const double e = opts.max_exp - opts.step * static_cast<double>(k);
    g.exponents.push_back(e);
    g.values.push_back(std::exp2(e) * base);
  }
  return g;
}

struct PathResult {
  /// one per grid value, in grid order (descending lambda)
  std::vector<FitResult> fits;
  std::vector<double> hbic;
  std::vector<double> validation_error;
  std::optional<std::size_t> selected;

  const FitResult& chosen() const {
    if (!selected) throw Error("no lambda has been selected on this path");
    return fits[*selected];
  }
};

/**
 * Fits every grid value in descending order, each warm-started from the
 * previous workspace. A fit that throws is recorded with status Failed and
 * the next one starts cold.
 */
inline PathResult fit_path(Problem prob, const LambdaGrid& grid, const AdmmSettings& settings) {
  if (grid.values.empty()) throw InputError("lambda grid is empty");
  for (std::size_t k = 1; k < grid.values.size(); ++k)
    if (!(grid.values[k] < grid.values[k - 1])) throw InputError("lambda grid must be strictly descending");
  PathResult path;
  path.fits.reserve(grid.size());
  AdmmWorkspace ws;
  for (double lambda : grid.values) {
    prob.lambda = lambda;
    try {
      path.fits.push_back(fit(prob, settings, &ws));
    } catch (const Error& e) {
      FitResult failed;
      failed.lambda = lambda;
      failed.status = FitStatus::failed;
      failed.message = e.what();
      path.fits.push_back(std::move(failed));
      ws = AdmmWorkspace{};
    }
  }
  return path;
}

/**
 * HBIC = log(RSS / n) + |S| log(log n) log(p) / n.
 * Degenerate fits return -infinity: RSS = 0 (or below 1e-10 ||y||^2), an
 * interpolating square-root fit, or |S| >= n. Selection ranks them last.
 */
inline double hbic(const FitResult& fit, Index n, Index p) {
  if (n < 3) throw InputError("HBIC needs n >= 3");
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  if (fit.status == FitStatus::failed) return ninf;
  const double nn = static_cast<double>(n);
  if (fit.rss <= 0.0 || fit.rss <= 1e-10 * fit.response_ss || fit.interpolating) return ninf;
  if (static_cast<Index>(fit.support.size()) >= n) return ninf;
  return std::log(fit.rss / nn) +
         static_cast<double>(fit.support.size()) * std::log(std::log(nn)) * std::log(static_cast<double>(p)) / nn;
}

/// ||y_val - X_val b||^2 / n_val for every fit (NaN for failed fits).
inline std::vector<double> validation_errors(const PathResult& path, const Eigen::MatrixXd& X_val,
                                             const Eigen::VectorXd& y_val) {
  if (X_val.rows() != y_val.size()) throw InputError("validation design and response row counts differ");
  if (X_val.rows() == 0) throw InputError("validation set is empty");
  std::vector<double> err;
  err.reserve(path.fits.size());
  for (const auto& f : path.fits) {
    if (f.status == FitStatus::failed) {
      err.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    if (f.beta_hat.size() != X_val.cols()) throw InputError("validation design has the wrong number of columns");
    err.push_back((y_val - X_val * f.beta_hat).squaredNorm() / static_cast<double>(X_val.rows()));
  }
  return err;
}

namespace detail {

/// argmin over finite criteria; the first (largest-lambda) index wins ties.
/// Non-finite values rank last; if nothing is finite, the first non-failed fit is chosen.
inline std::size_t argmin_ranked(const PathResult& path, const std::vector<double>& crit) {
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < crit.size(); ++k) {
    if (path.fits[k].status == FitStatus::failed || !std::isfinite(crit[k])) continue;
    if (!best || crit[k] < crit[*best]) best = k;
  }
  if (best) return *best;
  for (std::size_t k = 0; k < path.fits.size(); ++k)
    if (path.fits[k].status != FitStatus::failed) return k;
  throw Error("every fit on the path failed");
}

}  // namespace detail

enum class SelectionMethod { hbic, validation };

inline std::size_t select_hbic(PathResult& path, Index n, Index p) {
  if (path.fits.empty()) throw InputError("path is empty");
  path.hbic.clear();
  for (const auto& f : path.fits) path.hbic.push_back(hbic(f, n, p));
  path.selected = detail::argmin_ranked(path, path.hbic);
  return *path.selected;
}

inline std::size_t select_validation(PathResult& path, const Eigen::MatrixXd& X_val, const Eigen::VectorXd& y_val) {
  if (path.fits.empty()) throw InputError("path is empty");
  path.validation_error = validation_errors(path, X_val, y_val);
  path.selected = detail::argmin_ranked(path, path.validation_error);
  return *path.selected;
}

}  // namespace gsre
