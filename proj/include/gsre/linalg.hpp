#pragma once

#include <cmath>
#include <span>

#include <Eigen/Dense>

#include "graph.hpp"

namespace gsre {

struct PowerIterationOptions {
  int max_iter = 1000;
  double tol = 1e-10;
};

/// Largest eigenvalue of a symmetric PSD matrix by power iteration from the
/// normalized all-ones vector. Deterministic.
inline double largest_eigenvalue_psd(const Eigen::MatrixXd& gram, PowerIterationOptions opts = {}) {
  const Index d = gram.rows();
  if (d == 0) return 0.0;
  Eigen::VectorXd v = Eigen::VectorXd::Constant(d, 1.0 / std::sqrt(static_cast<double>(d)));
  double value = 0.0;
  for (int it = 0; it < opts.max_iter; ++it) {
    Eigen::VectorXd next = gram * v;
    const double norm = next.norm();
    if (norm == 0.0) {
      // The start vector sits in the null space; fall back to a dense solve.
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram, Eigen::EigenvaluesOnly);
      return std::max(0.0, es.eigenvalues().maxCoeff());
    }
    next /= norm;
    const double updated = next.dot(gram * next);
    v = std::move(next);
    if (std::abs(updated - value) <= opts.tol * std::max(1.0, std::abs(updated))) return updated;
    value = updated;
  }
  return value;
}

/// ||X||_op, the largest singular value.
inline double operator_norm(const Eigen::MatrixXd& x, PowerIterationOptions opts = {}) {
  const Eigen::MatrixXd gram =
      x.rows() < x.cols() ? Eigen::MatrixXd(x * x.transpose()) : Eigen::MatrixXd(x.transpose() * x);
  return std::sqrt(largest_eigenvalue_psd(gram, opts));
}

/// Columns of `x` listed in `cols`.
inline Eigen::MatrixXd select_columns(const Eigen::MatrixXd& x, std::span<const Index> cols) {
  Eigen::MatrixXd out(x.rows(), static_cast<Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(static_cast<Index>(k)) = x.col(cols[k]);
  return out;
}

inline double block_norm(const Eigen::VectorXd& x, std::span<const Index> idx) {
  double s = 0.0;
  for (Index j : idx) s += x[j] * x[j];
  return std::sqrt(s);
}

}  // namespace gsre
