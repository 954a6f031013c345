#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace gsre {

using Index = Eigen::Index;

struct Edge {
  Index a = 0;
  Index b = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/**
 * Undirected predictor graph stored as closed neighborhoods.
 *
 * neighborhood(i) is N_i = {i} ∪ {neighbors of i}, sorted and duplicate-free.
 * Indices are 0-based; file formats convert from 1-based at the boundary.
 * Immutable after construction.
 */
class PredictorGraph {
 public:
  PredictorGraph() = default;

  /// Builds the symmetric closure of `edges`. Self-loops are accepted and ignored.
  static PredictorGraph from_edge_list(Index p, std::span<const Edge> edges) {
    if (p <= 0) throw InputError("graph must have at least one node");
    std::vector<std::vector<Index>> nbrs(static_cast<std::size_t>(p));
    for (Index i = 0; i < p; ++i) nbrs[i].push_back(i);
    for (const auto& e : edges) {
      if (e.a < 0 || e.a >= p || e.b < 0 || e.b >= p) {
        throw InputError("edge (" + std::to_string(e.a + 1) + ", " + std::to_string(e.b + 1) +
                         ") out of range for p = " + std::to_string(p));
      }
      if (e.a == e.b) continue;
      nbrs[e.a].push_back(e.b);
      nbrs[e.b].push_back(e.a);
    }
    for (auto& n : nbrs) {
      std::sort(n.begin(), n.end());
      n.erase(std::unique(n.begin(), n.end()), n.end());
    }
    PredictorGraph g;
    g.nbrs_ = std::move(nbrs);
    return g;
  }

  Index size() const noexcept { return static_cast<Index>(nbrs_.size()); }

  std::span<const Index> neighborhood(Index i) const { return nbrs_[static_cast<std::size_t>(i)]; }

  /// d_i = |N_i|, always >= 1.
  Index degree(Index i) const { return static_cast<Index>(nbrs_[static_cast<std::size_t>(i)].size()); }

  Index min_degree() const {
    Index d = size();
    for (Index i = 0; i < size(); ++i) d = std::min(d, degree(i));
    return d;
  }

  Index max_degree() const {
    Index d = 0;
    for (Index i = 0; i < size(); ++i) d = std::max(d, degree(i));
    return d;
  }

  bool adjacent(Index i, Index j) const {
    auto n = neighborhood(i);
    return std::binary_search(n.begin(), n.end(), j);
  }

  /// Edges with a < b, lexicographically sorted.
  std::vector<Edge> edges() const {
    std::vector<Edge> out;
    for (Index i = 0; i < size(); ++i)
      for (Index j : neighborhood(i))
        if (j > i) out.push_back({i, j});
    return out;
  }

  Index edge_count() const {
    Index m = 0;
    for (Index i = 0; i < size(); ++i) m += degree(i) - 1;
    return m / 2;
  }

  friend bool operator==(const PredictorGraph&, const PredictorGraph&) = default;

 private:
  std::vector<std::vector<Index>> nbrs_;
};

/// Edge (i, j), i != j, iff |omega(i, j)| > edge_tol. The diagonal is ignored.
inline PredictorGraph from_precision(const Eigen::MatrixXd& omega, double edge_tol = 1e-8) {
  if (omega.rows() != omega.cols()) throw InputError("precision matrix must be square");
  const Index p = omega.rows();
  const double scale = std::max(1.0, omega.cwiseAbs().maxCoeff());
  std::vector<Edge> edges;
  for (Index i = 0; i < p; ++i) {
    for (Index j = i + 1; j < p; ++j) {
      if (std::abs(omega(i, j) - omega(j, i)) > 1e-8 * scale)
        throw InputError("precision matrix is not symmetric at (" + std::to_string(i + 1) + ", " +
                         std::to_string(j + 1) + ")");
      if (std::abs(omega(i, j)) > edge_tol) edges.push_back({i, j});
    }
  }
  return PredictorGraph::from_edge_list(p, edges);
}

inline PredictorGraph make_edgeless(Index p) { return PredictorGraph::from_edge_list(p, {}); }

inline PredictorGraph make_complete(Index p) {
  std::vector<Edge> edges;
  for (Index i = 0; i < p; ++i)
    for (Index j = i + 1; j < p; ++j) edges.push_back({i, j});
  return PredictorGraph::from_edge_list(p, edges);
}

/// Disjoint cliques over consecutive index ranges of the given sizes.
inline PredictorGraph make_block_complete(std::span<const Index> sizes, Index p) {
  Index total = 0;
  for (Index s : sizes) {
    if (s <= 0) throw InputError("block sizes must be positive");
    total += s;
  }
  if (total != p)
    throw InputError("block sizes sum to " + std::to_string(total) + ", expected p = " + std::to_string(p));
  std::vector<Edge> edges;
  Index start = 0;
  for (Index s : sizes) {
    for (Index i = start; i < start + s; ++i)
      for (Index j = i + 1; j < start + s; ++j) edges.push_back({i, j});
    start += s;
  }
  return PredictorGraph::from_edge_list(p, edges);
}

/// Edge (i, j) iff 0 < |i - j| <= width.
inline PredictorGraph make_banded(Index p, Index width) {
  if (width < 1) throw InputError("band width must be >= 1");
  std::vector<Edge> edges;
  for (Index i = 0; i < p; ++i)
    for (Index j = i + 1; j <= std::min(p - 1, i + width); ++j) edges.push_back({i, j});
  return PredictorGraph::from_edge_list(p, edges);
}

/// Positive per-node penalty weights tau_i.
class NodeWeights {
 public:
  NodeWeights() = default;

  explicit NodeWeights(Eigen::VectorXd tau) : tau_(std::move(tau)) {
    for (Index i = 0; i < tau_.size(); ++i)
      if (!(tau_[i] > 0.0) || !std::isfinite(tau_[i]))
        throw InputError("node weight " + std::to_string(i + 1) + " must be positive and finite");
  }

  static NodeWeights constant(Index p, double value) {
    return NodeWeights(Eigen::VectorXd::Constant(p, value));
  }

  Index size() const noexcept { return tau_.size(); }
  double operator[](Index i) const { return tau_[i]; }
  const Eigen::VectorXd& values() const noexcept { return tau_; }
  double min() const { return tau_.minCoeff(); }

 private:
  Eigen::VectorXd tau_;
};

/// log 2 / (2 log 3): the smallest exponent giving tau = 2 on a 9-node neighborhood.
inline constexpr double kDefaultEta = std::numbers::ln2 / (2.0 * 1.0986122886681098);

/// tau_i = d_i^eta.
inline NodeWeights default_weights(const PredictorGraph& g, double eta = kDefaultEta) {
  if (eta < 0.0) throw InputError("eta must be nonnegative");
  Eigen::VectorXd tau(g.size());
  for (Index i = 0; i < g.size(); ++i) tau[i] = std::pow(static_cast<double>(g.degree(i)), eta);
  return NodeWeights(std::move(tau));
}

}  // namespace gsre
