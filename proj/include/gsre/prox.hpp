#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "graph.hpp"
#include "linalg.hpp"

namespace gsre {

/// One l2 "cylinder" constraint ||x_N||_2 <= radius on a coordinate block.
struct CylinderBlock {
  std::vector<Index> indices;
  double radius = 0.0;
  /// Optional caller id (the node a neighborhood block belongs to); keys warm-started corrections.
  Index key = -1;
};

/**
 * Dual state kept between projections of nearby points, indexed by block key.
 *
 * Both projection methods work on the dual and converge from any starting
 * dual point: the parallel Dykstra-like recursion is alternating minimization
 * over its correction vectors, and projected Newton accepts any mu >= 0.
 * Reusing the state of a nearby point only shortens the run.
 */
struct ProjectionWarmStart {
  /// Dykstra correction vector of each block, empty when unknown.
  std::vector<Eigen::VectorXd> corrections;
  /// Newton multiplier of each block, 0 when unknown.
  std::vector<double> multipliers;
  /// Set once Dykstra has stalled; automatic dispatch then stays with Newton.
  bool dykstra_stalled = false;

  void clear() {
    corrections.clear();
    multipliers.clear();
    dykstra_stalled = false;
  }
};

/**
 * Intersection of cylinders S = { x in R^dim : ||x_{N_b}|| <= c_b for every block b }.
 * 0 is always feasible, so S is never empty.
 */
class CylinderSet {
 public:
  CylinderSet() = default;

  CylinderSet(Index dim, std::vector<CylinderBlock> blocks) : dim_(dim), blocks_(std::move(blocks)) {
    for (auto& b : blocks_) {
      if (!(b.radius >= 0.0)) throw InputError("cylinder radius must be nonnegative");
      std::sort(b.indices.begin(), b.indices.end());
      b.indices.erase(std::unique(b.indices.begin(), b.indices.end()), b.indices.end());
      for (Index j : b.indices)
        if (j < 0 || j >= dim_) throw InputError("cylinder index out of range");
    }
  }

  Index dim() const noexcept { return dim_; }
  const std::vector<CylinderBlock>& blocks() const noexcept { return blocks_; }
  bool empty() const noexcept { return blocks_.empty(); }

  /// max_b (||x_{N_b}|| - c_b)_+
  double max_violation(const Eigen::VectorXd& x) const {
    double v = 0.0;
    for (const auto& b : blocks_) v = std::max(v, block_norm(x, b.indices) - b.radius);
    return v;
  }

 private:
  Index dim_ = 0;
  std::vector<CylinderBlock> blocks_;
};

struct ProjectionOptions {
  double tol = 1e-8;
  int max_iter = 10000;
};

/// Rescales x_N onto the ball of radius c; other coordinates untouched.
inline Eigen::VectorXd project_cylinder(Eigen::VectorXd x, const CylinderBlock& block) {
  if (block.indices.size() == 1) {
    // scalar clamp, so x - projection is exactly the soft-threshold
    double& v = x[block.indices.front()];
    if (std::abs(v) > block.radius) v = std::copysign(block.radius, v);
    return x;
  }
  const double nrm = block_norm(x, block.indices);
  if (nrm > block.radius && nrm > 0.0) {
    const double s = block.radius / nrm;
    for (Index j : block.indices) x[j] *= s;
  }
  return x;
}

namespace detail {

/// Blocks grouped into connected components (blocks sharing a coordinate are
/// connected). The projection separates exactly across components.
/// Blocks with identical index sets are merged, keeping the smallest radius.
inline std::vector<std::vector<CylinderBlock>> split_components(const CylinderSet& set) {
  std::vector<CylinderBlock> blocks = set.blocks();
  std::sort(blocks.begin(), blocks.end(), [](const auto& a, const auto& b) {
    return a.indices != b.indices ? a.indices < b.indices : a.radius < b.radius;
  });
  blocks.erase(std::unique(blocks.begin(), blocks.end(),
                           [](const auto& a, const auto& b) { return a.indices == b.indices; }),
               blocks.end());

  // union-find over blocks, keyed through the first block that touched each coordinate
  std::vector<std::size_t> parent(blocks.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t a) {
    while (parent[a] != a) a = parent[a] = parent[parent[a]];
    return a;
  };
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> owner(static_cast<std::size_t>(set.dim()), none);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (Index j : blocks[b].indices) {
      auto& o = owner[static_cast<std::size_t>(j)];
      if (o == none) {
        o = b;
      } else {
        parent[find(b)] = find(o);
      }
    }
  }
  std::vector<std::vector<CylinderBlock>> comps;
  std::vector<std::size_t> slot(blocks.size(), none);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const std::size_t r = find(b);
    if (slot[r] == none) {
      slot[r] = comps.size();
      comps.emplace_back();
    }
    comps[slot[r]].push_back(std::move(blocks[b]));
  }
  return comps;
}

/// Zero-radius blocks pin their coordinates to zero; the remaining blocks keep
/// their radii (zeroed coordinates stay zero under every later rescaling).
inline std::vector<CylinderBlock> apply_zero_radius(Eigen::VectorXd& x, std::vector<CylinderBlock> blocks) {
  std::vector<CylinderBlock> rest;
  for (auto& b : blocks) {
    if (b.radius == 0.0) {
      for (Index j : b.indices) x[j] = 0.0;
    }
  }
  for (auto& b : blocks)
    if (b.radius > 0.0) rest.push_back(std::move(b));
  return rest;
}

inline double component_violation(const Eigen::VectorXd& x, const std::vector<CylinderBlock>& blocks) {
  double v = 0.0;
  for (const auto& b : blocks) v = std::max(v, block_norm(x, b.indices) - b.radius);
  return v;
}

/// Greedy colouring of the block-overlap graph: blocks of one colour have
/// disjoint supports, so their intersection is projected exactly, block by block.
inline std::vector<std::vector<std::size_t>> disjoint_classes(const std::vector<CylinderBlock>& blocks) {
  std::vector<std::vector<std::size_t>> by_coord;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (Index j : blocks[b].indices) {
      if (static_cast<std::size_t>(j) >= by_coord.size()) by_coord.resize(static_cast<std::size_t>(j) + 1);
      by_coord[static_cast<std::size_t>(j)].push_back(b);
    }
  }
  constexpr std::size_t unset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> colour(blocks.size(), unset);
  std::vector<std::vector<std::size_t>> classes;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    std::vector<bool> taken(classes.size(), false);
    for (Index j : blocks[b].indices)
      for (std::size_t o : by_coord[static_cast<std::size_t>(j)])
        if (colour[o] != unset) taken[colour[o]] = true;
    std::size_t c = 0;
    while (c < taken.size() && taken[c]) ++c;
    if (c == classes.size()) classes.emplace_back();
    colour[b] = c;
    classes[c].push_back(b);
  }
  return classes;
}

/**
 * Parallel Dykstra-like iteration with equal weights on one component.
 *
 * The sets averaged are the colour classes of disjoint_classes(): each is an
 * intersection of cylinders on disjoint supports, so its projection is exact.
 * Correction vectors live only on their block's coordinates. With corrections
 * q_b the iterate is x0 - (1/k) sum_b q_b, k the number of classes.
 */
inline void dykstra_component(Eigen::VectorXd& x, const std::vector<CylinderBlock>& blocks,
                              const ProjectionOptions& opts, ProjectionWarmStart* warm = nullptr) {
  auto forget = [&] {
    if (!warm) return;
    for (const auto& b : blocks)
      if (b.key >= 0 && static_cast<std::size_t>(b.key) < warm->corrections.size())
        warm->corrections[static_cast<std::size_t>(b.key)].resize(0);
  };
  if (blocks.size() == 1) {
    x = project_cylinder(std::move(x), blocks.front());
    forget();
    return;
  }
  if (component_violation(x, blocks) <= 0.0) {
    forget();
    return;
  }

  const auto classes = disjoint_classes(blocks);
  if (classes.size() == 1) {
    for (const auto& b : blocks) x = project_cylinder(std::move(x), b);
    forget();
    return;
  }

  std::vector<Index> coords;
  for (const auto& b : blocks) coords.insert(coords.end(), b.indices.begin(), b.indices.end());
  std::sort(coords.begin(), coords.end());
  coords.erase(std::unique(coords.begin(), coords.end()), coords.end());

  const std::size_t m = blocks.size();
  const double weight = 1.0 / static_cast<double>(classes.size());
  // Tolerances are relative to the magnitude of the point being projected.
  double scale = 1.0;
  for (Index j : coords) scale = std::max(scale, std::abs(x[j]));
  const double tol = opts.tol * scale;
  std::vector<Eigen::VectorXd> correction(m);
  std::vector<Eigen::VectorXd> moved(m);
  for (std::size_t b = 0; b < m; ++b) {
    const Index len = static_cast<Index>(blocks[b].indices.size());
    const Index key = blocks[b].key;
    if (warm && key >= 0 && static_cast<std::size_t>(key) < warm->corrections.size() &&
        warm->corrections[static_cast<std::size_t>(key)].size() == len) {
      correction[b] = warm->corrections[static_cast<std::size_t>(key)];
      for (Index k = 0; k < len; ++k) x[blocks[b].indices[static_cast<std::size_t>(k)]] -= weight * correction[b][k];
    } else {
      correction[b] = Eigen::VectorXd::Zero(len);
    }
    moved[b].resize(len);
  }
  Eigen::VectorXd shift = Eigen::VectorXd::Zero(x.size());

  auto store = [&] {
    if (!warm) return;
    for (std::size_t b = 0; b < m; ++b) {
      const Index key = blocks[b].key;
      if (key < 0) continue;
      if (static_cast<std::size_t>(key) >= warm->corrections.size())
        warm->corrections.resize(static_cast<std::size_t>(key) + 1);
      warm->corrections[static_cast<std::size_t>(key)] = correction[b];
    }
  };

  double change = 0.0;
  double violation = 0.0;
  for (int it = 0; it < opts.max_iter; ++it) {
    // Each block reads the shared iterate and writes only its own slots.
    for (std::size_t b = 0; b < m; ++b) {
      const auto& idx = blocks[b].indices;
      Eigen::VectorXd& e = correction[b];
      double nrm2 = 0.0;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const double t = x[idx[k]] + e[static_cast<Index>(k)];
        nrm2 += t * t;
      }
      const double nrm = std::sqrt(nrm2);
      const double s = nrm > blocks[b].radius ? blocks[b].radius / nrm : 1.0;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        const Index kk = static_cast<Index>(k);
        const double t = x[idx[k]] + e[kk];
        const double proj = s * t;
        moved[b][kk] = proj - x[idx[k]];
        e[kk] = t - proj;
      }
    }
    // Fixed-order reduction keeps the result independent of evaluation order above.
    for (Index j : coords) shift[j] = 0.0;
    for (std::size_t b = 0; b < m; ++b) {
      const auto& idx = blocks[b].indices;
      for (std::size_t k = 0; k < idx.size(); ++k) shift[idx[k]] += moved[b][static_cast<Index>(k)];
    }
    change = 0.0;
    for (Index j : coords) {
      const double d = weight * shift[j];
      x[j] += d;
      change = std::max(change, std::abs(d));
    }
    violation = component_violation(x, blocks);
    if (change <= tol && violation <= tol) {
      store();
      return;
    }
  }
  store();
  throw MaxIterationsExceeded("parallel Dykstra projection", x, std::max(change, violation),
                              static_cast<std::size_t>(opts.max_iter));
}

struct NewtonComponentResult {
  Eigen::VectorXd multipliers;
  int iterations = 0;
};

/**
 * Projection onto one component by maximizing the concave dual of
 *   min 1/2 ||z - x||^2  s.t.  1/2 (||z_{N_b}||^2 - c_b^2) <= 0
 * over multipliers mu >= 0. The primal is z_j = x_j / (1 + sum_{b : j in N_b} mu_b).
 * Bertsekas-style projected Newton: a reduced Newton step on the free
 * multipliers, scaled gradient on the epsilon-active bounds, Armijo search
 * along the projection arc.
 */
inline NewtonComponentResult newton_component(Eigen::VectorXd& x, const std::vector<CylinderBlock>& blocks,
                                              const ProjectionOptions& opts, ProjectionWarmStart* warm = nullptr) {
  const Index m = static_cast<Index>(blocks.size());
  NewtonComponentResult res;
  res.multipliers = Eigen::VectorXd::Zero(m);
  auto store = [&](const Eigen::VectorXd& mu) {
    if (!warm) return;
    for (Index b = 0; b < m; ++b) {
      const Index key = blocks[b].key;
      if (key < 0) continue;
      if (static_cast<std::size_t>(key) >= warm->multipliers.size())
        warm->multipliers.resize(static_cast<std::size_t>(key) + 1, 0.0);
      warm->multipliers[static_cast<std::size_t>(key)] = mu[b];
    }
  };
  if (component_violation(x, blocks) <= 0.0) {
    store(res.multipliers);
    return res;
  }
  if (m == 1) {
    // one active ball: mu = ||x_N|| / c - 1
    res.multipliers[0] = block_norm(x, blocks.front().indices) / blocks.front().radius - 1.0;
    x = project_cylinder(std::move(x), blocks.front());
    store(res.multipliers);
    return res;
  }

  std::vector<Index> coords;
  for (const auto& b : blocks) coords.insert(coords.end(), b.indices.begin(), b.indices.end());
  std::sort(coords.begin(), coords.end());
  coords.erase(std::unique(coords.begin(), coords.end()), coords.end());
  const Index nc = static_cast<Index>(coords.size());

  // local coordinate ids and per-coordinate block membership
  std::vector<std::vector<Index>> local(static_cast<std::size_t>(m));
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(nc));
  Eigen::VectorXd x2(nc);
  for (Index c = 0; c < nc; ++c) x2[c] = x[coords[c]] * x[coords[c]];
  for (Index b = 0; b < m; ++b) {
    for (Index j : blocks[b].indices) {
      const Index c = std::lower_bound(coords.begin(), coords.end(), j) - coords.begin();
      local[b].push_back(c);
      members[c].push_back(b);
    }
  }
  Eigen::VectorXd c2(m);
  double max_c2 = 0.0;
  for (Index b = 0; b < m; ++b) {
    c2[b] = blocks[b].radius * blocks[b].radius;
    max_c2 = std::max(max_c2, c2[b]);
  }

  auto denominators = [&](const Eigen::VectorXd& mu) {
    Eigen::VectorXd a = Eigen::VectorXd::Ones(nc);
    for (Index b = 0; b < m; ++b)
      for (Index c : local[b]) a[c] += mu[b];
    return a;
  };
  // f = -dual, minimized.
  auto objective = [&](const Eigen::VectorXd& mu, const Eigen::VectorXd& a) {
    double f = 0.5 * mu.dot(c2);
    for (Index c = 0; c < nc; ++c) f -= 0.5 * x2[c] * (1.0 - 1.0 / a[c]);
    return f;
  };
  auto gradient = [&](const Eigen::VectorXd& a) {
    Eigen::VectorXd g(m);
    for (Index b = 0; b < m; ++b) {
      double s = 0.0;
      for (Index c : local[b]) s += x2[c] / (a[c] * a[c]);
      g[b] = 0.5 * (c2[b] - s);
    }
    return g;
  };

  const double gtol = opts.tol * (1.0 + max_c2);
  constexpr double armijo = 1e-4;
  Eigen::VectorXd mu = res.multipliers;
  if (warm) {
    for (Index b = 0; b < m; ++b) {
      const Index key = blocks[b].key;
      if (key >= 0 && static_cast<std::size_t>(key) < warm->multipliers.size())
        mu[b] = std::max(0.0, warm->multipliers[static_cast<std::size_t>(key)]);
    }
  }
  Eigen::VectorXd a = denominators(mu);
  double f = objective(mu, a);
  double pg_norm = 0.0;

  for (int it = 0; it < opts.max_iter; ++it) {
    res.iterations = it;
    const Eigen::VectorXd g = gradient(a);
    pg_norm = 0.0;
    for (Index b = 0; b < m; ++b) pg_norm = std::max(pg_norm, std::abs(mu[b] - std::max(0.0, mu[b] - g[b])));
    double complementarity = 0.0;
    for (Index b = 0; b < m; ++b) complementarity = std::max(complementarity, std::abs(mu[b] * g[b]));
    if (pg_norm <= gtol && complementarity <= gtol) {
      for (Index c = 0; c < nc; ++c) x[coords[c]] /= a[c];
      res.multipliers = mu;
      store(mu);
      return res;
    }

    // Hessian of f: H_bk = sum_{c in N_b ∩ N_k} x_c^2 / a_c^3
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(m, m);
    for (Index c = 0; c < nc; ++c) {
      const double h = x2[c] / (a[c] * a[c] * a[c]);
      for (Index b : members[c])
        for (Index k : members[c]) hess(b, k) += h;
    }

    const double eps = std::min(1e-6 * (1.0 + mu.maxCoeff()), pg_norm);
    std::vector<Index> free;
    std::vector<bool> bound(static_cast<std::size_t>(m), false);
    for (Index b = 0; b < m; ++b) {
      if (mu[b] <= eps && g[b] > 0.0) {
        bound[b] = true;
      } else {
        free.push_back(b);
      }
    }

    Eigen::VectorXd dir = Eigen::VectorXd::Zero(m);
    for (Index b = 0; b < m; ++b)
      if (bound[b]) dir[b] = -g[b] / std::max(hess(b, b), 1e-12);
    if (!free.empty()) {
      const Index nf = static_cast<Index>(free.size());
      Eigen::MatrixXd hff(nf, nf);
      Eigen::VectorXd gf(nf);
      for (Index r = 0; r < nf; ++r) {
        gf[r] = g[free[r]];
        for (Index s = 0; s < nf; ++s) hff(r, s) = hess(free[r], free[s]);
      }
      const double scale = std::max(hff.diagonal().maxCoeff(), 1e-300);
      Eigen::LDLT<Eigen::MatrixXd> ldlt(hff);
      bool ok = ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 1e-12 * scale;
      Eigen::VectorXd step;
      if (ok) {
        step = -ldlt.solve(gf);
      } else {
        // Singular reduced Hessian: Levenberg shift before giving up on curvature.
        hff.diagonal().array() += 1e-8 * scale;
        ldlt.compute(hff);
        ok = ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > 0.0;
        if (ok) step = -ldlt.solve(gf);
      }
      if (!ok || !step.allFinite() || step.dot(gf) >= 0.0) {
        step = -gf / scale;  // projected gradient step for this iteration
      }
      for (Index r = 0; r < nf; ++r) dir[free[r]] = step[r];
    }

    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      Eigen::VectorXd trial = (mu + alpha * dir).cwiseMax(0.0);
      const Eigen::VectorXd ta = denominators(trial);
      const double ft = objective(trial, ta);
      double decrease = 0.0;
      for (Index b = 0; b < m; ++b)
        decrease += bound[b] ? g[b] * (mu[b] - trial[b]) : -alpha * g[b] * dir[b];
      if (f - ft >= armijo * decrease) {
        mu = std::move(trial);
        a = ta;
        f = ft;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // Line search stalls only at round-off level; accept the current point if it is close.
      if (pg_norm <= 1e3 * gtol) {
        for (Index c = 0; c < nc; ++c) x[coords[c]] /= a[c];
        res.multipliers = mu;
        store(mu);
        return res;
      }
      break;
    }
  }
  Eigen::VectorXd last = x;
  for (Index c = 0; c < nc; ++c) last[coords[c]] /= a[c];
  throw MaxIterationsExceeded("projected Newton projection", last, pg_norm,
                              static_cast<std::size_t>(opts.max_iter));
}

}  // namespace detail

/// Euclidean projection onto the cylinder intersection by the parallel
/// Dykstra-like algorithm (equal weights), run per overlap component.
inline Eigen::VectorXd project_intersection_dykstra(Eigen::VectorXd x, const CylinderSet& set,
                                                    const ProjectionOptions& opts = {},
                                                    ProjectionWarmStart* warm = nullptr) {
  if (!(opts.tol > 0.0)) throw InputError("projection tolerance must be positive");
  if (x.size() != set.dim()) throw InputError("vector and cylinder set dimensions differ");
  for (auto& comp : detail::split_components(set)) {
    auto blocks = detail::apply_zero_radius(x, std::move(comp));
    if (!blocks.empty()) detail::dykstra_component(x, blocks, opts, warm);
  }
  return x;
}

struct NewtonProjection {
  Eigen::VectorXd point;
  /// One multiplier per input block (blocks merged as duplicates share the
  /// multiplier of the tightest copy; the others report 0).
  Eigen::VectorXd multipliers;
};

/// Projection onto the cylinder intersection from the dual side, returning the multipliers.
inline NewtonProjection project_intersection_newton_dual(Eigen::VectorXd x, const CylinderSet& set,
                                                         const ProjectionOptions& opts = {},
                                                         ProjectionWarmStart* warm = nullptr) {
  if (!(opts.tol > 0.0)) throw InputError("projection tolerance must be positive");
  if (x.size() != set.dim()) throw InputError("vector and cylinder set dimensions differ");
  NewtonProjection out;
  out.multipliers = Eigen::VectorXd::Zero(static_cast<Index>(set.blocks().size()));
  std::vector<bool> assigned(set.blocks().size(), false);
  for (auto& comp : detail::split_components(set)) {
    auto blocks = detail::apply_zero_radius(x, std::move(comp));
    if (blocks.empty()) continue;
    const auto r = detail::newton_component(x, blocks, opts, warm);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      for (std::size_t k = 0; k < set.blocks().size(); ++k) {
        const auto& orig = set.blocks()[k];
        if (!assigned[k] && orig.indices == blocks[b].indices && orig.radius == blocks[b].radius) {
          out.multipliers[static_cast<Index>(k)] = r.multipliers[static_cast<Index>(b)];
          assigned[k] = true;
          break;
        }
      }
    }
  }
  out.point = std::move(x);
  return out;
}

inline Eigen::VectorXd project_intersection_newton(Eigen::VectorXd x, const CylinderSet& set,
                                                   const ProjectionOptions& opts = {},
                                                   ProjectionWarmStart* warm = nullptr) {
  return project_intersection_newton_dual(std::move(x), set, opts, warm).point;
}

enum class ProjectionMethod { automatic, dykstra, newton };

struct ProxOptions {
  /// Projected Newton when |O| < switch_ratio * p, parallel Dykstra otherwise.
  double switch_ratio = 0.1;
  ProjectionMethod method = ProjectionMethod::automatic;
  ProjectionOptions projection{};
};

struct ProxResult {
  Eigen::VectorXd value;
  /// O = { i : ||x_{N_i}|| > t tau_i }, ascending.
  std::vector<Index> active;
  ProjectionMethod used = ProjectionMethod::automatic;
};

/**
 * Prox of t * ||.||_{G,tau}: x - Pi_{S_O}(x), where S_O keeps only the
 * cylinders ||x_{N_i}|| <= t tau_i that x violates. Ties (equality) count as inactive.
 */
inline ProxResult prox_graph_norm(const Eigen::VectorXd& x, const PredictorGraph& g, const NodeWeights& w,
                                  double t, const ProxOptions& opts = {}, ProjectionWarmStart* warm = nullptr) {
  if (!(t > 0.0)) throw InputError("prox scale must be positive");
  const Index p = g.size();
  if (x.size() != p || w.size() != p) throw InputError("prox dimensions disagree with the graph");

  ProxResult res;
  std::vector<CylinderBlock> blocks;
  for (Index i = 0; i < p; ++i) {
    const auto nb = g.neighborhood(i);
    const double c = t * w[i];
    if (block_norm(x, nb) > c) {
      res.active.push_back(i);
      blocks.push_back({std::vector<Index>(nb.begin(), nb.end()), c, i});
    }
  }
  if (blocks.empty()) {
    res.value = Eigen::VectorXd::Zero(p);
    return res;
  }
  const CylinderSet set(p, std::move(blocks));
  ProjectionMethod method = opts.method;
  if (method == ProjectionMethod::automatic) {
    method = static_cast<double>(res.active.size()) < opts.switch_ratio * static_cast<double>(p) ||
                     (warm && warm->dykstra_stalled)
                 ? ProjectionMethod::newton
                 : ProjectionMethod::dykstra;
  }
  res.used = method;
  Eigen::VectorXd proj;
  if (method == ProjectionMethod::newton) {
    proj = project_intersection_newton(x, set, opts.projection, warm);
  } else {
    try {
      proj = project_intersection_dykstra(x, set, opts.projection, warm);
    } catch (const MaxIterationsExceeded&) {
      // Dykstra can stall sublinearly at degenerate intersections; the dual
      // Newton solve does not, so an automatic choice falls back to it.
      if (opts.method != ProjectionMethod::automatic) throw;
      if (warm) {
        warm->corrections.clear();
        warm->dykstra_stalled = true;
      }
      proj = project_intersection_newton(x, set, opts.projection, warm);
      res.used = ProjectionMethod::newton;
    }
  }
  res.value = x - proj;
  return res;
}

/// Prox of t * ||.||_2: (1 - t / ||r||)_+ r.
inline Eigen::VectorXd prox_l2(const Eigen::VectorXd& r, double t) {
  if (!(t > 0.0)) throw InputError("prox scale must be positive");
  const double nrm = r.norm();
  if (nrm <= t) return Eigen::VectorXd::Zero(r.size());
  return (1.0 - t / nrm) * r;
}

/// max_i ||u_{N_i}|| / tau_i
inline double dual_graph_norm(const Eigen::VectorXd& u, const PredictorGraph& g, const NodeWeights& w) {
  double v = 0.0;
  for (Index i = 0; i < g.size(); ++i) v = std::max(v, block_norm(u, g.neighborhood(i)) / w[i]);
  return v;
}

/// Latent parts V^(i), each stored densely on N_i.
struct Decomposition {
  std::vector<Index> node;
  std::vector<Eigen::VectorXd> values;

  /// sum_i V^(i) as a p-vector.
  Eigen::VectorXd sum(const PredictorGraph& g) const {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(g.size());
    for (std::size_t k = 0; k < node.size(); ++k) {
      const auto nb = g.neighborhood(node[k]);
      for (std::size_t l = 0; l < nb.size(); ++l) s[nb[l]] += values[k][static_cast<Index>(l)];
    }
    return s;
  }
};

struct GraphNormOptions {
  /// relative duality gap
  double tol = 1e-10;
  int max_iter = 200000;
};

struct GraphNormResult {
  double value = 0.0;
  Decomposition parts;
  /// Dual-feasible lower bound at termination.
  double lower_bound = 0.0;
  int iterations = 0;
};

/**
 * ||beta||_{G,tau} = min sum_i tau_i ||V^(i)|| over decompositions
 * beta = sum_i V^(i), supp V^(i) ⊆ N_i.
 *
 * Consensus ADMM between the block-separable norm (block shrinkage) and the
 * affine coupling constraint (per-coordinate averaging over the d_j copies).
 * Stops on the duality gap against the dual-feasible point recovered from
 * the scaled multipliers. The returned decomposition sums to beta exactly
 * up to round-off.
 */
inline GraphNormResult graph_norm(const Eigen::VectorXd& beta, const PredictorGraph& g, const NodeWeights& w,
                                  const GraphNormOptions& opts = {}) {
  if (!(opts.tol > 0.0)) throw InputError("graph norm tolerance must be positive");
  const Index p = g.size();
  if (beta.size() != p || w.size() != p) throw InputError("graph norm dimensions disagree with the graph");

  GraphNormResult res;
  res.parts.node.resize(static_cast<std::size_t>(p));
  std::iota(res.parts.node.begin(), res.parts.node.end(), Index{0});
  res.parts.values.resize(static_cast<std::size_t>(p));
  const double scale = beta.cwiseAbs().maxCoeff();
  if (scale == 0.0) {
    for (Index i = 0; i < p; ++i) res.parts.values[i] = Eigen::VectorXd::Zero(g.degree(i));
    return res;
  }

  // Every component a clique: all its groups coincide, so the whole block goes
  // to the member with the smallest weight and the value is exact.
  bool cliques = true;
  for (Index i = 0; i < p && cliques; ++i) {
    const auto ni = g.neighborhood(i);
    for (Index j : ni) {
      const auto nj = g.neighborhood(j);
      if (!std::equal(ni.begin(), ni.end(), nj.begin(), nj.end())) {
        cliques = false;
        break;
      }
    }
  }
  if (cliques) {
    for (Index i = 0; i < p; ++i) res.parts.values[i] = Eigen::VectorXd::Zero(g.degree(i));
    for (Index i = 0; i < p; ++i) {
      const auto nb = g.neighborhood(i);
      Index best = nb.front();
      for (Index j : nb)
        if (w[j] < w[best]) best = j;
      if (best != i) continue;
      Eigen::VectorXd part(static_cast<Index>(nb.size()));
      for (std::size_t l = 0; l < nb.size(); ++l) part[static_cast<Index>(l)] = beta[nb[l]];
      res.value += w[i] * part.norm();
      res.parts.values[i] = std::move(part);
    }
    res.lower_bound = res.value;
    return res;
  }

  const Eigen::VectorXd b = beta / scale;

  // position of coordinate j inside N_i, for every i in N_j (symmetry: i in N_j <=> j in N_i)
  std::vector<Eigen::VectorXd> wv(static_cast<std::size_t>(p)), vv(static_cast<std::size_t>(p)),
      uv(static_cast<std::size_t>(p));
  for (Index i = 0; i < p; ++i) {
    const auto nb = g.neighborhood(i);
    wv[i].resize(static_cast<Index>(nb.size()));
    for (std::size_t l = 0; l < nb.size(); ++l) wv[i][static_cast<Index>(l)] = b[nb[l]] / g.degree(nb[l]);
    vv[i] = wv[i];
    uv[i] = Eigen::VectorXd::Zero(wv[i].size());
  }
  const double rho = 1.0 / std::max(1e-12, w.values().mean());

  Eigen::VectorXd coord_sum(p);
  Eigen::VectorXd u_avg(p);
  double upper = 0.0, lower = 0.0;
  for (int it = 1; it <= opts.max_iter; ++it) {
    for (Index i = 0; i < p; ++i) {
      Eigen::VectorXd t = wv[i] - uv[i];
      const double nrm = t.norm();
      const double k = w[i] / rho;
      vv[i] = nrm > k ? Eigen::VectorXd((1.0 - k / nrm) * t) : Eigen::VectorXd::Zero(t.size());
    }
    coord_sum.setZero();
    for (Index i = 0; i < p; ++i) {
      const auto nb = g.neighborhood(i);
      for (std::size_t l = 0; l < nb.size(); ++l) coord_sum[nb[l]] += vv[i][static_cast<Index>(l)] + uv[i][static_cast<Index>(l)];
    }
    u_avg.setZero();
    for (Index i = 0; i < p; ++i) {
      const auto nb = g.neighborhood(i);
      for (std::size_t l = 0; l < nb.size(); ++l) {
        const Index j = nb[l];
        const Index lj = static_cast<Index>(l);
        wv[i][lj] = vv[i][lj] + uv[i][lj] + (b[j] - coord_sum[j]) / g.degree(j);
        uv[i][lj] += vv[i][lj] - wv[i][lj];
        u_avg[j] += uv[i][lj];
      }
    }
    if (it % 10 != 0 && it != opts.max_iter) continue;

    upper = 0.0;
    for (Index i = 0; i < p; ++i) upper += w[i] * wv[i].norm();
    for (Index j = 0; j < p; ++j) u_avg[j] *= -rho / g.degree(j);
    const double dn = dual_graph_norm(u_avg, g, w);
    lower = dn > 0.0 ? std::abs(u_avg.dot(b)) / dn : 0.0;
    res.iterations = it;
    if (upper - lower <= opts.tol * std::max(upper, 1e-300)) break;
    if (it == opts.max_iter) {
      throw MaxIterationsExceeded("graph norm consensus ADMM", beta, (upper - lower) * scale,
                                  static_cast<std::size_t>(opts.max_iter));
    }
  }
  res.value = upper * scale;
  res.lower_bound = lower * scale;
  for (Index i = 0; i < p; ++i) res.parts.values[i] = wv[i] * scale;
  return res;
}

}  // namespace gsre
