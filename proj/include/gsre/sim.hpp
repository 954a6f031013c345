#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <cctype>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "glasso.hpp"
#include "graph.hpp"
#include "solver.hpp"
#include "tuning.hpp"

namespace gsre {

/**
 * SplitMix64: the output is a bijective mix of a counter advanced by a fixed
 * odd constant, so stream r of a benchmark is simply seed + r.
 * Satisfies UniformRandomBitGenerator.
 */
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// uniform on [0, 1) with 53 random bits
  double uniform01() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

 private:
  std::uint64_t state_;
};

enum class Noise { gaussian, student_t, laplace, uniform };

inline const char* to_string(Noise k) {
  switch (k) {
    case Noise::gaussian: return "gaussian";
    case Noise::student_t: return "student_t";
    case Noise::laplace: return "laplace";
    case Noise::uniform: return "uniform";
  }
  return "?";
}

inline Noise parse_noise(const std::string& s) {
  if (s == "gaussian" || s == "normal") return Noise::gaussian;
  if (s == "student_t" || s == "t" || s == "t2") return Noise::student_t;
  if (s == "laplace") return Noise::laplace;
  if (s == "uniform") return Noise::uniform;
  throw InputError("unknown noise family '" + s + "' (gaussian, student_t, laplace, uniform)");
}

/// Scale used in the relative prediction error. t(2) has no variance; 1 by convention.
inline double nominal_sigma(Noise k) { return k == Noise::student_t ? 1.0 : 5.0; }

struct SimScenario {
  int example = 3;
  Noise noise = Noise::gaussian;
  Index n_train = 60;
  Index n_val = 60;
  Index n_test = 400;
  Index p = 100;
  std::uint64_t seed = 1;

  void validate() const {
    if (example < 1 || example > 3) throw InputError("example must be 1, 2 or 3");
    if (p < 15) throw InputError("p must be at least 15");
    if (n_train < 2 || n_val < 1 || n_test < 1) throw InputError("sample sizes must be positive (n_train >= 2)");
  }
};

/// Examples 1 and 2: three blocks of five on the first 15 nodes, the rest isolated. Example 3: a chain.
inline PredictorGraph true_graph(int example, Index p) {
  if (p < 15) throw InputError("p must be at least 15");
  if (example == 3) return make_banded(p, 1);
  if (example != 1 && example != 2) throw InputError("example must be 1, 2 or 3");
  std::vector<Index> sizes{5, 5, 5};
  sizes.resize(static_cast<std::size_t>(p - 12), 1);
  return make_block_complete(sizes, p);
}

/**
 * n x p predictor matrix for one of the three designs. Latent factors are
 * drawn fresh for every row. Columns beyond the first 15 are independent
 * (Examples 1, 2); Example 3 is the stationary AR(1) chain with corr 0.5^{|i-j|}.
 */
template <class Rng>
Eigen::MatrixXd generate_predictors(int example, Index n, Index p, Rng& rng) {
  if (p < 15) throw InputError("p must be at least 15");
  Eigen::MatrixXd X(n, p);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (Index i = 0; i < n; ++i) {
    switch (example) {
      case 1:
      case 2: {
        const bool gauss = example == 1;
        const double noise_scale = gauss ? 0.4 : 0.75;
        for (Index g = 0; g < 3; ++g) {
          const double z = gauss ? normal(rng) : unif(rng);
          for (Index k = 0; k < 5; ++k) X(i, 5 * g + k) = z + noise_scale * (gauss ? normal(rng) : unif(rng));
        }
        for (Index j = 15; j < p; ++j) X(i, j) = gauss ? normal(rng) : unif(rng);
        break;
      }
      case 3: {
        X(i, 0) = normal(rng);
        const double s = std::sqrt(1.0 - 0.25);
        for (Index j = 1; j < p; ++j) X(i, j) = 0.5 * X(i, j - 1) + s * normal(rng);
        break;
      }
      default:
        throw InputError("example must be 1, 2 or 3");
    }
  }
  return X;
}

struct NoiseDraw {
  Eigen::VectorXd eps;
  double sigma = 0.0;
};

/// N(0, 25); t(2); Laplace(0, 5/sqrt 2); Uniform[-5 sqrt 3, 5 sqrt 3]. All but t(2) have variance 25.
template <class Rng>
NoiseDraw generate_noise(Noise kind, Index n, Rng& rng) {
  NoiseDraw out;
  out.eps.resize(n);
  out.sigma = nominal_sigma(kind);
  switch (kind) {
    case Noise::gaussian: {
      std::normal_distribution<double> d(0.0, 5.0);
      for (Index i = 0; i < n; ++i) out.eps[i] = d(rng);
      break;
    }
    case Noise::student_t: {
      std::student_t_distribution<double> d(2.0);
      for (Index i = 0; i < n; ++i) out.eps[i] = d(rng);
      break;
    }
    case Noise::laplace: {
      // difference of two exponentials with mean b is Laplace(0, b)
      const double b = 5.0 / std::numbers::sqrt2;
      std::exponential_distribution<double> d(1.0 / b);
      for (Index i = 0; i < n; ++i) out.eps[i] = d(rng) - d(rng);
      break;
    }
    case Noise::uniform: {
      const double h = 5.0 * std::numbers::sqrt3;
      std::uniform_real_distribution<double> d(-h, h);
      for (Index i = 0; i < n; ++i) out.eps[i] = d(rng);
      break;
    }
  }
  return out;
}

struct TrueModel {
  /// first 15 entries 3, the rest 0
  Eigen::VectorXd beta_star;
  Index s_star = 15;
  double sigma = 5.0;
  PredictorGraph true_graph;
};

inline TrueModel make_true_model(int example, Noise noise, Index p) {
  TrueModel m;
  m.beta_star = Eigen::VectorXd::Zero(p);
  m.beta_star.head(15).setConstant(3.0);
  m.sigma = nominal_sigma(noise);
  m.true_graph = true_graph(example, p);
  return m;
}

struct SimData {
  Eigen::MatrixXd X_train, X_val, X_test;
  Eigen::VectorXd y_train, y_val, y_test;
  TrueModel truth;
  std::uint64_t seed = 0;
};

/// One replication, drawn from a single stream seeded with scenario.seed + rep:
/// train predictors and noise, then validation, then test.
inline SimData simulate(const SimScenario& sc, std::uint64_t rep = 0) {
  sc.validate();
  SimData d;
  d.seed = sc.seed + rep;
  d.truth = make_true_model(sc.example, sc.noise, sc.p);
  SplitMix64 rng(d.seed);
  auto draw = [&](Index n, Eigen::MatrixXd& X, Eigen::VectorXd& y) {
    X = generate_predictors(sc.example, n, sc.p, rng);
    y = X * d.truth.beta_star + generate_noise(sc.noise, n, rng).eps;
  };
  draw(sc.n_train, d.X_train, d.y_train);
  draw(sc.n_val, d.X_val, d.y_val);
  draw(sc.n_test, d.X_test, d.y_test);
  return d;
}

struct MetricsRow {
  double l2_distance = 0.0;
  double rpe = 0.0;
  double fpr = 0.0;
  double fnr = 0.0;
  double mcc = 0.0;
};

struct Confusion {
  Index tp = 0, tn = 0, fp = 0, fn = 0;
};

inline Confusion confusion(const Eigen::VectorXd& beta_hat, const Eigen::VectorXd& beta_star, double support_tol) {
  Confusion c;
  for (Index i = 0; i < beta_hat.size(); ++i) {
    const bool est = std::abs(beta_hat[i]) > support_tol;
    const bool truth = beta_star[i] != 0.0;
    if (est && truth) ++c.tp;
    else if (est) ++c.fp;
    else if (truth) ++c.fn;
    else ++c.tn;
  }
  return c;
}

/// 0 when any factor of the denominator is 0.
inline double mcc(const Confusion& c) {
  const double tp = static_cast<double>(c.tp), tn = static_cast<double>(c.tn);
  const double fp = static_cast<double>(c.fp), fn = static_cast<double>(c.fn);
  const double den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (den == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(den);
}

inline MetricsRow metrics(const Eigen::VectorXd& beta_hat, const TrueModel& truth, const Eigen::MatrixXd& X_test,
                          double support_tol = 1e-6) {
  if (beta_hat.size() != truth.beta_star.size() || X_test.cols() != beta_hat.size())
    throw InputError("metric dimensions disagree");
  MetricsRow m;
  const Eigen::VectorXd d = beta_hat - truth.beta_star;
  m.l2_distance = d.norm();
  m.rpe = (X_test * d).squaredNorm() / (truth.sigma * truth.sigma * static_cast<double>(X_test.rows()));
  const Confusion c = confusion(beta_hat, truth.beta_star, support_tol);
  m.fpr = c.fp + c.tn > 0 ? static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn) : 0.0;
  m.fnr = c.tp + c.fn > 0 ? static_cast<double>(c.fn) / static_cast<double>(c.tp + c.fn) : 0.0;
  m.mcc = mcc(c);
  return m;
}

enum class Method { gsre, gsre_oracle, srig, srig_oracle, srl };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::gsre: return "GSRE";
    case Method::gsre_oracle: return "GSRE-o";
    case Method::srig: return "SRIG";
    case Method::srig_oracle: return "SRIG-o";
    case Method::srl: return "SRL";
  }
  return "?";
}

inline Method parse_method(const std::string& s) {
  std::string u;
  for (char c : s) u += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (u == "GSRE") return Method::gsre;
  if (u == "GSRE-O") return Method::gsre_oracle;
  if (u == "SRIG") return Method::srig;
  if (u == "SRIG-O") return Method::srig_oracle;
  if (u == "SRL") return Method::srl;
  throw InputError("unknown method '" + s + "' (GSRE, GSRE-o, SRIG, SRIG-o, SRL)");
}

inline std::vector<Method> all_methods() {
  return {Method::gsre, Method::gsre_oracle, Method::srig, Method::srig_oracle, Method::srl};
}

/// Which simulated predictor rows feed the graph estimate. Responses are never used.
enum class GraphSamples { train, train_val, all };

inline const char* to_string(GraphSamples s) {
  switch (s) {
    case GraphSamples::train: return "train";
    case GraphSamples::train_val: return "train_val";
    case GraphSamples::all: return "all";
  }
  return "?";
}

inline GraphSamples parse_graph_samples(const std::string& s) {
  if (s == "train") return GraphSamples::train;
  if (s == "train_val" || s == "train-val") return GraphSamples::train_val;
  if (s == "all") return GraphSamples::all;
  throw InputError("unknown graph sample set '" + s + "' (train, train_val, all)");
}

/// Penalty scale rho for one fit: fixed, or divided by the response scale ||y|| / sqrt(n).
enum class RhoRule { fixed, response_scaled };

struct BenchmarkConfig {
  SimScenario scenario{};
  std::vector<Method> methods = all_methods();
  int reps = 20;
  SelectionMethod selection = SelectionMethod::hbic;
  AdmmSettings admm = [] {
    AdmmSettings s;
    s.rho = 0.5;
    s.evaluate_objective = false;
    return s;
  }();
  RhoRule rho_rule = RhoRule::response_scaled;
  /// rho for least-squares fits; response_scaled divides it by (||y|| / sqrt n)^2
  double rho_least_squares = 50.0;
  GridOptions grid = [] {
    GridOptions g;
    g.scale = GridScale::unnormalized_loss;
    return g;
  }();
  double eta = kDefaultEta;
  GraphSamples graph_samples = GraphSamples::all;
  double graph_penalty = 0.35;
  double edge_tol = 1e-8;
  /// 0 or 1: run replications on the calling thread
  unsigned threads = 1;
  /// Copy a method's row to its oracle twin when the estimated graph is exact
  /// (the fits are then the same computation). Off: fit both.
  bool share_exact_graph_fits = true;

  void validate() const {
    scenario.validate();
    if (reps < 1) throw InputError("reps must be >= 1");
    if (methods.empty()) throw InputError("no methods requested");
    if (!(graph_penalty >= 0.0)) throw InputError("graph penalty must be nonnegative");
    if (!(rho_least_squares > 0.0)) throw InputError("least-squares rho must be positive");
    admm.validate();
  }
};

struct MethodOutcome {
  Method method = Method::gsre;
  MetricsRow metrics;
  double lambda = 0.0;
  std::size_t selected_index = 0;
  Index support_size = 0;
  int max_iter_fits = 0;
  int failed_fits = 0;
  /// worst KKT certificate over the converged fits of the path that carry one
  double worst_kkt = 0.0;
  int certified_fits = 0;
};

struct ReplicationRecord {
  int rep = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  Index estimated_edges = 0;
  bool graph_exact = false;
  std::vector<MethodOutcome> outcomes;
};

struct MethodSummary {
  Method method = Method::gsre;
  MetricsRow mean;
  /// sample standard deviation (n - 1); 0 for a single replication
  MetricsRow sd;
  int count = 0;
};

struct BenchmarkResult {
  std::vector<ReplicationRecord> replications;
  std::vector<MethodSummary> summary;
  int failed_replications = 0;
};

namespace detail {

inline Eigen::MatrixXd stack_rows(std::initializer_list<const Eigen::MatrixXd*> parts) {
  Index rows = 0, cols = 0;
  for (const auto* m : parts) {
    rows += m->rows();
    cols = m->cols();
  }
  Eigen::MatrixXd out(rows, cols);
  Index at = 0;
  for (const auto* m : parts) {
    out.middleRows(at, m->rows()) = *m;
    at += m->rows();
  }
  return out;
}

inline MethodOutcome run_method(Method method, const SimData& data, const PredictorGraph& estimated,
                                const BenchmarkConfig& cfg) {
  const bool oracle = method == Method::gsre_oracle || method == Method::srig_oracle;
  const bool least_squares = method == Method::srig || method == Method::srig_oracle;
  Problem prob;
  prob.X = data.X_train;
  prob.y = data.y_train;
  prob.loss = least_squares ? Loss::least_squares : Loss::sqrt_loss;
  if (method == Method::srl) {
    prob.graph = make_edgeless(data.X_train.cols());
    prob.weights = NodeWeights::constant(data.X_train.cols(), 1.0);
  } else {
    prob.graph = oracle ? data.truth.true_graph : estimated;
    prob.weights = default_weights(prob.graph, cfg.eta);
  }

  const double n = static_cast<double>(prob.n());
  const double y_scale = prob.y.norm() / std::sqrt(n);
  LambdaGrid grid = lambda_grid_exponent(prob.X, cfg.grid);
  if (least_squares) {
    // Same positions relative to the null-model threshold: at b = 0 the
    // least-squares condition reads lambda_ls = lambda_sqrt ||y|| / sqrt(n).
    for (double& v : grid.values) v *= y_scale;
  }
  AdmmSettings settings = cfg.admm;
  if (least_squares) settings.rho = cfg.rho_least_squares;
  if (cfg.rho_rule == RhoRule::response_scaled && y_scale > 0.0)
    settings.rho /= least_squares ? y_scale * y_scale : y_scale;

  PathResult path = fit_path(prob, grid, settings);
  const std::size_t k = cfg.selection == SelectionMethod::hbic ? select_hbic(path, prob.n(), prob.p())
                                                                : select_validation(path, data.X_val, data.y_val);
  MethodOutcome out;
  out.method = method;
  out.selected_index = k;
  out.lambda = path.fits[k].lambda;
  out.support_size = static_cast<Index>(path.fits[k].support.size());
  out.metrics = metrics(path.fits[k].beta_hat, data.truth, data.X_test, settings.support_tol);
  for (const auto& f : path.fits) {
    out.max_iter_fits += f.status == FitStatus::max_iter;
    out.failed_fits += f.status == FitStatus::failed;
    if (f.status == FitStatus::converged && f.kkt_certificate) {
      out.worst_kkt = std::max(out.worst_kkt, *f.kkt_certificate);
      ++out.certified_fits;
    }
  }
  return out;
}

}  // namespace detail

/// One replication: simulate, estimate the graph, fit every requested method over the grid, select, score.
inline ReplicationRecord run_replication(const BenchmarkConfig& cfg, int rep) {
  ReplicationRecord rec;
  rec.rep = rep;
  rec.seed = cfg.scenario.seed + static_cast<std::uint64_t>(rep);
  try {
    const SimData data = simulate(cfg.scenario, static_cast<std::uint64_t>(rep));
    const bool needs_graph = std::any_of(cfg.methods.begin(), cfg.methods.end(),
                                         [](Method m) { return m == Method::gsre || m == Method::srig; });
    PredictorGraph estimated;
    if (needs_graph) {
      Eigen::MatrixXd samples;
      switch (cfg.graph_samples) {
        case GraphSamples::train: samples = data.X_train; break;
        case GraphSamples::train_val: samples = detail::stack_rows({&data.X_train, &data.X_val}); break;
        case GraphSamples::all: samples = detail::stack_rows({&data.X_train, &data.X_val, &data.X_test}); break;
      }
      estimated = estimate_graph(samples, cfg.graph_penalty, cfg.edge_tol).graph;
      rec.estimated_edges = estimated.edge_count();
      rec.graph_exact = estimated == data.truth.true_graph;
    }
    for (Method m : cfg.methods) {
      // With the estimated graph equal to the true one the oracle row is the same computation.
      const Method twin = m == Method::gsre          ? Method::gsre_oracle
                          : m == Method::gsre_oracle ? Method::gsre
                          : m == Method::srig        ? Method::srig_oracle
                          : m == Method::srig_oracle ? Method::srig
                                                     : m;
      const auto done = std::find_if(rec.outcomes.begin(), rec.outcomes.end(),
                                     [&](const MethodOutcome& o) { return o.method == twin; });
      if (cfg.share_exact_graph_fits && twin != m && rec.graph_exact && done != rec.outcomes.end()) {
        MethodOutcome copy = *done;
        copy.method = m;
        rec.outcomes.push_back(copy);
        continue;
      }
      rec.outcomes.push_back(detail::run_method(m, data, estimated, cfg));
    }
  } catch (const std::exception& e) {
    rec.failed = true;
    rec.error = e.what();
    rec.outcomes.clear();
  }
  return rec;
}

inline std::vector<MethodSummary> summarize(const std::vector<ReplicationRecord>& reps,
                                            const std::vector<Method>& methods) {
  std::vector<MethodSummary> out;
  for (Method m : methods) {
    std::vector<MetricsRow> rows;
    for (const auto& r : reps) {
      if (r.failed) continue;
      for (const auto& o : r.outcomes)
        if (o.method == m) rows.push_back(o.metrics);
    }
    MethodSummary s;
    s.method = m;
    s.count = static_cast<int>(rows.size());
    if (rows.empty()) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      s.mean = {nan, nan, nan, nan, nan};
      s.sd = s.mean;
      out.push_back(s);
      continue;
    }
    auto field = [&](double MetricsRow::*f, double& mean, double& sd) {
      double sum = 0.0;
      for (const auto& r : rows) sum += r.*f;
      mean = sum / static_cast<double>(rows.size());
      double ss = 0.0;
      for (const auto& r : rows) ss += (r.*f - mean) * (r.*f - mean);
      sd = rows.size() > 1 ? std::sqrt(ss / static_cast<double>(rows.size() - 1)) : 0.0;
    };
    field(&MetricsRow::l2_distance, s.mean.l2_distance, s.sd.l2_distance);
    field(&MetricsRow::rpe, s.mean.rpe, s.sd.rpe);
    field(&MetricsRow::fpr, s.mean.fpr, s.sd.fpr);
    field(&MetricsRow::fnr, s.mean.fnr, s.sd.fnr);
    field(&MetricsRow::mcc, s.mean.mcc, s.sd.mcc);
    out.push_back(s);
  }
  return out;
}

/**
 * Replicated benchmark. Replications are independent; with threads > 1 they
 * are distributed over worker threads, and the summary is folded in
 * replication order so the result does not depend on scheduling.
 */
inline BenchmarkResult run_benchmark(const BenchmarkConfig& cfg) {
  cfg.validate();
  BenchmarkResult res;
  res.replications.resize(static_cast<std::size_t>(cfg.reps));
  const unsigned workers = std::max(1u, std::min(cfg.threads, static_cast<unsigned>(cfg.reps)));
  if (workers == 1) {
    for (int r = 0; r < cfg.reps; ++r) res.replications[static_cast<std::size_t>(r)] = run_replication(cfg, r);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (int r = next++; r < cfg.reps; r = next++) res.replications[static_cast<std::size_t>(r)] = run_replication(cfg, r);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (const auto& r : res.replications) res.failed_replications += r.failed;
  res.summary = summarize(res.replications, cfg.methods);
  return res;
}

}  // namespace gsre
