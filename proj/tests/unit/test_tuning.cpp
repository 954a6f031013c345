#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include <gsre/sim.hpp>
#include <gsre/tuning.hpp>

using namespace gsre;

namespace {

Eigen::MatrixXd gaussian_matrix(Index r, Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  Eigen::MatrixXd m(r, c);
  for (Index j = 0; j < c; ++j)
    for (Index i = 0; i < r; ++i) m(i, j) = d(rng);
  return m;
}

Problem small_problem(std::mt19937_64& rng, Index n = 30, Index p = 12) {
  Problem prob;
  prob.X = gaussian_matrix(n, p, rng);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  beta.head(3).setConstant(1.5);
  prob.y = prob.X * beta + 0.5 * gaussian_matrix(n, 1, rng).col(0);
  prob.graph = make_banded(p, 1);
  prob.weights = default_weights(prob.graph);
  return prob;
}

FitResult fake_fit(double rss, std::size_t support, double response_ss = 1e6) {
  FitResult f;
  f.status = FitStatus::converged;
  f.rss = rss;
  f.response_ss = response_ss;
  for (std::size_t i = 0; i < support; ++i) f.support.push_back(static_cast<Index>(i));
  return f;
}

}  // namespace

TEST(Pilot, EdgelessUnitColumnsValue) {
  const Index n = 100;
  const Eigen::MatrixXd X = Eigen::MatrixXd::Identity(n, n);
  const auto g = make_edgeless(n);
  const auto w = NodeWeights::constant(n, 1.0);
  const auto r = lambda_pilot(X, g, w, 0.1, 3.0, PilotMode::flag);
  EXPECT_NEAR(r.value, 139.25, 0.05);
  EXPECT_NEAR(r.zeta, 1.0, 1e-10);
  // 16 log(2000) = 121.6 > n - d_max = 99
  EXPECT_FALSE(r.hypothesis_holds);
  EXPECT_FALSE(r.note.empty());
  EXPECT_THROW(lambda_pilot(X, g, w, 0.1, 3.0, PilotMode::strict), HypothesisViolated);
}

TEST(Pilot, LargeRHalvesTheValue) {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Identity(100, 100);
  const auto g = make_edgeless(100);
  const auto w = NodeWeights::constant(100, 1.0);
  const double at3 = lambda_pilot(X, g, w, 0.1, 3.0, PilotMode::flag).value;
  const double big = lambda_pilot(X, g, w, 0.1, 1e12, PilotMode::flag).value;
  EXPECT_NEAR(big / at3, 0.5, 1e-9);
}

TEST(Pilot, HomogeneousInDesignScaleAndMonotoneInAlpha) {
  std::mt19937_64 rng(1);
  const Eigen::MatrixXd X = gaussian_matrix(400, 20, rng);
  const auto g = make_banded(20, 1);
  const auto w = default_weights(g);
  const auto base = lambda_pilot(X, g, w, 0.1, 2.0);
  EXPECT_TRUE(base.hypothesis_holds);
  EXPECT_NEAR(lambda_pilot(3.0 * X, g, w, 0.1, 2.0).value, 3.0 * base.value, 1e-8 * base.value);
  EXPECT_GE(lambda_pilot(X, g, w, 0.01, 2.0).value, base.value);
}

TEST(Pilot, SharedNeighborhoodZeta) {
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd X = gaussian_matrix(30, 4, rng);
  const double want = Eigen::JacobiSVD<Eigen::MatrixXd>(X).singularValues()[0];
  EXPECT_NEAR(neighborhood_zeta(X, make_complete(4)), want * want, 1e-8 * want * want);
}

TEST(Pilot, RejectsBadArguments) {
  const Eigen::MatrixXd X = Eigen::MatrixXd::Identity(5, 5);
  const auto g = make_edgeless(5);
  const auto w = NodeWeights::constant(5, 1.0);
  EXPECT_THROW(lambda_pilot(X, g, w, 0.0, 2.0), InputError);
  EXPECT_THROW(lambda_pilot(X, g, w, 0.1, 1.0), InputError);
  EXPECT_THROW(lambda_pilot(X, make_complete(5), w, 0.1, 2.0, PilotMode::flag), HypothesisViolated);
}

TEST(Pilot, StatisticMatchesDefinition) {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd X = gaussian_matrix(10, 3, rng);
  const Eigen::VectorXd eps = gaussian_matrix(10, 1, rng).col(0);
  const auto g = make_edgeless(3);
  const auto w = NodeWeights::constant(3, 1.0);
  const double want = std::sqrt(10.0) * (X.transpose() * eps).cwiseAbs().maxCoeff() / eps.norm();
  EXPECT_NEAR(pilot_statistic(X, g, w, eps), want, 1e-12);
}

TEST(Grid, ExponentGridEndpoints) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(50, 8);
  X(0, 0) = 10.0;
  const auto g = lambda_grid_exponent(X);
  ASSERT_EQ(g.size(), 41u);
  EXPECT_NEAR(g.values.front(), 1.5625, 1e-9);
  EXPECT_NEAR(g.values.back(), 0.006104, 1e-6);
  for (std::size_t k = 1; k < g.size(); ++k) EXPECT_LT(g.values[k], g.values[k - 1]);
  EXPECT_EQ(g.rule, GridRule::exponent_grid);
}

TEST(Grid, ScalesWithDesignAndLossConvention) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd X = gaussian_matrix(16, 5, rng);
  const auto a = lambda_grid_exponent(X);
  const auto b = lambda_grid_exponent(2.5 * X);
  GridOptions un;
  un.scale = GridScale::unnormalized_loss;
  const auto c = lambda_grid_exponent(X, un);
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_NEAR(b.values[k], 2.5 * a.values[k], 1e-9 * b.values[k]);
    EXPECT_NEAR(c.values[k], 4.0 * a.values[k], 1e-12 * c.values[k]);
  }
  EXPECT_THROW(lambda_grid_exponent(Eigen::MatrixXd::Zero(3, 3)), InputError);
}

TEST(Grid, ExplicitValuesSortedAndDeduplicated) {
  const auto g = make_grid({0.5, 2.0, 1.0, 2.0});
  EXPECT_EQ(g.values, (std::vector<double>{2.0, 1.0, 0.5}));
  EXPECT_THROW(make_grid({}), InputError);
  EXPECT_THROW(make_grid({1.0, -1.0}), InputError);
}

TEST(Hbic, ZeroFitIsLogMeanSquare) {
  auto f = fake_fit(120.0, 0);
  EXPECT_NEAR(hbic(f, 60, 100), std::log(2.0), 1e-14);
}

TEST(Hbic, WorkedExample) {
  EXPECT_NEAR(hbic(fake_fit(4.0 * 60, 15), 60, 100), 3.00916, 1e-5);
}

TEST(Hbic, DegenerateFitsRankLast) {
  const double ninf = -std::numeric_limits<double>::infinity();
  EXPECT_EQ(hbic(fake_fit(0.0, 3), 60, 100), ninf);
  EXPECT_EQ(hbic(fake_fit(1.0, 60), 60, 100), ninf);
  auto interp = fake_fit(1.0, 3);
  interp.interpolating = true;
  EXPECT_EQ(hbic(interp, 60, 100), ninf);
  EXPECT_THROW(hbic(fake_fit(1.0, 1), 2, 10), InputError);

  PathResult path;
  path.fits = {fake_fit(50.0, 2), fake_fit(0.0, 10), fake_fit(40.0, 3)};
  EXPECT_EQ(select_hbic(path, 60, 100), 2u);
}

TEST(Select, SmallerSupportWinsAtEqualRss) {
  PathResult path;
  path.fits = {fake_fit(30.0, 10), fake_fit(30.0, 5)};
  EXPECT_EQ(select_hbic(path, 60, 100), 1u);
}

TEST(Select, TiesGoToLargerLambda) {
  PathResult path;
  path.fits = {fake_fit(30.0, 5), fake_fit(30.0, 5), fake_fit(30.0, 5)};
  EXPECT_EQ(select_hbic(path, 60, 100), 0u);
  for (auto& f : path.fits) f.beta_hat = Eigen::VectorXd::Zero(2);
  EXPECT_EQ(select_validation(path, Eigen::MatrixXd::Ones(3, 2), Eigen::VectorXd::Ones(3)), 0u);
}

TEST(Select, SingleFitPath) {
  PathResult path;
  path.fits = {fake_fit(30.0, 5)};
  EXPECT_EQ(select_hbic(path, 60, 100), 0u);
  EXPECT_EQ(&path.chosen(), &path.fits[0]);
}

TEST(Path, SingletonGridEqualsDirectFit) {
  std::mt19937_64 rng(5);
  Problem prob = small_problem(rng);
  prob.lambda = 3.0;
  const auto path = fit_path(prob, make_grid({3.0}), AdmmSettings{});
  const auto direct = fit(prob, AdmmSettings{});
  ASSERT_EQ(path.fits.size(), 1u);
  EXPECT_EQ(path.fits[0].beta_hat, direct.beta_hat);
  EXPECT_EQ(path.fits[0].iterations, direct.iterations);
}

TEST(Path, FirstFitIsZeroAboveThresholdAndAllCertify) {
  std::mt19937_64 rng(6);
  const Problem prob = small_problem(rng);
  const Eigen::VectorXd xty = prob.X.transpose() * prob.y;
  double thr = 0.0;
  for (Index i = 0; i < prob.p(); ++i)
    thr = std::max(thr, block_norm(xty, prob.graph.neighborhood(i)) / prob.weights[i]);
  thr *= std::sqrt(static_cast<double>(prob.n())) / prob.y.norm();
  std::vector<double> values;
  for (int k = 0; k < 12; ++k) values.push_back(1.2 * thr * std::pow(0.7, k));
  const auto path = fit_path(prob, make_grid(values), AdmmSettings{});
  ASSERT_EQ(path.fits.size(), values.size());
  EXPECT_TRUE(path.fits.front().support.empty());
  for (const auto& f : path.fits) {
    ASSERT_EQ(f.status, FitStatus::converged);
    ASSERT_TRUE(f.kkt_certificate.has_value());
    EXPECT_LE(*f.kkt_certificate, 1e-4);
  }
  EXPECT_FALSE(path.fits.back().support.empty());
}

TEST(Path, ValidationPicksLowestPredictionError) {
  std::mt19937_64 rng(7);
  const Problem prob = small_problem(rng);
  const Eigen::MatrixXd Xv = gaussian_matrix(50, prob.p(), rng);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(prob.p());
  beta.head(3).setConstant(1.5);
  const Eigen::VectorXd yv = Xv * beta;
  auto path = fit_path(prob, make_grid({20.0, 10.0, 5.0, 2.0, 1.0, 0.5}), AdmmSettings{});
  const auto k = select_validation(path, Xv, yv);
  for (const auto& f : path.fits)
    EXPECT_LE((Xv * (path.fits[k].beta_hat - beta)).squaredNorm(), (Xv * (f.beta_hat - beta)).squaredNorm());
}

TEST(Path, RejectsUnsortedGrid) {
  std::mt19937_64 rng(8);
  LambdaGrid g;
  g.values = {1.0, 2.0};
  EXPECT_THROW(fit_path(small_problem(rng), g, AdmmSettings{}), InputError);
}

TEST(Path, CoverageOfPilotOnExampleOneDesign) {
  SplitMix64 rng(11);
  const Index n = 60, p = 100;
  const Eigen::MatrixXd X = generate_predictors(1, n, p, rng);
  const auto g = true_graph(1, p);
  const auto w = default_weights(g);
  const double r = 2.0, rbar = (r + 1.0) / (r - 1.0);
  const auto pilot = lambda_pilot(X, g, w, 0.1, r, PilotMode::flag);
  std::normal_distribution<double> d;
  int hits = 0;
  for (int k = 0; k < 200; ++k) {
    Eigen::VectorXd eps(n);
    for (Index i = 0; i < n; ++i) eps[i] = d(rng);
    if (pilot_statistic(X, g, w, eps) <= pilot.value / rbar) ++hits;
  }
  EXPECT_GE(hits, 170);
}
