#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include <gsre_cli.hpp>

using namespace gsre;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

Run run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "gsre");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> data_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') out.push_back(line);
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("gsre_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, HelpAndUsageErrors) {
  EXPECT_EQ(run_cli({"--help"}).code, 0);
  EXPECT_EQ(run_cli({}).code, 1);
  EXPECT_EQ(run_cli({"fit", "--X", "a.csv"}).code, 1);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 1);
}

TEST_F(CliTest, SimulateIsByteDeterministic) {
  const std::vector<std::string> base{"simulate", "--example", "3", "--sizes", "60/60/400", "--seed", "7"};
  auto a = base, b = base;
  a.insert(a.end(), {"--out-dir", path("a")});
  b.insert(b.end(), {"--out-dir", path("b")});
  ASSERT_EQ(run_cli(a).code, 0);
  ASSERT_EQ(run_cli(b).code, 0);
  for (const char* f : {"X_train.csv", "y_train.csv", "X_val.csv", "y_val.csv", "X_test.csv", "y_test.csv",
                        "true_graph.edges", "truth.json"}) {
    const auto x = slurp(dir_ / "a" / f);
    EXPECT_FALSE(x.empty()) << f;
    EXPECT_EQ(x, slurp(dir_ / "b" / f)) << f;
  }
  EXPECT_EQ(data_lines(slurp(dir_ / "a" / "X_train.csv")).size(), 60u);
  EXPECT_EQ(slurp(dir_ / "a" / "X_train.csv").rfind("# config\n", 0), 0u);
}

TEST_F(CliTest, SimulatedFilesFeedFitAndPath) {
  ASSERT_EQ(run_cli({"simulate", "--example", "1", "--sizes", "60/30/50", "--seed", "3", "--out-dir", path("d")}).code, 0);
  const auto fit = run_cli({"fit", "--X", path("d/X_train.csv"), "--y", path("d/y_train.csv"), "--graph",
                            path("d/true_graph.edges"), "--lambda", "20", "--out", path("fit.json")});
  ASSERT_EQ(fit.code, 0) << fit.err;
  const auto j = nlohmann::json::parse(slurp(dir_ / "fit.json"));
  EXPECT_EQ(j["status"], "Converged");
  EXPECT_EQ(j["beta_hat"].size(), 100u);
  EXPECT_EQ(j["config"]["command"], "fit");
  ASSERT_FALSE(j["support"].empty());
  EXPECT_GE(j["support"].front().get<int>(), 1);
  EXPECT_LE(j["kkt_certificate"].get<double>(), 1e-4);

  const auto path_run = run_cli({"path", "--X", path("d/X_train.csv"), "--y", path("d/y_train.csv"), "--graph",
                                 path("d/true_graph.edges"), "--X-val", path("d/X_val.csv"), "--y-val",
                                 path("d/y_val.csv"), "--admm.rho", "0.1", "--out", path("path.csv")});
  ASSERT_NE(path_run.code, 1) << path_run.err;
  const auto rows = data_lines(slurp(dir_ / "path.csv"));
  ASSERT_EQ(rows.size(), 42u);  // header + 41 grid values
  EXPECT_EQ(rows[0], "lambda,objective,support_size,hbic,validation_error,selected,status,iterations,kkt_certificate");
  int selected = 0;
  double prev = 1e300;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    std::vector<std::string> cells;
    std::istringstream in(rows[k]);
    std::string c;
    while (std::getline(in, c, ',')) cells.push_back(c);
    ASSERT_GE(cells.size(), 8u);
    const double lambda = std::stod(cells[0]);
    EXPECT_LT(lambda, prev);
    prev = lambda;
    EXPECT_FALSE(cells[4].empty());
    selected += cells[5] == "1";
  }
  EXPECT_EQ(selected, 1);
}

TEST_F(CliTest, NoiselessFitRecoversSupport) {
  SplitMix64 rng(5);
  const Eigen::MatrixXd X = generate_predictors(1, 40, 100, rng);
  const auto truth = make_true_model(1, Noise::gaussian, 100);
  io::write_csv_matrix(path("X.csv"), X);
  io::write_csv_matrix(path("y.csv"), X * truth.beta_star);
  const auto r = run_cli({"fit", "--X", path("X.csv"), "--y", path("y.csv"), "--graph", "blocks:5,5,5", "--lambda",
                          "1", "--admm.tol", "1e-10", "--admm.max-iter", "100000"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  std::vector<int> want;
  for (int i = 1; i <= 15; ++i) want.push_back(i);
  EXPECT_EQ(j["support"].get<std::vector<int>>(), want);
  EXPECT_TRUE(j["interpolating"].get<bool>());
  EXPECT_TRUE(j["kkt_certificate"].is_null());
}

TEST_F(CliTest, EdgelessUnitWeightsIsSquareRootLasso) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> d;
  Eigen::MatrixXd X(30, 8);
  for (Index i = 0; i < X.size(); ++i) X.data()[i] = d(rng);
  Eigen::VectorXd y = X.col(0) * 2.0 - X.col(3);
  for (Index i = 0; i < 30; ++i) y[i] += 0.3 * d(rng);
  io::write_csv_matrix(path("X.csv"), X);
  io::write_csv_matrix(path("y.csv"), y);
  const auto r = run_cli({"fit", "--X", path("X.csv"), "--y", path("y.csv"), "--graph", "edgeless", "--tau", "1",
                          "--lambda", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  const Problem prob{X, y, make_edgeless(8), NodeWeights::constant(8, 1.0), 4.0, Loss::sqrt_loss};
  const auto direct = fit(prob, AdmmSettings{});
  for (Index i = 0; i < 8; ++i) EXPECT_EQ(j["beta_hat"][static_cast<std::size_t>(i)].get<double>(), direct.beta_hat[i]);
}

TEST_F(CliTest, MalformedRowExitsOneWithLine) {
  io::write_text(path("X.csv"), "1,2\n3,4\n5\n");
  io::write_text(path("y.csv"), "1\n2\n3\n");
  const auto r = run_cli({"fit", "--X", path("X.csv"), "--y", path("y.csv"), "--lambda", "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("X.csv"), std::string::npos) << r.err;
}

TEST_F(CliTest, InputErrorsExitOne) {
  io::write_text(path("X.csv"), "1,2\n3,4\n5,7\n");
  io::write_text(path("y.csv"), "1\n2\n");
  EXPECT_EQ(run_cli({"fit", "--X", path("X.csv"), "--y", path("y.csv"), "--lambda", "1"}).code, 1);
  io::write_text(path("y.csv"), "1\n2\n4\n");
  EXPECT_EQ(run_cli({"fit", "--X", path("X.csv"), "--y", path("y.csv"), "--lambda", "-1"}).code, 1);
  EXPECT_EQ(run_cli({"fit", "--X", path("X.csv"), "--y", path("y.csv"), "--lambda", "1", "--graph", "banded:x"}).code, 1);
  EXPECT_EQ(run_cli({"fit", "--X", path("missing.csv"), "--y", path("y.csv"), "--lambda", "1"}).code, 1);
  EXPECT_EQ(run_cli({"fit", "--X", path("X.csv"), "--y", path("y.csv"), "--lambda", "1", "--loss", "huber"}).code, 1);
}

TEST_F(CliTest, IterationCapExitsTwo) {
  ASSERT_EQ(run_cli({"simulate", "--example", "3", "--sizes", "40/5/5", "--out-dir", path("d")}).code, 0);
  const auto r = run_cli({"fit", "--X", path("d/X_train.csv"), "--y", path("d/y_train.csv"), "--graph", "banded:1",
                          "--lambda", "5", "--admm.max-iter", "2"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(nlohmann::json::parse(r.out)["status"], "MaxIter");
}

TEST_F(CliTest, PilotLambdaModes) {
  ASSERT_EQ(run_cli({"simulate", "--example", "1", "--sizes", "60/5/5", "--out-dir", path("d")}).code, 0);
  const std::vector<std::string> base{"fit", "--X", path("d/X_train.csv"), "--y", path("d/y_train.csv"), "--graph",
                                      path("d/true_graph.edges"), "--lambda", "pilot:0.1,2"};
  const auto strict = run_cli(base);
  EXPECT_EQ(strict.code, 1);
  EXPECT_NE(strict.err.find("16 log"), std::string::npos) << strict.err;
  auto flagged = base;
  flagged.insert(flagged.end(), {"--pilot.mode", "flag"});
  const auto r = run_cli(flagged);
  ASSERT_NE(r.code, 1) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_FALSE(j["pilot"]["hypothesis_holds"].get<bool>());
  EXPECT_EQ(j["lambda"].get<double>(), j["pilot"]["value"].get<double>());
}

TEST_F(CliTest, GraphRecoversBlocksAtLargeN) {
  ASSERT_EQ(run_cli({"simulate", "--example", "1", "--sizes", "10000/1/1", "--out-dir", path("d")}).code, 0);
  const auto r = run_cli({"graph", "--X", path("d/X_train.csv"), "--out-edges", path("est.edges"), "--out-precision",
                          path("omega.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(io::read_edge_list(path("est.edges"), 100), io::read_edge_list(path("d/true_graph.edges"), 100));
  const auto omega = io::read_csv_matrix(path("omega.csv"));
  EXPECT_EQ(omega.rows(), 100);
  EXPECT_EQ(omega.cols(), 100);
}

TEST_F(CliTest, BenchWritesTableAndCsv) {
  const auto r = run_cli({"bench", "--example", "1", "--p", "20", "--sizes", "40/20/50", "--reps", "2", "--methods",
                          "GSRE,SRL", "--graph.samples", "train-val", "--grid.min-exp", "-8", "--out",
                          path("bench.csv")});
  ASSERT_NE(r.code, 1) << r.err;
  EXPECT_NE(r.out.find("GSRE"), std::string::npos);
  EXPECT_NE(r.out.find("SRL"), std::string::npos);
  const auto rows = data_lines(slurp(dir_ / "bench.csv"));
  ASSERT_EQ(rows.size(), 11u);
  EXPECT_EQ(rows[0], "method,metric,mean,sd,count");
  EXPECT_EQ(rows[1].rfind("GSRE,l2,", 0), 0u);
  EXPECT_EQ(run_cli({"bench", "--methods", "ridge"}).code, 1);
}
