#pragma once

// Command-line front end. `run` is the whole program; main() only forwards
// argv and the standard streams, so tests can drive it in-process.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <gsre/gsre.hpp>

namespace gsre::cli {

using Json = nlohmann::ordered_json;

enum Exit : int { ok = 0, input_error = 1, not_converged = 2 };

struct SolverFlags {
  AdmmSettings admm{};
  double tol = 1e-7;
  std::string prox_method = "auto";
  std::string loss = "sqrt";
  double eta = kDefaultEta;
  std::optional<double> tau;
};

inline void add_solver_flags(CLI::App& cmd, SolverFlags& f) {
  cmd.add_option("--loss", f.loss, "sqrt (square-root loss) or ls (least squares)")
      ->check(CLI::IsMember({"sqrt", "ls"}))
      ->capture_default_str();
  cmd.add_option("--eta", f.eta, "node weights tau_i = d_i^eta")->capture_default_str();
  cmd.add_option("--tau", f.tau, "constant node weight, overrides --eta");
  cmd.add_option("--admm.rho", f.admm.rho, "augmented-Lagrangian penalty")->capture_default_str();
  cmd.add_option("--admm.gamma", f.admm.gamma, "dual step size")->capture_default_str();
  cmd.add_option("--admm.tol", f.tol, "primal and dual residual tolerance")->capture_default_str();
  cmd.add_option("--admm.max-iter", f.admm.max_iter, "iteration cap")->capture_default_str();
  cmd.add_option("--admm.kkt-tol", f.admm.kkt_tol, "KKT certificate required before stopping; 0 disables")
      ->capture_default_str();
  cmd.add_option("--admm.support-tol", f.admm.support_tol, "|b_i| above this counts as selected")
      ->capture_default_str();
  cmd.add_option("--prox.method", f.prox_method, "projection inside the prox: auto, dykstra or newton")
      ->check(CLI::IsMember({"auto", "dykstra", "newton"}))
      ->capture_default_str();
  cmd.add_option("--prox.switch-ratio", f.admm.prox.switch_ratio, "auto: Newton when |O| < ratio * p")
      ->capture_default_str();
}

inline AdmmSettings settings_of(const SolverFlags& f) {
  AdmmSettings s = f.admm;
  s.tol_primal = f.tol;
  s.tol_dual = f.tol;
  s.prox.method = f.prox_method == "dykstra"  ? ProjectionMethod::dykstra
                  : f.prox_method == "newton" ? ProjectionMethod::newton
                                              : ProjectionMethod::automatic;
  return s;
}

inline Json solver_config(const SolverFlags& f) {
  Json j;
  j["loss"] = f.loss;
  if (f.tau) j["tau"] = *f.tau;
  else j["eta"] = f.eta;
  j["admm.rho"] = f.admm.rho;
  j["admm.gamma"] = f.admm.gamma;
  j["admm.tol"] = f.tol;
  j["admm.max-iter"] = f.admm.max_iter;
  j["admm.kkt-tol"] = f.admm.kkt_tol;
  j["admm.support-tol"] = f.admm.support_tol;
  j["prox.method"] = f.prox_method;
  j["prox.switch-ratio"] = f.admm.prox.switch_ratio;
  return j;
}

namespace detail {

inline Index parse_index(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size() || v < 0) throw InputError(what + " must be a nonnegative integer, got '" + s + "'");
  return static_cast<Index>(v);
}

inline double parse_double(const std::string& s, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != s.size()) throw InputError(what + " must be a number, got '" + s + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

/// "# key: value" lines for CSV and edge-list outputs.
inline std::string comment_block(const Json& config) {
  std::string out = "# config\n";
  for (const auto& [k, v] : config.items()) out += "# " + k + ": " + (v.is_string() ? v.get<std::string>() : v.dump()) + "\n";
  return out;
}

inline void write_json(const std::string& path, const Json& j, std::ostream& out) {
  const std::string text = j.dump(2) + "\n";
  if (path.empty() || path == "-") out << text;
  else io::write_text(path, text);
}

inline Json index_list(const std::vector<Index>& idx) {
  Json a = Json::array();
  for (Index i : idx) a.push_back(i + 1);
  return a;
}

inline Json vector_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline Json edges_json(const PredictorGraph& g) {
  Json a = Json::array();
  for (const auto& e : g.edges()) a.push_back(Json::array({e.a + 1, e.b + 1}));
  return a;
}

}  // namespace detail

/// edgeless | complete | banded:k | blocks:s1,s2,... | path to an edge list (1-based).
inline PredictorGraph parse_graph(const std::string& desc, Index p) {
  if (desc == "edgeless") return make_edgeless(p);
  if (desc == "complete") return make_complete(p);
  if (desc.rfind("banded:", 0) == 0) return make_banded(p, detail::parse_index(desc.substr(7), "band width"));
  if (desc.rfind("blocks:", 0) == 0) {
    std::vector<Index> sizes;
    Index used = 0;
    for (const auto& s : detail::split(desc.substr(7), ',')) {
      sizes.push_back(detail::parse_index(s, "block size"));
      used += sizes.back();
    }
    // nodes after the listed blocks stay isolated
    if (used < p) sizes.insert(sizes.end(), static_cast<std::size_t>(p - used), 1);
    return make_block_complete(sizes, p);
  }
  return io::read_edge_list(desc, p);
}

struct LambdaChoice {
  std::optional<double> value;
  double alpha = 0.1;
  double r = 2.0;
  bool pilot = false;
};

/// A positive number, or "pilot:alpha,r" for the noise-level-free value.
inline LambdaChoice parse_lambda(const std::string& s) {
  LambdaChoice out;
  if (s.rfind("pilot", 0) == 0) {
    out.pilot = true;
    if (s.size() > 5) {
      if (s[5] != ':') throw InputError("lambda must be a number or pilot:alpha,r");
      const auto parts = detail::split(s.substr(6), ',');
      if (parts.size() != 2) throw InputError("pilot lambda needs two values: pilot:alpha,r");
      out.alpha = detail::parse_double(parts[0], "pilot alpha");
      out.r = detail::parse_double(parts[1], "pilot r");
    }
    return out;
  }
  out.value = detail::parse_double(s, "lambda");
  if (!(*out.value > 0.0)) throw InputError("lambda must be positive");
  return out;
}

struct DataFlags {
  std::string x, y, graph = "edgeless";
};

inline void add_data_flags(CLI::App& cmd, DataFlags& f) {
  cmd.add_option("--X", f.x, "design CSV, n rows of p fields, no header")->required();
  cmd.add_option("--y", f.y, "response CSV, n rows of one field")->required();
  cmd.add_option("--graph", f.graph, "edgeless, complete, banded:k, blocks:s1,s2,... or an edge-list file")
      ->capture_default_str();
}

inline Problem load_problem(const DataFlags& d, const SolverFlags& s) {
  Problem prob;
  prob.X = io::read_csv_matrix(d.x);
  prob.y = io::read_csv_vector(d.y);
  if (prob.X.rows() == 0 || prob.X.cols() == 0) throw InputError(d.x + ": design is empty");
  if (prob.y.size() != prob.X.rows())
    throw InputError(d.y + " has " + std::to_string(prob.y.size()) + " rows, " + d.x + " has " +
                     std::to_string(prob.X.rows()));
  prob.graph = parse_graph(d.graph, prob.X.cols());
  prob.weights = s.tau ? NodeWeights::constant(prob.p(), *s.tau) : default_weights(prob.graph, s.eta);
  prob.loss = s.loss == "ls" ? Loss::least_squares : Loss::sqrt_loss;
  return prob;
}

inline Json fit_json(const FitResult& f) {
  Json j;
  j["status"] = to_string(f.status);
  j["lambda"] = f.lambda;
  j["iterations"] = f.iterations;
  j["objective"] = f.objective ? Json(*f.objective) : Json();
  j["kkt_certificate"] = f.kkt_certificate ? Json(*f.kkt_certificate) : Json();
  j["interpolating"] = f.interpolating;
  j["support"] = detail::index_list(f.support);
  j["beta_hat"] = detail::vector_json(f.beta_hat);
  return j;
}

struct FitCommand {
  DataFlags data;
  SolverFlags solver;
  std::string lambda;
  std::string pilot_mode = "strict";
  std::string out;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("fit", "fit one lambda; writes a JSON result");
    add_data_flags(*cmd, data);
    add_solver_flags(*cmd, solver);
    cmd->add_option("--lambda", lambda, "a positive number, or pilot:alpha,r for the noise-free reference value")
        ->required();
    cmd->add_option("--pilot.mode", pilot_mode, "strict: refuse when the sample-size condition fails")
        ->check(CLI::IsMember({"strict", "flag"}))
        ->capture_default_str();
    cmd->add_option("--out", out, "output JSON (default stdout)");
  }

  int run(std::ostream& out_stream) const {
    Problem prob = load_problem(data, solver);
    const LambdaChoice choice = parse_lambda(lambda);
    Json config;
    config["command"] = "fit";
    config["X"] = data.x;
    config["y"] = data.y;
    config["graph"] = data.graph;
    config["lambda"] = lambda;
    if (choice.pilot) config["pilot.mode"] = pilot_mode;
    config.update(solver_config(solver));

    Json doc;
    doc["config"] = config;
    if (choice.pilot) {
      const PilotLambda pl = lambda_pilot(prob.X, prob.graph, prob.weights, choice.alpha, choice.r,
                                          pilot_mode == "flag" ? PilotMode::flag : PilotMode::strict);
      prob.lambda = pl.value;
      doc["pilot"] = {{"alpha", choice.alpha}, {"r", choice.r}, {"value", pl.value}, {"zeta", pl.zeta},
                      {"hypothesis_holds", pl.hypothesis_holds}, {"note", pl.note}};
    } else {
      prob.lambda = *choice.value;
    }
    const FitResult f = fit(prob, settings_of(solver));
    const Json result = fit_json(f);
    for (const auto& [k, v] : result.items()) doc[k] = v;
    detail::write_json(out, doc, out_stream);
    return f.status == FitStatus::converged ? ok : not_converged;
  }
};

struct GridFlags {
  GridOptions grid = [] {
    GridOptions g;
    g.scale = GridScale::unnormalized_loss;
    return g;
  }();
  std::string scale = "unnormalized";
  std::vector<double> values;
};

inline void add_grid_flags(CLI::App& cmd, GridFlags& g) {
  cmd.add_option("--grid.max-exp", g.grid.max_exp, "largest exponent e in 2^e")->capture_default_str();
  cmd.add_option("--grid.min-exp", g.grid.min_exp, "smallest exponent")->capture_default_str();
  cmd.add_option("--grid.step", g.grid.step, "exponent step")->capture_default_str();
  cmd.add_option("--grid.scale", g.scale,
                 "normalized: 2^e sqrt(n/2) ||X||; unnormalized: the same times sqrt(n)")
      ->check(CLI::IsMember({"normalized", "unnormalized"}))
      ->capture_default_str();
  cmd.add_option("--grid.values", g.values, "explicit lambda values, replaces the exponent grid")->delimiter(',');
}

inline Json grid_config(const GridFlags& g) {
  Json j;
  if (!g.values.empty()) {
    j["grid.values"] = g.values;
    return j;
  }
  j["grid.max-exp"] = g.grid.max_exp;
  j["grid.min-exp"] = g.grid.min_exp;
  j["grid.step"] = g.grid.step;
  j["grid.scale"] = g.scale;
  return j;
}

inline LambdaGrid build_grid(const GridFlags& g, const Eigen::MatrixXd& X) {
  if (!g.values.empty()) return make_grid(g.values);
  GridOptions o = g.grid;
  o.scale = g.scale == "normalized" ? GridScale::normalized : GridScale::unnormalized_loss;
  return lambda_grid_exponent(X, o);
}

struct PathCommand {
  DataFlags data;
  SolverFlags solver;
  GridFlags grid;
  std::string x_val, y_val;
  std::string select = "hbic";
  std::string format = "csv";
  std::string out;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("path", "fit a descending lambda grid with warm starts and select one value");
    add_data_flags(*cmd, data);
    add_solver_flags(*cmd, solver);
    add_grid_flags(*cmd, grid);
    cmd->add_option("--X-val", x_val, "validation design CSV");
    cmd->add_option("--y-val", y_val, "validation response CSV");
    cmd->add_option("--select.method", select, "hbic or validation")
        ->check(CLI::IsMember({"hbic", "validation"}))
        ->capture_default_str();
    cmd->add_option("--format", format, "csv (one row per lambda) or json (adds the selected estimate)")
        ->check(CLI::IsMember({"csv", "json"}))
        ->capture_default_str();
    cmd->add_option("--out", out, "output file (default stdout)");
  }

  int run(std::ostream& out_stream) const {
    Problem prob = load_problem(data, solver);
    const bool has_val = !x_val.empty() || !y_val.empty();
    if (has_val && (x_val.empty() || y_val.empty())) throw InputError("--X-val and --y-val go together");
    if (select == "validation" && !has_val) throw InputError("validation selection needs --X-val and --y-val");
    Eigen::MatrixXd Xv;
    Eigen::VectorXd yv;
    if (has_val) {
      Xv = io::read_csv_matrix(x_val);
      yv = io::read_csv_vector(y_val);
      if (Xv.cols() != prob.p())
        throw InputError(x_val + " has " + std::to_string(Xv.cols()) + " columns, expected " + std::to_string(prob.p()));
      if (Xv.rows() != yv.size()) throw InputError(y_val + " and " + x_val + " have different row counts");
    }
    const LambdaGrid g = build_grid(grid, prob.X);
    PathResult path = fit_path(prob, g, settings_of(solver));
    if (has_val) path.validation_error = validation_errors(path, Xv, yv);
    {
      const auto keep = path.validation_error;
      select_hbic(path, prob.n(), prob.p());
      if (select == "validation") select_validation(path, Xv, yv);
      else path.validation_error = keep;
    }

    Json config;
    config["command"] = "path";
    config["X"] = data.x;
    config["y"] = data.y;
    config["graph"] = data.graph;
    if (has_val) {
      config["X-val"] = x_val;
      config["y-val"] = y_val;
    }
    config["select.method"] = select;
    config.update(grid_config(grid));
    config.update(solver_config(solver));

    std::ostringstream text;
    if (format == "csv") {
      text << detail::comment_block(config);
      text << "lambda,objective,support_size,hbic,validation_error,selected,status,iterations,kkt_certificate\n";
      for (std::size_t k = 0; k < path.fits.size(); ++k) {
        const FitResult& f = path.fits[k];
        text << io::format_number(f.lambda) << ',' << (f.objective ? io::format_number(*f.objective) : "") << ','
             << f.support.size() << ',' << io::format_number(path.hbic[k]) << ','
             << (has_val ? io::format_number(path.validation_error[k]) : "") << ','
             << (path.selected == k ? 1 : 0) << ',' << to_string(f.status) << ',' << f.iterations << ','
             << (f.kkt_certificate ? io::format_number(*f.kkt_certificate) : "") << '\n';
      }
    } else {
      Json doc;
      doc["config"] = config;
      Json rows = Json::array();
      for (std::size_t k = 0; k < path.fits.size(); ++k) {
        const FitResult& f = path.fits[k];
        Json r;
        r["lambda"] = f.lambda;
        r["objective"] = f.objective ? Json(*f.objective) : Json();
        r["support_size"] = f.support.size();
        r["hbic"] = std::isfinite(path.hbic[k]) ? Json(path.hbic[k]) : Json("-inf");
        r["validation_error"] = has_val ? Json(path.validation_error[k]) : Json();
        r["selected"] = path.selected == k;
        r["status"] = to_string(f.status);
        r["iterations"] = f.iterations;
        r["kkt_certificate"] = f.kkt_certificate ? Json(*f.kkt_certificate) : Json();
        rows.push_back(r);
      }
      doc["path"] = rows;
      doc["selected"] = fit_json(path.chosen());
      text << doc.dump(2) << '\n';
    }
    if (out.empty() || out == "-") out_stream << text.str();
    else io::write_text(out, text.str());

    for (const auto& f : path.fits)
      if (f.status != FitStatus::converged) return not_converged;
    return ok;
  }
};

struct GraphCommand {
  std::string x;
  double penalty = kDefaultGlassoPenalty;
  double edge_tol = 1e-8;
  GlassoOptions glasso{};
  std::string out_edges, out_precision;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("graph", "estimate the predictor graph with the graphical lasso");
    cmd->add_option("--X", x, "predictor samples CSV")->required();
    cmd->add_option("--graph.penalty", penalty, "glasso penalty on standardized columns")->capture_default_str();
    cmd->add_option("--graph.edge-tol", edge_tol, "|omega_ij| above this is an edge")->capture_default_str();
    cmd->add_option("--glasso.tol", glasso.tol, "outer convergence tolerance")->capture_default_str();
    cmd->add_option("--glasso.max-iter", glasso.max_iter, "outer sweep cap")->capture_default_str();
    cmd->add_option("--out-edges", out_edges, "edge-list output (default stdout)");
    cmd->add_option("--out-precision", out_precision, "precision matrix CSV output");
  }

  int run(std::ostream& out_stream) const {
    const Eigen::MatrixXd samples = io::read_csv_matrix(x);
    if (samples.cols() == 0) throw InputError(x + ": no data");
    const GraphEstimate est = estimate_graph(samples, penalty, edge_tol, glasso);
    Json config;
    config["command"] = "graph";
    config["X"] = x;
    config["graph.penalty"] = penalty;
    config["graph.edge-tol"] = edge_tol;
    config["glasso.tol"] = glasso.tol;
    config["glasso.max-iter"] = glasso.max_iter;
    config["p"] = samples.cols();
    config["edges"] = est.graph.edges().size();
    config["iterations"] = est.precision.iterations;

    std::ostringstream edges;
    edges << detail::comment_block(config);
    io::write_edge_list(edges, est.graph);
    if (out_edges.empty() || out_edges == "-") out_stream << edges.str();
    else io::write_text(out_edges, edges.str());
    if (!out_precision.empty()) {
      std::ostringstream prec;
      prec << detail::comment_block(config);
      io::write_csv(prec, est.precision.omega);
      io::write_text(out_precision, prec.str());
    }
    return ok;
  }
};

struct ScenarioFlags {
  SimScenario scenario{};
  std::string noise = "gaussian";
  std::string sizes = "60/60/400";
};

inline void add_scenario_flags(CLI::App& cmd, ScenarioFlags& s) {
  cmd.add_option("--example", s.scenario.example, "design 1, 2 or 3")->capture_default_str();
  cmd.add_option("--noise", s.noise, "gaussian, student_t, laplace or uniform")->capture_default_str();
  cmd.add_option("--sizes", s.sizes, "train/validation/test sample sizes")->capture_default_str();
  cmd.add_option("--p", s.scenario.p, "number of predictors")->capture_default_str();
  cmd.add_option("--seed", s.scenario.seed, "base seed; replication r uses seed + r")->capture_default_str();
}

inline SimScenario scenario_of(const ScenarioFlags& f) {
  SimScenario sc = f.scenario;
  sc.noise = parse_noise(f.noise);
  const auto parts = detail::split(f.sizes, '/');
  if (parts.size() != 3) throw InputError("--sizes must look like 60/60/400");
  sc.n_train = detail::parse_index(parts[0], "training size");
  sc.n_val = detail::parse_index(parts[1], "validation size");
  sc.n_test = detail::parse_index(parts[2], "test size");
  sc.validate();
  return sc;
}

inline Json scenario_config(const SimScenario& sc) {
  Json j;
  j["example"] = sc.example;
  j["noise"] = to_string(sc.noise);
  j["sizes"] = std::to_string(sc.n_train) + "/" + std::to_string(sc.n_val) + "/" + std::to_string(sc.n_test);
  j["p"] = sc.p;
  j["seed"] = sc.seed;
  return j;
}

struct SimulateCommand {
  ScenarioFlags flags;
  std::uint64_t rep = 0;
  std::string out_dir = ".";

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("simulate", "write one simulated data set as CSV files plus the true model");
    add_scenario_flags(*cmd, flags);
    cmd->add_option("--rep", rep, "replication index")->capture_default_str();
    cmd->add_option("--out-dir", out_dir, "output directory")->capture_default_str();
  }

  int run(std::ostream& out_stream) const {
    const SimScenario sc = scenario_of(flags);
    const SimData d = simulate(sc, rep);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw InputError("cannot create '" + out_dir + "': " + ec.message());

    Json config;
    config["command"] = "simulate";
    config.update(scenario_config(sc));
    config["rep"] = rep;
    const std::string header = detail::comment_block(config);
    const auto write = [&](const std::string& name, const Eigen::MatrixXd& m) {
      std::ostringstream s;
      s << header;
      io::write_csv(s, m);
      io::write_text((std::filesystem::path(out_dir) / name).string(), s.str());
    };
    write("X_train.csv", d.X_train);
    write("y_train.csv", d.y_train);
    write("X_val.csv", d.X_val);
    write("y_val.csv", d.y_val);
    write("X_test.csv", d.X_test);
    write("y_test.csv", d.y_test);
    {
      std::ostringstream s;
      s << header;
      io::write_edge_list(s, d.truth.true_graph);
      io::write_text((std::filesystem::path(out_dir) / "true_graph.edges").string(), s.str());
    }
    Json truth;
    truth["config"] = config;
    truth["beta_star"] = detail::vector_json(d.truth.beta_star);
    truth["s_star"] = d.truth.s_star;
    truth["sigma"] = d.truth.sigma;
    truth["true_graph"] = detail::edges_json(d.truth.true_graph);
    io::write_text((std::filesystem::path(out_dir) / "truth.json").string(), truth.dump(2) + "\n");
    out_stream << "wrote " << out_dir << "/{X,y}_{train,val,test}.csv, true_graph.edges, truth.json\n";
    return ok;
  }
};

struct BenchCommand {
  ScenarioFlags flags;
  BenchmarkConfig cfg{};
  std::vector<std::string> methods{"GSRE", "GSRE-o", "SRIG", "SRIG-o", "SRL"};
  std::string select = "hbic";
  std::string graph_samples = "all";
  std::string rho_rule = "response-scaled";
  std::string out;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("bench", "replicated simulation benchmark; prints a mean(sd) table");
    add_scenario_flags(*cmd, flags);
    cmd->add_option("--reps", cfg.reps, "replications")->capture_default_str();
    cmd->add_option("--methods", methods, "GSRE, GSRE-o, SRIG, SRIG-o, SRL")->delimiter(',')->capture_default_str();
    cmd->add_option("--select.method", select, "hbic or validation")
        ->check(CLI::IsMember({"hbic", "validation"}))
        ->capture_default_str();
    cmd->add_option("--admm.rho", cfg.admm.rho, "square-root loss rho (before response scaling)")
        ->capture_default_str();
    cmd->add_option("--admm.rho-ls", cfg.rho_least_squares, "least-squares rho (before response scaling)")
        ->capture_default_str();
    cmd->add_option("--admm.rho-rule", rho_rule, "fixed, or response-scaled: divide rho by ||y||/sqrt(n) per power of y")
        ->check(CLI::IsMember({"fixed", "response-scaled"}))
        ->capture_default_str();
    cmd->add_option("--admm.max-iter", cfg.admm.max_iter, "iteration cap")->capture_default_str();
    cmd->add_option("--grid.max-exp", cfg.grid.max_exp, "largest exponent")->capture_default_str();
    cmd->add_option("--grid.min-exp", cfg.grid.min_exp, "smallest exponent")->capture_default_str();
    cmd->add_option("--grid.step", cfg.grid.step, "exponent step")->capture_default_str();
    cmd->add_option("--eta", cfg.eta, "node weights tau_i = d_i^eta")->capture_default_str();
    cmd->add_option("--graph.samples", graph_samples, "rows used for graph estimation: train, train-val or all")
        ->check(CLI::IsMember({"train", "train-val", "all"}))
        ->capture_default_str();
    cmd->add_option("--graph.penalty", cfg.graph_penalty, "glasso penalty")->capture_default_str();
    cmd->add_option("--threads", cfg.threads, "worker threads across replications")->capture_default_str();
    cmd->add_option("--out", out, "CSV table output (method,metric,mean,sd,count)");
  }

  BenchmarkConfig config() const {
    BenchmarkConfig c = cfg;
    c.scenario = scenario_of(flags);
    c.methods.clear();
    for (const auto& m : methods) c.methods.push_back(parse_method(m));
    c.selection = select == "validation" ? SelectionMethod::validation : SelectionMethod::hbic;
    c.graph_samples = parse_graph_samples(graph_samples);
    c.rho_rule = rho_rule == "fixed" ? RhoRule::fixed : RhoRule::response_scaled;
    c.validate();
    return c;
  }

  int run(std::ostream& out_stream) const {
    const BenchmarkConfig c = config();
    const BenchmarkResult res = run_benchmark(c);

    Json config;
    config["command"] = "bench";
    config.update(scenario_config(c.scenario));
    config["reps"] = c.reps;
    config["methods"] = methods;
    config["select.method"] = select;
    config["admm.rho"] = c.admm.rho;
    config["admm.rho-ls"] = c.rho_least_squares;
    config["admm.rho-rule"] = rho_rule;
    config["admm.max-iter"] = c.admm.max_iter;
    config["grid.max-exp"] = c.grid.max_exp;
    config["grid.min-exp"] = c.grid.min_exp;
    config["grid.step"] = c.grid.step;
    config["eta"] = c.eta;
    config["graph.samples"] = graph_samples;
    config["graph.penalty"] = c.graph_penalty;
    config["failed_replications"] = res.failed_replications;

    int max_iter_fits = 0;
    for (const auto& r : res.replications)
      for (const auto& o : r.outcomes) max_iter_fits += o.max_iter_fits;
    config["max_iter_fits"] = max_iter_fits;

    const auto fmt = [](double mean, double sd) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.3f(%.3f)", mean, sd);
      return std::string(buf);
    };
    std::ostringstream table;
    table << detail::comment_block(config);
    table << std::left << std::setw(8) << "method" << std::right;
    for (const char* h : {"L2", "RPE", "FPR", "FNR", "MCC"}) table << std::setw(16) << h;
    table << std::setw(6) << "n" << '\n';
    for (const auto& s : res.summary) {
      table << std::left << std::setw(8) << to_string(s.method) << std::right;
      table << std::setw(16) << fmt(s.mean.l2_distance, s.sd.l2_distance) << std::setw(16) << fmt(s.mean.rpe, s.sd.rpe)
            << std::setw(16) << fmt(s.mean.fpr, s.sd.fpr) << std::setw(16) << fmt(s.mean.fnr, s.sd.fnr)
            << std::setw(16) << fmt(s.mean.mcc, s.sd.mcc) << std::setw(6) << s.count << '\n';
    }
    out_stream << table.str();

    if (!out.empty()) {
      std::ostringstream csv;
      csv << detail::comment_block(config);
      csv << "method,metric,mean,sd,count\n";
      for (const auto& s : res.summary) {
        const std::pair<const char*, double MetricsRow::*> cols[] = {{"l2", &MetricsRow::l2_distance},
                                                                     {"rpe", &MetricsRow::rpe},
                                                                     {"fpr", &MetricsRow::fpr},
                                                                     {"fnr", &MetricsRow::fnr},
                                                                     {"mcc", &MetricsRow::mcc}};
        for (const auto& [name, field] : cols)
          csv << to_string(s.method) << ',' << name << ',' << io::format_number(s.mean.*field) << ','
              << io::format_number(s.sd.*field) << ',' << s.count << '\n';
      }
      io::write_text(out, csv.str());
    }
    return max_iter_fits > 0 ? not_converged : ok;
  }
};

/**
 * Exit codes: 0 success (every fit converged), 2 some fit stopped at the
 * iteration cap, 1 bad input or any other error.
 */
inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph-structured square-root estimation"};
  app.name("gsre");
  app.require_subcommand(1);
  FitCommand fit_cmd;
  PathCommand path_cmd;
  GraphCommand graph_cmd;
  SimulateCommand sim_cmd;
  BenchCommand bench_cmd;
  fit_cmd.attach(app);
  path_cmd.attach(app);
  graph_cmd.attach(app);
  sim_cmd.attach(app);
  bench_cmd.attach(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? ok : input_error;
  }

  try {
    if (app.got_subcommand("fit")) return fit_cmd.run(out);
    if (app.got_subcommand("path")) return path_cmd.run(out);
    if (app.got_subcommand("graph")) return graph_cmd.run(out);
    if (app.got_subcommand("simulate")) return sim_cmd.run(out);
    if (app.got_subcommand("bench")) return bench_cmd.run(out);
  } catch (const MaxIterationsExceeded& e) {
    err << "error: " << e.what() << '\n';
    return not_converged;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return input_error;
  }
  return input_error;
}

}  // namespace gsre::cli
