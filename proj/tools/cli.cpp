#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "ecb/calibration.hpp"
#include "ecb/error.hpp"
#include "ecb/influence.hpp"
#include "ecb/methods.hpp"
#include "ecb/serialize.hpp"
#include "ecb/simulation.hpp"

namespace ecb::cli {

namespace fs = std::filesystem;

namespace {

struct DataArgs {
  std::string data;
  std::string schema;
  bool standardize = false;
  std::string outcome_model = "identity";
  std::string e1 = "known";
  std::optional<double> e1_value;
  double clip = 0.01;
};

struct EstimateArgs {
  std::string method = "aib";
  std::optional<Index> grid_step;
  std::optional<double> lambda;
  double nu = 2.0;
  bool smooth = false;
};

struct Common {
  std::string out_dir = ".";
  int jobs = 1;
  std::uint64_t seed = 1;
};

struct GenerateArgs {
  std::string mechanism = "linear";
  std::vector<double> deltas{0.0};
  Index d = 8, n_rct = 300, n_treated = 200, n_ec = 1000;
  std::uint64_t beta_seed = 2024;
};

struct SimulateArgs {
  Index reps = 200;
  std::vector<std::string> methods{"nb", "fb", "fcb", "alb", "aib", "acib"};
  Index truth_draws = 100000;
  std::optional<double> tau_true;
};

struct SweepArgs {
  std::vector<Index> points;
};

struct CalibrateArgs {
  bool dump = false;
};

/// Tracks the pipeline stage so errors can name it.
struct Stage {
  std::string name = "setup";
};

void add_data_options(CLI::App* cmd, DataArgs& a) {
  cmd->add_option("--data", a.data, "input CSV")->required()->envname("ECB_DATA");
  cmd->add_option("--schema", a.schema, "column roles, e.g. treatment=treat;outcome=re78;source=rct")
      ->envname("ECB_SCHEMA");
  cmd->add_flag("--standardize", a.standardize, "standardize non-binary covariates")->envname("ECB_STANDARDIZE");
  cmd->add_option("--outcome-model", a.outcome_model, "outcome regression link")
      ->check(CLI::IsMember({"identity", "exp"}))
      ->envname("ECB_OUTCOME_MODEL");
  cmd->add_option("--e1", a.e1, "trial propensity: known or fitted")
      ->check(CLI::IsMember({"known", "fitted"}))
      ->envname("ECB_E1");
  cmd->add_option("--e1-value", a.e1_value, "known trial propensity (default N_t / N_R)")
      ->check(CLI::Range(0.0, 1.0))
      ->envname("ECB_E1_VALUE");
  cmd->add_option("--clip", a.clip, "propensity clip level")->check(CLI::Range(0.0, 0.5))->envname("ECB_CLIP");
}

void add_estimate_options(CLI::App* cmd, EstimateArgs& a, bool with_method) {
  if (with_method) {
    cmd->add_option("--method", a.method, "nb, fb, fcb, alb, aib or acib")->envname("ECB_METHOD");
  }
  cmd->add_option("--grid-step", a.grid_step, "k grid step (default max(1, N_E / 20))")
      ->check(CLI::PositiveNumber)
      ->envname("ECB_GRID_STEP");
  cmd->add_option("--lambda", a.lambda, "bias ridge weight (fcb, acib) or lasso weight (alb)")
      ->check(CLI::NonNegativeNumber)
      ->envname("ECB_LAMBDA");
  cmd->add_option("--nu", a.nu, "adaptive lasso exponent")->check(CLI::NonNegativeNumber)->envname("ECB_NU");
  cmd->add_flag("--smooth", a.smooth, "smooth the MSE curve before the argmin")->envname("ECB_SMOOTH");
}

void add_common_options(CLI::App* cmd, Common& c) {
  cmd->add_option("--out-dir", c.out_dir, "output directory")->envname("ECB_OUT_DIR");
  cmd->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber)->envname("ECB_JOBS");
  cmd->add_option("--seed", c.seed, "random seed")->envname("ECB_SEED");
}

void add_dgp_options(CLI::App* cmd, GenerateArgs& g) {
  cmd->add_option("--mechanism", g.mechanism, "linear or nonlinear")->envname("ECB_MECHANISM");
  cmd->add_option("--delta", g.deltas, "inconcurrency bias (several values sweep)")
      ->delimiter(',')
      ->envname("ECB_DELTA");
  cmd->add_option("--d", g.d, "covariate dimension")->envname("ECB_D");
  cmd->add_option("--n-rct", g.n_rct, "trial size")->envname("ECB_N_RCT");
  cmd->add_option("--n-treated", g.n_treated, "treated trial rows")->envname("ECB_N_TREATED");
  cmd->add_option("--n-ec", g.n_ec, "external controls")->envname("ECB_N_EC");
  cmd->add_option("--beta-seed", g.beta_seed, "seed of the outcome coefficients")->envname("ECB_BETA_SEED");
}

ModelOptions model_options(const DataArgs& a) {
  ModelOptions m;
  m.link = a.outcome_model == "exp" ? OutcomeLink::kExp : OutcomeLink::kIdentity;
  m.e1_mode = a.e1 == "fitted" ? PropensityMode::kFitted : PropensityMode::kKnown;
  m.e1_known = a.e1_value;
  m.clip = a.clip;
  return m;
}

MethodOptions method_options(const DataArgs& d, const EstimateArgs& e, const Common& c, Method method) {
  MethodOptions m;
  m.model = model_options(d);
  m.grid_step = e.grid_step;
  if (method == Method::kAlb) {
    if (e.lambda) m.alb_lambdas = std::vector<double>{*e.lambda};
  } else {
    m.bias_lambda = e.lambda;
  }
  m.alb_nu = e.nu;
  m.jobs = c.jobs;
  m.smooth_argmin = e.smooth;
  return m;
}

Json data_config(const DataArgs& a) {
  Json j{{"data", a.data},       {"schema", a.schema}, {"standardize", a.standardize},
         {"outcome_model", a.outcome_model}, {"e1", a.e1}, {"clip", a.clip}};
  j["e1_value"] = a.e1_value ? Json(*a.e1_value) : Json(nullptr);
  return j;
}

Json estimate_config(const EstimateArgs& e) {
  Json j{{"method", e.method}, {"nu", e.nu}, {"smooth", e.smooth}};
  j["grid_step"] = e.grid_step ? Json(*e.grid_step) : Json(nullptr);
  j["lambda"] = e.lambda ? Json(*e.lambda) : Json(nullptr);
  return j;
}

/// Loads, optionally standardizes, and records the input for the manifest.
Dataset load_input(const DataArgs& a, const fs::path& out_dir, Manifest& manifest, Stage& stage) {
  stage.name = "load";
  const Schema schema = a.schema.empty() ? Schema{} : Schema::parse(a.schema);
  Dataset ds = load_csv(a.data, schema);
  manifest.config["data_fingerprint"] = hex64(ds.fingerprint());
  if (!a.standardize) return ds;
  stage.name = "standardize";
  const IndexList cols = continuous_columns(ds);
  Standardized st = standardize(ds, cols);
  Json scaling = Json::array();
  for (const auto& s : st.scaling) scaling.push_back(to_json(s));
  write_json(out_dir / "scaling.json", scaling);
  manifest.outputs.push_back("scaling.json");
  return std::move(st.data);
}

void finish(const fs::path& out_dir, Manifest& manifest) {
  manifest.outputs.push_back("manifest.json");
  write_json(out_dir / "manifest.json", manifest.to_json());
}

int cmd_estimate(const DataArgs& d, const EstimateArgs& e, const Common& c, std::ostream& out, Stage& stage) {
  const Method method = parse_method(e.method);
  const fs::path dir = c.out_dir;
  Manifest manifest{"estimate", Json{{"data", data_config(d)}, {"estimate", estimate_config(e)}}, {}, {}};
  const Dataset ds = load_input(d, dir, manifest, stage);
  stage.name = "estimate " + to_string(method);
  const MethodOutcome result = run_method(method, ds, method_options(d, e, c, method));

  stage.name = "write";
  Json j = to_json(result.report);
  if (result.borrow) j["borrow"] = to_json(*result.borrow);
  if (result.alb) j["alb"] = Json{{"lambda", result.alb->lambda}, {"nu", result.alb->nu},
                                  {"borrowed", result.alb->borrowed}};
  const std::string file = "estimate_" + to_string(method) + ".json";
  write_json(dir / file, j);
  manifest.outputs.push_back(file);
  finish(dir, manifest);
  out << to_string(method) << ": tau_hat=" << format_double(result.report.tau_hat)
      << " se=" << format_double(result.report.se_hat) << " k=" << result.report.k_borrowed << "\n";
  return kExitOk;
}

int cmd_sweep(const DataArgs& d, const EstimateArgs& e, const SweepArgs& s, const Common& c, std::ostream& out,
              Stage& stage) {
  const Method method = parse_method(e.method);
  if (method != Method::kAib && method != Method::kAcib) throw DataError("sweep supports aib and acib only");
  const fs::path dir = c.out_dir;
  Json cfg{{"data", data_config(d)}, {"estimate", estimate_config(e)}, {"points", s.points}};
  Manifest manifest{"sweep", cfg, {}, {}};
  const Dataset ds = load_input(d, dir, manifest, stage);
  stage.name = "grid";
  const MethodOptions opts = method_options(d, e, c, method);
  const Index n_ec = split(ds).n_ec();
  const KGrid grid = s.points.empty() ? grid_for(ds, opts) : KGrid::from_points(s.points, n_ec);
  stage.name = "sweep " + to_string(method);
  const ScanOptions scan_opts{opts.model, opts.jobs, opts.smooth_argmin};
  const BorrowResult r = method == Method::kAib ? aib(ds, grid, scan_opts) : acib(ds, opts.bias_lambda, grid, scan_opts);

  stage.name = "write";
  write_text(dir / "mse_curve.csv", mse_curve_csv(r));
  write_json(dir / "sweep.json", to_json(r));
  manifest.outputs = {"mse_curve.csv", "sweep.json"};
  finish(dir, manifest);
  out << to_string(method) << " sweep: " << r.grid.size() << " points, k_hat=" << r.k_hat
      << " tau_hat=" << format_double(r.final.tau_hat) << "\n";
  return kExitOk;
}

int cmd_calibrate(const DataArgs& d, const EstimateArgs& e, const CalibrateArgs& a, const Common& c,
                  std::ostream& out, Stage& stage) {
  const fs::path dir = c.out_dir;
  Manifest manifest{"calibrate", Json{{"data", data_config(d)}, {"estimate", estimate_config(e)}, {"dump", a.dump}},
                    {}, {}};
  const Dataset ds = load_input(d, dir, manifest, stage);
  stage.name = "calibrate";
  const ModelOptions model = model_options(d);
  const BiasFit fit = fit_bias(ds, e.lambda, model);
  const CalibratedEcs cal = calibrate(ds, fit);
  const CalibrationDistance dist = calibration_distance(ds, cal, model);

  stage.name = "write";
  Json j = to_json(fit);
  j["distance"] = Json{{"raw", dist.raw}, {"calibrated", dist.calibrated}};
  write_json(dir / "calibration.json", j);
  manifest.outputs.push_back("calibration.json");
  if (a.dump) {
    std::string csv = "ec_index,y,b_hat,y_tilde\n";
    for (std::size_t j = 0; j < cal.ec_indices.size(); ++j) {
      const Index row = cal.ec_indices[j];
      const auto jj = static_cast<Index>(j);
      csv += std::to_string(row) + "," + format_double(ds.outcome()(row)) + "," + format_double(cal.bias_at_ec(jj)) +
             "," + format_double(cal.y_tilde(jj)) + "\n";
    }
    write_text(dir / "calibration_dump.csv", csv);
    manifest.outputs.push_back("calibration_dump.csv");
  }
  finish(dir, manifest);
  out << "calibrate: lambda=" << format_double(fit.lambda) << " distance raw=" << format_double(dist.raw)
      << " calibrated=" << format_double(dist.calibrated) << "\n";
  return kExitOk;
}

int cmd_influence(const DataArgs& d, const Common& c, std::ostream& out, Stage& stage) {
  const fs::path dir = c.out_dir;
  Manifest manifest{"influence", Json{{"data", data_config(d)}}, {}, {}};
  const Dataset ds = load_input(d, dir, manifest, stage);
  stage.name = "influence";
  const DataSplit sp = split(ds);
  const LinearFit mu0 = fit_outcome(ds, sp.rct_control, model_options(d));
  const InfluenceRanking ranking = rank_and_nest(ds, sp, mu0);

  stage.name = "write";
  const std::vector<Index> ranks = ranking.ranks();
  std::string csv = "row,score,rank\n";
  for (std::size_t i = 0; i < ranking.ec_rows.size(); ++i) {
    csv += std::to_string(ranking.ec_rows[i]) + "," + format_double(ranking.scores[i]) + "," +
           std::to_string(ranks[i]) + "\n";
  }
  write_text(dir / "influence.csv", csv);
  manifest.outputs.push_back("influence.csv");
  finish(dir, manifest);
  out << "influence: " << ranking.size() << " external controls scored\n";
  return kExitOk;
}

DgpConfig dgp_config(const GenerateArgs& g, double delta, std::uint64_t seed) {
  DgpConfig cfg;
  cfg.mechanism = parse_mechanism(g.mechanism);
  cfg.d = g.d;
  cfg.n_rct = g.n_rct;
  cfg.n_treated = g.n_treated;
  cfg.n_ec = g.n_ec;
  cfg.delta = delta;
  cfg.seed = seed;
  cfg.beta_seed = g.beta_seed;
  cfg.validate();
  return cfg;
}

int cmd_generate(const GenerateArgs& g, const Common& c, std::ostream& out, Stage& stage) {
  if (g.deltas.size() != 1) throw DataError("generate takes a single --delta");
  stage.name = "generate";
  const DgpConfig cfg = dgp_config(g, g.deltas.front(), c.seed);
  const Dataset ds = generate(cfg);
  const fs::path dir = c.out_dir;
  write_csv(dir / "data.csv", ds);
  Manifest manifest{"generate", to_json(cfg), {cfg.seed, cfg.beta_seed}, {"data.csv"}};
  finish(dir, manifest);
  out << "generate: " << ds.rows() << " rows (" << cfg.n_rct << " trial, " << cfg.n_ec << " external)\n";
  return kExitOk;
}

int cmd_simulate(const GenerateArgs& g, const EstimateArgs& e, const SimulateArgs& s, const Common& c,
                 std::ostream& out, Stage& stage) {
  stage.name = "simulate";
  if (g.deltas.empty()) throw DataError("simulate needs at least one --delta");
  std::vector<Method> methods;
  for (const auto& m : s.methods) methods.push_back(parse_method(m));
  const bool sweep = g.deltas.size() > 1;
  std::string csv;
  Json cfgs = Json::array();
  for (std::size_t i = 0; i < g.deltas.size(); ++i) {
    const DgpConfig cfg = dgp_config(g, g.deltas[i], c.seed);
    ReplicationOptions ro;
    ro.methods = default_method_options(cfg);
    ro.methods.grid_step = e.grid_step;
    ro.methods.bias_lambda = e.lambda;
    ro.methods.alb_nu = e.nu;
    ro.methods.smooth_argmin = e.smooth;
    ro.jobs = c.jobs;
    ro.truth_draws = s.truth_draws;
    ro.tau_true = s.tau_true;
    const auto reports = replicate(cfg, methods, s.reps, ro);
    csv += replication_csv(reports, sweep ? std::optional<double>(cfg.delta) : std::nullopt, i == 0);
    cfgs.push_back(to_json(cfg));
    if (!sweep) {
      for (const auto& r : reports) {
        out << r.method << ": est=" << format_double(r.est_mean) << " mse=" << format_double(r.mse_empirical)
            << " n_ecs=" << r.n_ecs_modal << "\n";
      }
    }
  }
  const fs::path dir = c.out_dir;
  write_text(dir / "simulation.csv", csv);
  Json cfg{{"dgp", cfgs}, {"estimate", estimate_config(e)}, {"reps", s.reps}, {"methods", s.methods},
           {"truth_draws", s.truth_draws}};
  cfg["tau_true"] = s.tau_true ? Json(*s.tau_true) : Json(nullptr);
  Manifest manifest{"simulate", cfg, {c.seed, g.beta_seed}, {"simulation.csv"}};
  finish(dir, manifest);
  out << "simulate: " << s.reps << " replications x " << g.deltas.size() << " delta value(s) -> "
      << (dir / "simulation.csv").string() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adaptive borrowing of external controls for trial ATE estimation", "ecb"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  DataArgs data;
  EstimateArgs est;
  Common common;
  GenerateArgs gen;
  SimulateArgs sim;
  SweepArgs sweep;
  CalibrateArgs cal;

  auto* estimate = app.add_subcommand("estimate", "estimate the ATE with one method");
  add_data_options(estimate, data);
  add_estimate_options(estimate, est, true);
  add_common_options(estimate, common);

  auto* sweep_cmd = app.add_subcommand("sweep", "MSE curve over the k grid");
  add_data_options(sweep_cmd, data);
  add_estimate_options(sweep_cmd, est, true);
  add_common_options(sweep_cmd, common);
  sweep_cmd->add_option("--points", sweep.points, "explicit grid points, e.g. 0,100,1000")->delimiter(',');

  auto* calibrate_cmd = app.add_subcommand("calibrate", "fit the bias function and calibrate EC outcomes");
  add_data_options(calibrate_cmd, data);
  add_estimate_options(calibrate_cmd, est, false);
  add_common_options(calibrate_cmd, common);
  calibrate_cmd->add_flag("--dump", cal.dump, "also write the calibrated dataset");

  auto* influence_cmd = app.add_subcommand("influence", "influence scores of every external control");
  add_data_options(influence_cmd, data);
  add_common_options(influence_cmd, common);

  auto* generate_cmd = app.add_subcommand("generate", "write one synthetic dataset");
  add_dgp_options(generate_cmd, gen);
  add_common_options(generate_cmd, common);

  auto* simulate_cmd = app.add_subcommand("simulate", "replicated simulation study");
  add_dgp_options(simulate_cmd, gen);
  add_estimate_options(simulate_cmd, est, false);
  add_common_options(simulate_cmd, common);
  simulate_cmd->add_option("--reps", sim.reps, "replications")->check(CLI::PositiveNumber)->envname("ECB_REPS");
  simulate_cmd->add_option("--methods", sim.methods, "methods to run")->delimiter(',')->envname("ECB_METHODS");
  simulate_cmd->add_option("--truth-draws", sim.truth_draws, "Monte Carlo rows for the true ATE")
      ->check(CLI::PositiveNumber);
  simulate_cmd->add_option("--tau-true", sim.tau_true, "use this true ATE instead of Monte Carlo");

  std::vector<char*> argv;
  std::vector<std::string> storage(args);
  for (auto& a : storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  Stage stage;
  try {
    if (*estimate) return cmd_estimate(data, est, common, out, stage);
    if (*sweep_cmd) return cmd_sweep(data, est, sweep, common, out, stage);
    if (*calibrate_cmd) return cmd_calibrate(data, est, cal, common, out, stage);
    if (*influence_cmd) return cmd_influence(data, common, out, stage);
    if (*generate_cmd) return cmd_generate(gen, common, out, stage);
    if (*simulate_cmd) return cmd_simulate(gen, est, sim, common, out, stage);
  } catch (const DataError& e) {
    err << "error [" << stage.name << "]: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NumericalError& e) {
    err << "numerical error [" << stage.name << "]: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    err << "error [" << stage.name << "]: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace ecb::cli
