#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ldkgp/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

int threads_from_env() {
  if (const char* env = std::getenv("LDKGP_THREADS")) {
    const int t = std::atoi(env);
    if (t >= 1) return t;
  }
  return 1;
}

struct CommonFlags {
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = threads_from_env();
  bool no_time_invariant = false;
  bool no_time_varying = false;
  bool rbf_only = false;
  std::string solver;
  bool full_lq = false;

  void apply(ldkgp::ExperimentConfig& cfg) const {
    if (seed_set) {
      cfg.train.seed = seed;
      cfg.split_seed = seed;
    }
    cfg.train.threads = threads;
    if (no_time_invariant) cfg.train.use_time_invariant = false;
    if (no_time_varying) cfg.train.use_time_varying = false;
    if (rbf_only) {
      cfg.train.bypass_encoder = true;
      cfg.train.use_time_invariant = false;
    }
    if (!solver.empty()) {
      if (solver == "closed-form")
        cfg.train.solver = ldkgp::SolverKind::ClosedForm;
      else if (solver == "sampling")
        cfg.train.solver = ldkgp::SolverKind::Sampling;
      else
        throw ldkgp::InvalidConfig("--solver must be closed-form or sampling");
    }
    if (full_lq) cfg.train.lq_mode = ldkgp::LqMode::Full;
  }
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--seed", flags.seed, "override training and split seeds")
      ->each([&flags](const std::string&) { flags.seed_set = true; });
  cmd->add_option("--threads", flags.threads, "worker threads (default LDKGP_THREADS or 1)");
  cmd->add_flag("--no-time-invariant", flags.no_time_invariant,
                "drop the individual-embedding kernel component");
  cmd->add_flag("--no-time-varying", flags.no_time_varying,
                "drop the encoded-covariate kernel component");
  cmd->add_flag("--rbf-only", flags.rbf_only,
                "plain squared-exponential kernel on raw covariates");
  cmd->add_option("--solver", flags.solver, "closed-form (default) or sampling");
  cmd->add_flag("--full-lq", flags.full_lq, "full triangular posterior factor");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"longitudinal deep-kernel Gaussian process regression"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic longitudinal dataset");
  std::string sim_spec_path, sim_out = "sim_out";
  std::uint64_t sim_seed = 0;
  bool sim_seed_set = false;
  sim->add_option("--spec", sim_spec_path, "simulation spec JSON file");
  sim->add_option("--out", sim_out, "output directory");
  sim->add_option("--seed", sim_seed, "override the spec seed")
      ->each([&sim_seed_set](const std::string&) { sim_seed_set = true; });

  // fit
  auto* fit = app.add_subcommand("fit", "train a model and write a checkpoint");
  std::string fit_config;
  CommonFlags fit_flags;
  fit->add_option("--config", fit_config, "experiment config JSON")->required();
  add_common(fit, fit_flags);

  // predict
  auto* pred = app.add_subcommand("predict", "predict outcomes for a CSV file");
  std::string pred_ck, pred_csv, pred_out = "predictions.csv";
  bool pred_fallback = false;
  pred->add_option("--checkpoint", pred_ck)->required();
  pred->add_option("--data", pred_csv)->required();
  pred->add_option("--out", pred_out);
  pred->add_flag("--allow-unseen", pred_fallback,
                 "predict unseen individuals through the mean embedding");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "R^2 report over repeated runs");
  std::string eval_config, eval_ck, eval_csv, eval_out = "evaluation.json";
  CommonFlags eval_flags;
  eval->add_option("--config", eval_config, "experiment config JSON (repetition protocol)");
  eval->add_option("--checkpoint", eval_ck, "score a fixed checkpoint instead");
  eval->add_option("--data", eval_csv, "dataset for --checkpoint mode");
  eval->add_option("--out", eval_out, "report path for --checkpoint mode");
  add_common(eval, eval_flags);

  // sweep
  auto* sweep = app.add_subcommand("sweep", "inducing-point or solver sweeps");
  std::string sweep_kind, sweep_config;
  std::string sweep_grid = "5,10,20,50,100";
  CommonFlags sweep_flags;
  sweep->add_option("--kind", sweep_kind, "inducing-points | solver")->required();
  sweep->add_option("--config", sweep_config, "experiment config JSON")->required();
  sweep->add_option("--grid", sweep_grid, "comma-separated inducing-point counts")
      ->expected(0, 1);
  add_common(sweep, sweep_flags);

  // export-correlation
  auto* corr = app.add_subcommand("export-correlation",
                                  "learned outcome-correlation matrix and heatmap");
  std::string corr_ck, corr_csv, corr_out = "correlation_out", corr_truth;
  bool corr_noise = false;
  corr->add_option("--checkpoint", corr_ck)->required();
  corr->add_option("--data", corr_csv)->required();
  corr->add_option("--out", corr_out, "output directory");
  corr->add_option("--truth", corr_truth, "ground-truth sidecar for cluster summary");
  corr->add_flag("--observation-noise", corr_noise,
                 "include sigma^2 on the diagonal before normalizing");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      ldkgp::SimulationSpec spec;
      if (!sim_spec_path.empty()) {
        std::ifstream in(sim_spec_path);
        if (!in) throw ldkgp::InvalidConfig("cannot open spec '" + sim_spec_path + "'");
        nlohmann::json j;
        try {
          in >> j;
        } catch (const nlohmann::json::exception& e) {
          throw ldkgp::InvalidConfig(std::string("bad spec JSON: ") + e.what());
        }
        spec = ldkgp::simulation_from_json(j);
      }
      if (sim_seed_set) spec.seed = sim_seed;
      ldkgp::cmd_simulate(spec, sim_out);
    } else if (*fit) {
      auto cfg = ldkgp::load_experiment_config(fit_config);
      fit_flags.apply(cfg);
      ldkgp::cmd_fit(cfg);
    } else if (*pred) {
      ldkgp::cmd_predict(pred_ck, pred_csv, pred_out, pred_fallback);
    } else if (*eval) {
      if (!eval_ck.empty()) {
        if (eval_csv.empty())
          throw ldkgp::InvalidConfig("evaluate --checkpoint needs --data");
        ldkgp::cmd_evaluate_checkpoint(eval_ck, eval_csv, eval_out);
      } else if (!eval_config.empty()) {
        auto cfg = ldkgp::load_experiment_config(eval_config);
        eval_flags.apply(cfg);
        ldkgp::cmd_evaluate(cfg);
      } else {
        throw ldkgp::InvalidConfig("evaluate needs --config or --checkpoint");
      }
    } else if (*sweep) {
      auto cfg = ldkgp::load_experiment_config(sweep_config);
      sweep_flags.apply(cfg);
      if (sweep_kind == "inducing-points") {
        std::vector<ldkgp::Index> grid;
        std::stringstream ss(sweep_grid);
        std::string tok;
        while (std::getline(ss, tok, ','))
          if (!tok.empty()) grid.push_back(std::stoll(tok));
        ldkgp::cmd_sweep_inducing(cfg, grid);
      } else if (sweep_kind == "solver") {
        ldkgp::cmd_sweep_solver(cfg);
      } else {
        throw ldkgp::InvalidConfig("--kind must be inducing-points or solver");
      }
    } else if (*corr) {
      ldkgp::cmd_export_correlation(corr_ck, corr_csv, corr_out, corr_truth, corr_noise);
    }
  } catch (const ldkgp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ldkgp::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ldkgp::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
