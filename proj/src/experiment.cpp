#include "ldkgp/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "ldkgp/predictor.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace ldkgp {

json simulation_to_json(const SimulationSpec& spec) {
  json j;
  j["individuals"] = spec.individuals;
  j["observations"] = spec.observations;
  j["covariates"] = spec.covariates;
  j["base_dim"] = spec.base_dim;
  j["clusters"] = spec.clusters;
  j["ar_decay"] = spec.ar_decay;
  j["residual_scale"] = spec.residual_scale;
  j["signal_scale"] = spec.signal_scale;
  j["seed"] = spec.seed;
  return j;
}

SimulationSpec simulation_from_json(const json& j) {
  SimulationSpec spec;
  try {
    spec.individuals = j.value("individuals", spec.individuals);
    spec.observations = j.value("observations", spec.observations);
    spec.covariates = j.value("covariates", spec.covariates);
    spec.base_dim = j.value("base_dim", spec.base_dim);
    spec.clusters = j.value("clusters", spec.clusters);
    spec.ar_decay = j.value("ar_decay", spec.ar_decay);
    spec.residual_scale = j.value("residual_scale", spec.residual_scale);
    spec.signal_scale = j.value("signal_scale", spec.signal_scale);
    spec.seed = j.value("seed", spec.seed);
  } catch (const json::exception& e) {
    throw InvalidSpec(std::string("bad simulation spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

json experiment_to_json(const ExperimentConfig& cfg) {
  json j;
  if (cfg.dataset.csv_path) {
    j["dataset"]["csv"] = *cfg.dataset.csv_path;
    json schema = json::object();
    for (const auto& [name, kind] : cfg.dataset.schema.kinds)
      schema[name] = kind == ColumnKind::Categorical ? "categorical" : "continuous";
    j["dataset"]["schema"] = std::move(schema);
  }
  if (cfg.dataset.simulation)
    j["dataset"]["simulation"] = simulation_to_json(*cfg.dataset.simulation);
  j["train"] = config_to_json(cfg.train);
  j["split_seed"] = cfg.split_seed;
  j["fractions"] = cfg.fractions;
  j["repetitions"] = cfg.repetitions;
  j["output_dir"] = cfg.output_dir;
  return j;
}

ExperimentConfig experiment_from_json(const json& j) {
  ExperimentConfig cfg;
  try {
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      if (d.contains("csv")) {
        cfg.dataset.csv_path = d.at("csv").get<std::string>();
        if (d.contains("schema")) {
          for (const auto& [name, kind] : d.at("schema").items()) {
            const std::string k = kind.get<std::string>();
            if (k != "continuous" && k != "categorical")
              throw InvalidConfig("schema kind must be continuous or categorical");
            cfg.dataset.schema.kinds[name] =
                k == "categorical" ? ColumnKind::Categorical : ColumnKind::Continuous;
          }
        }
      }
      if (d.contains("simulation"))
        cfg.dataset.simulation = simulation_from_json(d.at("simulation"));
    }
    if (!cfg.dataset.csv_path && !cfg.dataset.simulation)
      throw InvalidConfig("config needs dataset.csv or dataset.simulation");
    if (cfg.dataset.csv_path && cfg.dataset.simulation)
      throw InvalidConfig("dataset.csv and dataset.simulation are exclusive");
    if (j.contains("train")) cfg.train = config_from_json(j.at("train"));
    cfg.split_seed = j.value("split_seed", cfg.split_seed);
    if (j.contains("fractions")) {
      auto f = j.at("fractions").get<std::vector<double>>();
      if (f.size() != 3) throw InvalidFractions("fractions must have 3 entries");
      cfg.fractions = {f[0], f[1], f[2]};
    }
    cfg.repetitions = j.value("repetitions", cfg.repetitions);
    if (cfg.repetitions < 1) throw InvalidConfig("repetitions must be >= 1");
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("bad experiment config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open config '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidConfig("config '" + path + "': " + e.what());
  }
  return experiment_from_json(j);
}

std::string config_hash(const json& j) {
  const std::string s = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

LongitudinalDataset resolve_dataset(const DatasetSource& source) {
  if (source.csv_path) return load_csv(*source.csv_path, source.schema);
  if (source.simulation) return generate(*source.simulation).data;
  throw InvalidConfig("no dataset source");
}

FitOutcome run_fit_once(const ExperimentConfig& cfg, std::uint64_t seed_shift) {
  ExperimentConfig run_cfg = cfg;
  run_cfg.train.seed = cfg.train.seed + seed_shift;
  LongitudinalDataset raw = resolve_dataset(run_cfg.dataset);

  std::mt19937_64 split_rng(cfg.split_seed + seed_shift);
  const SplitResult parts = split(raw, run_cfg.fractions, split_rng);
  if (parts.valid.empty() || parts.test.empty())
    throw DataError("split produced an empty validation or test set");

  LongitudinalDataset train_raw = raw.subset(parts.train);
  const PreprocessSpec spec = fit_preprocess(train_raw);
  LongitudinalDataset tr = apply_preprocess(spec, train_raw);
  LongitudinalDataset va = apply_preprocess(spec, raw.subset(parts.valid));
  LongitudinalDataset te = apply_preprocess(spec, raw.subset(parts.test));

  FitOutcome out;
  out.training = train(run_cfg.train, tr, va);
  out.checkpoint.state = out.training.state;
  out.checkpoint.preprocess = spec;
  out.checkpoint.id_labels = raw.id_labels;
  out.train_r2 = r_squared(predict_mean(out.training.state, tr), tr.outcome);
  out.valid_r2 = r_squared(predict_mean(out.training.state, va), va.outcome);
  out.test_r2 = r_squared(predict_mean(out.training.state, te), te.outcome);
  return out;
}

void write_pgm_heatmap(const Matrix& values, const std::string& path,
                       const std::string& comment) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << "P5\n";
  if (!comment.empty()) out << "# " << comment << "\n";
  out << values.cols() << " " << values.rows() << "\n255\n";
  for (Index r = 0; r < values.rows(); ++r) {
    for (Index c = 0; c < values.cols(); ++c) {
      const double v = std::clamp((values(r, c) + 1.0) * 0.5, 0.0, 1.0);
      out.put(static_cast<char>(std::lround(v * 255.0)));
    }
  }
}

namespace {

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory '" + dir + "'");
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << j.dump(1) << "\n";
}

double vector_mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double vector_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = vector_mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

double vector_median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

void cmd_simulate(const SimulationSpec& spec, const std::string& out_dir) {
  ensure_dir(out_dir);
  const SimulationResult sim = generate(spec);
  const json spec_json = simulation_to_json(spec);
  const std::string hash = config_hash(spec_json);
  save_csv(sim.data, out_dir + "/data.csv", "config_hash=" + hash);

  json truth;
  truth["config"] = spec_json;
  truth["config_hash"] = hash;
  truth["cluster_of_individual"] = sim.truth.cluster_of_individual;
  std::vector<double> f(sim.truth.signal.data(),
                        sim.truth.signal.data() + sim.truth.signal.size());
  truth["signal"] = std::move(f);
  write_json(truth, out_dir + "/truth.json");
  std::cout << "simulate: wrote " << sim.data.n_rows() << " rows to " << out_dir
            << "/data.csv\n";
}

void cmd_fit(const ExperimentConfig& cfg) {
  ensure_dir(cfg.output_dir);
  const json resolved = experiment_to_json(cfg);
  const std::string hash = config_hash(resolved);
  write_json(resolved, cfg.output_dir + "/resolved_config.json");

  const FitOutcome out = run_fit_once(cfg);
  save_checkpoint(out.checkpoint, cfg.output_dir + "/checkpoint.json");

  std::ofstream log(cfg.output_dir + "/train_log.jsonl");
  for (const auto& e : out.training.log) {
    json r;
    r["epoch"] = e.epoch;
    r["elbo"] = e.elbo;
    r["valid_r2"] = e.valid_r2;
    r["wall_ms"] = e.wall_ms;
    log << r.dump() << "\n";
  }

  json metrics;
  metrics["config_hash"] = hash;
  metrics["train_r2"] = out.train_r2;
  metrics["valid_r2"] = out.valid_r2;
  metrics["test_r2"] = out.test_r2;
  metrics["best_epoch"] = out.training.best_epoch;
  metrics["epochs_run"] = out.training.stopped_epoch;
  metrics["mean_iteration_ms"] = out.training.mean_iteration_ms;
  write_json(metrics, cfg.output_dir + "/metrics.json");
  std::cout << "fit: test_r2=" << out.test_r2 << " (best epoch " << out.training.best_epoch
            << ", " << out.training.stopped_epoch << " epochs)\n";
}

namespace {

// remap a file's dense ids onto the checkpoint's training universe by label;
// unknown individuals become id 0 (rejected or mean-embedded downstream)
void remap_to_training_ids(LongitudinalDataset& raw, const Checkpoint& ck) {
  std::map<std::string, int> train_ids;
  for (std::size_t i = 0; i < ck.id_labels.size(); ++i)
    train_ids[ck.id_labels[i]] = static_cast<int>(i) + 1;
  for (auto& id : raw.individual) {
    auto it = train_ids.find(raw.id_labels[id - 1]);
    id = it == train_ids.end() ? 0 : it->second;
  }
}

std::string checkpoint_hash(const Checkpoint& ck) {
  return config_hash(config_to_json(ck.state.config));
}

}  // namespace

void cmd_predict(const std::string& checkpoint_path, const std::string& csv_path,
                 const std::string& out_path, bool unseen_fallback) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  LongitudinalDataset raw = load_csv(csv_path);
  remap_to_training_ids(raw, ck);
  LongitudinalDataset pre = apply_preprocess(ck.preprocess, raw);
  const Vector mean = predict_mean(ck.state, pre, unseen_fallback);

  std::ofstream out(out_path);
  if (!out) throw DataError("cannot write '" + out_path + "'");
  out.precision(17);
  out << "# config_hash=" << checkpoint_hash(ck) << " checkpoint=" << checkpoint_path
      << "\n";
  out << "row,individual_id,time,prediction\n";
  for (Index r = 0; r < pre.n_rows(); ++r)
    out << r << "," << raw.id_labels[raw.individual[r] == 0 ? 0 : raw.individual[r] - 1]
        << "," << pre.time(r) << "," << mean(r) + ck.preprocess.outcome_mean << "\n";
  std::cout << "predict: wrote " << pre.n_rows() << " predictions to " << out_path << "\n";
}

void cmd_evaluate(const ExperimentConfig& cfg) {
  ensure_dir(cfg.output_dir);
  const json resolved = experiment_to_json(cfg);
  const std::string hash = config_hash(resolved);
  write_json(resolved, cfg.output_dir + "/resolved_config.json");

  std::vector<double> r2s;
  std::vector<double> iter_ms;
  json runs = json::array();
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    const FitOutcome out = run_fit_once(cfg, static_cast<std::uint64_t>(rep));
    r2s.push_back(out.test_r2);
    iter_ms.push_back(out.training.mean_iteration_ms);
    json r;
    r["repetition"] = rep;
    r["split_seed"] = cfg.split_seed + static_cast<std::uint64_t>(rep);
    r["train_seed"] = cfg.train.seed + static_cast<std::uint64_t>(rep);
    r["test_r2"] = out.test_r2;
    r["valid_r2"] = out.valid_r2;
    r["train_r2"] = out.train_r2;
    r["mean_iteration_ms"] = out.training.mean_iteration_ms;
    r["epochs_run"] = out.training.stopped_epoch;
    runs.push_back(std::move(r));
    std::cout << "evaluate: repetition " << rep << " test_r2=" << out.test_r2 << "\n";
  }
  json report;
  report["config_hash"] = hash;
  report["runs"] = std::move(runs);
  report["r2_mean"] = vector_mean(r2s);
  report["r2_std"] = vector_std(r2s);
  report["r2_median"] = vector_median(r2s);
  report["runtime_per_iteration_ms"] = vector_mean(iter_ms);
  write_json(report, cfg.output_dir + "/evaluation.json");
  std::cout << "evaluate: R2 = " << report["r2_mean"] << " +- " << report["r2_std"]
            << " over " << cfg.repetitions << " runs\n";
}

void cmd_evaluate_checkpoint(const std::string& checkpoint_path,
                             const std::string& csv_path, const std::string& out_path) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  LongitudinalDataset raw = load_csv(csv_path);
  remap_to_training_ids(raw, ck);
  LongitudinalDataset pre = apply_preprocess(ck.preprocess, raw);
  const Vector mean = predict_mean(ck.state, pre);
  const double r2 = r_squared(mean, pre.outcome);
  json report;
  report["checkpoint"] = checkpoint_path;
  report["dataset"] = csv_path;
  report["rows"] = pre.n_rows();
  report["r2"] = r2;
  write_json(report, out_path);
  std::cout << "evaluate: R2 = " << r2 << " on " << pre.n_rows() << " rows\n";
}

void cmd_sweep_inducing(const ExperimentConfig& cfg, const std::vector<Index>& grid) {
  if (grid.empty()) throw InvalidConfig("inducing-point sweep needs a nonempty grid");
  ensure_dir(cfg.output_dir);
  const json resolved = experiment_to_json(cfg);
  const std::string hash = config_hash(resolved);
  write_json(resolved, cfg.output_dir + "/resolved_config.json");
  std::ofstream out(cfg.output_dir + "/sweep_inducing.csv");
  out << "# config_hash=" << hash << "\n";
  out << "inducing_count,repetition,test_r2\n";
  for (Index m : grid) {
    ExperimentConfig c = cfg;
    c.train.inducing_count = m;
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
      const FitOutcome o = run_fit_once(c, static_cast<std::uint64_t>(rep));
      out << m << "," << rep << "," << o.test_r2 << "\n";
      std::cout << "sweep: M=" << m << " rep=" << rep << " test_r2=" << o.test_r2 << "\n";
    }
  }
}

void cmd_sweep_solver(const ExperimentConfig& cfg) {
  ensure_dir(cfg.output_dir);
  const json resolved = experiment_to_json(cfg);
  const std::string hash = config_hash(resolved);
  write_json(resolved, cfg.output_dir + "/resolved_config.json");
  std::ofstream out(cfg.output_dir + "/sweep_solver.csv");
  out << "# config_hash=" << hash << "\n";
  out << "solver,inducing_count,max_epochs,repetition,test_r2\n";
  struct Row {
    SolverKind solver;
    Index m;
    int epochs;
  };
  const Row rows[] = {
      {SolverKind::ClosedForm, 10, cfg.train.max_epochs},
      {SolverKind::Sampling, 10, cfg.train.max_epochs},
      {SolverKind::Sampling, 128, cfg.train.max_epochs * 10},
  };
  for (const auto& row : rows) {
    ExperimentConfig c = cfg;
    c.train.solver = row.solver;
    c.train.inducing_count = row.m;
    c.train.max_epochs = row.epochs;
    for (int rep = 0; rep < cfg.repetitions; ++rep) {
      const FitOutcome o = run_fit_once(c, static_cast<std::uint64_t>(rep));
      const char* name = row.solver == SolverKind::Sampling ? "sampling" : "closed-form";
      out << name << "," << row.m << "," << row.epochs << "," << rep << "," << o.test_r2
          << "\n";
      std::cout << "sweep: " << name << " M=" << row.m << " epochs=" << row.epochs
                << " rep=" << rep << " test_r2=" << o.test_r2 << "\n";
    }
  }
}

void cmd_export_correlation(const std::string& checkpoint_path,
                            const std::string& csv_path, const std::string& out_dir,
                            const std::string& truth_path, bool observation_noise) {
  ensure_dir(out_dir);
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  LongitudinalDataset raw = load_csv(csv_path);
  remap_to_training_ids(raw, ck);
  LongitudinalDataset pre = apply_preprocess(ck.preprocess, raw);
  CorrelationOptions opts;
  opts.observation_noise = observation_noise;
  const Matrix corr = correlation_matrix(ck.state, pre, opts);

  const std::string comment =
      "config_hash=" + checkpoint_hash(ck) + " checkpoint=" + checkpoint_path;
  std::ofstream out(out_dir + "/correlation.csv");
  if (!out) throw DataError("cannot write correlation CSV");
  out.precision(10);
  out << "# " << comment << "\n";
  for (Index c = 0; c < corr.cols(); ++c) out << (c ? "," : "") << "r" << (c + 1);
  out << "\n";
  for (Index r = 0; r < corr.rows(); ++r) {
    for (Index c = 0; c < corr.cols(); ++c) out << (c ? "," : "") << corr(r, c);
    out << "\n";
  }
  write_pgm_heatmap(corr, out_dir + "/correlation.pgm", comment);

  if (!truth_path.empty()) {
    std::ifstream tin(truth_path);
    if (!tin) throw DataError("cannot open truth file '" + truth_path + "'");
    json truth;
    tin >> truth;
    const auto labels = truth.at("cluster_of_individual").get<std::vector<int>>();
    double within = 0.0, between = 0.0;
    long nw = 0, nb = 0;
    for (Index a = 0; a < corr.rows(); ++a) {
      const int la = labels.at(static_cast<std::size_t>(pre.individual[a]) - 1);
      for (Index b = 0; b < corr.cols(); ++b) {
        if (a == b) continue;
        const int lb = labels.at(static_cast<std::size_t>(pre.individual[b]) - 1);
        if (la == lb) {
          within += corr(a, b);
          ++nw;
        } else {
          between += corr(a, b);
          ++nb;
        }
      }
    }
    json summary;
    summary["within_cluster_mean"] = nw ? within / nw : 0.0;
    summary["between_cluster_mean"] = nb ? between / nb : 0.0;
    summary["gap"] = (nw ? within / nw : 0.0) - (nb ? between / nb : 0.0);
    write_json(summary, out_dir + "/correlation_summary.json");
    std::cout << "export-correlation: within-between gap = " << summary["gap"] << "\n";
  }
  std::cout << "export-correlation: wrote " << corr.rows() << "x" << corr.cols()
            << " matrix to " << out_dir << "\n";
}

}  // namespace ldkgp
