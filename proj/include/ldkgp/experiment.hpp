#ifndef LDKGP_EXPERIMENT_HPP
#define LDKGP_EXPERIMENT_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ldkgp/checkpoint.hpp"
#include "ldkgp/simulator.hpp"
#include "ldkgp/trainer.hpp"

namespace ldkgp {

struct DatasetSource {
  std::optional<std::string> csv_path;
  CsvSchema schema;
  std::optional<SimulationSpec> simulation;
};

struct ExperimentConfig {
  DatasetSource dataset;
  TrainConfig train;
  std::uint64_t split_seed = 0;
  std::array<double, 3> fractions = {0.5, 0.2, 0.3};
  int repetitions = 10;
  std::string output_dir = ".";
};

nlohmann::json simulation_to_json(const SimulationSpec& spec);
SimulationSpec simulation_from_json(const nlohmann::json& j);

nlohmann::json experiment_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);

/// FNV-1a hash of the resolved config, recorded on every emitted file.
std::string config_hash(const nlohmann::json& j);

LongitudinalDataset resolve_dataset(const DatasetSource& source);

struct FitOutcome {
  Checkpoint checkpoint;
  TrainResult training;
  double train_r2 = 0.0;
  double valid_r2 = 0.0;
  double test_r2 = 0.0;
};

/// Split / preprocess / train / score once. `seed_shift` offsets both the
/// split seed and the training seed, which is how repeated runs vary.
FitOutcome run_fit_once(const ExperimentConfig& cfg, std::uint64_t seed_shift = 0);

void write_pgm_heatmap(const Matrix& values, const std::string& path,
                       const std::string& comment);

// CLI entry points; each writes its artifacts under cfg.output_dir.
void cmd_simulate(const SimulationSpec& spec, const std::string& out_dir);
void cmd_fit(const ExperimentConfig& cfg);
void cmd_predict(const std::string& checkpoint_path, const std::string& csv_path,
                 const std::string& out_path, bool unseen_fallback);
void cmd_evaluate(const ExperimentConfig& cfg);
void cmd_evaluate_checkpoint(const std::string& checkpoint_path,
                             const std::string& csv_path, const std::string& out_path);
void cmd_sweep_inducing(const ExperimentConfig& cfg, const std::vector<Index>& grid);
void cmd_sweep_solver(const ExperimentConfig& cfg);
void cmd_export_correlation(const std::string& checkpoint_path,
                            const std::string& csv_path, const std::string& out_dir,
                            const std::string& truth_path, bool observation_noise);

}  // namespace ldkgp

#endif
