#ifndef LDKGP_CHECKPOINT_HPP
#define LDKGP_CHECKPOINT_HPP

#include <string>
#include <vector>

#include "ldkgp/dataset.hpp"
#include "ldkgp/trainer.hpp"

#include <json.hpp>

namespace ldkgp {

/// Everything needed to apply a trained model to a fresh CSV: the model
/// state, the frozen preprocessing statistics, and the individual-id
/// universe of the training data.
struct Checkpoint {
  ModelState state;
  PreprocessSpec preprocess;
  std::vector<std::string> id_labels;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

nlohmann::json config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const nlohmann::json& j);

nlohmann::json preprocess_to_json(const PreprocessSpec& spec);
PreprocessSpec preprocess_from_json(const nlohmann::json& j);

}  // namespace ldkgp

#endif
