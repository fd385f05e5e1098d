#include "ldkgp/checkpoint.hpp"

#include <fstream>

using nlohmann::json;

namespace ldkgp {

namespace {

json matrix_to_json(const Matrix& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  j["data"] = std::move(data);
  return j;
}

Matrix matrix_from_json(const json& j) {
  const Index rows = j.at("rows").get<Index>();
  const Index cols = j.at("cols").get<Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Index>(data.size()) != rows * cols)
    throw ParseError("checkpoint: matrix entry count does not match its shape");
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = data[k++];
  return m;
}

json vector_to_json(const Vector& v) { return matrix_to_json(Matrix(v)); }

Vector vector_from_json(const json& j) { return matrix_from_json(j).col(0); }

}  // namespace

json config_to_json(const TrainConfig& cfg) {
  json j;
  j["latent_dim_v"] = cfg.latent_dim_v;
  j["latent_dim_i"] = cfg.latent_dim_i;
  j["hidden_dim"] = cfg.hidden_dim;
  j["inducing_count"] = cfg.inducing_count;
  j["grad_steps"] = cfg.grad_steps;
  j["learning_rate"] = cfg.learning_rate;
  j["embedding_rate"] = cfg.embedding_rate;
  j["weight_decay"] = cfg.weight_decay;
  j["batch_size"] = cfg.batch_size;
  j["max_epochs"] = cfg.max_epochs;
  j["patience"] = cfg.patience;
  j["early_stop_tolerance"] = cfg.early_stop_tolerance;
  j["jitter"] = cfg.jitter;
  j["seed"] = cfg.seed;
  j["lq_mode"] = cfg.lq_mode == LqMode::Full ? "full" : "diagonal";
  j["ones_coupling"] = cfg.ones_coupling;
  j["solver"] = cfg.solver == SolverKind::Sampling ? "sampling" : "closed-form";
  j["mc_samples"] = cfg.mc_samples;
  j["use_time_varying"] = cfg.use_time_varying;
  j["use_time_invariant"] = cfg.use_time_invariant;
  j["bypass_encoder"] = cfg.bypass_encoder;
  j["train_dropout"] = cfg.train_dropout;
  j["threads"] = cfg.threads;
  return j;
}

TrainConfig config_from_json(const json& j) {
  TrainConfig cfg;
  try {
    cfg.latent_dim_v = j.value("latent_dim_v", cfg.latent_dim_v);
    cfg.latent_dim_i = j.value("latent_dim_i", cfg.latent_dim_i);
    cfg.hidden_dim = j.value("hidden_dim", cfg.hidden_dim);
    cfg.inducing_count = j.value("inducing_count", cfg.inducing_count);
    cfg.grad_steps = j.value("grad_steps", cfg.grad_steps);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.embedding_rate = j.value("embedding_rate", cfg.embedding_rate);
    cfg.weight_decay = j.value("weight_decay", cfg.weight_decay);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.max_epochs = j.value("max_epochs", cfg.max_epochs);
    cfg.patience = j.value("patience", cfg.patience);
    cfg.early_stop_tolerance = j.value("early_stop_tolerance", cfg.early_stop_tolerance);
    cfg.jitter = j.value("jitter", cfg.jitter);
    cfg.seed = j.value("seed", cfg.seed);
    const std::string lq = j.value("lq_mode", std::string("diagonal"));
    if (lq != "diagonal" && lq != "full")
      throw InvalidConfig("lq_mode must be 'diagonal' or 'full'");
    cfg.lq_mode = lq == "full" ? LqMode::Full : LqMode::Diagonal;
    cfg.ones_coupling = j.value("ones_coupling", cfg.ones_coupling);
    const std::string solver = j.value("solver", std::string("closed-form"));
    if (solver != "closed-form" && solver != "sampling")
      throw InvalidConfig("solver must be 'closed-form' or 'sampling'");
    cfg.solver = solver == "sampling" ? SolverKind::Sampling : SolverKind::ClosedForm;
    cfg.mc_samples = j.value("mc_samples", cfg.mc_samples);
    cfg.use_time_varying = j.value("use_time_varying", cfg.use_time_varying);
    cfg.use_time_invariant = j.value("use_time_invariant", cfg.use_time_invariant);
    cfg.bypass_encoder = j.value("bypass_encoder", cfg.bypass_encoder);
    cfg.train_dropout = j.value("train_dropout", cfg.train_dropout);
    cfg.threads = j.value("threads", cfg.threads);
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("bad train config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json preprocess_to_json(const PreprocessSpec& spec) {
  json cols = json::array();
  for (const auto& c : spec.columns) {
    json jc;
    jc["name"] = c.name;
    jc["kind"] = c.kind == ColumnKind::Continuous ? "continuous" : "categorical";
    jc["mean"] = c.mean;
    jc["std"] = c.std;
    jc["dropped"] = c.dropped;
    jc["levels"] = c.levels;
    jc["level_names"] = c.level_names;
    cols.push_back(std::move(jc));
  }
  json j;
  j["columns"] = std::move(cols);
  j["outcome_mean"] = spec.outcome_mean;
  return j;
}

PreprocessSpec preprocess_from_json(const json& j) {
  PreprocessSpec spec;
  try {
    spec.outcome_mean = j.at("outcome_mean").get<double>();
    for (const auto& jc : j.at("columns")) {
      PreprocessSpec::Column c;
      c.name = jc.at("name").get<std::string>();
      c.kind = jc.at("kind").get<std::string>() == "categorical" ? ColumnKind::Categorical
                                                                 : ColumnKind::Continuous;
      c.mean = jc.at("mean").get<double>();
      c.std = jc.at("std").get<double>();
      c.dropped = jc.at("dropped").get<bool>();
      c.levels = jc.at("levels").get<std::vector<int>>();
      c.level_names = jc.at("level_names").get<std::vector<std::string>>();
      spec.columns.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad preprocess spec: ") + e.what());
  }
  return spec;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  json j;
  j["format_version"] = 1;
  j["config"] = config_to_json(ck.state.config);
  j["alpha_v"] = ck.state.kernel.alpha_v;
  j["alpha_i"] = ck.state.kernel.alpha_i;
  j["log_sigma2"] = ck.state.noise.log_sigma2;
  j["outcome_scale"] = ck.state.outcome_scale;
  j["epoch"] = ck.state.epoch;
  j["encoder"]["w1"] = matrix_to_json(ck.state.kernel.encoder.w1);
  j["encoder"]["w2"] = matrix_to_json(ck.state.kernel.encoder.w2);
  j["encoder"]["w3"] = matrix_to_json(ck.state.kernel.encoder.w3);
  j["encoder"]["b1"] = vector_to_json(ck.state.kernel.encoder.b1);
  j["encoder"]["b2"] = vector_to_json(ck.state.kernel.encoder.b2);
  j["encoder"]["b3"] = vector_to_json(ck.state.kernel.encoder.b3);
  j["embeddings"] = matrix_to_json(ck.state.kernel.embeddings.individuals);
  j["inducing"]["z"] = matrix_to_json(ck.state.z.z);
  j["inducing"]["dim_v"] = ck.state.z.dim_v;
  j["posterior"]["mu_q"] = vector_to_json(ck.state.posterior.mu_q);
  j["posterior"]["l_q"] = matrix_to_json(ck.state.posterior.l_q);
  j["preprocess"] = preprocess_to_json(ck.preprocess);
  j["id_labels"] = ck.id_labels;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint '" + path + "'");
  out << j.dump(1) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("checkpoint '" + path + "': " + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != 1)
      throw ParseError("unsupported checkpoint version");
    Checkpoint ck;
    ck.state.config = config_from_json(j.at("config"));
    ck.state.kernel.alpha_v = j.at("alpha_v").get<double>();
    ck.state.kernel.alpha_i = j.at("alpha_i").get<double>();
    ck.state.kernel.bypass_encoder = ck.state.config.bypass_encoder;
    ck.state.noise.log_sigma2 = j.at("log_sigma2").get<double>();
    ck.state.outcome_scale = j.at("outcome_scale").get<double>();
    ck.state.epoch = j.at("epoch").get<int>();
    ck.state.kernel.encoder.w1 = matrix_from_json(j.at("encoder").at("w1"));
    ck.state.kernel.encoder.w2 = matrix_from_json(j.at("encoder").at("w2"));
    ck.state.kernel.encoder.w3 = matrix_from_json(j.at("encoder").at("w3"));
    ck.state.kernel.encoder.b1 = vector_from_json(j.at("encoder").at("b1"));
    ck.state.kernel.encoder.b2 = vector_from_json(j.at("encoder").at("b2"));
    ck.state.kernel.encoder.b3 = vector_from_json(j.at("encoder").at("b3"));
    ck.state.kernel.embeddings.individuals = matrix_from_json(j.at("embeddings"));
    ck.state.z.z = matrix_from_json(j.at("inducing").at("z"));
    ck.state.z.dim_v = j.at("inducing").at("dim_v").get<Index>();
    sync_inducing_embeddings(ck.state.kernel.embeddings, ck.state.z);
    ck.state.posterior.mu_q = vector_from_json(j.at("posterior").at("mu_q"));
    ck.state.posterior.l_q = matrix_from_json(j.at("posterior").at("l_q"));
    ck.preprocess = preprocess_from_json(j.at("preprocess"));
    ck.id_labels = j.at("id_labels").get<std::vector<std::string>>();
    return ck;
  } catch (const json::exception& e) {
    throw ParseError("checkpoint '" + path + "': " + e.what());
  }
}

}  // namespace ldkgp
