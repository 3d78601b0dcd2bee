#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedcontrol/aggregation.hpp"
#include "fedcontrol/data.hpp"
#include "fedcontrol/errors.hpp"
#include "fedcontrol/model.hpp"
#include "fedcontrol/rng.hpp"
#include "fedcontrol/trainer.hpp"

namespace fedcontrol {

// Tags under which per-purpose seeds are derived from a repetition seed,
// so no two random streams in a run ever share state.
enum class SeedDomain : std::uint64_t {
  Data = 1,
  Holdout = 2,
  Partition = 3,
  Init = 4,
  Shuffle = 5,
  Cohort = 6,
};

inline std::uint64_t derive_seed(std::uint64_t seed, SeedDomain domain) {
  return seed_mix(seed, static_cast<std::uint64_t>(domain));
}

enum class DataSource { Blobs, Idx };

inline const char* to_string(DataSource source) {
  switch (source) {
    case DataSource::Blobs: return "blobs";
    case DataSource::Idx: return "idx";
  }
  return "unknown";
}

// Where the examples come from: synthetic Gaussian clusters, or a pair of
// IDX image/label files. A stratified holdout slice is carved off for
// global evaluation before the rest is partitioned across clients.
struct DataConfig {
  DataSource source = DataSource::Blobs;
  int num_classes = 3;      // blobs only
  int per_class = 200;      // blobs only
  int input_dim = 2;        // blobs only
  double separation = 4.0;  // blobs only
  std::string images_path;  // idx only
  std::string labels_path;  // idx only
  double holdout_fraction = 0.1;

  void validate() const {
    if (source == DataSource::Blobs) {
      if (num_classes < 2) throw ConfigError("data.num_classes: must be >= 2");
      if (per_class < 1) throw ConfigError("data.per_class: must be >= 1");
      if (input_dim < 1) throw ConfigError("data.input_dim: must be >= 1");
      if (!(separation > 0.0)) throw ConfigError("data.separation: must be > 0");
    } else {
      if (images_path.empty()) throw ConfigError("data.images: required for idx source");
      if (labels_path.empty()) throw ConfigError("data.labels: required for idx source");
    }
    if (!(holdout_fraction > 0.0) || holdout_fraction >= 1.0) {
      throw ConfigError("data.holdout_fraction: must lie in (0, 1)");
    }
  }
};

// Full description of a comparative experiment: one shared setup plus the
// list of aggregation strategies to run against each other.
struct ExperimentConfig {
  int num_clients = 100;
  double participation = 1.0;
  int rounds = 30;
  int repetitions = 1;
  std::uint64_t master_seed = 0;
  double threshold = 0.6;  // accuracy level the rounds-to-threshold metric reports on
  std::string output_dir = "results";
  bool emit_plot_data = true;
  ModelKind model_kind = ModelKind::MultinomialLogistic;
  std::vector<int> hidden_dims;
  TrainerConfig trainer;
  DataConfig data;
  PartitionMode partition_mode = PartitionMode::IidBalanced;
  int labels_per_client = 2;
  std::vector<std::size_t> cardinalities;  // optional; equal split when empty
  std::vector<StrategyConfig> strategies = {StrategyConfig{}};

  void validate() const {
    if (num_clients < 1) throw ConfigError("num_clients: must be >= 1");
    if (!(participation > 0.0) || participation > 1.0) {
      throw ConfigError("participation: must lie in (0, 1]");
    }
    if (rounds < 1) throw ConfigError("rounds: must be >= 1");
    if (repetitions < 1) throw ConfigError("repetitions: must be >= 1");
    if (!(threshold > 0.0) || threshold >= 1.0) {
      throw ConfigError("threshold: must lie in (0, 1)");
    }
    if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
    if (model_kind == ModelKind::MultinomialLogistic && !hidden_dims.empty()) {
      throw ConfigError("model.hidden_dims: logistic model takes no hidden layers");
    }
    if (model_kind == ModelKind::Mlp && hidden_dims.empty()) {
      throw ConfigError("model.hidden_dims: mlp needs at least one hidden layer");
    }
    for (int h : hidden_dims) {
      if (h < 1) throw ConfigError("model.hidden_dims: layer sizes must be >= 1");
    }
    trainer.validate();
    data.validate();
    if (!cardinalities.empty() &&
        cardinalities.size() != static_cast<std::size_t>(num_clients)) {
      throw ConfigError("partition.cardinalities: need one entry per client");
    }
    if (partition_mode == PartitionMode::LabelSkew && labels_per_client < 1) {
      throw ConfigError("partition.labels_per_client: must be >= 1");
    }
    if (strategies.empty()) throw ConfigError("strategies: must not be empty");
    for (const auto& s : strategies) s.validate();
  }
};

namespace detail {

using json = nlohmann::json;

[[noreturn]] inline void config_fail(const std::string& path, const std::string& message) {
  throw ConfigError(path + ": " + message);
}

inline void reject_unknown_keys(const json& obj, const std::string& path,
                                std::initializer_list<const char*> known) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) config_fail(path.empty() ? key : path + "." + key, "unknown key");
  }
}

inline json expect_object(const json& value, const std::string& path) {
  if (!value.is_object()) config_fail(path, "expected an object");
  return value;
}

inline double get_real(const json& obj, const std::string& path, const char* key,
                       double fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number()) config_fail(path + key, "expected a number");
  return v.get<double>();
}

inline int get_int(const json& obj, const std::string& path, const char* key, int fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) config_fail(path + key, "expected an integer");
  return v.get<int>();
}

inline std::uint64_t get_u64(const json& obj, const std::string& path, const char* key,
                             std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!(v.is_number_integer() && (v.is_number_unsigned() || v.get<std::int64_t>() >= 0))) {
    config_fail(path + key, "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

inline bool get_bool(const json& obj, const std::string& path, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_boolean()) config_fail(path + key, "expected a boolean");
  return v.get<bool>();
}

inline std::string get_string(const json& obj, const std::string& path, const char* key,
                              const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_string()) config_fail(path + key, "expected a string");
  return v.get<std::string>();
}

inline StrategyConfig parse_strategy(const json& obj, const std::string& path) {
  expect_object(obj, path);
  const std::string kind = get_string(obj, path + ".", "kind", "");
  StrategyConfig strategy;
  if (kind == "fedavg") {
    reject_unknown_keys(obj, path, {"kind"});
    strategy.kind = StrategyKind::FedAvg;
    strategy.alpha = 1.0;
    strategy.beta = 0.0;
  } else if (kind == "fedcostwavg") {
    reject_unknown_keys(obj, path, {"kind", "alpha", "beta"});
    strategy.kind = StrategyKind::FedCostWAvg;
    strategy.alpha = get_real(obj, path + ".", "alpha", 1.0 / 3.0);
    strategy.beta = 1.0 - strategy.alpha;
    if (obj.contains("beta")) {
      const double beta = get_real(obj, path + ".", "beta", 0.0);
      if (std::abs(strategy.alpha + beta - 1.0) > 1e-12) {
        config_fail(path + ".beta",
                    "fedcostwavg requires alpha + beta = 1; omit beta to derive it");
      }
    }
  } else if (kind == "fedcontrol") {
    reject_unknown_keys(obj, path, {"kind", "alpha", "beta", "lambda"});
    strategy.kind = StrategyKind::FedControl;
    strategy.alpha = get_real(obj, path + ".", "alpha", 1.0 / 3.0);
    strategy.beta = get_real(obj, path + ".", "beta", 1.0 / 3.0);
    strategy.lambda = get_real(obj, path + ".", "lambda", 1.0);
  } else {
    config_fail(path + ".kind", "expected one of fedavg, fedcostwavg, fedcontrol");
  }
  strategy.validate();
  return strategy;
}

}  // namespace detail

// Builds a validated ExperimentConfig from parsed JSON. Unknown keys are
// rejected at every level; every diagnostic names the offending field.
inline ExperimentConfig config_from_json(const nlohmann::json& root) {
  using detail::config_fail;
  using detail::expect_object;
  detail::expect_object(root, "config");
  detail::reject_unknown_keys(root, "",
                              {"num_clients", "participation", "rounds", "repetitions",
                               "master_seed", "threshold", "output_dir", "emit_plot_data",
                               "model", "trainer", "data", "partition", "strategies"});

  ExperimentConfig cfg;
  cfg.num_clients = detail::get_int(root, "", "num_clients", cfg.num_clients);
  cfg.participation = detail::get_real(root, "", "participation", cfg.participation);
  cfg.rounds = detail::get_int(root, "", "rounds", cfg.rounds);
  cfg.repetitions = detail::get_int(root, "", "repetitions", cfg.repetitions);
  cfg.master_seed = detail::get_u64(root, "", "master_seed", cfg.master_seed);
  cfg.threshold = detail::get_real(root, "", "threshold", cfg.threshold);
  cfg.output_dir = detail::get_string(root, "", "output_dir", cfg.output_dir);
  cfg.emit_plot_data = detail::get_bool(root, "", "emit_plot_data", cfg.emit_plot_data);

  if (root.contains("model")) {
    const auto& model = expect_object(root.at("model"), "model");
    detail::reject_unknown_keys(model, "model", {"kind", "hidden_dims"});
    const std::string kind = detail::get_string(model, "model.", "kind", "logistic");
    if (kind == "logistic") {
      cfg.model_kind = ModelKind::MultinomialLogistic;
    } else if (kind == "mlp") {
      cfg.model_kind = ModelKind::Mlp;
    } else {
      config_fail("model.kind", "expected one of logistic, mlp");
    }
    if (model.contains("hidden_dims")) {
      const auto& dims = model.at("hidden_dims");
      if (!dims.is_array()) config_fail("model.hidden_dims", "expected an array of integers");
      for (const auto& d : dims) {
        if (!d.is_number_integer()) {
          config_fail("model.hidden_dims", "expected an array of integers");
        }
        cfg.hidden_dims.push_back(d.get<int>());
      }
    }
  }

  if (root.contains("trainer")) {
    const auto& trainer = expect_object(root.at("trainer"), "trainer");
    detail::reject_unknown_keys(trainer, "trainer",
                                {"epochs", "batch_size", "base_lr", "lr_decay"});
    cfg.trainer.epochs = detail::get_int(trainer, "trainer.", "epochs", cfg.trainer.epochs);
    cfg.trainer.batch_size =
        detail::get_int(trainer, "trainer.", "batch_size", cfg.trainer.batch_size);
    cfg.trainer.base_lr = detail::get_real(trainer, "trainer.", "base_lr", cfg.trainer.base_lr);
    cfg.trainer.lr_decay = detail::get_real(trainer, "trainer.", "lr_decay", cfg.trainer.lr_decay);
  }

  if (root.contains("data")) {
    const auto& data = expect_object(root.at("data"), "data");
    detail::reject_unknown_keys(data, "data",
                                {"source", "num_classes", "per_class", "input_dim", "separation",
                                 "images", "labels", "holdout_fraction"});
    const std::string source = detail::get_string(data, "data.", "source", "blobs");
    if (source == "blobs") {
      cfg.data.source = DataSource::Blobs;
      if (data.contains("images") || data.contains("labels")) {
        config_fail("data.images", "only the idx source reads image files");
      }
    } else if (source == "idx") {
      cfg.data.source = DataSource::Idx;
      if (data.contains("num_classes") || data.contains("per_class") ||
          data.contains("input_dim") || data.contains("separation")) {
        config_fail("data.source", "cluster-generation keys require the blobs source");
      }
    } else {
      config_fail("data.source", "expected one of blobs, idx");
    }
    cfg.data.num_classes = detail::get_int(data, "data.", "num_classes", cfg.data.num_classes);
    cfg.data.per_class = detail::get_int(data, "data.", "per_class", cfg.data.per_class);
    cfg.data.input_dim = detail::get_int(data, "data.", "input_dim", cfg.data.input_dim);
    cfg.data.separation = detail::get_real(data, "data.", "separation", cfg.data.separation);
    cfg.data.images_path = detail::get_string(data, "data.", "images", cfg.data.images_path);
    cfg.data.labels_path = detail::get_string(data, "data.", "labels", cfg.data.labels_path);
    cfg.data.holdout_fraction =
        detail::get_real(data, "data.", "holdout_fraction", cfg.data.holdout_fraction);
  }

  if (root.contains("partition")) {
    const auto& partition = expect_object(root.at("partition"), "partition");
    detail::reject_unknown_keys(partition, "partition",
                                {"mode", "labels_per_client", "cardinalities"});
    const std::string mode = detail::get_string(partition, "partition.", "mode", "iid");
    if (mode == "iid") {
      cfg.partition_mode = PartitionMode::IidBalanced;
      if (partition.contains("labels_per_client")) {
        config_fail("partition.labels_per_client", "only the label_skew mode takes this key");
      }
    } else if (mode == "label_skew") {
      cfg.partition_mode = PartitionMode::LabelSkew;
    } else {
      config_fail("partition.mode", "expected one of iid, label_skew");
    }
    cfg.labels_per_client =
        detail::get_int(partition, "partition.", "labels_per_client", cfg.labels_per_client);
    if (partition.contains("cardinalities")) {
      const auto& cards = partition.at("cardinalities");
      if (!cards.is_array()) {
        config_fail("partition.cardinalities", "expected an array of integers");
      }
      for (const auto& c : cards) {
        if (!c.is_number_integer() || c.get<std::int64_t>() < 1) {
          config_fail("partition.cardinalities", "entries must be integers >= 1");
        }
        cfg.cardinalities.push_back(c.get<std::size_t>());
      }
    }
  }

  if (root.contains("strategies")) {
    const auto& strategies = root.at("strategies");
    if (!strategies.is_array() || strategies.empty()) {
      config_fail("strategies", "expected a non-empty array");
    }
    cfg.strategies.clear();
    for (std::size_t i = 0; i < strategies.size(); ++i) {
      cfg.strategies.push_back(
          detail::parse_strategy(strategies[i], "strategies[" + std::to_string(i) + "]"));
    }
  }

  cfg.validate();
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  return config_from_json(root);
}

inline ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

// Serialization that parse_config_text reads back to an equal config.
inline nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json root;
  root["num_clients"] = cfg.num_clients;
  root["participation"] = cfg.participation;
  root["rounds"] = cfg.rounds;
  root["repetitions"] = cfg.repetitions;
  root["master_seed"] = cfg.master_seed;
  root["threshold"] = cfg.threshold;
  root["output_dir"] = cfg.output_dir;
  root["emit_plot_data"] = cfg.emit_plot_data;

  root["model"]["kind"] = cfg.model_kind == ModelKind::Mlp ? "mlp" : "logistic";
  if (!cfg.hidden_dims.empty()) root["model"]["hidden_dims"] = cfg.hidden_dims;

  root["trainer"]["epochs"] = cfg.trainer.epochs;
  root["trainer"]["batch_size"] = cfg.trainer.batch_size;
  root["trainer"]["base_lr"] = cfg.trainer.base_lr;
  root["trainer"]["lr_decay"] = cfg.trainer.lr_decay;

  root["data"]["source"] = to_string(cfg.data.source);
  if (cfg.data.source == DataSource::Blobs) {
    root["data"]["num_classes"] = cfg.data.num_classes;
    root["data"]["per_class"] = cfg.data.per_class;
    root["data"]["input_dim"] = cfg.data.input_dim;
    root["data"]["separation"] = cfg.data.separation;
  } else {
    root["data"]["images"] = cfg.data.images_path;
    root["data"]["labels"] = cfg.data.labels_path;
  }
  root["data"]["holdout_fraction"] = cfg.data.holdout_fraction;

  root["partition"]["mode"] = to_string(cfg.partition_mode);
  if (cfg.partition_mode == PartitionMode::LabelSkew) {
    root["partition"]["labels_per_client"] = cfg.labels_per_client;
  }
  if (!cfg.cardinalities.empty()) root["partition"]["cardinalities"] = cfg.cardinalities;

  root["strategies"] = nlohmann::json::array();
  for (const auto& s : cfg.strategies) {
    nlohmann::json entry;
    entry["kind"] = to_string(s.kind);
    switch (s.kind) {
      case StrategyKind::FedAvg:
        break;
      case StrategyKind::FedCostWAvg:
        entry["alpha"] = s.alpha;
        break;
      case StrategyKind::FedControl:
        entry["alpha"] = s.alpha;
        entry["beta"] = s.beta;
        entry["lambda"] = s.lambda;
        break;
    }
    root["strategies"].push_back(entry);
  }
  return root;
}

}  // namespace fedcontrol
