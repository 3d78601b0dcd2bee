#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fedcontrol/config.hpp"
#include "fedcontrol/data.hpp"
#include "fedcontrol/dataset.hpp"
#include "fedcontrol/errors.hpp"
#include "fedcontrol/federation.hpp"
#include "fedcontrol/idx.hpp"
#include "fedcontrol/metrics.hpp"
#include "fedcontrol/rng.hpp"

namespace fedcontrol {

// 17 significant digits: enough to round-trip any double, so reruns of the
// same experiment diff cleanly against earlier output.
inline std::string format_real(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

// Compact value formatting for file labels (0.8 stays "0.8").
inline std::string format_label_value(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%g", value);
  return buffer;
}

// One file-system-safe label per strategy. Labels start as the strategy
// kind; kinds that appear more than once get their distinguishing
// coefficients appended, and any label still colliding after that gets its
// list position appended.
inline std::vector<std::string> strategy_labels(std::span<const StrategyConfig> strategies) {
  std::vector<std::string> labels;
  labels.reserve(strategies.size());
  for (const auto& s : strategies) labels.emplace_back(to_string(s.kind));

  const auto count = [&](const std::string& label) {
    std::size_t n = 0;
    for (const auto& l : labels) n += l == label ? 1 : 0;
    return n;
  };

  std::vector<std::string> refined = labels;
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    if (count(labels[i]) < 2) continue;
    switch (strategies[i].kind) {
      case StrategyKind::FedAvg:
        break;
      case StrategyKind::FedCostWAvg:
        refined[i] += "_a" + format_label_value(strategies[i].alpha);
        break;
      case StrategyKind::FedControl:
        refined[i] += "_l" + format_label_value(strategies[i].lambda);
        break;
    }
  }
  // Collisions are judged against a snapshot so that renaming one entry
  // does not hide the collision from its partners.
  const std::vector<std::string> snapshot = refined;
  for (std::size_t i = 0; i < snapshot.size(); ++i) {
    bool collides = false;
    for (std::size_t j = 0; j < snapshot.size(); ++j) {
      collides = collides || (j != i && snapshot[j] == snapshot[i]);
    }
    if (collides) refined[i] += "_" + std::to_string(i + 1);
  }
  return refined;
}

// Data and seeds shared by every strategy within one repetition, so the
// comparison is paired: identical partition, initialization, and cohort
// sequences, with only the aggregation rule differing.
struct RepetitionData {
  std::vector<Dataset> clients;
  Dataset holdout;
  int input_dim = 0;
  int num_classes = 0;
  std::uint64_t init_seed = 0;
  std::uint64_t shuffle_seed = 0;
  std::uint64_t cohort_seed = 0;
};

inline constexpr std::uint64_t kRepetitionTag = 0x726570ULL;

inline RepetitionData build_repetition_data(const ExperimentConfig& cfg, int repetition) {
  const std::uint64_t rep_seed =
      seed_mix(cfg.master_seed, kRepetitionTag, static_cast<std::uint64_t>(repetition));

  Dataset full;
  if (cfg.data.source == DataSource::Blobs) {
    full = generate_blobs(cfg.data.num_classes, cfg.data.per_class, cfg.data.input_dim,
                          cfg.data.separation, derive_seed(rep_seed, SeedDomain::Data));
  } else {
    full = read_idx(cfg.data.images_path, cfg.data.labels_path);
  }

  RepetitionData rep;
  rep.input_dim = static_cast<int>(full.num_features);
  rep.num_classes = full.observed_classes();

  auto [rest, holdout] =
      split_holdout(full, cfg.data.holdout_fraction, derive_seed(rep_seed, SeedDomain::Holdout));
  rep.holdout = std::move(holdout);

  PartitionPlan plan;
  plan.mode = cfg.partition_mode;
  plan.num_clients = cfg.num_clients;
  plan.labels_per_client = cfg.labels_per_client;
  plan.seed = derive_seed(rep_seed, SeedDomain::Partition);
  if (!cfg.cardinalities.empty()) {
    plan.cardinalities = cfg.cardinalities;
  } else {
    const std::size_t total = rest.size();
    const std::size_t n = static_cast<std::size_t>(cfg.num_clients);
    if (total < n) {
      throw PartitionError("experiment: " + std::to_string(total) +
                           " training examples cannot cover " + std::to_string(n) + " clients");
    }
    plan.cardinalities.assign(n, total / n);
    for (std::size_t i = 0; i < total % n; ++i) ++plan.cardinalities[i];
  }
  rep.clients = plan.mode == PartitionMode::IidBalanced ? partition_iid(rest, plan)
                                                        : partition_noniid(rest, plan);

  rep.init_seed = derive_seed(rep_seed, SeedDomain::Init);
  rep.shuffle_seed = derive_seed(rep_seed, SeedDomain::Shuffle);
  rep.cohort_seed = derive_seed(rep_seed, SeedDomain::Cohort);
  return rep;
}

// The orchestration config for one (strategy, repetition) cell.
inline RunConfig make_run_config(const ExperimentConfig& cfg, const StrategyConfig& strategy,
                                 const RepetitionData& rep) {
  RunConfig run;
  run.num_clients = cfg.num_clients;
  run.participation = cfg.participation;
  run.rounds = cfg.rounds;
  run.model.kind = cfg.model_kind;
  run.model.input_dim = rep.input_dim;
  run.model.num_classes = rep.num_classes;
  run.model.hidden_dims = cfg.hidden_dims;
  run.model.init_seed = rep.init_seed;
  run.trainer = cfg.trainer;
  run.trainer.shuffle_seed = rep.shuffle_seed;
  run.strategy = strategy;
  run.cohort_seed = rep.cohort_seed;
  return run;
}

inline std::vector<double> accuracy_curve(std::span<const RoundRecord> records) {
  std::vector<double> curve;
  curve.reserve(records.size());
  for (const auto& r : records) curve.push_back(r.holdout_accuracy);
  return curve;
}

struct RepetitionResult {
  std::vector<RoundRecord> records;
  std::optional<int> rounds_to_threshold;
};

struct StrategyResult {
  std::string label;
  StrategyConfig strategy;
  std::vector<RepetitionResult> repetitions;
};

struct ExperimentResult {
  std::filesystem::path output_dir;
  std::vector<StrategyResult> strategies;
};

namespace detail {

inline std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

inline void finish_write(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

// Long-format per-round rows for one run; the holdout columns repeat on
// every cohort row of their round.
inline void write_run_csv(const std::filesystem::path& path,
                          std::span<const RoundRecord> records) {
  auto out = open_for_write(path);
  out << "round,client,weight,client_loss,accuracy,loss\n";
  for (const auto& record : records) {
    for (std::size_t i = 0; i < record.cohort.size(); ++i) {
      out << record.round << ',' << record.cohort[i] << ','
          << format_real(record.weights.values[i]) << ','
          << format_real(record.client_losses[i]) << ','
          << format_real(record.holdout_accuracy) << ',' << format_real(record.holdout_loss)
          << '\n';
    }
  }
  finish_write(out, path);
}

// Mean/CI across repetitions; the CI is null below two repetitions, and
// rounds-to-threshold statistics cover only the repetitions that reached
// the threshold.
inline nlohmann::json summary_json(const StrategyResult& result, double threshold) {
  nlohmann::json summary;
  summary["strategy"] = result.label;
  summary["kind"] = to_string(result.strategy.kind);
  summary["alpha"] = result.strategy.alpha;
  summary["beta"] = result.strategy.beta;
  summary["lambda"] = result.strategy.lambda;
  summary["repetitions"] = result.repetitions.size();
  summary["threshold"] = threshold;

  const std::size_t rounds = result.repetitions.front().records.size();
  const auto stats = [](std::span<const double> values) {
    nlohmann::json entry;
    double mean = 0.0;
    for (double v : values) mean += v;
    entry["mean"] = mean / static_cast<double>(values.size());
    if (values.size() >= 2) {
      entry["ci95"] = mean_ci95(values).ci95;
    } else {
      entry["ci95"] = nullptr;
    }
    return entry;
  };

  summary["accuracy_by_round"] = nlohmann::json::array();
  std::vector<double> column(result.repetitions.size());
  for (std::size_t r = 0; r < rounds; ++r) {
    for (std::size_t k = 0; k < result.repetitions.size(); ++k) {
      column[k] = result.repetitions[k].records[r].holdout_accuracy;
    }
    auto entry = stats(column);
    entry["round"] = static_cast<int>(r) + 1;
    summary["accuracy_by_round"].push_back(entry);
  }
  for (std::size_t k = 0; k < result.repetitions.size(); ++k) {
    column[k] = result.repetitions[k].records.back().holdout_accuracy;
  }
  summary["final_accuracy"] = stats(column);

  auto& per_rep = summary["rounds_to_threshold"]["per_repetition"] = nlohmann::json::array();
  std::vector<double> reached;
  for (const auto& rep : result.repetitions) {
    if (rep.rounds_to_threshold) {
      per_rep.push_back(*rep.rounds_to_threshold);
      reached.push_back(static_cast<double>(*rep.rounds_to_threshold));
    } else {
      per_rep.push_back(nullptr);
    }
  }
  if (reached.empty()) {
    summary["rounds_to_threshold"]["mean"] = nullptr;
    summary["rounds_to_threshold"]["ci95"] = nullptr;
  } else {
    const auto entry = stats(reached);
    summary["rounds_to_threshold"]["mean"] = entry["mean"];
    summary["rounds_to_threshold"]["ci95"] = entry["ci95"];
  }
  return summary;
}

inline void write_comparison_csv(const std::filesystem::path& path,
                                 std::span<const StrategyResult> strategies, double threshold) {
  auto out = open_for_write(path);
  out << "strategy,final_accuracy_mean,final_accuracy_ci95,rounds_to_threshold_mean,"
         "rounds_to_threshold_ci95\n";
  for (const auto& result : strategies) {
    const auto summary = summary_json(result, threshold);
    const auto field = [](const nlohmann::json& v) {
      return v.is_null() ? std::string() : format_real(v.get<double>());
    };
    out << result.label << ',' << field(summary["final_accuracy"]["mean"]) << ','
        << field(summary["final_accuracy"]["ci95"]) << ','
        << field(summary["rounds_to_threshold"]["mean"]) << ','
        << field(summary["rounds_to_threshold"]["ci95"]) << '\n';
  }
  finish_write(out, path);
}

}  // namespace detail

// Plot-ready long format: one row per (strategy, repetition, round), where
// `accuracy` is that repetition's value and `mean`/`ci95` summarize the
// round across repetitions (a single repetition plots with zero width).
inline void emit_plot_data(std::span<const StrategyResult> strategies,
                           const std::filesystem::path& out_path) {
  if (strategies.empty()) throw EmptyDataError("emit_plot_data: no strategies");
  for (const auto& s : strategies) {
    if (s.repetitions.empty() || s.repetitions.front().records.empty()) {
      throw EmptyDataError("emit_plot_data: strategy " + s.label + " has no records");
    }
  }

  auto out = detail::open_for_write(out_path);
  out << "strategy,repetition,round,accuracy,mean,ci95\n";
  for (const auto& strategy : strategies) {
    const std::size_t reps = strategy.repetitions.size();
    const std::size_t rounds = strategy.repetitions.front().records.size();
    std::vector<double> column(reps);
    for (std::size_t k = 0; k < reps; ++k) {
      for (std::size_t r = 0; r < rounds; ++r) {
        for (std::size_t j = 0; j < reps; ++j) {
          column[j] = strategy.repetitions[j].records[r].holdout_accuracy;
        }
        double mean = 0.0;
        for (double v : column) mean += v;
        mean /= static_cast<double>(reps);
        const double ci = reps >= 2 ? mean_ci95(column).ci95 : 0.0;
        out << strategy.label << ',' << (k + 1) << ',' << strategy.repetitions[k].records[r].round
            << ',' << format_real(strategy.repetitions[k].records[r].holdout_accuracy) << ','
            << format_real(mean) << ',' << format_real(ci) << '\n';
      }
    }
  }
  detail::finish_write(out, out_path);
}

// Runs every strategy against every repetition with paired seeds and
// persists: runs/<label>_rep<k>.csv per cell, <label>_summary.json per
// strategy, comparison.csv, and optionally plot_data.csv. An INCOMPLETE
// marker file exists while the experiment is running and is removed only
// after every artifact has been written.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentResult result;
  result.output_dir = cfg.output_dir;

  std::filesystem::create_directories(result.output_dir / "runs");
  const auto marker = result.output_dir / "INCOMPLETE";
  {
    auto out = detail::open_for_write(marker);
    out << "experiment in progress or aborted\n";
    detail::finish_write(out, marker);
  }

  const auto labels = strategy_labels(cfg.strategies);
  result.strategies.resize(cfg.strategies.size());
  for (std::size_t s = 0; s < cfg.strategies.size(); ++s) {
    result.strategies[s].label = labels[s];
    result.strategies[s].strategy = cfg.strategies[s];
    result.strategies[s].repetitions.resize(static_cast<std::size_t>(cfg.repetitions));
  }

  for (int k = 0; k < cfg.repetitions; ++k) {
    const RepetitionData rep = build_repetition_data(cfg, k);
    for (std::size_t s = 0; s < cfg.strategies.size(); ++s) {
      const RunConfig run_cfg = make_run_config(cfg, cfg.strategies[s], rep);
      auto training = run_training(run_cfg, rep.clients, rep.holdout);

      RepetitionResult& cell = result.strategies[s].repetitions[static_cast<std::size_t>(k)];
      cell.records = std::move(training.records);
      const auto curve = accuracy_curve(cell.records);
      cell.rounds_to_threshold = r_threshold(curve, cfg.threshold);

      detail::write_run_csv(
          result.output_dir / "runs" / (labels[s] + "_rep" + std::to_string(k + 1) + ".csv"),
          cell.records);
    }
  }

  for (const auto& strategy : result.strategies) {
    const auto summary = detail::summary_json(strategy, cfg.threshold);
    const auto path = result.output_dir / (strategy.label + "_summary.json");
    auto out = detail::open_for_write(path);
    out << summary.dump(2) << '\n';
    detail::finish_write(out, path);
  }
  detail::write_comparison_csv(result.output_dir / "comparison.csv", result.strategies,
                               cfg.threshold);
  if (cfg.emit_plot_data) {
    emit_plot_data(result.strategies, result.output_dir / "plot_data.csv");
  }

  std::filesystem::remove(marker);
  return result;
}

}  // namespace fedcontrol
