#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fedcontrol/aggregation.hpp"
#include "fedcontrol/data.hpp"
#include "fedcontrol/dataset.hpp"
#include "fedcontrol/errors.hpp"
#include "fedcontrol/loss_ledger.hpp"
#include "fedcontrol/model.hpp"
#include "fedcontrol/rng.hpp"
#include "fedcontrol/trainer.hpp"

namespace fedcontrol {

// Orchestration parameters for one training run. The client datasets are
// supplied separately, so a run can be driven from generated, partitioned,
// or hand-built data alike.
struct RunConfig {
  int num_clients = 100;       // N
  double participation = 1.0;  // C, fraction of clients drawn each round
  int rounds = 30;             // R
  ModelSpec model;
  TrainerConfig trainer;  // local epochs E live here
  StrategyConfig strategy;
  std::uint64_t cohort_seed = 0;

  void validate() const {
    if (num_clients < 1) throw ConfigError("run.num_clients: must be >= 1");
    if (!(participation > 0.0) || participation > 1.0) {
      throw ConfigError("run.participation: must lie in (0, 1]");
    }
    if (rounds < 0) throw ConfigError("run.rounds: must be >= 0");
    model.validate();
    trainer.validate();
    strategy.validate();
  }
};

// max(floor(C*N), 1). The nudge keeps exact products like 0.3 * 10 from
// flooring to one less than intended.
inline int cohort_size(int num_clients, double participation) {
  const int floored =
      static_cast<int>(std::floor(participation * static_cast<double>(num_clients) + 1e-9));
  return std::max(std::min(floored, num_clients), 1);
}

// Uniform sample without replacement of the round's cohort, reported in
// ascending client-id order.
inline std::vector<int> select_clients(int num_clients, double participation, Rng& rng) {
  if (num_clients < 1) throw std::invalid_argument("select_clients: num_clients must be >= 1");
  if (!(participation > 0.0) || participation > 1.0) {
    throw std::invalid_argument("select_clients: participation must lie in (0, 1]");
  }
  const int m = cohort_size(num_clients, participation);
  auto picks = rng.sample_without_replacement(static_cast<std::size_t>(num_clients),
                                              static_cast<std::size_t>(m));
  std::vector<int> cohort(picks.begin(), picks.end());
  std::sort(cohort.begin(), cohort.end());
  return cohort;
}

// Loss of the initial global model on every client's full local data; these
// become the round-0 ledger entries that the first derivative term divides.
inline std::vector<double> bootstrap_losses(const ModelSpec& spec, const ParamVector& params,
                                            std::span<const Dataset> clients) {
  std::vector<double> losses;
  losses.reserve(clients.size());
  for (const auto& client : clients) losses.push_back(loss(spec, params, client));
  return losses;
}

// Everything persisted about one completed round.
struct RoundRecord {
  int round = 0;  // 1-based count of completed rounds
  std::vector<int> cohort;
  AggregationWeights weights;
  std::vector<double> client_losses;  // post-training, aligned with cohort
  double holdout_accuracy = 0.0;
  double holdout_loss = 0.0;
};

// One federated training run over fixed client datasets: initializes the
// global model, records bootstrap losses, then advances round by round.
// Each round broadcasts the global parameters, trains every cohort member
// locally, records their post-training losses, mixes the local parameter
// vectors with the configured strategy, and scores the result on the
// held-out evaluation set.
class FederationRun {
 public:
  FederationRun(RunConfig config, std::vector<Dataset> clients, Dataset holdout)
      : config_(std::move(config)),
        clients_(std::move(clients)),
        holdout_(std::move(holdout)),
        ledger_(clients_.size()) {
    config_.validate();
    if (clients_.size() != static_cast<std::size_t>(config_.num_clients)) {
      throw ShapeError("federation: config names " + std::to_string(config_.num_clients) +
                       " clients but " + std::to_string(clients_.size()) +
                       " datasets were supplied");
    }
    for (std::size_t i = 0; i < clients_.size(); ++i) {
      if (clients_[i].empty()) {
        throw EmptyDataError("federation: client " + std::to_string(i) + " has no data");
      }
      if (clients_[i].num_features != static_cast<std::size_t>(config_.model.input_dim)) {
        throw ShapeError("federation: client " + std::to_string(i) + " feature width " +
                         std::to_string(clients_[i].num_features) + " does not match input_dim " +
                         std::to_string(config_.model.input_dim));
      }
    }
    if (holdout_.empty()) throw EmptyDataError("federation: empty holdout set");

    params_ = init_params(config_.model);
    const auto losses = bootstrap_losses(config_.model, params_, clients_);
    for (std::size_t i = 0; i < losses.size(); ++i) ledger_.record(i, 0, losses[i]);
  }

  const RunConfig& config() const { return config_; }
  const ParamVector& params() const { return params_; }
  const LossLedger& ledger() const { return ledger_; }
  int rounds_completed() const { return round_; }

  // Runs the next round with a freshly sampled cohort.
  RoundRecord run_round() {
    Rng rng(seed_mix(config_.cohort_seed, static_cast<std::uint64_t>(round_)));
    return run_round_with_cohort(select_clients(config_.num_clients, config_.participation, rng));
  }

  // Runs the next round with a caller-chosen cohort (any listing order).
  RoundRecord run_round_with_cohort(std::vector<int> cohort) {
    if (cohort.empty()) throw DegenerateCohortError("federation: empty cohort");
    for (int id : cohort) {
      if (id < 0 || id >= config_.num_clients) {
        throw std::out_of_range("federation: cohort client " + std::to_string(id) +
                                " out of range");
      }
    }

    const int r = round_;
    std::vector<ParamVector> local_params;
    std::vector<double> local_losses;
    std::vector<int> sample_counts;
    local_params.reserve(cohort.size());
    local_losses.reserve(cohort.size());
    sample_counts.reserve(cohort.size());
    for (int id : cohort) {
      auto result = client_update(config_.model, params_, clients_[static_cast<std::size_t>(id)],
                                  config_.trainer, id, r);
      local_params.push_back(std::move(result.params));
      local_losses.push_back(result.final_loss);
      sample_counts.push_back(static_cast<int>(clients_[static_cast<std::size_t>(id)].size()));
    }

    const int rho = r + 1;  // ledger round the fresh losses land on
    for (std::size_t i = 0; i < cohort.size(); ++i) {
      ledger_.record(static_cast<std::size_t>(cohort[i]), rho, local_losses[i]);
    }

    RoundRecord record;
    record.round = rho;
    record.cohort = cohort;
    record.weights = compute_weights(cohort, sample_counts, ledger_, rho, config_.strategy);
    record.client_losses = std::move(local_losses);
    params_ = aggregate(local_params, record.weights);
    record.holdout_accuracy = accuracy(config_.model, params_, holdout_);
    record.holdout_loss = loss(config_.model, params_, holdout_);
    ++round_;
    return record;
  }

  std::vector<RoundRecord> run_remaining() {
    std::vector<RoundRecord> records;
    records.reserve(static_cast<std::size_t>(std::max(config_.rounds - round_, 0)));
    while (round_ < config_.rounds) records.push_back(run_round());
    return records;
  }

 private:
  RunConfig config_;
  std::vector<Dataset> clients_;
  Dataset holdout_;
  ParamVector params_;
  LossLedger ledger_;
  int round_ = 0;
};

struct TrainingResult {
  std::vector<RoundRecord> records;
  ParamVector final_params;
};

// Full run: R rounds from freshly initialized parameters. R = 0 returns the
// initial parameters and no records.
inline TrainingResult run_training(const RunConfig& config, std::vector<Dataset> clients,
                                   Dataset holdout) {
  FederationRun run(config, std::move(clients), std::move(holdout));
  TrainingResult result;
  result.records = run.run_remaining();
  result.final_params = run.params();
  return result;
}

}  // namespace fedcontrol
