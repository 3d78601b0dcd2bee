#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fedcontrol/dataset.hpp"
#include "fedcontrol/errors.hpp"
#include "fedcontrol/model.hpp"
#include "fedcontrol/rng.hpp"

namespace fedcontrol {

// Local-update hyperparameters shared by every client.
struct TrainerConfig {
  int epochs = 1;
  int batch_size = 64;
  double base_lr = 1e-3;
  double lr_decay = 0.99;
  std::uint64_t shuffle_seed = 0;

  void validate() const {
    if (epochs < 1) throw ConfigError("trainer.epochs: must be >= 1");
    if (batch_size < 1) throw ConfigError("trainer.batch_size: must be >= 1");
    if (!(base_lr >= 0.0) || !std::isfinite(base_lr)) {
      throw ConfigError("trainer.base_lr: must be finite and >= 0");
    }
    if (!(lr_decay > 0.0) || lr_decay > 1.0) {
      throw ConfigError("trainer.lr_decay: must lie in (0, 1]");
    }
  }
};

// Geometric decay across rounds; constant within a round.
inline double lr_schedule(const TrainerConfig& config, int round) {
  if (round < 0) throw std::invalid_argument("lr_schedule: round must be >= 0");
  return config.base_lr * std::pow(config.lr_decay, static_cast<double>(round));
}

struct ClientUpdateResult {
  ParamVector params;
  double final_loss = 0.0;  // mean loss over the client's data at the returned params
  int gradient_steps = 0;
};

// One round of local training: `epochs` passes of mini-batch SGD over a
// fresh shuffle per epoch, at the round's fixed learning rate. The batch
// order is a pure function of (shuffle_seed, client_id, round). Throws
// DivergenceError when the parameters or final loss stop being finite.
inline ClientUpdateResult client_update(const ModelSpec& spec, const ParamVector& global_params,
                                        const Dataset& data, const TrainerConfig& config,
                                        int client_id, int round) {
  config.validate();
  if (client_id < 0) throw std::invalid_argument("client_update: client_id must be >= 0");
  if (round < 0) throw std::invalid_argument("client_update: round must be >= 0");
  if (data.empty()) throw EmptyDataError("client_update: client " + std::to_string(client_id) +
                                         " has no data");

  const double lr = lr_schedule(config, round);
  const std::size_t n = data.size();
  const std::size_t batch = std::min(static_cast<std::size_t>(config.batch_size), n);

  ClientUpdateResult result;
  result.params = global_params;

  Rng rng(seed_mix(config.shuffle_seed, static_cast<std::uint64_t>(client_id),
                   static_cast<std::uint64_t>(round)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(start + batch, n);
      const std::span<const std::size_t> indices(order.data() + start, stop - start);
      const ParamVector grad = gradient_on(spec, result.params, data, indices);
      for (std::size_t i = 0; i < result.params.size(); ++i) {
        result.params[i] -= lr * grad[i];
      }
      ++result.gradient_steps;
      if (!all_finite(result.params)) {
        throw DivergenceError("client_update: parameters diverged", round, client_id);
      }
    }
  }

  result.final_loss = loss(spec, result.params, data);
  if (!std::isfinite(result.final_loss)) {
    throw DivergenceError("client_update: loss diverged", round, client_id);
  }
  return result;
}

}  // namespace fedcontrol
