#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedcontrol/errors.hpp"

namespace fedcontrol {

struct RoundLoss {
  int round;
  double loss;
};

// Per-client history of post-training local losses, indexed by round.
// Round 0 holds the bootstrap loss of the initial global model. A client
// has an entry for round r only if it was evaluated that round, so the
// records of a partially participating client have gaps.
class LossLedger {
 public:
  LossLedger() = default;
  explicit LossLedger(std::size_t num_clients) : entries_(num_clients) {}

  std::size_t num_clients() const { return entries_.size(); }

  void record(std::size_t client, int round, double loss) {
    check_client(client);
    if (!std::isfinite(loss) || loss < 0.0) {
      throw InvalidLossError("loss ledger: loss for client " + std::to_string(client) +
                             " at round " + std::to_string(round) +
                             " must be finite and >= 0");
    }
    auto& history = entries_[client];
    if (!history.empty() && round <= history.back().round) {
      throw std::invalid_argument("loss ledger: rounds must be recorded in increasing order");
    }
    history.push_back({round, loss});
  }

  // Loss recorded for exactly this round, if any.
  std::optional<double> at(std::size_t client, int round) const {
    check_client(client);
    for (const auto& entry : entries_[client]) {
      if (entry.round == round) return entry.loss;
    }
    return std::nullopt;
  }

  // Most recent entry strictly before the given round.
  std::optional<RoundLoss> latest_before(std::size_t client, int round) const {
    check_client(client);
    std::optional<RoundLoss> found;
    for (const auto& entry : entries_[client]) {
      if (entry.round < round) found = entry;
    }
    return found;
  }

  std::span<const RoundLoss> history(std::size_t client) const {
    check_client(client);
    return entries_[client];
  }

 private:
  void check_client(std::size_t client) const {
    if (client >= entries_.size()) {
      throw std::out_of_range("loss ledger: client index " + std::to_string(client) +
                              " out of range");
    }
  }

  std::vector<std::vector<RoundLoss>> entries_;
};

}  // namespace fedcontrol
