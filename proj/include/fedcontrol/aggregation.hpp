#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fedcontrol/errors.hpp"
#include "fedcontrol/loss_ledger.hpp"
#include "fedcontrol/param_vector.hpp"

namespace fedcontrol {

// Losses below this floor are clamped before entering a ratio, so a client
// that fits its local data perfectly cannot produce an infinite weight.
inline constexpr double kLossFloor = 1e-12;

// Tolerance on the sum of a set of aggregation weights.
inline constexpr double kWeightSumTolerance = 1e-9;

enum class StrategyKind { FedAvg, FedCostWAvg, FedControl };

inline const char* to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::FedAvg: return "fedavg";
    case StrategyKind::FedCostWAvg: return "fedcostwavg";
    case StrategyKind::FedControl: return "fedcontrol";
  }
  return "unknown";
}

// Selects the aggregation family member and its coefficients.
//
// The weight given to client i is
//     pi_i = alpha * s_i/S  +  beta * d_i/D  +  (1 - alpha - beta) * k_i/K
// where s is the sample count, d the loss-ratio (derivative) term and k the
// decayed loss-sum (integral) term. FedAvg keeps only the sample term;
// FedCostWAvg keeps sample and derivative terms (beta is derived as
// 1 - alpha, the stored beta is ignored); FedControl uses all three.
struct StrategyConfig {
  StrategyKind kind = StrategyKind::FedControl;
  double alpha = 1.0 / 3.0;
  double beta = 1.0 / 3.0;
  double lambda = 1.0;  // integral decay per elapsed round, in [0, 1]

  struct Coefficients {
    double sample;
    double derivative;
    double integral;
  };

  // Coefficients actually applied for this kind.
  Coefficients effective() const {
    switch (kind) {
      case StrategyKind::FedAvg: return {1.0, 0.0, 0.0};
      case StrategyKind::FedCostWAvg: return {alpha, 1.0 - alpha, 0.0};
      case StrategyKind::FedControl: return {alpha, beta, 1.0 - alpha - beta};
    }
    throw ConfigError("strategy: unknown kind");
  }

  void validate() const {
    if (!std::isfinite(alpha) || alpha < 0.0) {
      throw ConfigError("strategy.alpha: must be finite and >= 0");
    }
    if (!std::isfinite(beta) || beta < 0.0) {
      throw ConfigError("strategy.beta: must be finite and >= 0");
    }
    if (alpha + beta > 1.0) {
      throw ConfigError("strategy: alpha + beta must be <= 1 (the integral coefficient "
                        "1 - alpha - beta may not be negative)");
    }
    if (!std::isfinite(lambda) || lambda < 0.0 || lambda > 1.0) {
      throw ConfigError("strategy.lambda: must lie in [0, 1]");
    }
  }
};

// Convex per-client weights for one round's cohort, aligned entry by entry
// with the cohort ids they were computed for.
struct AggregationWeights {
  std::vector<int> clients;
  std::vector<double> values;
};

namespace detail {

// Sums in ascending value order, so the result does not depend on how the
// contributions happened to be listed.
inline double canonical_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum;
}

}  // namespace detail

// Loss-ratio term d = prev/curr. Both operands are clamped to the loss
// floor, so the term is always finite and strictly positive; two vanishing
// losses give the neutral value 1.
inline double derivative_term(double prev_loss, double curr_loss) {
  if (!std::isfinite(prev_loss) || prev_loss < 0.0 ||
      !std::isfinite(curr_loss) || curr_loss < 0.0) {
    throw InvalidLossError("derivative term: losses must be finite and >= 0");
  }
  return std::max(prev_loss, kLossFloor) / std::max(curr_loss, kLossFloor);
}

// Decayed sum of recorded losses: sum over recorded rounds 1 <= r' <= round
// of lambda^(round - r') * loss(r'). Round-0 entries are the bootstrap loss
// of the untrained model and never enter the sum. With lambda = 0 the
// convention 0^0 = 1 applies, so only a loss recorded at `round` survives.
inline double integral_term(std::span<const RoundLoss> loss_history, int round, double lambda) {
  if (!std::isfinite(lambda) || lambda < 0.0 || lambda > 1.0) {
    throw std::invalid_argument("integral term: lambda must lie in [0, 1]");
  }
  double sum = 0.0;
  bool any = false;
  for (const auto& entry : loss_history) {
    if (entry.round < 1 || entry.round > round) continue;
    sum += std::pow(lambda, static_cast<double>(round - entry.round)) * entry.loss;
    any = true;
  }
  if (!any) {
    throw MissingHistoryError("integral term: no recorded loss in rounds 1.." +
                              std::to_string(round),
                              /*client=*/-1, round);
  }
  return sum;
}

// Per-client weights for one round. `sample_counts` aligns with `cohort`;
// normalizers are taken over the cohort only. Terms whose coefficient is
// zero are never evaluated, so a pure sample strategy needs no ledger
// entries at all and returns s_i/S exactly. When several terms mix, the
// assembled weights are renormalized by their exact sum to absorb
// floating-point drift.
inline AggregationWeights compute_weights(std::span<const int> cohort,
                                          std::span<const int> sample_counts,
                                          const LossLedger& ledger,
                                          int round,
                                          const StrategyConfig& config) {
  config.validate();
  if (cohort.empty()) throw DegenerateCohortError("compute weights: empty cohort");
  if (sample_counts.size() != cohort.size()) {
    throw ShapeError("compute weights: sample_counts size " +
                     std::to_string(sample_counts.size()) + " does not match cohort size " +
                     std::to_string(cohort.size()));
  }

  const auto coeff = config.effective();
  const std::size_t n = cohort.size();

  double sample_norm = 0.0;
  for (int count : sample_counts) {
    if (count <= 0) throw std::invalid_argument("compute weights: sample counts must be > 0");
    sample_norm += static_cast<double>(count);
  }

  std::vector<double> deriv(n, 0.0);
  double deriv_norm = 0.0;
  if (coeff.derivative != 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      const int client = cohort[i];
      const auto curr = ledger.at(static_cast<std::size_t>(client), round);
      if (!curr) {
        throw MissingHistoryError("compute weights: client " + std::to_string(client) +
                                  " has no loss at round " + std::to_string(round),
                                  client, round);
      }
      const auto prev = ledger.latest_before(static_cast<std::size_t>(client), round);
      if (!prev) {
        throw MissingHistoryError("compute weights: client " + std::to_string(client) +
                                  " has no loss before round " + std::to_string(round),
                                  client, round);
      }
      deriv[i] = derivative_term(prev->loss, *curr);
    }
    deriv_norm = detail::canonical_sum(deriv);
  }

  std::vector<double> integ(n, 0.0);
  double integ_norm = 0.0;
  if (coeff.integral != 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      const int client = cohort[i];
      try {
        integ[i] = integral_term(ledger.history(static_cast<std::size_t>(client)), round,
                                 config.lambda);
      } catch (const MissingHistoryError&) {
        throw MissingHistoryError("compute weights: client " + std::to_string(client) +
                                  " has no loss history in rounds 1.." + std::to_string(round),
                                  client, round);
      }
    }
    integ_norm = detail::canonical_sum(integ);
  }

  if (sample_norm <= 0.0 || (coeff.derivative != 0.0 && deriv_norm <= 0.0) ||
      (coeff.integral != 0.0 && integ_norm <= 0.0)) {
    throw DegenerateCohortError("compute weights: a normalizer summed to zero over the cohort");
  }

  AggregationWeights weights;
  weights.clients.assign(cohort.begin(), cohort.end());
  weights.values.resize(n);

  if (coeff.derivative == 0.0 && coeff.integral == 0.0) {
    // Pure sample proportion; returned exactly, without renormalization.
    for (std::size_t i = 0; i < n; ++i) {
      weights.values[i] = coeff.sample * (static_cast<double>(sample_counts[i]) / sample_norm);
    }
    return weights;
  }

  for (std::size_t i = 0; i < n; ++i) {
    double value = coeff.sample * (static_cast<double>(sample_counts[i]) / sample_norm);
    if (coeff.derivative != 0.0) value += coeff.derivative * (deriv[i] / deriv_norm);
    if (coeff.integral != 0.0) value += coeff.integral * (integ[i] / integ_norm);
    weights.values[i] = value;
  }
  const double total = detail::canonical_sum(weights.values);
  for (double& value : weights.values) value /= total;
  return weights;
}

// Coordinate-wise convex combination of the client parameter vectors.
// Contributions are summed in a canonical order, so the result does not
// depend on how the cohort happens to be listed, and each coordinate is
// clamped to the envelope of the inputs, keeping the convexity guarantee
// exact under rounding.
inline ParamVector aggregate(std::span<const ParamVector> params,
                             const AggregationWeights& weights) {
  if (params.size() != weights.values.size()) {
    throw ShapeError("aggregate: " + std::to_string(params.size()) + " parameter vectors vs " +
                     std::to_string(weights.values.size()) + " weights");
  }
  if (params.empty()) throw ShapeError("aggregate: empty input");

  const std::size_t dim = params[0].size();
  for (const auto& p : params) {
    if (p.size() != dim) {
      throw ShapeError("aggregate: parameter vectors differ in dimension");
    }
  }

  double weight_sum = 0.0;
  for (double w : weights.values) {
    if (!std::isfinite(w) || w < 0.0) {
      throw std::invalid_argument("aggregate: weights must be finite and >= 0");
    }
    weight_sum += w;
  }
  if (std::abs(weight_sum - 1.0) > kWeightSumTolerance) {
    throw std::invalid_argument("aggregate: weights must sum to 1");
  }

  ParamVector out(dim);
  std::vector<double> addends(params.size());
  for (std::size_t c = 0; c < dim; ++c) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double x = params[i][c];
      addends[i] = weights.values[i] * x;
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    std::sort(addends.begin(), addends.end());
    double sum = 0.0;
    for (double a : addends) sum += a;
    out[c] = std::clamp(sum, lo, hi);
  }
  return out;
}

}  // namespace fedcontrol
