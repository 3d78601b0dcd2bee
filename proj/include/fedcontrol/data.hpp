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
#include "fedcontrol/rng.hpp"

namespace fedcontrol {

enum class PartitionMode { IidBalanced, LabelSkew };

inline const char* to_string(PartitionMode mode) {
  switch (mode) {
    case PartitionMode::IidBalanced: return "iid";
    case PartitionMode::LabelSkew: return "label_skew";
  }
  return "unknown";
}

// How a dataset is split across clients. Cardinalities are per client and
// must not exceed the dataset; labels_per_client only applies to label-skew
// mode.
struct PartitionPlan {
  PartitionMode mode = PartitionMode::IidBalanced;
  int num_clients = 1;
  std::vector<std::size_t> cardinalities;
  int labels_per_client = 2;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_clients < 1) throw ConfigError("partition.num_clients: must be >= 1");
    if (!cardinalities.empty() &&
        cardinalities.size() != static_cast<std::size_t>(num_clients)) {
      throw ConfigError("partition.cardinalities: need one entry per client");
    }
    for (std::size_t c : cardinalities) {
      if (c == 0) throw ConfigError("partition.cardinalities: entries must be >= 1");
    }
    if (mode == PartitionMode::LabelSkew && labels_per_client < 1) {
      throw ConfigError("partition.labels_per_client: must be >= 1");
    }
  }
};

// Gaussian class clusters with unit covariance. Class c is centered on
// coordinate axis (c mod input_dim); the placement keeps every pair of
// class means at least `separation` apart (exactly `separation` while
// classes fit on distinct axes). Examples are emitted class by class.
inline Dataset generate_blobs(int num_classes, int per_class, int input_dim, double separation,
                              std::uint64_t seed) {
  if (num_classes < 1 || per_class < 1 || input_dim < 1) {
    throw std::invalid_argument("generate_blobs: counts must be >= 1");
  }
  if (!(separation > 0.0)) {
    throw std::invalid_argument("generate_blobs: separation must be > 0");
  }

  Dataset data;
  data.num_features = static_cast<std::size_t>(input_dim);
  data.features.reserve(static_cast<std::size_t>(num_classes) * per_class * input_dim);
  data.labels.reserve(static_cast<std::size_t>(num_classes) * per_class);

  Rng rng(seed);
  const double base = separation / std::sqrt(2.0);
  for (int c = 0; c < num_classes; ++c) {
    const int axis = c % input_dim;
    const int level = c / input_dim;
    const double center = base + static_cast<double>(level) * separation;
    for (int n = 0; n < per_class; ++n) {
      for (int d = 0; d < input_dim; ++d) {
        const double mean = d == axis ? center : 0.0;
        data.features.push_back(mean + rng.normal());
      }
      data.labels.push_back(c);
    }
  }
  return data;
}

inline Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out;
  out.num_features = data.num_features;
  out.features.reserve(indices.size() * data.num_features);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.append_row(data.row(i), data.labels[i]);
  return out;
}

namespace detail {

// Example indices grouped by label, each group shuffled with a seed derived
// from the plan seed and the label.
inline std::vector<std::vector<std::size_t>> shuffled_label_pools(
    const std::vector<int>& labels, int num_classes, std::uint64_t seed) {
  std::vector<std::vector<std::size_t>> pools(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    pools[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  for (int l = 0; l < num_classes; ++l) {
    Rng rng(seed_mix(seed, 0x706f6f6cULL, static_cast<std::uint64_t>(l)));
    rng.shuffle(pools[static_cast<std::size_t>(l)]);
  }
  return pools;
}

inline int require_classes(const std::vector<int>& labels) {
  int max_label = -1;
  for (int l : labels) {
    if (l < 0) throw PartitionError("partition: negative label");
    max_label = std::max(max_label, l);
  }
  if (max_label < 0) throw PartitionError("partition: empty dataset");
  return max_label + 1;
}

}  // namespace detail

// Assigns example indices to clients so that every client's label histogram
// tracks the global histogram within one count per label. Each client's
// per-label quota starts at floor(cardinality * label_share); the remainder
// goes to the labels with the largest fractional share first. Throws
// PartitionError when the requested cardinalities cannot be served within
// that one-count tolerance.
inline std::vector<std::vector<std::size_t>> partition_iid_indices(
    const std::vector<int>& labels, const PartitionPlan& plan) {
  plan.validate();
  if (plan.mode != PartitionMode::IidBalanced) {
    throw std::invalid_argument("partition_iid: plan mode is not iid");
  }
  if (plan.cardinalities.empty()) {
    throw std::invalid_argument("partition_iid: plan cardinalities must be resolved");
  }
  const int num_classes = detail::require_classes(labels);
  const std::size_t total = labels.size();
  const std::size_t requested =
      std::accumulate(plan.cardinalities.begin(), plan.cardinalities.end(), std::size_t{0});
  if (requested > total) {
    throw PartitionError("partition: cardinalities request " + std::to_string(requested) +
                         " examples, dataset has " + std::to_string(total));
  }

  auto pools = detail::shuffled_label_pools(labels, num_classes, plan.seed);
  std::vector<std::size_t> next(pools.size(), 0);  // consumption cursor per pool

  std::vector<std::vector<std::size_t>> assignment(plan.cardinalities.size());
  for (std::size_t client = 0; client < plan.cardinalities.size(); ++client) {
    const double cardinality = static_cast<double>(plan.cardinalities[client]);
    std::vector<std::size_t> take(pools.size(), 0);
    std::size_t assigned = 0;

    std::vector<std::pair<double, int>> fractions;  // (fractional share, label)
    for (int l = 0; l < num_classes; ++l) {
      const std::size_t pool_size = pools[static_cast<std::size_t>(l)].size();
      const double target =
          cardinality * static_cast<double>(pool_size) / static_cast<double>(total);
      const std::size_t base = static_cast<std::size_t>(std::floor(target));
      const std::size_t available = pool_size - next[static_cast<std::size_t>(l)];
      take[static_cast<std::size_t>(l)] = std::min(base, available);
      assigned += take[static_cast<std::size_t>(l)];
      fractions.push_back({target - std::floor(target), l});
    }

    // Largest fractional share first; ties by label index for determinism.
    std::sort(fractions.begin(), fractions.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });

    // Keep cycling while any pool still has slack: late clients may need
    // more than one extra from a label once earlier clients drained the rest.
    bool progress = true;
    while (assigned < plan.cardinalities[client] && progress) {
      progress = false;
      for (const auto& [frac, l] : fractions) {
        if (assigned == plan.cardinalities[client]) break;
        const std::size_t available =
            pools[static_cast<std::size_t>(l)].size() - next[static_cast<std::size_t>(l)];
        if (take[static_cast<std::size_t>(l)] < available) {
          ++take[static_cast<std::size_t>(l)];
          ++assigned;
          progress = true;
        }
      }
    }
    if (assigned != plan.cardinalities[client]) {
      throw PartitionError("partition: cardinalities incompatible with per-label availability "
                           "(client " + std::to_string(client) + ")");
    }

    auto& mine = assignment[client];
    for (int l = 0; l < num_classes; ++l) {
      for (std::size_t k = 0; k < take[static_cast<std::size_t>(l)]; ++k) {
        mine.push_back(pools[static_cast<std::size_t>(l)][next[static_cast<std::size_t>(l)]++]);
      }
    }
    std::sort(mine.begin(), mine.end());
  }
  return assignment;
}

// Label-skew partition: each client draws from exactly `labels_per_client`
// labels, chosen by rotating through a seed-shuffled label order; its
// cardinality is spread as evenly as possible across those labels. Requires
// every client cardinality >= labels_per_client so the support is exact.
inline std::vector<std::vector<std::size_t>> partition_noniid_indices(
    const std::vector<int>& labels, const PartitionPlan& plan) {
  plan.validate();
  if (plan.mode != PartitionMode::LabelSkew) {
    throw std::invalid_argument("partition_noniid: plan mode is not label_skew");
  }
  if (plan.cardinalities.empty()) {
    throw std::invalid_argument("partition_noniid: plan cardinalities must be resolved");
  }
  const int num_classes = detail::require_classes(labels);
  const int skew = plan.labels_per_client;
  if (skew > num_classes) {
    throw PartitionError("partition: labels_per_client " + std::to_string(skew) +
                         " exceeds the " + std::to_string(num_classes) + " observed labels");
  }

  std::vector<int> label_order(static_cast<std::size_t>(num_classes));
  std::iota(label_order.begin(), label_order.end(), 0);
  Rng order_rng(seed_mix(plan.seed, 0x6f72646572ULL));
  order_rng.shuffle(label_order);

  // Per-client label support and per-label demand.
  const std::size_t num_clients = plan.cardinalities.size();
  std::vector<std::vector<std::pair<int, std::size_t>>> takes(num_clients);  // (label, count)
  std::vector<std::size_t> demand(static_cast<std::size_t>(num_classes), 0);
  for (std::size_t client = 0; client < num_clients; ++client) {
    const std::size_t cardinality = plan.cardinalities[client];
    if (cardinality < static_cast<std::size_t>(skew)) {
      throw PartitionError("partition: client " + std::to_string(client) + " cardinality " +
                           std::to_string(cardinality) + " is below labels_per_client " +
                           std::to_string(skew));
    }
    const std::size_t base = cardinality / static_cast<std::size_t>(skew);
    const std::size_t remainder = cardinality % static_cast<std::size_t>(skew);
    for (int j = 0; j < skew; ++j) {
      const int label = label_order[(client * static_cast<std::size_t>(skew) +
                                     static_cast<std::size_t>(j)) %
                                    static_cast<std::size_t>(num_classes)];
      const std::size_t count = base + (static_cast<std::size_t>(j) < remainder ? 1 : 0);
      takes[client].push_back({label, count});
      demand[static_cast<std::size_t>(label)] += count;
    }
  }

  auto pools = detail::shuffled_label_pools(labels, num_classes, plan.seed);
  for (int l = 0; l < num_classes; ++l) {
    if (demand[static_cast<std::size_t>(l)] > pools[static_cast<std::size_t>(l)].size()) {
      throw PartitionError("partition: label " + std::to_string(l) + " needs " +
                           std::to_string(demand[static_cast<std::size_t>(l)]) +
                           " examples, dataset has " +
                           std::to_string(pools[static_cast<std::size_t>(l)].size()));
    }
  }

  std::vector<std::size_t> next(pools.size(), 0);
  std::vector<std::vector<std::size_t>> assignment(num_clients);
  for (std::size_t client = 0; client < num_clients; ++client) {
    auto& mine = assignment[client];
    for (const auto& [label, count] : takes[client]) {
      for (std::size_t k = 0; k < count; ++k) {
        mine.push_back(pools[static_cast<std::size_t>(label)][next[static_cast<std::size_t>(label)]++]);
      }
    }
    std::sort(mine.begin(), mine.end());
  }
  return assignment;
}

inline std::vector<Dataset> materialize(const Dataset& data,
                                        const std::vector<std::vector<std::size_t>>& assignment) {
  std::vector<Dataset> clients;
  clients.reserve(assignment.size());
  for (const auto& indices : assignment) clients.push_back(subset(data, indices));
  return clients;
}

inline std::vector<Dataset> partition_iid(const Dataset& data, const PartitionPlan& plan) {
  return materialize(data, partition_iid_indices(data.labels, plan));
}

inline std::vector<Dataset> partition_noniid(const Dataset& data, const PartitionPlan& plan) {
  return materialize(data, partition_noniid_indices(data.labels, plan));
}

// Stratified split into (rest, holdout): per label, floor(fraction * count)
// examples go to the holdout.
inline std::pair<Dataset, Dataset> split_holdout(const Dataset& data, double fraction,
                                                 std::uint64_t seed) {
  if (!(fraction >= 0.0) || fraction >= 1.0) {
    throw std::invalid_argument("split_holdout: fraction must lie in [0, 1)");
  }
  const int num_classes = detail::require_classes(data.labels);
  auto pools = detail::shuffled_label_pools(data.labels, num_classes, seed);

  std::vector<std::size_t> holdout_indices;
  std::vector<std::size_t> rest_indices;
  for (const auto& pool : pools) {
    const std::size_t take =
        static_cast<std::size_t>(std::floor(fraction * static_cast<double>(pool.size())));
    for (std::size_t i = 0; i < pool.size(); ++i) {
      (i < take ? holdout_indices : rest_indices).push_back(pool[i]);
    }
  }
  std::sort(holdout_indices.begin(), holdout_indices.end());
  std::sort(rest_indices.begin(), rest_indices.end());
  return {subset(data, rest_indices), subset(data, holdout_indices)};
}

}  // namespace fedcontrol
