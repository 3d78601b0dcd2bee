#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace fedcontrol {

// Labeled examples with a flat row-major feature matrix. Used both for the
// full corpus and for the slice a single client holds.
struct Dataset {
  std::vector<double> features;  // size() * num_features, row-major
  std::size_t num_features = 0;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  bool empty() const { return labels.empty(); }

  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * num_features, num_features};
  }

  void append_row(std::span<const double> row_features, int label) {
    if (row_features.size() != num_features) {
      throw std::invalid_argument("dataset: row width does not match num_features");
    }
    features.insert(features.end(), row_features.begin(), row_features.end());
    labels.push_back(label);
  }

  // Highest label value + 1; 0 for an empty dataset.
  int observed_classes() const {
    int max_label = -1;
    for (int label : labels) {
      if (label > max_label) max_label = label;
    }
    return max_label + 1;
  }
};

}  // namespace fedcontrol
