#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedcontrol/dataset.hpp"
#include "fedcontrol/errors.hpp"
#include "fedcontrol/param_vector.hpp"
#include "fedcontrol/rng.hpp"

namespace fedcontrol {

enum class ModelKind { MultinomialLogistic, Mlp };

inline const char* to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::MultinomialLogistic: return "logistic";
    case ModelKind::Mlp: return "mlp";
  }
  return "unknown";
}

struct LayerShape {
  int in;
  int out;
};

// Architecture of a differentiable classifier with analytic loss and
// gradient. A multinomial logistic model is a single affine layer into
// softmax cross-entropy; the MLP inserts ReLU hidden layers.
struct ModelSpec {
  ModelKind kind = ModelKind::MultinomialLogistic;
  int input_dim = 0;
  int num_classes = 0;
  std::vector<int> hidden_dims;  // MLP only
  std::uint64_t init_seed = 0;

  void validate() const {
    if (input_dim < 1) throw ConfigError("model.input_dim: must be >= 1");
    if (num_classes < 2) throw ConfigError("model.num_classes: must be >= 2");
    if (kind == ModelKind::MultinomialLogistic && !hidden_dims.empty()) {
      throw ConfigError("model.hidden_dims: only valid for kind=mlp");
    }
    if (kind == ModelKind::Mlp) {
      if (hidden_dims.empty()) throw ConfigError("model.hidden_dims: mlp needs >= 1 hidden layer");
      for (int h : hidden_dims) {
        if (h < 1) throw ConfigError("model.hidden_dims: layer sizes must be >= 1");
      }
    }
  }

  std::vector<LayerShape> layers() const {
    std::vector<LayerShape> shapes;
    int in = input_dim;
    for (int h : hidden_dims) {
      shapes.push_back({in, h});
      in = h;
    }
    shapes.push_back({in, num_classes});
    return shapes;
  }

  std::size_t param_count() const {
    std::size_t count = 0;
    for (const auto& shape : layers()) {
      count += static_cast<std::size_t>(shape.out) * static_cast<std::size_t>(shape.in) +
               static_cast<std::size_t>(shape.out);
    }
    return count;
  }
};

// Views of one layer inside the flat parameter vector: weights are
// row-major (out x in), followed by the bias. The views of all layers tile
// the vector exactly; tests rely on that to prove the flat layout lossless.
template <typename Scalar>
struct LayerViewT {
  std::span<Scalar> weights;
  std::span<Scalar> bias;
  LayerShape shape;
};
using LayerView = LayerViewT<double>;
using ConstLayerView = LayerViewT<const double>;

namespace detail {

template <typename Scalar, typename Vector>
std::vector<LayerViewT<Scalar>> make_layer_views(const ModelSpec& spec, Vector& params) {
  if (params.size() != spec.param_count()) {
    throw ShapeError("model: parameter vector has dimension " + std::to_string(params.size()) +
                     ", expected " + std::to_string(spec.param_count()));
  }
  std::vector<LayerViewT<Scalar>> views;
  std::size_t offset = 0;
  for (const auto& shape : spec.layers()) {
    const std::size_t w = static_cast<std::size_t>(shape.out) * static_cast<std::size_t>(shape.in);
    const std::size_t b = static_cast<std::size_t>(shape.out);
    views.push_back({{params.data() + offset, w}, {params.data() + offset + w, b}, shape});
    offset += w + b;
  }
  return views;
}

}  // namespace detail

inline std::vector<LayerView> layer_views(const ModelSpec& spec, ParamVector& params) {
  return detail::make_layer_views<double>(spec, params);
}

inline std::vector<ConstLayerView> layer_views(const ModelSpec& spec, const ParamVector& params) {
  return detail::make_layer_views<const double>(spec, params);
}

// Deterministic initialization: every entry of a layer, bias included, is
// drawn uniformly from [-a, a) with a = sqrt(6 / (fan_in + fan_out)).
inline ParamVector init_params(const ModelSpec& spec) {
  spec.validate();
  ParamVector params(spec.param_count());
  Rng rng(spec.init_seed);
  std::size_t offset = 0;
  for (const auto& shape : spec.layers()) {
    const double bound = std::sqrt(6.0 / static_cast<double>(shape.in + shape.out));
    const std::size_t count =
        static_cast<std::size_t>(shape.out) * static_cast<std::size_t>(shape.in) +
        static_cast<std::size_t>(shape.out);
    for (std::size_t i = 0; i < count; ++i) {
      params[offset + i] = rng.uniform_double(-bound, bound);
    }
    offset += count;
  }
  return params;
}

namespace detail {

// Scratch buffers reused across examples.
struct ModelWorkspace {
  std::vector<std::vector<double>> acts;  // post-ReLU hidden activations
  std::vector<double> logits;
  std::vector<double> probs;
  std::vector<double> delta;
  std::vector<double> delta_prev;

  explicit ModelWorkspace(const ModelSpec& spec) {
    const auto shapes = spec.layers();
    acts.resize(shapes.size() > 0 ? shapes.size() - 1 : 0);
    std::size_t widest = static_cast<std::size_t>(spec.input_dim);
    for (std::size_t l = 0; l + 1 < shapes.size(); ++l) {
      acts[l].resize(static_cast<std::size_t>(shapes[l].out));
      widest = std::max(widest, static_cast<std::size_t>(shapes[l].out));
    }
    logits.resize(static_cast<std::size_t>(spec.num_classes));
    probs.resize(static_cast<std::size_t>(spec.num_classes));
    delta.resize(std::max(widest, static_cast<std::size_t>(spec.num_classes)));
    delta_prev.resize(std::max(widest, static_cast<std::size_t>(spec.num_classes)));
  }
};

template <typename Scalar>
inline void affine(const LayerViewT<Scalar>& layer, std::span<const double> in,
                   std::span<double> out) {
  for (int j = 0; j < layer.shape.out; ++j) {
    double acc = layer.bias[static_cast<std::size_t>(j)];
    const Scalar* row = layer.weights.data() + static_cast<std::size_t>(j) * layer.shape.in;
    for (int i = 0; i < layer.shape.in; ++i) acc += row[i] * in[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(j)] = acc;
  }
}

// Runs the network on one example, leaving hidden activations and logits in
// the workspace.
template <typename Views>
inline void forward_example(const Views& views, std::span<const double> x, ModelWorkspace& ws) {
  std::span<const double> current = x;
  for (std::size_t l = 0; l + 1 < views.size(); ++l) {
    affine(views[l], current, ws.acts[l]);
    for (double& a : ws.acts[l]) a = a > 0.0 ? a : 0.0;  // ReLU
    current = ws.acts[l];
  }
  affine(views.back(), current, ws.logits);
}

// Stable softmax cross-entropy of the logits currently in the workspace;
// also fills ws.probs.
inline double softmax_cross_entropy(ModelWorkspace& ws, int label) {
  double max_logit = ws.logits[0];
  for (double z : ws.logits) max_logit = std::max(max_logit, z);
  double sum = 0.0;
  for (std::size_t c = 0; c < ws.logits.size(); ++c) {
    ws.probs[c] = std::exp(ws.logits[c] - max_logit);
    sum += ws.probs[c];
  }
  for (double& p : ws.probs) p /= sum;
  return std::log(sum) + max_logit - ws.logits[static_cast<std::size_t>(label)];
}

inline void check_inputs(const ModelSpec& spec, const ParamVector& params, const Dataset& data) {
  if (data.empty()) throw EmptyDataError("model: dataset is empty");
  if (data.num_features != static_cast<std::size_t>(spec.input_dim)) {
    throw ShapeError("model: dataset has " + std::to_string(data.num_features) +
                     " features, model expects " + std::to_string(spec.input_dim));
  }
  if (params.size() != spec.param_count()) {
    throw ShapeError("model: parameter vector has dimension " + std::to_string(params.size()) +
                     ", expected " + std::to_string(spec.param_count()));
  }
  for (int label : data.labels) {
    if (label < 0 || label >= spec.num_classes) {
      throw std::invalid_argument("model: label " + std::to_string(label) +
                                  " outside [0, " + std::to_string(spec.num_classes) + ")");
    }
  }
}

}  // namespace detail

// Mean softmax cross-entropy over the examples selected by `indices`.
inline double loss_on(const ModelSpec& spec, const ParamVector& params, const Dataset& data,
                      std::span<const std::size_t> indices) {
  detail::check_inputs(spec, params, data);
  if (indices.empty()) throw EmptyDataError("model: no examples selected");
  const auto views = layer_views(spec, params);
  detail::ModelWorkspace ws(spec);
  double total = 0.0;
  for (std::size_t i : indices) {
    detail::forward_example(views, data.row(i), ws);
    total += detail::softmax_cross_entropy(ws, data.labels[i]);
  }
  return total / static_cast<double>(indices.size());
}

inline double loss(const ModelSpec& spec, const ParamVector& params, const Dataset& data) {
  detail::check_inputs(spec, params, data);
  const auto views = layer_views(spec, params);
  detail::ModelWorkspace ws(spec);
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    detail::forward_example(views, data.row(i), ws);
    total += detail::softmax_cross_entropy(ws, data.labels[i]);
  }
  return total / static_cast<double>(data.size());
}

// Analytic gradient of the mean loss over the selected examples, flattened
// to the same layout as the parameter vector.
inline ParamVector gradient_on(const ModelSpec& spec, const ParamVector& params,
                               const Dataset& data, std::span<const std::size_t> indices) {
  detail::check_inputs(spec, params, data);
  if (indices.empty()) throw EmptyDataError("model: no examples selected");

  const auto views = layer_views(spec, params);
  ParamVector grad(params.size(), 0.0);
  auto grad_views = layer_views(spec, grad);
  detail::ModelWorkspace ws(spec);
  const std::size_t num_layers = views.size();

  for (std::size_t i : indices) {
    const auto x = data.row(i);
    detail::forward_example(views, x, ws);
    detail::softmax_cross_entropy(ws, data.labels[i]);

    // dL/dlogits
    for (int c = 0; c < spec.num_classes; ++c) {
      ws.delta[static_cast<std::size_t>(c)] =
          ws.probs[static_cast<std::size_t>(c)] - (c == data.labels[i] ? 1.0 : 0.0);
    }

    for (std::size_t l = num_layers; l-- > 0;) {
      const auto& layer = views[l];
      auto& layer_grad = grad_views[l];
      const std::span<const double> input = l == 0 ? x : std::span<const double>(ws.acts[l - 1]);

      for (int j = 0; j < layer.shape.out; ++j) {
        const double d = ws.delta[static_cast<std::size_t>(j)];
        double* grad_row = layer_grad.weights.data() + static_cast<std::size_t>(j) * layer.shape.in;
        for (int k = 0; k < layer.shape.in; ++k) grad_row[k] += d * input[static_cast<std::size_t>(k)];
        layer_grad.bias[static_cast<std::size_t>(j)] += d;
      }

      if (l > 0) {
        // Backpropagate through the ReLU of the previous hidden layer.
        for (int k = 0; k < layer.shape.in; ++k) {
          double acc = 0.0;
          for (int j = 0; j < layer.shape.out; ++j) {
            acc += layer.weights[static_cast<std::size_t>(j) * layer.shape.in + k] *
                   ws.delta[static_cast<std::size_t>(j)];
          }
          ws.delta_prev[static_cast<std::size_t>(k)] =
              ws.acts[l - 1][static_cast<std::size_t>(k)] > 0.0 ? acc : 0.0;
        }
        std::swap(ws.delta, ws.delta_prev);
      }
    }
  }

  const double scale = 1.0 / static_cast<double>(indices.size());
  for (double& g : grad) g *= scale;
  return grad;
}

inline ParamVector gradient(const ModelSpec& spec, const ParamVector& params,
                            const Dataset& batch) {
  std::vector<std::size_t> all(batch.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return gradient_on(spec, params, batch, all);
}

// Predicted class of one example; ties resolve to the lowest class index.
inline int predict(const ModelSpec& spec, const ParamVector& params, std::span<const double> x) {
  const auto views = layer_views(spec, params);
  detail::ModelWorkspace ws(spec);
  detail::forward_example(views, x, ws);
  int best = 0;
  for (int c = 1; c < spec.num_classes; ++c) {
    if (ws.logits[static_cast<std::size_t>(c)] > ws.logits[static_cast<std::size_t>(best)]) {
      best = c;
    }
  }
  return best;
}

// Fraction of argmax-correct predictions.
inline double accuracy(const ModelSpec& spec, const ParamVector& params, const Dataset& data) {
  detail::check_inputs(spec, params, data);
  const auto views = layer_views(spec, params);
  detail::ModelWorkspace ws(spec);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    detail::forward_example(views, data.row(i), ws);
    int best = 0;
    for (int c = 1; c < spec.num_classes; ++c) {
      if (ws.logits[static_cast<std::size_t>(c)] > ws.logits[static_cast<std::size_t>(best)]) {
        best = c;
      }
    }
    if (best == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace fedcontrol
