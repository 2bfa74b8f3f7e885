#pragma once

#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "motenc/data.hpp"
#include "motenc/error.hpp"
#include "motenc/model.hpp"
#include "motenc/nn.hpp"
#include "motenc/tensor.hpp"

namespace motenc {

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  std::size_t batch_size = 400;
  std::size_t epochs = 1;
  double dropout_start = 0.1;
  double dropout_end = 0.3;
  std::uint64_t seed = 0;
  bool input_dropout = true;       // temporal encoders
  bool classifier_dropout = false;
  bool pretrain = false;
  std::size_t pretrain_epochs = 0;
  std::ostream* log = nullptr;  // epoch lines, optional

  // Throws on hard errors, returns soft warnings (e.g. unusual batch size).
  std::vector<std::string> validate() const {
    // lr == 0 is legal and means "no update"; several callers rely on it.
    if (learning_rate < 0.0) throw ConfigError("learning rate must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) {
      throw ConfigError("momentum must be in [0, 1)");
    }
    if (weight_decay < 0.0) throw ConfigError("weight decay must be >= 0");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (!(dropout_start >= 0.0 && dropout_start <= dropout_end && dropout_end < 1.0)) {
      throw ConfigError("dropout schedule must satisfy 0 <= start <= end < 1");
    }
    std::vector<std::string> warnings;
    if (batch_size < 300 || batch_size > 500) {
      warnings.push_back("batch size " + std::to_string(batch_size) +
                         " is outside the usual 300-500 range");
    }
    return warnings;
  }
};

struct OptimizerState {
  std::vector<Tensor> velocity;
  std::size_t step_count = 0;

  static OptimizerState for_params(const std::vector<ParamView>& params) {
    OptimizerState s;
    s.velocity.reserve(params.size());
    for (const auto& p : params) s.velocity.emplace_back(p.value->shape());
    return s;
  }
};

// Momentum SGD with decoupled-from-bias weight decay:
//   v <- momentum*v - lr*(grad + wd*param);  param <- param + v
// Masked-dense weights are re-zeroed at masked positions after the update.
inline void sgd_momentum_step(const std::vector<ParamView>& params,
                              const std::vector<Tensor>& grads, OptimizerState& state,
                              const TrainConfig& config) {
  if (params.size() != grads.size() || params.size() != state.velocity.size()) {
    throw ShapeError("sgd_momentum_step: params/grads/state length mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& value = *params[i].value;
    const Tensor& grad = grads[i];
    Tensor& vel = state.velocity[i];
    if (!value.same_shape(grad) || !value.same_shape(vel)) {
      throw ShapeError("sgd_momentum_step: shape mismatch at parameter " +
                       std::to_string(i));
    }
    const double wd = params[i].is_bias ? 0.0 : config.weight_decay;
    for (std::size_t k = 0; k < value.size(); ++k) {
      vel[k] = config.momentum * vel[k] -
               config.learning_rate * (grad[k] + wd * value[k]);
      value[k] += vel[k];
    }
    if (params[i].mask) {
      const Tensor& mask = *params[i].mask;
      for (std::size_t k = 0; k < value.size(); ++k) {
        if (mask[k] == 0.0) value[k] = 0.0;
      }
    }
  }
  ++state.step_count;
}

// Linear ramp of the input dropout rate across epochs.
inline double dropout_rate_at(std::size_t epoch, std::size_t total_epochs,
                              const TrainConfig& config) {
  if (epoch >= total_epochs) {
    throw ParamError("dropout_rate_at: epoch " + std::to_string(epoch) +
                     " >= total " + std::to_string(total_epochs));
  }
  if (total_epochs == 1) return config.dropout_start;
  const double f = double(epoch) / double(total_epochs - 1);
  return config.dropout_start + f * (config.dropout_end - config.dropout_start);
}

// ---------------------------------------------------------------------------
// Backward through a whole network
// ---------------------------------------------------------------------------

namespace detail {

// Gradients for every parameter tensor, in collect_params order.
// `upstream_is_preact` marks the fused softmax/cross-entropy path where the
// loss gradient is already w.r.t. the last layer's logits.
inline std::vector<Tensor> network_backward(const Network& net, const ForwardTrace& trace,
                                            Tensor upstream, bool upstream_is_preact) {
  std::vector<std::size_t> offsets;
  std::size_t count = 0;
  for (const auto& nl : net.layers) {
    offsets.push_back(count);
    if (std::holds_alternative<ConvBank>(nl.layer)) {
      count += 2 * std::get<ConvBank>(nl.layer).branches.size();
    } else {
      count += 2;
    }
  }
  std::vector<Tensor> grads(count);

  for (std::size_t idx = net.layers.size(); idx-- > 0;) {
    const bool want_input = idx > 0;
    const bool last = idx + 1 == net.layers.size();
    const auto& nl = net.layers[idx];
    if (const auto* dense = std::get_if<DenseLayer>(&nl.layer)) {
      const auto& cache = std::get<DenseCache>(trace.layers[idx]);
      DenseGrads g;
      if (last && upstream_is_preact) {
        g = detail::dense_backward_from_preact(*dense, cache.input, upstream, want_input);
      } else {
        g = dense_backward(*dense, cache, upstream, want_input);
      }
      grads[offsets[idx]] = std::move(g.weights);
      grads[offsets[idx] + 1] = std::move(g.bias);
      upstream = std::move(g.input);
    } else if (const auto* masked = std::get_if<MaskedDenseLayer>(&nl.layer)) {
      const auto& cache = std::get<DenseCache>(trace.layers[idx]);
      DenseGrads g = masked_backward(*masked, cache, upstream, want_input);
      grads[offsets[idx]] = std::move(g.weights);
      grads[offsets[idx] + 1] = std::move(g.bias);
      upstream = std::move(g.input);
    } else {
      const auto& bank = std::get<ConvBank>(nl.layer);
      const auto& cache = std::get<ConvBankCache>(trace.layers[idx]);
      auto g = detail::conv_bank_backward(bank, cache, upstream, want_input);
      for (std::size_t b = 0; b < bank.branches.size(); ++b) {
        grads[offsets[idx] + 2 * b] = std::move(g.branches[b].filters);
        grads[offsets[idx] + 2 * b + 1] = std::move(g.branches[b].bias);
      }
      upstream = std::move(g.input);
    }
  }
  return grads;
}

inline Tensor gather_inputs(const std::vector<WindowPair>& pairs,
                            const std::vector<std::size_t>& order, std::size_t begin,
                            std::size_t end) {
  const Tensor& first = pairs[order[begin]].input;
  Tensor batch({end - begin, first.dim(0), first.dim(1), first.dim(2)});
  const std::size_t stride = first.size();
  for (std::size_t i = begin; i < end; ++i) {
    const Tensor& w = pairs[order[i]].input;
    std::copy(w.data(), w.data() + stride, batch.data() + (i - begin) * stride);
  }
  return batch;
}

inline Tensor gather_targets(const std::vector<WindowPair>& pairs,
                             const std::vector<std::size_t>& order, std::size_t begin,
                             std::size_t end) {
  const std::size_t stride = pairs[order[begin]].target.size();
  Tensor batch({end - begin, stride});
  for (std::size_t i = begin; i < end; ++i) {
    const Tensor& w = pairs[order[i]].target;
    std::copy(w.data(), w.data() + stride, batch.data() + (i - begin) * stride);
  }
  return batch;
}

inline void log_epoch(const TrainConfig& config, std::size_t epoch, double loss,
                      double dropout) {
  if (!config.log) return;
  *config.log << "epoch=" << epoch << " loss=" << format_double(loss)
              << " dropout=" << format_double(dropout)
              << " lr=" << format_double(config.learning_rate) << "\n";
}

// Shared MSE training loop over window pairs; used by train_te and by the
// layerwise pretraining rounds.
inline std::vector<double> train_windows_mse(Network& net,
                                             const std::vector<WindowPair>& pairs,
                                             const TrainConfig& config) {
  if (pairs.empty()) throw ConfigError("training requires a non-empty dataset");
  config.validate();
  auto params = collect_params(net);
  OptimizerState state = OptimizerState::for_params(params);
  SeededRng rng(config.seed);
  SeededRng shuffle_rng = rng.derive(0x5348);   // "SH"
  SeededRng dropout_rng = rng.derive(0x4452);   // "DR"

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<double> history;
  history.reserve(config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double rate =
        config.input_dropout ? dropout_rate_at(epoch, config.epochs, config) : 0.0;
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      Tensor inputs = gather_inputs(pairs, order, begin, end);
      Tensor targets = gather_targets(pairs, order, begin, end);
      if (rate > 0.0) {
        inputs = dropout_forward(inputs, rate, dropout_rng).output;
      }
      ForwardTrace trace;
      const Tensor pred = network_forward(net, inputs, &trace);
      LossValue loss = mse_loss(pred, targets);
      if (!std::isfinite(loss.scalar)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += loss.scalar * double(end - begin);
      const auto grads = network_backward(net, trace, std::move(loss.gradient), false);
      sgd_momentum_step(params, grads, state, config);
    }
    epoch_loss /= double(pairs.size());
    history.push_back(epoch_loss);
    log_epoch(config, epoch, epoch_loss, rate);
    net.meta.last_dropout_rate = rate;
  }
  net.meta.epochs_completed += config.epochs;
  net.meta.seed = config.seed;
  return history;
}

}  // namespace detail

// Trains a temporal encoder to predict the target window from the input
// window. Deterministic given (seed, config, dataset) on a single thread.
inline std::vector<double> train_te(Network& net, const std::vector<WindowPair>& pairs,
                                    const TrainConfig& config) {
  if (!net.is_temporal_encoder()) {
    throw ConfigError("train_te: network is a classifier");
  }
  return detail::train_windows_mse(net, pairs, config);
}

// Softmax cross-entropy training for a feature classifier. Input dropout is
// off unless classifier_dropout is set.
inline std::vector<double> train_classifier(Network& clf, const Tensor& features,
                                            const std::vector<std::size_t>& labels,
                                            const TrainConfig& config) {
  if (clf.spec.kind != ArchKind::classifier) {
    throw ConfigError("train_classifier: network is not a classifier");
  }
  if (features.rank() != 2 || features.dim(0) != labels.size()) {
    throw ConfigError("train_classifier: " + std::to_string(labels.size()) +
                      " labels for " + shape_str(features.shape()) + " features");
  }
  config.validate();
  auto params = collect_params(clf);
  OptimizerState state = OptimizerState::for_params(params);
  SeededRng rng(config.seed);
  SeededRng shuffle_rng = rng.derive(0x5348);
  SeededRng dropout_rng = rng.derive(0x4452);

  const std::size_t rows = features.dim(0), width = features.dim(1);
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<double> history;
  history.reserve(config.epochs);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double rate =
        config.classifier_dropout ? dropout_rate_at(epoch, config.epochs, config) : 0.0;
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < rows; begin += config.batch_size) {
      const std::size_t end = std::min(rows, begin + config.batch_size);
      Tensor batch({end - begin, width});
      std::vector<std::size_t> batch_labels(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        std::copy(features.data() + order[i] * width,
                  features.data() + (order[i] + 1) * width,
                  batch.data() + (i - begin) * width);
        batch_labels[i - begin] = labels[order[i]];
      }
      if (rate > 0.0) batch = dropout_forward(batch, rate, dropout_rng).output;
      ForwardTrace trace;
      network_forward(clf, batch, &trace);
      const auto& last = std::get<DenseCache>(trace.layers.back());
      LossValue loss = softmax_cross_entropy(last.preact, batch_labels);
      if (!std::isfinite(loss.scalar)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch));
      }
      epoch_loss += loss.scalar * double(end - begin);
      const auto grads = detail::network_backward(clf, trace, std::move(loss.gradient), true);
      sgd_momentum_step(params, grads, state, config);
    }
    epoch_loss /= double(rows);
    history.push_back(epoch_loss);
    detail::log_epoch(config, epoch, epoch_loss, rate);
  }
  clf.meta.epochs_completed += config.epochs;
  clf.meta.seed = config.seed;
  return history;
}

// Greedy layerwise pretraining: for each encoder prefix, train it as a
// shallow temporal encoder with a throwaway linear decoder, then keep the
// prefix weights. Joint training afterwards is still expected.
inline void pretrain_layerwise(Network& net, const std::vector<WindowPair>& pairs,
                               const TrainConfig& config) {
  if (!net.is_temporal_encoder()) {
    throw ConfigError("pretrain_layerwise: network is a classifier");
  }
  const auto middle = net.taps.find("middle");
  if (middle == net.taps.end()) throw ConfigError("pretrain_layerwise: no bottleneck tap");
  const std::size_t encoder_depth = middle->second + 1;
  if (encoder_depth < 2) throw ConfigError("pretrain_layerwise: encoder too shallow");
  if (config.pretrain_epochs == 0) return;

  const std::size_t out_size = net.spec.input_size();
  for (std::size_t k = 1; k <= encoder_depth; ++k) {
    Network sub;
    sub.spec = net.spec;
    sub.layers.assign(net.layers.begin(), net.layers.begin() + std::ptrdiff_t(k));
    SeededRng dec_rng = SeededRng(config.seed).derive(0xB000 + k);
    const std::size_t width = layer_output_width(sub.layers.back());
    sub.layers.push_back(
        {"pretrain_decoder",
         make_dense(dec_rng, width, out_size, Activation::linear,
                    std::min(net.spec.init_nonzeros, width), net.spec.init_std)});
    TrainConfig sub_config = config;
    sub_config.epochs = config.pretrain_epochs;
    sub_config.seed = SeededRng(config.seed).derive(0xC000 + k).seed();
    sub_config.log = nullptr;
    detail::train_windows_mse(sub, pairs, sub_config);
    for (std::size_t i = 0; i < k; ++i) net.layers[i] = sub.layers[i];
  }
  net.meta.note += (net.meta.note.empty() ? "" : "; ");
  net.meta.note += "layerwise pretraining (" + std::to_string(config.pretrain_epochs) +
                   " epochs/stage)";
}

// Action-specific fine-tuning: continue training at a tenth of the learning
// rate with a fresh optimizer state, and record the provenance.
inline std::vector<double> finetune(Network& net, const std::vector<WindowPair>& pairs,
                                    const TrainConfig& config,
                                    const std::string& note = "") {
  TrainConfig ft = config;
  ft.learning_rate = config.learning_rate / 10.0;
  net.meta.finetuned = true;
  net.meta.note += (net.meta.note.empty() ? "" : "; ");
  net.meta.note += note.empty() ? std::string("fine-tuned") : ("fine-tuned: " + note);
  return train_te(net, pairs, ft);
}

}  // namespace motenc
