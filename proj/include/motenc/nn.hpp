#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "motenc/error.hpp"
#include "motenc/tensor.hpp"

namespace motenc {

enum class Activation { linear, sigmoid, softmax };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "linear") return Activation::linear;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "softmax") return Activation::softmax;
  throw ParamError("unknown activation: " + s);
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace detail {

// In-place activation over a [B x D] batch. Softmax is stabilised per row.
inline void apply_activation(Activation act, Tensor& z) {
  switch (act) {
    case Activation::linear:
      return;
    case Activation::sigmoid:
      for (double& v : z.values()) v = sigmoid(v);
      return;
    case Activation::softmax: {
      const std::size_t rows = z.dim(0), cols = z.dim(1);
      for (std::size_t i = 0; i < rows; ++i) {
        double* row = z.data() + i * cols;
        double mx = row[0];
        for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
          row[j] = std::exp(row[j] - mx);
          denom += row[j];
        }
        for (std::size_t j = 0; j < cols; ++j) row[j] /= denom;
      }
      return;
    }
  }
}

// dL/dz from dL/dy and the layer output y. For softmax this is the full
// Jacobian-vector product; the fused cross-entropy path below bypasses it.
inline Tensor activation_backward(Activation act, const Tensor& output,
                                  const Tensor& upstream) {
  switch (act) {
    case Activation::linear:
      return upstream;
    case Activation::sigmoid: {
      Tensor dz = upstream;
      for (std::size_t i = 0; i < dz.size(); ++i) {
        const double y = output[i];
        dz[i] *= y * (1.0 - y);
      }
      return dz;
    }
    case Activation::softmax: {
      Tensor dz = upstream;
      const std::size_t rows = output.dim(0), cols = output.dim(1);
      for (std::size_t i = 0; i < rows; ++i) {
        const double* p = output.data() + i * cols;
        double* g = dz.data() + i * cols;
        double dot = 0.0;
        for (std::size_t j = 0; j < cols; ++j) dot += g[j] * p[j];
        for (std::size_t j = 0; j < cols; ++j) g[j] = p[j] * (g[j] - dot);
      }
      return dz;
    }
  }
  return upstream;
}

inline void add_bias_rows(Tensor& z, const Tensor& bias) {
  const std::size_t rows = z.dim(0), cols = z.dim(1);
  for (std::size_t i = 0; i < rows; ++i) {
    double* row = z.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) row[j] += bias[j];
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dense layer
// ---------------------------------------------------------------------------

struct DenseLayer {
  Tensor weights;  // [fan_in x fan_out]
  Tensor bias;     // [fan_out]
  Activation activation = Activation::sigmoid;

  std::size_t fan_in() const { return weights.dim(0); }
  std::size_t fan_out() const { return weights.dim(1); }

  void validate() const {
    if (weights.rank() != 2 || bias.rank() != 1 || bias.dim(0) != weights.dim(1)) {
      throw ShapeError("dense layer: bias " + shape_str(bias.shape()) +
                       " does not match weights " + shape_str(weights.shape()));
    }
  }
};

inline DenseLayer make_dense(SeededRng& rng, std::size_t fan_in, std::size_t fan_out,
                             Activation act, std::size_t nonzeros, double std) {
  DenseLayer l;
  l.weights = sample_sparse_gaussian(rng, fan_in, fan_out,
                                     std::min(nonzeros, fan_in), std);
  l.bias = Tensor({fan_out});
  l.activation = act;
  return l;
}

struct DenseCache {
  Tensor input;   // [B x fan_in]
  Tensor output;  // [B x fan_out], post-activation
  Tensor preact;  // kept only for softmax layers (fused loss needs logits)
};

struct DenseGrads {
  Tensor input;    // [B x fan_in]
  Tensor weights;  // [fan_in x fan_out]
  Tensor bias;     // [fan_out]
};

inline Tensor dense_forward(const DenseLayer& layer, const Tensor& input,
                            DenseCache* cache = nullptr) {
  if (input.rank() != 2 || input.dim(1) != layer.fan_in()) {
    throw ShapeError("dense_forward: input " + shape_str(input.shape()) +
                     " does not match weights " + shape_str(layer.weights.shape()));
  }
  Tensor z = matmul(input, layer.weights);
  detail::add_bias_rows(z, layer.bias);
  if (cache) {
    cache->input = input;
    if (layer.activation == Activation::softmax) cache->preact = z;
  }
  detail::apply_activation(layer.activation, z);
  if (cache) cache->output = z;
  return z;
}

namespace detail {

// Gradients given dL/dz (pre-activation). Shared by the plain and the fused
// softmax–cross-entropy paths.
inline DenseGrads dense_backward_from_preact(const DenseLayer& layer,
                                             const Tensor& input, const Tensor& dz,
                                             bool want_input_grad = true) {
  DenseGrads g;
  g.weights = matmul_tn(input, dz);
  g.bias = Tensor({layer.fan_out()});
  const std::size_t rows = dz.dim(0), cols = dz.dim(1);
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = dz.data() + i * cols;
    for (std::size_t j = 0; j < cols; ++j) g.bias[j] += row[j];
  }
  if (want_input_grad) g.input = matmul_nt(dz, layer.weights);
  return g;
}

}  // namespace detail

inline DenseGrads dense_backward(const DenseLayer& layer, const DenseCache& cache,
                                 const Tensor& upstream, bool want_input_grad = true) {
  if (!upstream.same_shape(cache.output)) {
    throw ShapeError("dense_backward: upstream " + shape_str(upstream.shape()) +
                     " does not match output " + shape_str(cache.output.shape()));
  }
  const Tensor dz =
      detail::activation_backward(layer.activation, cache.output, upstream);
  return detail::dense_backward_from_preact(layer, cache.input, dz, want_input_grad);
}

// Convenience form: recomputes the forward pass internally.
inline DenseGrads dense_backward(const DenseLayer& layer, const Tensor& input,
                                 const Tensor& upstream) {
  DenseCache cache;
  dense_forward(layer, input, &cache);
  return dense_backward(layer, cache, upstream);
}

// ---------------------------------------------------------------------------
// Temporal convolution
// ---------------------------------------------------------------------------
//
// Filters span the full 3 x N_joints slab and slide along time only.
// Valid positions, stride 1, no padding: P = delta_t - filter_width + 1.
// Filter rows are laid out (channel, joint, tap) to match the row-major
// flattening of a window, so a filter of width delta_t is exactly a dense
// layer on the flattened window.

struct TemporalConvLayer {
  std::size_t num_filters = 0;   // N
  std::size_t filter_width = 0;  // taps along time
  std::size_t num_joints = 0;
  Tensor filter_weights;  // [N x 3*num_joints*filter_width]
  Tensor bias;            // [N]
  Activation activation = Activation::sigmoid;

  std::size_t patch_size() const { return 3 * num_joints * filter_width; }

  void validate() const {
    if (filter_weights.rank() != 2 || filter_weights.dim(0) != num_filters ||
        filter_weights.dim(1) != patch_size() || bias.dim(0) != num_filters) {
      throw ShapeError("temporal conv layer: inconsistent parameter shapes");
    }
  }
};

inline TemporalConvLayer make_temporal_conv(SeededRng& rng, std::size_t num_filters,
                                            std::size_t filter_width,
                                            std::size_t num_joints, Activation act,
                                            std::size_t nonzeros, double std) {
  TemporalConvLayer l;
  l.num_filters = num_filters;
  l.filter_width = filter_width;
  l.num_joints = num_joints;
  const std::size_t patch = 3 * num_joints * filter_width;
  // Columns of the sampled matrix become filter rows.
  l.filter_weights =
      transpose(sample_sparse_gaussian(rng, patch, num_filters,
                                       std::min(nonzeros, patch), std));
  l.bias = Tensor({num_filters});
  l.activation = act;
  return l;
}

struct ConvCache {
  Tensor input;   // [B x 3 x J x delta_t]
  Tensor output;  // [B x N x P], post-activation
};

struct ConvGrads {
  Tensor input;    // [B x 3 x J x delta_t]
  Tensor filters;  // [N x 3*J*W]
  Tensor bias;     // [N]
};

namespace detail {

// Gather the W-frame slab ending the patch for every valid position into a
// [P x 3*J*W] matrix, rows ordered by position, columns (c, j, tap).
inline void im2col_sample(const Tensor& window, std::size_t b, std::size_t width,
                          Tensor& cols) {
  const std::size_t joints = window.dim(2), dt = window.dim(3);
  const std::size_t positions = dt - width + 1;
  const double* base = window.data() + b * 3 * joints * dt;
  for (std::size_t p = 0; p < positions; ++p) {
    double* out = cols.data() + p * cols.dim(1);
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t j = 0; j < joints; ++j) {
        const double* src = base + (c * joints + j) * dt + p;
        for (std::size_t w = 0; w < width; ++w) *out++ = src[w];
      }
    }
  }
}

inline void col2im_sample(const Tensor& cols, std::size_t b, std::size_t width,
                          Tensor& grad_window) {
  const std::size_t joints = grad_window.dim(2), dt = grad_window.dim(3);
  const std::size_t positions = dt - width + 1;
  double* base = grad_window.data() + b * 3 * joints * dt;
  for (std::size_t p = 0; p < positions; ++p) {
    const double* in = cols.data() + p * cols.dim(1);
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t j = 0; j < joints; ++j) {
        double* dst = base + (c * joints + j) * dt + p;
        for (std::size_t w = 0; w < width; ++w) dst[w] += in[w];
        in += width;
      }
    }
  }
}

inline void check_conv_input(const TemporalConvLayer& layer, const Tensor& window) {
  if (window.rank() != 4 || window.dim(1) != 3 ||
      window.dim(2) != layer.num_joints) {
    throw ShapeError("temporal_conv: window " + shape_str(window.shape()) +
                     " does not match layer (joints=" +
                     std::to_string(layer.num_joints) + ")");
  }
  if (layer.filter_width > window.dim(3)) {
    throw ParamError("temporal_conv: filter width " +
                     std::to_string(layer.filter_width) + " exceeds window length " +
                     std::to_string(window.dim(3)));
  }
}

}  // namespace detail

inline Tensor temporal_conv_forward(const TemporalConvLayer& layer,
                                    const Tensor& window, ConvCache* cache = nullptr) {
  layer.validate();
  detail::check_conv_input(layer, window);
  const std::size_t batch = window.dim(0), dt = window.dim(3);
  const std::size_t positions = dt - layer.filter_width + 1;
  Tensor out({batch, layer.num_filters, positions});
  Tensor cols({positions, layer.patch_size()});
  Tensor out_b({layer.num_filters, positions});
  for (std::size_t b = 0; b < batch; ++b) {
    detail::im2col_sample(window, b, layer.filter_width, cols);
    matmul_nt_into(out_b, layer.filter_weights, cols);
    double* dst = out.data() + b * layer.num_filters * positions;
    for (std::size_t n = 0; n < layer.num_filters; ++n) {
      const double bn = layer.bias[n];
      for (std::size_t p = 0; p < positions; ++p)
        dst[n * positions + p] = out_b(n, p) + bn;
    }
  }
  if (cache) cache->input = window;
  if (layer.activation == Activation::sigmoid) {
    for (double& v : out.values()) v = sigmoid(v);
  }
  if (cache) cache->output = out;
  return out;
}

inline ConvGrads temporal_conv_backward(const TemporalConvLayer& layer,
                                        const ConvCache& cache, const Tensor& upstream,
                                        bool want_input_grad = true) {
  if (!upstream.same_shape(cache.output)) {
    throw ShapeError("temporal_conv_backward: upstream " +
                     shape_str(upstream.shape()) + " does not match output " +
                     shape_str(cache.output.shape()));
  }
  const std::size_t batch = cache.input.dim(0), dt = cache.input.dim(3);
  const std::size_t positions = dt - layer.filter_width + 1;

  // dL/dz with the sigmoid folded in.
  Tensor dz = upstream;
  if (layer.activation == Activation::sigmoid) {
    for (std::size_t i = 0; i < dz.size(); ++i) {
      const double y = cache.output[i];
      dz[i] *= y * (1.0 - y);
    }
  }

  ConvGrads g;
  g.filters = Tensor({layer.num_filters, layer.patch_size()});
  g.bias = Tensor({layer.num_filters});
  if (want_input_grad) g.input = Tensor(cache.input.shape());

  Tensor cols({positions, layer.patch_size()});
  Tensor grad_cols({positions, layer.patch_size()});
  for (std::size_t b = 0; b < batch; ++b) {
    Tensor dz_b({layer.num_filters, positions},
                std::vector<double>(dz.data() + b * layer.num_filters * positions,
                                    dz.data() + (b + 1) * layer.num_filters * positions));
    detail::im2col_sample(cache.input, b, layer.filter_width, cols);
    matmul_into(g.filters, dz_b, cols, /*accumulate=*/true);
    for (std::size_t n = 0; n < layer.num_filters; ++n) {
      for (std::size_t p = 0; p < positions; ++p) g.bias[n] += dz_b(n, p);
    }
    if (want_input_grad) {
      matmul_tn_into(grad_cols, dz_b, layer.filter_weights);
      detail::col2im_sample(grad_cols, b, layer.filter_width, g.input);
    }
  }
  return g;
}

inline ConvGrads temporal_conv_backward(const TemporalConvLayer& layer,
                                        const Tensor& window, const Tensor& upstream) {
  ConvCache cache;
  temporal_conv_forward(layer, window, &cache);
  return temporal_conv_backward(layer, cache, upstream);
}

// ---------------------------------------------------------------------------
// Masked dense layer
// ---------------------------------------------------------------------------
//
// A dense layer whose weights are pinned to zero wherever the mask is zero.
// The zero pattern is an invariant: init respects it, forward can use the
// weights as-is, and backward masks the weight gradient so no update path
// can repopulate a masked entry.

struct MaskedDenseLayer {
  Tensor weights;
  Tensor bias;
  Tensor mask;  // same shape as weights, entries 0 or 1
  Activation activation = Activation::sigmoid;

  std::size_t fan_in() const { return weights.dim(0); }
  std::size_t fan_out() const { return weights.dim(1); }

  void validate() const {
    if (!mask.same_shape(weights)) {
      throw ShapeError("masked dense layer: mask " + shape_str(mask.shape()) +
                       " does not match weights " + shape_str(weights.shape()));
    }
    if (bias.rank() != 1 || bias.dim(0) != weights.dim(1)) {
      throw ShapeError("masked dense layer: bad bias shape");
    }
  }

  DenseLayer as_dense() const { return DenseLayer{weights, bias, activation}; }
};

// Init that samples the per-column nonzeros among unmasked rows only.
inline MaskedDenseLayer make_masked_dense(SeededRng& rng, Tensor mask, Activation act,
                                          std::size_t nonzeros, double std) {
  MaskedDenseLayer l;
  const std::size_t fan_in = mask.dim(0), fan_out = mask.dim(1);
  l.weights = Tensor({fan_in, fan_out});
  for (std::size_t col = 0; col < fan_out; ++col) {
    std::vector<std::size_t> allowed;
    for (std::size_t r = 0; r < fan_in; ++r) {
      if (mask(r, col) != 0.0) allowed.push_back(r);
    }
    const std::size_t k = std::min(nonzeros, allowed.size());
    if (k == 0) continue;
    const auto picks = rng.sample_without_replacement(k, allowed.size());
    for (std::size_t p : picks) l.weights(allowed[p], col) = rng.normal(0.0, std);
  }
  l.bias = Tensor({fan_out});
  l.mask = std::move(mask);
  l.activation = act;
  return l;
}

inline Tensor masked_forward(const MaskedDenseLayer& layer, const Tensor& input,
                             DenseCache* cache = nullptr) {
  layer.validate();
  return dense_forward(layer.as_dense(), input, cache);
}

inline DenseGrads masked_backward(const MaskedDenseLayer& layer, const DenseCache& cache,
                                  const Tensor& upstream, bool want_input_grad = true) {
  DenseGrads g = dense_backward(layer.as_dense(), cache, upstream, want_input_grad);
  for (std::size_t i = 0; i < g.weights.size(); ++i) {
    if (layer.mask[i] == 0.0) g.weights[i] = 0.0;
  }
  return g;
}

inline DenseGrads masked_backward(const MaskedDenseLayer& layer, const Tensor& input,
                                  const Tensor& upstream) {
  DenseCache cache;
  masked_forward(layer, input, &cache);
  return masked_backward(layer, cache, upstream);
}

// ---------------------------------------------------------------------------
// Dropout
// ---------------------------------------------------------------------------

enum class DropoutMode { train, eval };

struct DropoutResult {
  Tensor output;
  Tensor kept_mask;  // 1 where kept, 0 where dropped
};

// Inverted dropout: kept entries scaled by 1/(1-rate) so the expectation is
// preserved and evaluation is the exact identity.
inline DropoutResult dropout_forward(const Tensor& input, double rate, SeededRng& rng,
                                     DropoutMode mode = DropoutMode::train) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ParamError("dropout rate must be in [0, 1), got " + std::to_string(rate));
  }
  DropoutResult r;
  r.kept_mask = Tensor::full(input.shape(), 1.0);
  if (mode == DropoutMode::eval || rate == 0.0) {
    r.output = input;
    return r;
  }
  r.output = input;
  const double scale = 1.0 / (1.0 - rate);
  for (std::size_t i = 0; i < r.output.size(); ++i) {
    if (rng.uniform() < rate) {
      r.output[i] = 0.0;
      r.kept_mask[i] = 0.0;
    } else {
      r.output[i] *= scale;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

struct LossValue {
  double scalar = 0.0;
  Tensor gradient;  // w.r.t. the prediction (logits for cross-entropy)
};

inline LossValue mse_loss(const Tensor& prediction, const Tensor& target) {
  if (!prediction.same_shape(target)) {
    throw ShapeError("mse_loss: shape mismatch " + shape_str(prediction.shape()) +
                     " vs " + shape_str(target.shape()));
  }
  LossValue loss;
  loss.gradient = Tensor(prediction.shape());
  const double inv_n = 1.0 / double(prediction.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double d = prediction[i] - target[i];
    acc += d * d;
    loss.gradient[i] = 2.0 * d * inv_n;
  }
  loss.scalar = acc * inv_n;
  return loss;
}

// Mean negative log-likelihood over the batch, computed from logits with the
// log-sum-exp trick. gradient = (softmax - one_hot) / B.
inline LossValue softmax_cross_entropy(const Tensor& logits,
                                       const std::vector<std::size_t>& labels) {
  if (logits.rank() != 2) {
    throw ShapeError("softmax_cross_entropy: logits must be [B x M], got " +
                     shape_str(logits.shape()));
  }
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch) {
    throw ParamError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for batch of " + std::to_string(batch));
  }
  LossValue loss;
  loss.gradient = Tensor(logits.shape());
  const double inv_b = 1.0 / double(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    if (labels[i] >= classes) {
      throw ParamError("softmax_cross_entropy: label " + std::to_string(labels[i]) +
                       " out of range [0, " + std::to_string(classes) + ")");
    }
    const double* row = logits.data() + i * classes;
    double mx = row[0];
    for (std::size_t j = 1; j < classes; ++j) mx = std::max(mx, row[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < classes; ++j) denom += std::exp(row[j] - mx);
    const double lse = mx + std::log(denom);
    loss.scalar += (lse - row[labels[i]]) * inv_b;
    double* g = loss.gradient.data() + i * classes;
    for (std::size_t j = 0; j < classes; ++j) {
      g[j] = std::exp(row[j] - lse) * inv_b;
    }
    g[labels[i]] -= inv_b;
  }
  return loss;
}

}  // namespace motenc
