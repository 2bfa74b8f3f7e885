#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "motenc/error.hpp"
#include "motenc/hierarchy.hpp"
#include "motenc/io_util.hpp"
#include "motenc/nn.hpp"
#include "motenc/tensor.hpp"

namespace motenc {

using json = nlohmann::json;

enum class ArchKind { ste, cte, hte, classifier };

inline const char* to_string(ArchKind k) {
  switch (k) {
    case ArchKind::ste: return "ste";
    case ArchKind::cte: return "cte";
    case ArchKind::hte: return "hte";
    case ArchKind::classifier: return "classifier";
  }
  return "?";
}

inline ArchKind arch_kind_from_string(const std::string& s) {
  if (s == "ste") return ArchKind::ste;
  if (s == "cte") return ArchKind::cte;
  if (s == "hte") return ArchKind::hte;
  if (s == "classifier") return ArchKind::classifier;
  throw ConfigError("unknown architecture kind: " + s);
}

struct ConvBranchSpec {
  std::size_t filters = 30;
  std::size_t width = 5;  // taps along time
};

struct ClassifierDims {
  std::size_t input = 100;
  std::size_t hidden1 = 50;
  std::size_t hidden2 = 20;
  std::size_t classes = 2;
};

struct ArchitectureSpec {
  ArchKind kind = ArchKind::ste;
  std::size_t delta_t = 100;
  std::size_t num_joints = 24;
  std::size_t outer_width = 300;       // lower/upper layer width
  std::size_t bottleneck_width = 100;  // middle layer width
  std::vector<ConvBranchSpec> conv_branches = {{30, 5}, {30, 15}, {30, 30}};
  HierarchySpec hierarchy = default_hierarchy();
  ClassifierDims classifier;
  // Weight init: per-unit sparse Gaussian. std of 1 follows the reference
  // recipe but saturates wide sigmoid layers, hence the knob.
  double init_std = 1.0;
  std::size_t init_nonzeros = 15;

  std::size_t input_size() const { return 3 * num_joints * delta_t; }
};

// Training provenance carried inside checkpoints.
struct TrainMeta {
  std::size_t epochs_completed = 0;
  std::uint64_t seed = 0;
  double last_dropout_rate = 0.0;
  bool finetuned = false;
  std::string note;
  std::string config_hash;
};

// ---------------------------------------------------------------------------
// Network
// ---------------------------------------------------------------------------

// Parallel temporal-conv branches over the same input window; their outputs
// are flattened and concatenated into one feature row per sample.
struct ConvBank {
  std::vector<TemporalConvLayer> branches;
  std::size_t delta_t = 0;

  std::size_t branch_width(std::size_t i) const {
    const auto& b = branches[i];
    return b.num_filters * (delta_t - b.filter_width + 1);
  }
  std::size_t output_width() const {
    std::size_t w = 0;
    for (std::size_t i = 0; i < branches.size(); ++i) w += branch_width(i);
    return w;
  }
};

using Layer = std::variant<DenseLayer, MaskedDenseLayer, ConvBank>;

struct NamedLayer {
  std::string name;
  Layer layer;
};

inline std::size_t layer_output_width(const NamedLayer& nl) {
  return std::visit(
      [](const auto& l) -> std::size_t {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, ConvBank>) {
          return l.output_width();
        } else {
          return l.fan_out();
        }
      },
      nl.layer);
}

inline Activation layer_activation(const NamedLayer& nl) {
  return std::visit(
      [](const auto& l) -> Activation {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, ConvBank>) {
          return l.branches.empty() ? Activation::linear : l.branches[0].activation;
        } else {
          return l.activation;
        }
      },
      nl.layer);
}

struct Network {
  ArchitectureSpec spec;
  std::vector<NamedLayer> layers;
  std::map<std::string, std::size_t> taps;  // lower / middle / upper
  TrainMeta meta;

  bool is_temporal_encoder() const { return spec.kind != ArchKind::classifier; }

  std::size_t output_size() const {
    return layers.empty() ? 0 : layer_output_width(layers.back());
  }

  const NamedLayer* find_layer(const std::string& name) const {
    for (const auto& l : layers) {
      if (l.name == name) return &l;
    }
    return nullptr;
  }
};

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

struct ConvBankCache {
  std::vector<ConvCache> branches;
  Tensor output;  // [B x concat]
};

using LayerCache = std::variant<DenseCache, ConvBankCache>;

struct ForwardTrace {
  std::vector<LayerCache> layers;
};

inline const Tensor& trace_output(const ForwardTrace& trace, std::size_t i) {
  return std::visit([](const auto& c) -> const Tensor& { return c.output; },
                    trace.layers.at(i));
}

namespace detail {

inline Tensor conv_bank_forward(const ConvBank& bank, const Tensor& window,
                                ConvBankCache* cache) {
  const std::size_t batch = window.dim(0);
  Tensor out({batch, bank.output_width()});
  std::size_t col = 0;
  if (cache) cache->branches.resize(bank.branches.size());
  for (std::size_t i = 0; i < bank.branches.size(); ++i) {
    ConvCache* bc = cache ? &cache->branches[i] : nullptr;
    const Tensor y = temporal_conv_forward(bank.branches[i], window, bc);
    const std::size_t w = bank.branch_width(i);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* src = y.data() + b * w;
      double* dst = out.data() + b * out.dim(1) + col;
      std::copy(src, src + w, dst);
    }
    col += w;
  }
  if (cache) cache->output = out;
  return out;
}

struct ConvBankGrads {
  Tensor input;
  std::vector<ConvGrads> branches;
};

inline ConvBankGrads conv_bank_backward(const ConvBank& bank, const ConvBankCache& cache,
                                        const Tensor& upstream, bool want_input_grad) {
  ConvBankGrads g;
  g.branches.resize(bank.branches.size());
  const std::size_t batch = upstream.dim(0);
  std::size_t col = 0;
  for (std::size_t i = 0; i < bank.branches.size(); ++i) {
    const auto& branch = bank.branches[i];
    const std::size_t positions = bank.delta_t - branch.filter_width + 1;
    const std::size_t w = branch.num_filters * positions;
    Tensor up_i({batch, branch.num_filters, positions});
    for (std::size_t b = 0; b < batch; ++b) {
      const double* src = upstream.data() + b * upstream.dim(1) + col;
      std::copy(src, src + w, up_i.data() + b * w);
    }
    g.branches[i] = temporal_conv_backward(branch, cache.branches[i], up_i,
                                           want_input_grad);
    if (want_input_grad) {
      if (g.input.empty()) {
        g.input = std::move(g.branches[i].input);
      } else {
        g.input += g.branches[i].input;
      }
      g.branches[i].input = Tensor();
    }
    col += w;
  }
  return g;
}

}  // namespace detail

// Runs the network on a batch. `input` is either a [B x 3 x J x dt] window
// batch (temporal encoders) or a [B x D] feature matrix; window batches are
// flattened row-major unless the first layer is a conv bank.
inline Tensor network_forward(const Network& net, const Tensor& input,
                              ForwardTrace* trace = nullptr) {
  if (net.layers.empty()) throw ConfigError("network has no layers");
  Tensor x = input;
  const bool conv_first = std::holds_alternative<ConvBank>(net.layers[0].layer);
  if (x.rank() == 4 && !conv_first) {
    x = x.reshaped({x.dim(0), x.dim(1) * x.dim(2) * x.dim(3)});
  }
  if (conv_first && x.rank() == 2) {
    const auto& s = net.spec;
    x = x.reshaped({x.dim(0), 3, s.num_joints, s.delta_t});
  }
  if (trace) {
    trace->layers.clear();
    trace->layers.reserve(net.layers.size());
  }
  for (const auto& nl : net.layers) {
    if (const auto* dense = std::get_if<DenseLayer>(&nl.layer)) {
      DenseCache cache;
      x = dense_forward(*dense, x, trace ? &cache : nullptr);
      if (trace) trace->layers.emplace_back(std::move(cache));
    } else if (const auto* masked = std::get_if<MaskedDenseLayer>(&nl.layer)) {
      DenseCache cache;
      x = masked_forward(*masked, x, trace ? &cache : nullptr);
      if (trace) trace->layers.emplace_back(std::move(cache));
    } else {
      const auto& bank = std::get<ConvBank>(nl.layer);
      ConvBankCache cache;
      x = detail::conv_bank_forward(bank, x, trace ? &cache : nullptr);
      if (trace) trace->layers.emplace_back(std::move(cache));
    }
  }
  return x;
}

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

namespace detail {

inline DenseLayer init_dense(SeededRng& rng, const ArchitectureSpec& spec,
                             std::size_t fan_in, std::size_t fan_out, Activation act) {
  return make_dense(rng, fan_in, fan_out, act, spec.init_nonzeros, spec.init_std);
}

}  // namespace detail

// Symmetric encoder: a fully-connected mirror around the linear bottleneck.
// input -> outer -> bottleneck -> outer -> output, sigmoid except the
// bottleneck and output layers.
inline Network build_ste(const ArchitectureSpec& spec, SeededRng& rng) {
  if (spec.kind != ArchKind::ste) throw ConfigError("build_ste: spec.kind is not ste");
  const std::size_t d = spec.input_size();
  if (spec.bottleneck_width >= d) {
    throw ConfigError("bottleneck width must be smaller than the input size");
  }
  if (spec.outer_width == 0 || spec.bottleneck_width == 0) {
    throw ConfigError("layer widths must be positive");
  }
  Network net;
  net.spec = spec;
  net.layers.push_back(
      {"enc_lower", detail::init_dense(rng, spec, d, spec.outer_width, Activation::sigmoid)});
  net.layers.push_back(
      {"bottleneck", detail::init_dense(rng, spec, spec.outer_width, spec.bottleneck_width,
                                        Activation::linear)});
  net.layers.push_back(
      {"dec_upper", detail::init_dense(rng, spec, spec.bottleneck_width, spec.outer_width,
                                       Activation::sigmoid)});
  net.layers.push_back(
      {"output", detail::init_dense(rng, spec, spec.outer_width, d, Activation::linear)});
  net.taps = {{"lower", 0}, {"middle", 1}, {"upper", 2}};
  return net;
}

// Convolutional encoder: parallel time convolutions over the whole joint
// range, concatenated, then the same dense funnel and decoder as the
// symmetric model.
inline Network build_cte(const ArchitectureSpec& spec, SeededRng& rng) {
  if (spec.kind != ArchKind::cte) throw ConfigError("build_cte: spec.kind is not cte");
  if (spec.conv_branches.empty()) {
    throw ConfigError("cte requires at least one conv branch");
  }
  ConvBank bank;
  bank.delta_t = spec.delta_t;
  for (const auto& b : spec.conv_branches) {
    if (b.width < 1 || b.width > spec.delta_t) {
      throw ConfigError("conv branch width " + std::to_string(b.width) +
                        " outside [1, delta_t=" + std::to_string(spec.delta_t) + "]");
    }
    if (b.filters == 0) throw ConfigError("conv branch needs at least one filter");
    bank.branches.push_back(make_temporal_conv(rng, b.filters, b.width, spec.num_joints,
                                               Activation::sigmoid, spec.init_nonzeros,
                                               spec.init_std));
  }
  Network net;
  net.spec = spec;
  net.layers.push_back({"conv_bank", std::move(bank)});
  const std::size_t concat = std::get<ConvBank>(net.layers[0].layer).output_width();
  const std::size_t d = spec.input_size();
  net.layers.push_back(
      {"enc_lower", detail::init_dense(rng, spec, concat, spec.outer_width, Activation::sigmoid)});
  net.layers.push_back(
      {"bottleneck", detail::init_dense(rng, spec, spec.outer_width, spec.bottleneck_width,
                                        Activation::linear)});
  net.layers.push_back(
      {"dec_upper", detail::init_dense(rng, spec, spec.bottleneck_width, spec.outer_width,
                                       Activation::sigmoid)});
  net.layers.push_back(
      {"output", detail::init_dense(rng, spec, spec.outer_width, d, Activation::linear)});
  net.taps = {{"lower", 1}, {"middle", 2}, {"upper", 3}};
  return net;
}

namespace detail {

// Connectivity masks realising the body tree. Input columns are the
// row-major (coordinate, joint, time) flattening of a window, so the rows
// feeding joint j are those with (row / delta_t) % J == j.
inline Tensor joint_mask(const ArchitectureSpec& spec) {
  const std::size_t d = spec.input_size();
  const std::size_t width = spec.hierarchy.widths.joint;
  Tensor mask({d, spec.num_joints * width});
  for (std::size_t row = 0; row < d; ++row) {
    const std::size_t joint = (row / spec.delta_t) % spec.num_joints;
    double* out = mask.data() + row * mask.dim(1) + joint * width;
    for (std::size_t k = 0; k < width; ++k) out[k] = 1.0;
  }
  return mask;
}

inline Tensor limb_mask(const HierarchySpec& h) {
  const std::size_t rows = h.num_joints * h.widths.joint;
  const std::size_t cols = h.limbs.size() * h.widths.limb;
  Tensor mask({rows, cols});
  for (std::size_t li = 0; li < h.limbs.size(); ++li) {
    for (std::size_t j : h.limbs[li].joints) {
      for (std::size_t r = j * h.widths.joint; r < (j + 1) * h.widths.joint; ++r) {
        double* out = mask.data() + r * cols + li * h.widths.limb;
        for (std::size_t k = 0; k < h.widths.limb; ++k) out[k] = 1.0;
      }
    }
  }
  return mask;
}

inline Tensor group_mask(const HierarchySpec& h) {
  const auto& order = HierarchySpec::group_order();
  const std::size_t rows = h.limbs.size() * h.widths.limb;
  const std::size_t cols = order.size() * h.widths.group;
  Tensor mask({rows, cols});
  for (std::size_t gi = 0; gi < order.size(); ++gi) {
    const auto it = h.groups.find(order[gi]);
    if (it == h.groups.end()) continue;
    for (const auto& limb_name : it->second) {
      for (std::size_t li = 0; li < h.limbs.size(); ++li) {
        if (h.limbs[li].name != limb_name) continue;
        for (std::size_t r = li * h.widths.limb; r < (li + 1) * h.widths.limb; ++r) {
          double* out = mask.data() + r * cols + gi * h.widths.group;
          for (std::size_t k = 0; k < h.widths.group; ++k) out[k] = 1.0;
        }
      }
    }
  }
  return mask;
}

}  // namespace detail

// Hierarchical encoder: masked layers realise joints -> limbs -> groups,
// then a dense body layer feeds the bottleneck; the decoder is the same
// dense stack as the symmetric model.
inline Network build_hte(const ArchitectureSpec& spec, SeededRng& rng) {
  if (spec.kind != ArchKind::hte) throw ConfigError("build_hte: spec.kind is not hte");
  if (spec.hierarchy.num_joints != spec.num_joints) {
    throw ConfigError("hierarchy joint count " + std::to_string(spec.hierarchy.num_joints) +
                      " does not match num_joints " + std::to_string(spec.num_joints));
  }
  spec.hierarchy.validate();
  const auto& h = spec.hierarchy;
  Network net;
  net.spec = spec;
  net.layers.push_back(
      {"joint_nodes", make_masked_dense(rng, detail::joint_mask(spec), Activation::sigmoid,
                                        spec.init_nonzeros, spec.init_std)});
  net.layers.push_back(
      {"limb_nodes", make_masked_dense(rng, detail::limb_mask(h), Activation::sigmoid,
                                       spec.init_nonzeros, spec.init_std)});
  net.layers.push_back(
      {"group_nodes", make_masked_dense(rng, detail::group_mask(h), Activation::sigmoid,
                                        spec.init_nonzeros, spec.init_std)});
  const std::size_t group_total = HierarchySpec::group_order().size() * h.widths.group;
  net.layers.push_back(
      {"body", detail::init_dense(rng, spec, group_total, h.widths.body, Activation::sigmoid)});
  net.layers.push_back(
      {"bottleneck", detail::init_dense(rng, spec, h.widths.body, spec.bottleneck_width,
                                        Activation::linear)});
  net.layers.push_back(
      {"dec_upper", detail::init_dense(rng, spec, spec.bottleneck_width, spec.outer_width,
                                       Activation::sigmoid)});
  net.layers.push_back(
      {"output", detail::init_dense(rng, spec, spec.outer_width, spec.input_size(),
                                    Activation::linear)});
  net.taps = {{"lower", 3}, {"middle", 4}, {"upper", 5}};
  return net;
}

// Feature classifier: input -> 50 -> 20 -> classes with a softmax output.
inline Network build_classifier(const ArchitectureSpec& spec, SeededRng& rng) {
  if (spec.kind != ArchKind::classifier) {
    throw ConfigError("build_classifier: spec.kind is not classifier");
  }
  const auto& c = spec.classifier;
  if (c.classes < 2) throw ConfigError("classifier needs at least 2 classes");
  if (c.input == 0) throw ConfigError("classifier input width must be positive");
  Network net;
  net.spec = spec;
  net.layers.push_back(
      {"hidden1", detail::init_dense(rng, spec, c.input, c.hidden1, Activation::sigmoid)});
  net.layers.push_back(
      {"hidden2", detail::init_dense(rng, spec, c.hidden1, c.hidden2, Activation::sigmoid)});
  net.layers.push_back(
      {"output", detail::init_dense(rng, spec, c.hidden2, c.classes, Activation::softmax)});
  return net;
}

inline Network build_network(const ArchitectureSpec& spec, SeededRng& rng) {
  switch (spec.kind) {
    case ArchKind::ste: return build_ste(spec, rng);
    case ArchKind::cte: return build_cte(spec, rng);
    case ArchKind::hte: return build_hte(spec, rng);
    case ArchKind::classifier: return build_classifier(spec, rng);
  }
  throw ConfigError("unknown architecture kind");
}

// ---------------------------------------------------------------------------
// Prediction and feature taps
// ---------------------------------------------------------------------------

// One forward pass predicts the entire future window jointly.
inline Tensor predict_window(const Network& net, const Tensor& input_window) {
  if (!net.is_temporal_encoder()) {
    throw ParamError("predict_window: network is a classifier");
  }
  const auto& s = net.spec;
  if (input_window.rank() != 3 || input_window.dim(0) != 3 ||
      input_window.dim(1) != s.num_joints || input_window.dim(2) != s.delta_t) {
    throw ShapeError("predict_window: expected [3x" + std::to_string(s.num_joints) +
                     "x" + std::to_string(s.delta_t) + "], got " +
                     shape_str(input_window.shape()));
  }
  Tensor batch = input_window.reshaped({1, 3, s.num_joints, s.delta_t});
  Tensor out = network_forward(net, batch);
  return out.reshaped({3, s.num_joints, s.delta_t});
}

// Post-activation features of a named tap for a batch of windows.
inline Tensor extract_features_batch(const Network& net, const Tensor& windows,
                                     const std::string& tap) {
  const auto it = net.taps.find(tap);
  if (it == net.taps.end()) {
    throw ParamError("unknown tap '" + tap + "' (network has " +
                     std::to_string(net.taps.size()) + " taps)");
  }
  ForwardTrace trace;
  network_forward(net, windows, &trace);
  return trace_output(trace, it->second);
}

inline Tensor extract_features(const Network& net, const Tensor& input_window,
                               const std::string& tap) {
  const auto& s = net.spec;
  Tensor batch = input_window.reshaped({1, 3, s.num_joints, s.delta_t});
  Tensor rows = extract_features_batch(net, batch, tap);
  return rows.reshaped({rows.dim(1)});
}

// ---------------------------------------------------------------------------
// Parameter enumeration (canonical order for optimizer and checkpoints)
// ---------------------------------------------------------------------------

struct ParamView {
  Tensor* value = nullptr;
  const Tensor* mask = nullptr;  // masked-dense weights only
  bool is_bias = false;
};

inline std::vector<ParamView> collect_params(Network& net) {
  std::vector<ParamView> out;
  for (auto& nl : net.layers) {
    if (auto* dense = std::get_if<DenseLayer>(&nl.layer)) {
      out.push_back({&dense->weights, nullptr, false});
      out.push_back({&dense->bias, nullptr, true});
    } else if (auto* masked = std::get_if<MaskedDenseLayer>(&nl.layer)) {
      out.push_back({&masked->weights, &masked->mask, false});
      out.push_back({&masked->bias, nullptr, true});
    } else {
      auto& bank = std::get<ConvBank>(nl.layer);
      for (auto& branch : bank.branches) {
        out.push_back({&branch.filter_weights, nullptr, false});
        out.push_back({&branch.bias, nullptr, true});
      }
    }
  }
  return out;
}

inline std::size_t parameter_count(const Network& net) {
  std::size_t n = 0;
  for (const auto& p : collect_params(const_cast<Network&>(net))) n += p.value->size();
  return n;
}

// ---------------------------------------------------------------------------
// Spec / meta serialization
// ---------------------------------------------------------------------------

inline json hierarchy_to_json(const HierarchySpec& h) {
  json limbs = json::array();
  for (const auto& l : h.limbs) limbs.push_back({{"name", l.name}, {"joints", l.joints}});
  return json{{"num_joints", h.num_joints},
              {"limbs", limbs},
              {"groups", h.groups},
              {"widths",
               {{"joint", h.widths.joint},
                {"limb", h.widths.limb},
                {"group", h.widths.group},
                {"body", h.widths.body}}}};
}

inline HierarchySpec hierarchy_from_json(const json& j) {
  HierarchySpec h;
  h.num_joints = j.at("num_joints").get<std::size_t>();
  h.limbs.clear();
  for (const auto& l : j.at("limbs")) {
    h.limbs.push_back({l.at("name").get<std::string>(),
                       l.at("joints").get<std::vector<std::size_t>>()});
  }
  h.groups = j.at("groups").get<std::map<std::string, std::vector<std::string>>>();
  const auto& w = j.at("widths");
  h.widths = {w.at("joint").get<std::size_t>(), w.at("limb").get<std::size_t>(),
              w.at("group").get<std::size_t>(), w.at("body").get<std::size_t>()};
  return h;
}

inline json arch_to_json(const ArchitectureSpec& s) {
  json branches = json::array();
  for (const auto& b : s.conv_branches) {
    branches.push_back({{"filters", b.filters}, {"width", b.width}});
  }
  return json{{"kind", to_string(s.kind)},
              {"delta_t", s.delta_t},
              {"num_joints", s.num_joints},
              {"outer_width", s.outer_width},
              {"bottleneck_width", s.bottleneck_width},
              {"conv_branches", branches},
              {"hierarchy", hierarchy_to_json(s.hierarchy)},
              {"classifier",
               {{"input", s.classifier.input},
                {"hidden1", s.classifier.hidden1},
                {"hidden2", s.classifier.hidden2},
                {"classes", s.classifier.classes}}},
              {"init_std", s.init_std},
              {"init_nonzeros", s.init_nonzeros}};
}

inline ArchitectureSpec arch_from_json(const json& j) {
  ArchitectureSpec s;
  s.kind = arch_kind_from_string(j.at("kind").get<std::string>());
  s.delta_t = j.at("delta_t").get<std::size_t>();
  s.num_joints = j.at("num_joints").get<std::size_t>();
  s.outer_width = j.at("outer_width").get<std::size_t>();
  s.bottleneck_width = j.at("bottleneck_width").get<std::size_t>();
  s.conv_branches.clear();
  for (const auto& b : j.at("conv_branches")) {
    s.conv_branches.push_back(
        {b.at("filters").get<std::size_t>(), b.at("width").get<std::size_t>()});
  }
  s.hierarchy = hierarchy_from_json(j.at("hierarchy"));
  const auto& c = j.at("classifier");
  s.classifier = {c.at("input").get<std::size_t>(), c.at("hidden1").get<std::size_t>(),
                  c.at("hidden2").get<std::size_t>(), c.at("classes").get<std::size_t>()};
  s.init_std = j.at("init_std").get<double>();
  s.init_nonzeros = j.at("init_nonzeros").get<std::size_t>();
  return s;
}

inline json meta_to_json(const TrainMeta& m) {
  return json{{"epochs_completed", m.epochs_completed},
              {"seed", m.seed},
              {"last_dropout_rate", m.last_dropout_rate},
              {"finetuned", m.finetuned},
              {"note", m.note},
              {"config_hash", m.config_hash}};
}

inline TrainMeta meta_from_json(const json& j) {
  TrainMeta m;
  m.epochs_completed = j.at("epochs_completed").get<std::size_t>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.last_dropout_rate = j.at("last_dropout_rate").get<double>();
  m.finetuned = j.at("finetuned").get<bool>();
  m.note = j.at("note").get<std::string>();
  m.config_hash = j.at("config_hash").get<std::string>();
  return m;
}

// ---------------------------------------------------------------------------
// Checkpoint format
// ---------------------------------------------------------------------------
//
//   "MTEC" | u32 version | u64 blob_len | blob (JSON spec+meta)
//   | raw little-endian f64 parameters in canonical order | u32 CRC-32
//
// The CRC covers every preceding byte. Masks are not stored; they are
// rebuilt from the spec, and the stored weights are zero at masked
// positions by invariant.

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const Network& net, const std::string& path) {
  std::string buf;
  buf.append("MTEC", 4);
  detail::append_scalar<std::uint32_t>(buf, kCheckpointVersion);
  const std::string blob =
      json{{"arch", arch_to_json(net.spec)}, {"meta", meta_to_json(net.meta)}}.dump();
  detail::append_scalar<std::uint64_t>(buf, blob.size());
  buf += blob;
  for (const auto& p : collect_params(const_cast<Network&>(net))) {
    const auto* bytes = reinterpret_cast<const char*>(p.value->data());
    buf.append(bytes, p.value->size() * sizeof(double));
  }
  detail::append_scalar<std::uint32_t>(buf, detail::crc32(buf.data(), buf.size()));
  detail::write_file_bytes(path, buf);
}

inline Network load_checkpoint(const std::string& path) {
  const std::string buf = detail::read_file_bytes(path);
  std::size_t off = 0;
  if (buf.size() < 4 || buf.compare(0, 4, "MTEC") != 0) {
    throw FormatError(path + ": not a motenc checkpoint (bad magic)");
  }
  off = 4;
  const auto version = detail::read_scalar<std::uint32_t>(buf, off, "version");
  if (version != kCheckpointVersion) {
    throw VersionError(path + ": checkpoint version " + std::to_string(version) +
                       ", expected " + std::to_string(kCheckpointVersion));
  }
  const auto blob_len = detail::read_scalar<std::uint64_t>(buf, off, "spec length");
  if (off + blob_len > buf.size()) throw TruncatedError(path + ": truncated spec blob");
  json j;
  try {
    j = json::parse(buf.substr(off, blob_len));
  } catch (const json::exception& e) {
    throw FormatError(path + ": bad spec blob: " + e.what());
  }
  off += blob_len;

  ArchitectureSpec spec;
  TrainMeta meta;
  try {
    spec = arch_from_json(j.at("arch"));
    meta = meta_from_json(j.at("meta"));
  } catch (const json::exception& e) {
    throw FormatError(path + ": bad spec blob: " + e.what());
  }
  SeededRng dummy(0);
  Network net = build_network(spec, dummy);
  net.meta = meta;

  const std::size_t expected = parameter_count(net);
  const std::size_t payload = expected * sizeof(double);
  if (buf.size() < off + payload + 4) {
    throw TruncatedError(path + ": truncated parameter payload");
  }
  if (buf.size() != off + payload + 4) {
    throw FormatError(path + ": unexpected file size");
  }
  std::uint32_t file_crc;
  std::memcpy(&file_crc, buf.data() + buf.size() - 4, 4);
  const std::uint32_t computed = detail::crc32(buf.data(), buf.size() - 4);
  if (file_crc != computed) {
    throw ChecksumError(path + ": CRC mismatch (file corrupted)");
  }
  for (const auto& p : collect_params(net)) {
    std::memcpy(p.value->data(), buf.data() + off, p.value->size() * sizeof(double));
    off += p.value->size() * sizeof(double);
  }
  return net;
}

}  // namespace motenc
