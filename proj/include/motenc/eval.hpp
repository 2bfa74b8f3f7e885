#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "motenc/data.hpp"
#include "motenc/error.hpp"
#include "motenc/model.hpp"
#include "motenc/tensor.hpp"

namespace motenc {

// ---------------------------------------------------------------------------
// Frame metric and horizons
// ---------------------------------------------------------------------------

// Euclidean distance over all 3*N coordinates of a frame, divided by the
// number of joints.
inline double frame_error(const double* pred, const double* gt, std::size_t n_joints) {
  double acc = 0.0;
  for (std::size_t i = 0; i < 3 * n_joints; ++i) {
    const double d = pred[i] - gt[i];
    acc += d * d;
  }
  return std::sqrt(acc) / double(n_joints);
}

inline double frame_error(const Tensor& pred_frame, const Tensor& gt_frame,
                          std::size_t n_joints) {
  if (!pred_frame.same_shape(gt_frame) || pred_frame.size() != 3 * n_joints) {
    throw ShapeError("frame_error: shape mismatch " + shape_str(pred_frame.shape()) +
                     " vs " + shape_str(gt_frame.shape()));
  }
  return frame_error(pred_frame.data(), gt_frame.data(), n_joints);
}

// 1-based index into the predicted window: round(ms*fps/1000), half to even.
inline std::size_t horizon_frame_index(double ms, int fps, std::size_t delta_t) {
  if (ms <= 0.0) throw ParamError("horizon must be positive");
  const double frames = ms * double(fps) / 1000.0;
  const double rounded = std::nearbyint(frames);  // FE_TONEAREST: ties to even
  const auto idx = std::size_t(rounded);
  if (idx < 1 || idx > delta_t) {
    throw ParamError("horizon " + detail::format_double(ms) + " ms is frame " +
                     std::to_string(idx) + ", outside the predicted window of " +
                     std::to_string(delta_t) + " frames");
  }
  return idx;
}

struct HorizonEntry {
  double ms = 0.0;
  std::size_t frame_index = 0;  // 1-based
};

struct HorizonReport {
  std::string model_id;
  std::string set_id;
  int fps = 60;
  std::vector<HorizonEntry> horizons;
  std::vector<double> mean_errors;  // aligned with horizons
  std::size_t sample_count = 0;     // windows evaluated

  double mean_over_horizons() const {
    double acc = 0.0;
    for (double e : mean_errors) acc += e;
    return mean_errors.empty() ? 0.0 : acc / double(mean_errors.size());
  }
};

inline const std::vector<double>& default_horizons_ms() {
  static const std::vector<double> h = {80, 160, 320, 560, 1000, 1600};
  return h;
}

// ---------------------------------------------------------------------------
// Predictors
// ---------------------------------------------------------------------------

// Maps a [B x 3 x J x dt] window batch to flat [B x 3*J*dt] predictions.
using Predictor = std::function<Tensor(const Tensor&)>;

inline Predictor net_predictor(const Network& net) {
  if (!net.is_temporal_encoder()) {
    throw ParamError("net_predictor: network is a classifier");
  }
  return [&net](const Tensor& windows) { return network_forward(net, windows); };
}

// Zero-motion baseline: repeat the last observed frame across the window.
inline Tensor persistence_baseline(const Tensor& input_window) {
  if (input_window.rank() != 3 || input_window.dim(0) != 3) {
    throw ShapeError("persistence_baseline: expected [3 x J x dt], got " +
                     shape_str(input_window.shape()));
  }
  const std::size_t joints = input_window.dim(1), dt = input_window.dim(2);
  Tensor out(input_window.shape());
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t j = 0; j < joints; ++j) {
      const double last = input_window(c, j, dt - 1);
      double* row = out.data() + (c * joints + j) * dt;
      std::fill(row, row + dt, last);
    }
  }
  return out;
}

inline Predictor persistence_predictor() {
  return [](const Tensor& windows) {
    const std::size_t batch = windows.dim(0), joints = windows.dim(2),
                      dt = windows.dim(3);
    Tensor out({batch, 3 * joints * dt});
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t j = 0; j < joints; ++j) {
          const double last = windows(b, c, j, dt - 1);
          double* row = out.data() + b * out.dim(1) + (c * joints + j) * dt;
          std::fill(row, row + dt, last);
        }
      }
    }
    return out;
  };
}

// ---------------------------------------------------------------------------
// Sliding-window horizon evaluation
// ---------------------------------------------------------------------------

namespace detail {

struct RecordingErrors {
  std::vector<double> sums;  // per horizon
  std::size_t windows = 0;
};

inline RecordingErrors evaluate_recording(const Predictor& predict,
                                          const MotionRecording& rec,
                                          const std::vector<HorizonEntry>& horizons,
                                          std::size_t delta_t,
                                          const std::string& masked_limb) {
  RecordingErrors out;
  out.sums.assign(horizons.size(), 0.0);
  const std::size_t t_len = rec.length(), joints = rec.num_joints();
  if (t_len < 2 * delta_t) return out;
  const std::size_t first = delta_t - 1, last = t_len - delta_t - 1;
  constexpr std::size_t kChunk = 128;
  std::vector<double> gt(3 * joints);
  for (std::size_t t0 = first; t0 <= last; t0 += kChunk) {
    const std::size_t n = std::min(kChunk, last - t0 + 1);
    Tensor windows({n, 3, joints, delta_t});
    for (std::size_t i = 0; i < n; ++i) {
      Tensor w = window_at(rec, t0 + i - delta_t + 1, delta_t);
      if (!masked_limb.empty()) w = mask_limb(w, masked_limb, rec.schema);
      std::copy(w.data(), w.data() + w.size(), windows.data() + i * w.size());
    }
    const Tensor pred = predict(windows);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t t = t0 + i;
      const double* flat = pred.data() + i * pred.dim(1);
      for (std::size_t h = 0; h < horizons.size(); ++h) {
        const std::size_t k = horizons[h].frame_index;  // 1-based
        // Predicted frame k vs ground-truth frame t+k.
        std::vector<double> pf(3 * joints);
        for (std::size_t c = 0; c < 3; ++c) {
          for (std::size_t j = 0; j < joints; ++j) {
            pf[c * joints + j] = flat[(c * joints + j) * delta_t + (k - 1)];
          }
        }
        const double* f = rec.frames.data() + (t + k) * 3 * joints;
        std::copy(f, f + 3 * joints, gt.begin());
        out.sums[h] += frame_error(pf.data(), gt.data(), joints);
      }
    }
    out.windows += n;
  }
  return out;
}

}  // namespace detail

// Slides a window over every recording, predicts at each step, and averages
// the frame error at each horizon over all (window, recording) samples.
// Recording order is fixed, so the reduction is deterministic for any
// thread count.
inline HorizonReport evaluate_horizons(const Predictor& predict,
                                       const std::vector<MotionRecording>& recordings,
                                       const std::vector<double>& horizons_ms,
                                       std::size_t delta_t, const std::string& model_id,
                                       const std::string& set_id,
                                       const std::string& masked_limb = "",
                                       std::size_t threads = 1) {
  if (recordings.empty()) throw EvalError("evaluate_horizons: no recordings");
  const int fps = recordings[0].fps;
  for (const auto& rec : recordings) {
    if (rec.fps != fps) {
      throw EvalError("evaluate_horizons: mixed frame rates (" + std::to_string(fps) +
                      " vs " + std::to_string(rec.fps) + "); resample first");
    }
    if (!masked_limb.empty() && !rec.schema.hierarchy.find_limb(masked_limb)) {
      throw ParamError("unknown limb '" + masked_limb + "'");
    }
  }
  HorizonReport report;
  report.model_id = model_id;
  report.set_id = set_id;
  report.fps = fps;
  for (double ms : horizons_ms) {
    report.horizons.push_back({ms, horizon_frame_index(ms, fps, delta_t)});
  }

  std::vector<detail::RecordingErrors> partial(recordings.size());
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, recordings.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < recordings.size(); ++i) {
      partial[i] = detail::evaluate_recording(predict, recordings[i], report.horizons,
                                              delta_t, masked_limb);
    }
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < recordings.size();
             i = next.fetch_add(1)) {
          partial[i] = detail::evaluate_recording(predict, recordings[i], report.horizons,
                                                  delta_t, masked_limb);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  report.mean_errors.assign(report.horizons.size(), 0.0);
  for (const auto& p : partial) {
    report.sample_count += p.windows;
    for (std::size_t h = 0; h < p.sums.size(); ++h) report.mean_errors[h] += p.sums[h];
  }
  if (report.sample_count == 0) {
    throw EvalError("evaluate_horizons: no recording is long enough for a window pair");
  }
  for (double& e : report.mean_errors) e /= double(report.sample_count);
  return report;
}

// Same protocol with one limb zeroed in every input window; targets are
// left untouched.
inline HorizonReport evaluate_missing_limb(const Predictor& predict,
                                           const std::vector<MotionRecording>& recordings,
                                           const std::string& limb,
                                           const std::vector<double>& horizons_ms,
                                           std::size_t delta_t,
                                           const std::string& model_id,
                                           const std::string& set_id,
                                           std::size_t threads = 1) {
  if (limb.empty()) throw ParamError("evaluate_missing_limb: empty limb name");
  return evaluate_horizons(predict, recordings, horizons_ms, delta_t, model_id,
                           set_id + "/masked:" + limb, limb, threads);
}

// ---------------------------------------------------------------------------
// Sequence classification
// ---------------------------------------------------------------------------

enum class Aggregation { mean_softmax, majority_vote };

struct ClassifyResult {
  std::size_t class_index = 0;
  Tensor mean_distribution;  // [classes]
  std::size_t steps = 0;
};

// Folds per-step class distributions [S x M] into one winner. The mean rule
// averages the distributions and takes the argmax; the vote rule counts
// per-step argmaxes. Both are order-free.
inline ClassifyResult aggregate_distributions(const Tensor& probs, Aggregation agg) {
  if (probs.rank() != 2 || probs.dim(0) == 0) {
    throw ShapeError("aggregate_distributions: expected a non-empty [S x M] matrix");
  }
  const std::size_t steps = probs.dim(0), classes = probs.dim(1);
  ClassifyResult result;
  result.steps = steps;
  result.mean_distribution = Tensor({classes});
  std::vector<std::size_t> votes(classes, 0);
  for (std::size_t i = 0; i < steps; ++i) {
    const double* row = probs.data() + i * classes;
    std::size_t best = 0;
    for (std::size_t m = 0; m < classes; ++m) {
      result.mean_distribution[m] += row[m];
      if (row[m] > row[best]) best = m;
    }
    ++votes[best];
  }
  result.mean_distribution *= 1.0 / double(steps);
  if (agg == Aggregation::mean_softmax) {
    std::size_t best = 0;
    for (std::size_t m = 1; m < classes; ++m) {
      if (result.mean_distribution[m] > result.mean_distribution[best]) best = m;
    }
    result.class_index = best;
  } else {
    result.class_index =
        std::size_t(std::max_element(votes.begin(), votes.end()) - votes.begin());
  }
  return result;
}

namespace detail {

inline Tensor step_windows(const MotionRecording& rec, std::size_t delta_t,
                           std::size_t begin_t, std::size_t count) {
  const std::size_t joints = rec.num_joints();
  Tensor windows({count, 3, joints, delta_t});
  for (std::size_t i = 0; i < count; ++i) {
    Tensor w = window_at(rec, begin_t + i - delta_t + 1, delta_t);
    std::copy(w.data(), w.data() + w.size(), windows.data() + i * w.size());
  }
  return windows;
}

}  // namespace detail

// Classifies a whole sequence: tap features for every step inside the
// leading window_seconds, one classifier distribution per step, averaged
// (or majority-voted) into a single label.
inline ClassifyResult classify_sequence(const Network& clf, const Network& te,
                                        const MotionRecording& rec, const std::string& tap,
                                        double window_seconds = 8.0,
                                        Aggregation agg = Aggregation::mean_softmax) {
  const std::size_t delta_t = te.spec.delta_t;
  const std::size_t t_len = rec.length();
  if (t_len < delta_t) {
    throw EvalError("classify_sequence: recording of " + std::to_string(t_len) +
                    " frames is shorter than one window (" + std::to_string(delta_t) + ")");
  }
  std::size_t limit = std::size_t(std::llround(window_seconds * double(rec.fps)));
  limit = std::min(t_len, std::max(limit, delta_t));
  const std::size_t first = delta_t - 1;
  const std::size_t steps = limit - first;

  const std::size_t classes = clf.spec.classifier.classes;
  Tensor all_probs({steps, classes});
  constexpr std::size_t kChunk = 128;
  for (std::size_t s = 0; s < steps; s += kChunk) {
    const std::size_t n = std::min(kChunk, steps - s);
    const Tensor windows = detail::step_windows(rec, delta_t, first + s, n);
    const Tensor feats = extract_features_batch(te, windows, tap);
    const Tensor probs = network_forward(clf, feats);
    std::copy(probs.data(), probs.data() + probs.size(),
              all_probs.data() + s * classes);
  }
  return aggregate_distributions(all_probs, agg);
}

struct ConfusionMatrix {
  std::vector<std::string> class_names;
  Tensor counts;  // [M x M], rows true, cols predicted

  std::size_t total() const { return std::size_t(sum(counts)); }
  double rate() const {
    double trace = 0.0;
    for (std::size_t i = 0; i < class_names.size(); ++i) trace += counts(i, i);
    const double n = sum(counts);
    return n > 0 ? trace / n : 0.0;
  }
  std::vector<double> per_class_rate() const {
    std::vector<double> out(class_names.size(), 0.0);
    for (std::size_t i = 0; i < class_names.size(); ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < class_names.size(); ++j) row += counts(i, j);
      out[i] = row > 0 ? counts(i, i) / row : 0.0;
    }
    return out;
  }
};

// ---------------------------------------------------------------------------
// Spike-triggered averages
// ---------------------------------------------------------------------------

struct StaResult {
  std::string layer;
  std::size_t unit = 0;
  double threshold = 0.8;
  Tensor average_window;  // [3 x J x dt]; unset when no window qualified
  std::size_t contributing = 0;
  double weight_sum = 0.0;

  bool is_empty() const { return contributing == 0; }
};

// Activity-weighted mean of the input windows over which the unit's sigmoid
// output exceeds the threshold.
inline StaResult spike_triggered_average(const Network& net,
                                         const std::vector<Tensor>& windows,
                                         const std::string& layer_name, std::size_t unit,
                                         double threshold = 0.8) {
  std::size_t layer_index = net.layers.size();
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    if (net.layers[i].name == layer_name) layer_index = i;
  }
  if (layer_index == net.layers.size()) {
    throw ParamError("unknown layer '" + layer_name + "'");
  }
  if (layer_activation(net.layers[layer_index]) != Activation::sigmoid) {
    throw ParamError("spike_triggered_average: layer '" + layer_name +
                     "' is not sigmoid-activated");
  }
  const std::size_t width = layer_output_width(net.layers[layer_index]);
  if (unit >= width) {
    throw ParamError("unit " + std::to_string(unit) + " out of range for layer '" +
                     layer_name + "' of width " + std::to_string(width));
  }
  StaResult result;
  result.layer = layer_name;
  result.unit = unit;
  result.threshold = threshold;

  Tensor acc;
  constexpr std::size_t kChunk = 128;
  for (std::size_t s = 0; s < windows.size(); s += kChunk) {
    const std::size_t n = std::min(kChunk, windows.size() - s);
    const auto& shape = windows[s].shape();
    Tensor batch({n, shape[0], shape[1], shape[2]});
    for (std::size_t i = 0; i < n; ++i) {
      const Tensor& w = windows[s + i];
      std::copy(w.data(), w.data() + w.size(), batch.data() + i * w.size());
    }
    ForwardTrace trace;
    network_forward(net, batch, &trace);
    const Tensor& acts = trace_output(trace, layer_index);
    for (std::size_t i = 0; i < n; ++i) {
      const double a = acts(i, unit);
      if (a <= threshold) continue;
      if (acc.empty()) acc = Tensor(windows[s + i].shape());
      const Tensor& w = windows[s + i];
      for (std::size_t k = 0; k < w.size(); ++k) acc[k] += a * w[k];
      result.weight_sum += a;
      ++result.contributing;
    }
  }
  if (result.contributing > 0) {
    acc *= 1.0 / result.weight_sum;
    result.average_window = std::move(acc);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Latent trajectory (principal-component substitute for the factor analysis)
// ---------------------------------------------------------------------------

struct TrajectoryResult {
  Tensor trajectory;                // [steps x components_used]
  std::vector<double> eigenvalues;  // descending, all of them
  std::size_t components_used = 0;
  bool reduced = false;  // fewer components than requested
  std::string method = "pca";
};

namespace detail {

// Cyclic Jacobi eigendecomposition for a symmetric matrix. a is destroyed;
// columns of v are the eigenvectors.
inline void jacobi_eigh(Tensor& a, Tensor& v, std::vector<double>& eigenvalues) {
  const std::size_t n = a.dim(0);
  v = Tensor::identity(n);
  for (std::size_t sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-22 * double(n * n)) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  eigenvalues.resize(n);
  for (std::size_t i = 0; i < n; ++i) eigenvalues[i] = a(i, i);
}

}  // namespace detail

struct PcaResult {
  Tensor centered;                  // [S x F], rows minus the column mean
  Tensor basis;                     // [F x components_used]
  std::vector<double> eigenvalues;  // descending, all F of them
  std::size_t components_used = 0;
  bool reduced = false;
};

// Covariance eigendecomposition of row observations. Components come in
// descending eigenvalue order with the sign fixed so each component's
// largest-magnitude loading is positive. Rank deficiency shrinks
// components_used and sets the reduced flag.
inline PcaResult principal_components(const Tensor& rows, std::size_t components) {
  if (rows.rank() != 2) {
    throw ShapeError("principal_components: expected [S x F] observations");
  }
  const std::size_t steps = rows.dim(0), width = rows.dim(1);
  if (steps < components) {
    throw EvalError("principal_components: " + std::to_string(steps) +
                    " observations for " + std::to_string(components) + " components");
  }
  PcaResult result;
  result.centered = rows;
  std::vector<double> mean(width, 0.0);
  for (std::size_t i = 0; i < steps; ++i) {
    const double* row = result.centered.data() + i * width;
    for (std::size_t j = 0; j < width; ++j) mean[j] += row[j];
  }
  for (double& m : mean) m /= double(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    double* row = result.centered.data() + i * width;
    for (std::size_t j = 0; j < width; ++j) row[j] -= mean[j];
  }

  Tensor cov = matmul_tn(result.centered, result.centered);
  cov *= 1.0 / double(steps);
  Tensor vecs;
  std::vector<double> vals;
  detail::jacobi_eigh(cov, vecs, vals);
  std::vector<std::size_t> order(width);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return vals[a] > vals[b]; });
  result.eigenvalues.reserve(width);
  for (std::size_t i : order) result.eigenvalues.push_back(vals[i]);

  const double tol =
      1e-12 * std::max(1.0, result.eigenvalues.empty() ? 0.0
                                                       : std::abs(result.eigenvalues[0]));
  std::size_t usable = 0;
  for (double v : result.eigenvalues) {
    if (v > tol) ++usable;
  }
  result.components_used = std::min(components, usable);
  result.reduced = result.components_used < components;

  result.basis = Tensor({width, std::max<std::size_t>(result.components_used, 1)});
  for (std::size_t kc = 0; kc < result.components_used; ++kc) {
    const std::size_t src = order[kc];
    std::size_t arg = 0;
    for (std::size_t j = 1; j < width; ++j) {
      if (std::abs(vecs(j, src)) > std::abs(vecs(arg, src))) arg = j;
    }
    const double sign = vecs(arg, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < width; ++j) result.basis(j, kc) = sign * vecs(j, src);
  }
  return result;
}

// Per-step tap features projected onto their leading principal components.
inline TrajectoryResult latent_trajectory(const Network& net, const MotionRecording& rec,
                                          const std::string& tap,
                                          std::size_t components = 3) {
  const std::size_t delta_t = net.spec.delta_t;
  const std::size_t t_len = rec.length();
  if (t_len < delta_t) {
    throw EvalError("latent_trajectory: recording shorter than one window");
  }
  const std::size_t steps = t_len - delta_t + 1;
  if (steps < components) {
    throw EvalError("latent_trajectory: " + std::to_string(steps) + " windows for " +
                    std::to_string(components) + " components");
  }
  Tensor feats;
  constexpr std::size_t kChunk = 128;
  std::size_t width = 0;
  for (std::size_t s = 0; s < steps; s += kChunk) {
    const std::size_t n = std::min(kChunk, steps - s);
    const Tensor windows = detail::step_windows(rec, delta_t, delta_t - 1 + s, n);
    const Tensor rows = extract_features_batch(net, windows, tap);
    if (feats.empty()) {
      width = rows.dim(1);
      feats = Tensor({steps, width});
    }
    std::copy(rows.data(), rows.data() + rows.size(), feats.data() + s * width);
  }
  const PcaResult pca = principal_components(feats, components);
  TrajectoryResult result;
  result.eigenvalues = pca.eigenvalues;
  result.components_used = pca.components_used;
  result.reduced = pca.reduced;
  if (pca.components_used == 0) {
    result.trajectory = Tensor({steps, 1});
    return result;
  }
  result.trajectory = matmul(pca.centered, pca.basis);
  return result;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

// Aligned text table, one horizon per column.
inline std::string horizon_table(const HorizonReport& r,
                                 const std::vector<std::string>& comments = {}) {
  std::ostringstream out;
  for (const auto& c : comments) out << "# " << c << "\n";
  out << "# model=" << r.model_id << " data=" << r.set_id << " fps=" << r.fps
      << " samples=" << r.sample_count << "\n";
  out << std::left << std::setw(24) << "method";
  for (const auto& h : r.horizons) {
    out << std::right << std::setw(9) << (detail::format_double(h.ms) + "ms");
  }
  out << "\n";
  out << std::left << std::setw(24) << r.model_id;
  out << std::fixed << std::setprecision(4);
  for (double e : r.mean_errors) out << std::right << std::setw(9) << e;
  out << "\n";
  return out.str();
}

inline std::string horizon_csv(const HorizonReport& r,
                               const std::vector<std::string>& comments = {}) {
  std::string out;
  for (const auto& c : comments) out += "# " + c + "\n";
  out += "horizon_ms,frame_idx,mean_error,n\n";
  for (std::size_t i = 0; i < r.horizons.size(); ++i) {
    out += detail::format_double(r.horizons[i].ms) + "," +
           std::to_string(r.horizons[i].frame_index) + "," +
           detail::format_double(r.mean_errors[i]) + "," +
           std::to_string(r.sample_count) + "\n";
  }
  return out;
}

inline std::string confusion_table(const ConfusionMatrix& m,
                                   const std::vector<std::string>& comments = {}) {
  std::ostringstream out;
  for (const auto& c : comments) out << "# " << c << "\n";
  const std::size_t classes = m.class_names.size();
  std::size_t w = 10;
  for (const auto& n : m.class_names) w = std::max(w, n.size() + 2);
  out << std::left << std::setw(int(w)) << "true\\pred";
  for (const auto& n : m.class_names) out << std::right << std::setw(int(w)) << n;
  out << std::right << std::setw(int(w)) << "rate" << "\n";
  const auto rates = m.per_class_rate();
  for (std::size_t i = 0; i < classes; ++i) {
    out << std::left << std::setw(int(w)) << m.class_names[i];
    for (std::size_t j = 0; j < classes; ++j) {
      out << std::right << std::setw(int(w)) << std::size_t(m.counts(i, j));
    }
    out << std::right << std::setw(int(w)) << std::fixed << std::setprecision(4)
        << rates[i] << "\n";
  }
  out << "# classification_rate=" << detail::format_double(m.rate()) << "\n";
  return out.str();
}

inline std::string trajectory_csv(const TrajectoryResult& t,
                                  const std::vector<std::string>& comments = {}) {
  std::string out;
  out += "# method=" + t.method + " (principal components; substitute for factor analysis)\n";
  for (const auto& c : comments) out += "# " + c + "\n";
  if (t.reduced) {
    out += "# warning: rank reduced to " + std::to_string(t.components_used) +
           " components\n";
  }
  out += "step";
  for (std::size_t k = 0; k < t.components_used; ++k) {
    out += ",comp" + std::to_string(k + 1);
  }
  out += "\n";
  for (std::size_t i = 0; i < t.trajectory.dim(0); ++i) {
    out += std::to_string(i);
    for (std::size_t k = 0; k < t.components_used; ++k) {
      out += "," + detail::format_double(t.trajectory(i, k));
    }
    out += "\n";
  }
  return out;
}

}  // namespace motenc
