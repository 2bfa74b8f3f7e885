#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "motenc/error.hpp"
#include "motenc/hierarchy.hpp"
#include "motenc/io_util.hpp"
#include "motenc/tensor.hpp"

namespace motenc {

struct SkeletonSchema {
  std::vector<std::string> joint_names;
  HierarchySpec hierarchy;

  std::size_t num_joints() const { return joint_names.size(); }

  void validate() const {
    if (joint_names.size() != hierarchy.num_joints) {
      throw ConfigError("schema: " + std::to_string(joint_names.size()) +
                        " joint names for hierarchy of " +
                        std::to_string(hierarchy.num_joints) + " joints");
    }
    for (std::size_t i = 0; i < joint_names.size(); ++i) {
      for (std::size_t j = i + 1; j < joint_names.size(); ++j) {
        if (joint_names[i] == joint_names[j]) {
          throw ConfigError("schema: duplicate joint name '" + joint_names[i] + "'");
        }
      }
    }
    hierarchy.validate();
  }
};

inline SkeletonSchema default_schema() {
  SkeletonSchema s;
  s.joint_names = {"pelvis",      "left_hip",      "right_hip",      "spine1",
                   "left_knee",   "right_knee",    "spine2",         "left_ankle",
                   "right_ankle", "spine3",        "left_foot",      "right_foot",
                   "neck",        "left_collar",   "right_collar",   "head",
                   "left_shoulder", "right_shoulder", "left_elbow",  "right_elbow",
                   "left_wrist",  "right_wrist",   "left_hand",      "right_hand"};
  s.hierarchy = default_hierarchy();
  return s;
}

// A mocap take: T frames of Cartesian joint positions in meters.
// frames layout is [T x 3 x N_joints]; a frame row-major flattens to
// (x of every joint, y of every joint, z of every joint).
struct MotionRecording {
  SkeletonSchema schema;
  int fps = 60;
  Tensor frames;  // [T x 3 x J]
  std::optional<std::string> label;
  std::string subject;
  std::string trial;

  std::size_t length() const { return frames.empty() ? 0 : frames.dim(0); }
  std::size_t num_joints() const { return schema.num_joints(); }
  std::string id() const { return subject + "/" + trial; }

  void validate() const {
    if (frames.rank() != 3 || frames.dim(1) != 3 || frames.dim(2) != num_joints()) {
      throw DataError("recording: frames " + shape_str(frames.shape()) +
                      " do not match schema with " + std::to_string(num_joints()) +
                      " joints");
    }
    if (fps <= 0) throw DataError("recording: fps must be positive");
    for (double v : frames.values()) {
      if (!std::isfinite(v)) throw DataError("recording: non-finite coordinate");
    }
  }
};

// One training sample: the window ending at frame t and the window that
// immediately follows it, both transposed to [3 x J x delta_t].
struct WindowPair {
  Tensor input;
  Tensor target;
  std::size_t t_index = 0;  // last frame of the input window
  std::string recording_id;
};

// ---------------------------------------------------------------------------
// Normalization and windowing
// ---------------------------------------------------------------------------

// Two steps: subtract each frame's joint centroid (drops translation, keeps
// rotation), then subtract the mean centered pose over the whole trial.
inline MotionRecording normalize_recording(const MotionRecording& rec) {
  rec.validate();
  MotionRecording out = rec;
  const std::size_t t_len = out.length(), joints = out.num_joints();
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t c = 0; c < 3; ++c) {
      double* row = out.frames.data() + (t * 3 + c) * joints;
      double centroid = 0.0;
      for (std::size_t j = 0; j < joints; ++j) centroid += row[j];
      centroid /= double(joints);
      for (std::size_t j = 0; j < joints; ++j) row[j] -= centroid;
    }
  }
  std::vector<double> mean_pose(3 * joints, 0.0);
  for (std::size_t t = 0; t < t_len; ++t) {
    const double* f = out.frames.data() + t * 3 * joints;
    for (std::size_t i = 0; i < 3 * joints; ++i) mean_pose[i] += f[i];
  }
  for (double& v : mean_pose) v /= double(t_len);
  for (std::size_t t = 0; t < t_len; ++t) {
    double* f = out.frames.data() + t * 3 * joints;
    for (std::size_t i = 0; i < 3 * joints; ++i) f[i] -= mean_pose[i];
  }
  return out;
}

// Plain decimation; the source rate must be an integer multiple of the
// target rate.
inline MotionRecording downsample(const MotionRecording& rec, int target_fps) {
  if (target_fps <= 0 || rec.fps % target_fps != 0) {
    throw ParamError("downsample: cannot resample " + std::to_string(rec.fps) +
                     " Hz to " + std::to_string(target_fps) + " Hz (non-integer ratio)");
  }
  const std::size_t step = std::size_t(rec.fps / target_fps);
  MotionRecording out = rec;
  out.fps = target_fps;
  const std::size_t joints = rec.num_joints();
  const std::size_t new_len = (rec.length() + step - 1) / step;
  out.frames = Tensor({new_len, 3, joints});
  for (std::size_t t = 0; t < new_len; ++t) {
    const double* src = rec.frames.data() + (t * step) * 3 * joints;
    double* dst = out.frames.data() + t * 3 * joints;
    std::copy(src, src + 3 * joints, dst);
  }
  return out;
}

namespace detail {

// [3 x J x dt] window starting at frame t0.
inline Tensor window_at(const MotionRecording& rec, std::size_t t0, std::size_t dt) {
  const std::size_t joints = rec.num_joints();
  Tensor w({3, joints, dt});
  for (std::size_t k = 0; k < dt; ++k) {
    const double* f = rec.frames.data() + (t0 + k) * 3 * joints;
    for (std::size_t c = 0; c < 3; ++c) {
      for (std::size_t j = 0; j < joints; ++j) {
        w.data()[(c * joints + j) * dt + k] = f[c * joints + j];
      }
    }
  }
  return w;
}

}  // namespace detail

// All (input, target) pairs of a recording: one pair per t in
// [delta_t-1, T-delta_t-1] (zero-based last frame of the input window),
// i.e. T - 2*delta_t + 1 pairs. Returns an empty list when the recording
// is too short.
inline std::vector<WindowPair> make_window_pairs(const MotionRecording& rec,
                                                 std::size_t delta_t) {
  if (delta_t == 0) throw ParamError("make_window_pairs: delta_t must be positive");
  std::vector<WindowPair> pairs;
  const std::size_t t_len = rec.length();
  if (t_len < 2 * delta_t) return pairs;
  pairs.reserve(t_len - 2 * delta_t + 1);
  for (std::size_t t = delta_t - 1; t + delta_t < t_len; ++t) {
    WindowPair p;
    p.input = detail::window_at(rec, t - delta_t + 1, delta_t);
    p.target = detail::window_at(rec, t + 1, delta_t);
    p.t_index = t;
    p.recording_id = rec.id();
    pairs.push_back(std::move(p));
  }
  return pairs;
}

inline void shuffle_dataset(std::vector<WindowPair>& pairs, SeededRng& rng) {
  rng.shuffle(pairs);
}

// Zero every coordinate of the limb's joints across the whole window.
inline Tensor mask_limb(const Tensor& window, const std::string& limb_name,
                        const SkeletonSchema& schema) {
  const Limb* limb = schema.hierarchy.find_limb(limb_name);
  if (!limb) throw ParamError("unknown limb '" + limb_name + "'");
  if (window.rank() != 3 || window.dim(0) != 3 ||
      window.dim(1) != schema.num_joints()) {
    throw ShapeError("mask_limb: window " + shape_str(window.shape()) +
                     " does not match schema");
  }
  Tensor out = window;
  const std::size_t joints = window.dim(1), dt = window.dim(2);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t j : limb->joints) {
      double* row = out.data() + (c * joints + j) * dt;
      std::fill(row, row + dt, 0.0);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Motion file I/O
// ---------------------------------------------------------------------------
//
// Text format (.motenc):
//   #motenc v1
//   fps=<int> joints=<comma list> label=<str|-> subject=<str> trial=<str>
//   T rows of 3*N_joints space-separated decimals (x-, then y-, then z-block)
//
// Binary format (.mrec):
//   "MREC" | u32 version | u64 header_len | JSON header
//   | little-endian f64 frame payload | u32 CRC-32

inline constexpr std::uint32_t kMotionBinaryVersion = 1;

namespace detail {

inline std::string sanitize_field(const std::string& s, const char* what) {
  if (s.find_first_of(" \t\n\r") != std::string::npos) {
    throw DataError(std::string("motion file ") + what + " may not contain whitespace: '" +
                    s + "'");
  }
  return s.empty() ? std::string("-") : s;
}

}  // namespace detail

inline std::string motion_text(const MotionRecording& rec) {
  rec.validate();
  std::string out = "#motenc v1\n";
  out += "fps=" + std::to_string(rec.fps);
  out += " joints=";
  for (std::size_t i = 0; i < rec.schema.joint_names.size(); ++i) {
    if (i) out += ",";
    out += rec.schema.joint_names[i];
  }
  out += " label=" + detail::sanitize_field(rec.label.value_or("-"), "label");
  out += " subject=" + detail::sanitize_field(rec.subject, "subject");
  out += " trial=" + detail::sanitize_field(rec.trial, "trial");
  out += "\n";
  const std::size_t joints = rec.num_joints();
  for (std::size_t t = 0; t < rec.length(); ++t) {
    const double* f = rec.frames.data() + t * 3 * joints;
    for (std::size_t i = 0; i < 3 * joints; ++i) {
      if (i) out += " ";
      out += detail::format_double(f[i]);
    }
    out += "\n";
  }
  return out;
}

inline MotionRecording parse_motion_text(const std::string& text,
                                         const std::string& name) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;

  auto next_line = [&](const char* what) {
    if (!std::getline(in, line)) throw ParseError(name, line_no + 1, std::string("missing ") + what);
    ++line_no;
  };

  next_line("header line");
  if (line != "#motenc v1") throw ParseError(name, line_no, "expected '#motenc v1'");
  next_line("metadata line");

  MotionRecording rec;
  std::istringstream meta(line);
  std::string field;
  bool have_fps = false, have_joints = false;
  while (meta >> field) {
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw ParseError(name, line_no, "bad field '" + field + "'");
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    if (key == "fps") {
      try {
        rec.fps = std::stoi(value);
      } catch (...) {
        throw ParseError(name, line_no, "bad fps '" + value + "'");
      }
      have_fps = true;
    } else if (key == "joints") {
      rec.schema.joint_names.clear();
      std::istringstream js(value);
      std::string jn;
      while (std::getline(js, jn, ',')) rec.schema.joint_names.push_back(jn);
      have_joints = true;
    } else if (key == "label") {
      if (value != "-") rec.label = value;
    } else if (key == "subject") {
      if (value != "-") rec.subject = value;
    } else if (key == "trial") {
      if (value != "-") rec.trial = value;
    } else {
      throw ParseError(name, line_no, "unknown field '" + key + "'");
    }
  }
  if (!have_fps || !have_joints) {
    throw ParseError(name, line_no, "metadata line needs fps= and joints=");
  }
  const std::size_t joints = rec.schema.joint_names.size();
  if (joints == 0) throw ParseError(name, line_no, "empty joint list");

  std::vector<double> values;
  std::size_t t_len = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::size_t count = 0;
    std::size_t pos = 0;
    while (pos < line.size()) {
      const std::size_t end = line.find(' ', pos);
      const std::string_view tok(line.data() + pos,
                                 (end == std::string::npos ? line.size() : end) - pos);
      if (!tok.empty()) {
        bool ok = false;
        const double v = detail::parse_double(tok, ok);
        if (!ok) {
          throw ParseError(name, line_no, "non-numeric cell '" + std::string(tok) + "'");
        }
        values.push_back(v);
        ++count;
      }
      if (end == std::string::npos) break;
      pos = end + 1;
    }
    if (count != 3 * joints) {
      throw ParseError(name, line_no,
                       "expected " + std::to_string(3 * joints) + " columns, got " +
                           std::to_string(count));
    }
    ++t_len;
  }
  if (t_len == 0) throw ParseError(name, line_no, "recording has no frames");
  rec.frames = Tensor({t_len, 3, joints}, std::move(values));

  // Attach the default hierarchy when the joint list matches it; otherwise a
  // caller with masking needs must supply one.
  const SkeletonSchema def = default_schema();
  if (rec.schema.joint_names == def.joint_names) {
    rec.schema.hierarchy = def.hierarchy;
  } else {
    HierarchySpec h;
    h.num_joints = joints;
    Limb all{"all", {}};
    for (std::size_t j = 0; j < joints; ++j) all.joints.push_back(j);
    h.limbs = {all};
    h.groups = {{"arms", {}}, {"legs", {}}, {"trunk", {"all"}}};
    rec.schema.hierarchy = h;
  }
  rec.validate();
  return rec;
}

inline std::string motion_binary(const MotionRecording& rec) {
  rec.validate();
  std::string buf;
  buf.append("MREC", 4);
  detail::append_scalar<std::uint32_t>(buf, kMotionBinaryVersion);
  nlohmann::json header{{"fps", rec.fps},
                        {"joints", rec.schema.joint_names},
                        {"label", rec.label.value_or("")},
                        {"subject", rec.subject},
                        {"trial", rec.trial},
                        {"frames", rec.length()}};
  const std::string blob = header.dump();
  detail::append_scalar<std::uint64_t>(buf, blob.size());
  buf += blob;
  buf.append(reinterpret_cast<const char*>(rec.frames.data()),
             rec.frames.size() * sizeof(double));
  detail::append_scalar<std::uint32_t>(buf, detail::crc32(buf.data(), buf.size()));
  return buf;
}

inline MotionRecording parse_motion_binary(const std::string& buf,
                                           const std::string& name) {
  if (buf.size() < 4 || buf.compare(0, 4, "MREC") != 0) {
    throw FormatError(name + ": not a motion container (bad magic)");
  }
  std::size_t off = 4;
  const auto version = detail::read_scalar<std::uint32_t>(buf, off, "version");
  if (version != kMotionBinaryVersion) {
    throw VersionError(name + ": motion container version " + std::to_string(version));
  }
  const auto blob_len = detail::read_scalar<std::uint64_t>(buf, off, "header length");
  if (off + blob_len > buf.size()) throw TruncatedError(name + ": truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(buf.substr(off, blob_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(name + ": bad header: " + e.what());
  }
  off += blob_len;
  MotionRecording rec;
  std::size_t t_len = 0;
  try {
    rec.fps = header.at("fps").get<int>();
    rec.schema.joint_names = header.at("joints").get<std::vector<std::string>>();
    const auto label = header.at("label").get<std::string>();
    if (!label.empty()) rec.label = label;
    rec.subject = header.at("subject").get<std::string>();
    rec.trial = header.at("trial").get<std::string>();
    t_len = header.at("frames").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(name + ": bad header: " + e.what());
  }
  const std::size_t joints = rec.schema.joint_names.size();
  const std::size_t payload = t_len * 3 * joints * sizeof(double);
  if (buf.size() < off + payload + 4) throw TruncatedError(name + ": truncated payload");
  if (buf.size() != off + payload + 4) throw FormatError(name + ": unexpected file size");
  std::uint32_t file_crc;
  std::memcpy(&file_crc, buf.data() + buf.size() - 4, 4);
  if (file_crc != detail::crc32(buf.data(), buf.size() - 4)) {
    throw ChecksumError(name + ": CRC mismatch (file corrupted)");
  }
  std::vector<double> values(t_len * 3 * joints);
  std::memcpy(values.data(), buf.data() + off, payload);
  rec.frames = Tensor({t_len, 3, joints}, std::move(values));
  const SkeletonSchema def = default_schema();
  if (rec.schema.joint_names == def.joint_names) {
    rec.schema.hierarchy = def.hierarchy;
  } else {
    HierarchySpec h;
    h.num_joints = joints;
    Limb all{"all", {}};
    for (std::size_t j = 0; j < joints; ++j) all.joints.push_back(j);
    h.limbs = {all};
    h.groups = {{"arms", {}}, {"legs", {}}, {"trunk", {"all"}}};
    rec.schema.hierarchy = h;
  }
  rec.validate();
  return rec;
}

inline void save_motion_file(const MotionRecording& rec, const std::string& path) {
  const bool binary = path.size() >= 5 && path.compare(path.size() - 5, 5, ".mrec") == 0;
  detail::write_file_bytes(path, binary ? motion_binary(rec) : motion_text(rec));
}

inline MotionRecording load_motion_file(const std::string& path) {
  const std::string buf = detail::read_file_bytes(path);
  if (buf.size() >= 4 && buf.compare(0, 4, "MREC") == 0) {
    return parse_motion_binary(buf, path);
  }
  return parse_motion_text(buf, path);
}

// ---------------------------------------------------------------------------
// Synthetic motion generator
// ---------------------------------------------------------------------------
//
// Procedural stand-in for real mocap exports: per-joint sinusoids around a
// rest pose, with action-specific frequency signatures and amplitude
// patterns, plus a little Gaussian jitter. The five actions are pairwise
// separable by per-joint variance alone, which downstream tests rely on.

inline const std::vector<std::string>& synth_actions() {
  static const std::vector<std::string> actions = {"walk", "wave", "box", "squat",
                                                   "turn"};
  return actions;
}

namespace detail {

// Rest pose of the default 24-joint skeleton, meters. Column order matches
// default_schema().
inline const double* rest_pose() {
  // x, y, z per joint.
  static const double pose[24][3] = {
      {0.00, 0.95, 0.00},   // pelvis
      {-0.09, 0.91, 0.00},  // left_hip
      {0.09, 0.91, 0.00},   // right_hip
      {0.00, 1.07, 0.00},   // spine1
      {-0.10, 0.50, 0.00},  // left_knee
      {0.10, 0.50, 0.00},   // right_knee
      {0.00, 1.19, 0.00},   // spine2
      {-0.11, 0.08, 0.00},  // left_ankle
      {0.11, 0.08, 0.00},   // right_ankle
      {0.00, 1.31, 0.00},   // spine3
      {-0.12, 0.02, 0.12},  // left_foot
      {0.12, 0.02, 0.12},   // right_foot
      {0.00, 1.45, 0.00},   // neck
      {-0.06, 1.42, 0.00},  // left_collar
      {0.06, 1.42, 0.00},   // right_collar
      {0.00, 1.58, 0.00},   // head
      {-0.18, 1.40, 0.00},  // left_shoulder
      {0.18, 1.40, 0.00},   // right_shoulder
      {-0.20, 1.12, 0.00},  // left_elbow
      {0.20, 1.12, 0.00},   // right_elbow
      {-0.21, 0.86, 0.00},  // left_wrist
      {0.21, 0.86, 0.00},   // right_wrist
      {-0.22, 0.76, 0.00},  // left_hand
      {0.22, 0.76, 0.00},   // right_hand
  };
  return &pose[0][0];
}

struct SynthParams {
  double freq;    // dominant frequency, Hz
  double phase;   // global phase offset
  double amp;     // global amplitude scale
  double jitter;  // per-coordinate noise std, meters
};

constexpr double kPi = 3.14159265358979323846;

inline bool in_list(std::size_t j, std::initializer_list<std::size_t> list) {
  for (std::size_t v : list) {
    if (v == j) return true;
  }
  return false;
}

}  // namespace detail

inline MotionRecording synth_generate(const std::string& action, double duration_s,
                                      int fps, SeededRng& rng) {
  bool known = false;
  for (const auto& a : synth_actions()) known = known || a == action;
  if (!known) throw ParamError("unknown synthetic action '" + action + "'");
  if (fps <= 0) throw ParamError("synth_generate: fps must be positive");
  const std::size_t t_len = std::size_t(duration_s * fps);
  if (t_len < 1) throw ParamError("synth_generate: duration too short for one frame");

  detail::SynthParams p{};
  if (action == "walk") p = {1.0, 0.0, 1.0, 0.002};
  if (action == "wave") p = {2.0, 0.0, 1.0, 0.002};
  if (action == "box") p = {2.6, 0.0, 1.0, 0.002};
  if (action == "squat") p = {0.55, 0.0, 1.0, 0.002};
  if (action == "turn") p = {0.30, 0.0, 1.0, 0.002};
  // Per-sample variation: global phase, mild frequency and amplitude jitter.
  p.phase = rng.uniform() * 2.0 * detail::kPi;
  p.freq *= 1.0 + 0.05 * (2.0 * rng.uniform() - 1.0);
  p.amp *= 1.0 + 0.10 * (2.0 * rng.uniform() - 1.0);

  MotionRecording rec;
  rec.schema = default_schema();
  rec.fps = fps;
  rec.label = action;
  rec.frames = Tensor({t_len, 3, 24});

  const double* rest = detail::rest_pose();
  using detail::in_list;
  const auto left_leg = {std::size_t(1), std::size_t(4), std::size_t(7), std::size_t(10)};
  const auto right_leg = {std::size_t(2), std::size_t(5), std::size_t(8), std::size_t(11)};
  const auto left_arm = {std::size_t(13), std::size_t(16), std::size_t(18), std::size_t(20),
                         std::size_t(22)};
  const auto right_arm = {std::size_t(14), std::size_t(17), std::size_t(19), std::size_t(21),
                          std::size_t(23)};

  for (std::size_t t = 0; t < t_len; ++t) {
    const double time = double(t) / double(fps);
    const double w = 2.0 * detail::kPi * p.freq;
    const double s = std::sin(w * time + p.phase);
    const double s2 = std::sin(2.0 * w * time + p.phase);
    const double c = std::cos(w * time + p.phase);
    for (std::size_t j = 0; j < 24; ++j) {
      double x = rest[j * 3 + 0];
      double y = rest[j * 3 + 1];
      double z = rest[j * 3 + 2];
      // How far down the limb the joint sits scales its swing.
      const double reach = 1.0 + 0.5 * (1.6 - y);
      if (action == "walk") {
        const double side = in_list(j, left_leg) || in_list(j, left_arm) ? 1.0 : -1.0;
        if (in_list(j, left_leg) || in_list(j, right_leg)) {
          z += p.amp * 0.16 * reach * side * s;
          y += p.amp * 0.02 * std::max(0.0, side * s);
        } else if (in_list(j, left_arm) || in_list(j, right_arm)) {
          // Arms swing against the same-side leg.
          z -= p.amp * 0.08 * reach * side * s;
        } else {
          y += p.amp * 0.015 * s2;
          x += p.amp * 0.01 * s;
        }
      } else if (action == "wave") {
        if (in_list(j, left_arm)) {
          x += p.amp * 0.12 * reach * s;
          y += p.amp * 0.05 * reach * c;
        } else if (j == 15 || j == 12) {  // head and neck sway a touch
          x += p.amp * 0.005 * s;
        }
      } else if (action == "box") {
        const double side = in_list(j, left_arm) ? 1.0 : -1.0;
        if (in_list(j, left_arm) || in_list(j, right_arm)) {
          z += p.amp * 0.14 * reach * std::max(0.0, side * s);
          x += p.amp * 0.02 * reach * side * c;
        } else if (in_list(j, left_leg) || in_list(j, right_leg)) {
          y += p.amp * 0.008 * s2;
        } else {
          x += p.amp * 0.02 * s;
        }
      } else if (action == "squat") {
        const double dip = 0.5 * (1.0 - c);  // 0..1
        if (in_list(j, left_leg) || in_list(j, right_leg)) {
          if (j == 4 || j == 5) z += p.amp * 0.10 * dip;  // knees travel forward
          y -= p.amp * 0.10 * dip * (y > 0.3 ? 1.0 : 0.2);
        } else {
          y -= p.amp * 0.16 * dip;
          if (in_list(j, left_arm) || in_list(j, right_arm)) z += p.amp * 0.06 * dip;
        }
      } else {  // turn: whole-body yaw, radius preserved
        const double theta = (detail::kPi / 2.0) * std::sin(w * time + p.phase);
        const double ct = std::cos(theta), st = std::sin(theta);
        const double nx = ct * x - st * z;
        const double nz = st * x + ct * z;
        x = nx;
        z = nz;
      }
      rec.frames(t, 0, j) = x + p.jitter * rng.normal();
      rec.frames(t, 1, j) = y + p.jitter * rng.normal();
      rec.frames(t, 2, j) = z + p.jitter * rng.normal();
    }
  }
  return rec;
}

}  // namespace motenc
