#pragma once

// Small schemas and architectures shared across the test files. Keeping the
// joint count and window length tiny makes the gradient and training tests
// fast without touching the default full-size specs.

#include <motenc/data.hpp>
#include <motenc/hierarchy.hpp>
#include <motenc/model.hpp>

#include "oracles.hpp"

namespace fixtures {

inline motenc::HierarchySpec tiny_hierarchy() {
  motenc::HierarchySpec h;
  h.num_joints = 4;
  h.limbs = {{"up", {0, 1}}, {"down", {2, 3}}};
  h.groups = {{"arms", {"up"}}, {"legs", {"down"}}, {"trunk", {}}};
  h.widths = {2, 3, 3, 6};
  return h;
}

inline motenc::SkeletonSchema tiny_schema() {
  motenc::SkeletonSchema s;
  s.joint_names = {"j0", "j1", "j2", "j3"};
  s.hierarchy = tiny_hierarchy();
  return s;
}

inline motenc::ArchitectureSpec tiny_spec(motenc::ArchKind kind,
                                          std::size_t delta_t = 5) {
  motenc::ArchitectureSpec spec;
  spec.kind = kind;
  spec.delta_t = delta_t;
  spec.num_joints = 4;
  spec.outer_width = 8;
  spec.bottleneck_width = 4;
  spec.conv_branches = {{3, 2}, {2, delta_t}};
  spec.hierarchy = tiny_hierarchy();
  spec.classifier = {6, 5, 4, 3};
  spec.init_std = 0.5;
  spec.init_nonzeros = 6;
  return spec;
}

inline motenc::MotionRecording random_recording(std::size_t frames,
                                                motenc::SeededRng& rng,
                                                motenc::SkeletonSchema schema,
                                                int fps = 60) {
  motenc::MotionRecording rec;
  rec.schema = std::move(schema);
  rec.fps = fps;
  rec.frames = oracles::random_tensor({frames, 3, rec.schema.num_joints()}, rng, 0.3);
  rec.subject = "test";
  rec.trial = "t" + std::to_string(rng.next_u64() % 100000);
  return rec;
}

}  // namespace fixtures
