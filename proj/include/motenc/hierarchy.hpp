#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "motenc/error.hpp"

namespace motenc {

// The body tree used by the hierarchical encoder: joints -> limbs ->
// {arms, legs, trunk} -> body. Limb joint lists must partition the joint
// range and every limb belongs to exactly one group.
struct Limb {
  std::string name;
  std::vector<std::size_t> joints;
};

struct HierarchyWidths {
  std::size_t joint = 10;  // per joint node
  std::size_t limb = 30;   // per limb node
  std::size_t group = 60;  // per group node (arms / legs / trunk)
  std::size_t body = 300;
};

struct HierarchySpec {
  std::size_t num_joints = 24;
  std::vector<Limb> limbs;
  std::map<std::string, std::vector<std::string>> groups;  // arms/legs/trunk
  HierarchyWidths widths;

  static const std::vector<std::string>& group_order() {
    static const std::vector<std::string> order = {"arms", "legs", "trunk"};
    return order;
  }

  const Limb* find_limb(const std::string& name) const {
    for (const auto& l : limbs) {
      if (l.name == name) return &l;
    }
    return nullptr;
  }

  void validate() const {
    std::vector<int> seen(num_joints, 0);
    for (const auto& limb : limbs) {
      if (limb.joints.empty()) {
        throw ConfigError("hierarchy: limb '" + limb.name + "' has no joints");
      }
      for (std::size_t j : limb.joints) {
        if (j >= num_joints) {
          throw ConfigError("hierarchy: limb '" + limb.name + "' references joint " +
                            std::to_string(j) + " >= num_joints");
        }
        if (seen[j]++) {
          throw ConfigError("hierarchy: joint " + std::to_string(j) +
                            " appears in more than one limb");
        }
      }
    }
    for (std::size_t j = 0; j < num_joints; ++j) {
      if (!seen[j]) {
        throw ConfigError("hierarchy: joint " + std::to_string(j) +
                          " belongs to no limb");
      }
    }
    std::map<std::string, int> limb_group_count;
    for (const auto& [group, members] : groups) {
      if (std::find(group_order().begin(), group_order().end(), group) ==
          group_order().end()) {
        throw ConfigError("hierarchy: unknown group '" + group + "'");
      }
      for (const auto& name : members) {
        if (!find_limb(name)) {
          throw ConfigError("hierarchy: group '" + group + "' references unknown limb '" +
                            name + "'");
        }
        ++limb_group_count[name];
      }
    }
    for (const auto& limb : limbs) {
      if (limb_group_count[limb.name] != 1) {
        throw ConfigError("hierarchy: limb '" + limb.name +
                          "' must appear in exactly one group");
      }
    }
    if (widths.joint == 0 || widths.limb == 0 || widths.group == 0 || widths.body == 0) {
      throw ConfigError("hierarchy: node widths must be positive");
    }
  }
};

// 24-joint SMPL-style skeleton grouped into five limbs.
inline HierarchySpec default_hierarchy() {
  HierarchySpec h;
  h.num_joints = 24;
  h.limbs = {
      {"trunk", {0, 3, 6, 9, 12, 15}},
      {"left_arm", {13, 16, 18, 20, 22}},
      {"right_arm", {14, 17, 19, 21, 23}},
      {"left_leg", {1, 4, 7, 10}},
      {"right_leg", {2, 5, 8, 11}},
  };
  h.groups = {
      {"arms", {"left_arm", "right_arm"}},
      {"legs", {"left_leg", "right_leg"}},
      {"trunk", {"trunk"}},
  };
  return h;
}

}  // namespace motenc
