#pragma once

#include <string>
#include <vector>

#include "metaexo/kinematics/geom.hpp"

namespace metaexo::kinematics {

// Skeletal hierarchy. Node 0 is the single root; parents[i] < i so tree
// order doubles as topological order. Per non-root node i, rest_dirs[i-1]
// is the unit bone direction from its parent and lengths[i-1] the bone
// length in meters.
struct KinematicTree {
  std::vector<std::string> names;
  std::vector<int> parents;
  std::vector<Vec3> rest_dirs;
  std::vector<double> lengths;

  std::size_t node_count() const { return parents.size(); }
  void validate() const;  // throws TopologyMismatchError / Error on violations
  bool same_topology(const KinematicTree& o) const { return parents == o.parents; }
};

struct SkeletonFrame {
  std::vector<Vec3> positions;
  double timestamp = 0.0;
};

// Unit vector from parent toward child; DegenerateBoneError if coincident.
Vec3 bone_vector(const Vec3& parent_pos, const Vec3& child_pos);

// One rotation per non-root node with R_i * v_i = b_i (observed bone).
std::vector<Mat3> source_rotations(const SkeletonFrame& frame, const KinematicTree& tree);

// P_i = P_parent + R_i * l_i * v_i, applied in tree order.
SkeletonFrame forward_kinematics(const KinematicTree& tree, const std::vector<Mat3>& rotations,
                                 const Vec3& root_pos);

// source_rotations -> conjugation by Q -> forward kinematics on the target
// rest pose. Trees must share the same parent array.
SkeletonFrame retarget(const SkeletonFrame& source_frame, const KinematicTree& source_tree,
                       const KinematicTree& target_tree, const Mat3& q, const Vec3& target_root);

}  // namespace metaexo::kinematics
