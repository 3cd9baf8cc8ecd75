#include "metaexo/kinematics/tree.hpp"

#include <cmath>
#include <string>

#include "metaexo/common/error.hpp"

namespace metaexo::kinematics {

void KinematicTree::validate() const {
  const std::size_t n = parents.size();
  if (n == 0) throw TopologyMismatchError("tree has no nodes");
  if (parents[0] != -1) throw TopologyMismatchError("node 0 must be the root");
  for (std::size_t i = 1; i < n; ++i)
    if (parents[i] < 0 || static_cast<std::size_t>(parents[i]) >= i)
      throw TopologyMismatchError("parents must form a tree in topological order (node " +
                                  std::to_string(i) + ")");
  if (names.size() != n)
    throw TopologyMismatchError("name count does not match node count");
  if (rest_dirs.size() != n - 1 || lengths.size() != n - 1)
    throw TopologyMismatchError("rest pose arrays must cover every non-root node");
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (std::abs(rest_dirs[i].norm() - 1.0) > 1e-9)
      throw Error("rest direction " + std::to_string(i + 1) + " is not unit length");
    if (!(lengths[i] > 0.0))
      throw Error("bone length " + std::to_string(i + 1) + " must be positive");
  }
}

Vec3 bone_vector(const Vec3& parent_pos, const Vec3& child_pos) {
  const Vec3 d = child_pos - parent_pos;
  if (d.norm() <= 1e-9)
    throw DegenerateBoneError("parent and child keypoints coincide");
  return d.normalized();
}

std::vector<Mat3> source_rotations(const SkeletonFrame& frame, const KinematicTree& tree) {
  if (frame.positions.size() != tree.node_count())
    throw TopologyMismatchError("frame keypoint count does not match the tree");
  std::vector<Mat3> out;
  out.reserve(tree.node_count() - 1);
  for (std::size_t i = 1; i < tree.node_count(); ++i) {
    const Vec3 b = bone_vector(frame.positions[tree.parents[i]], frame.positions[i]);
    out.push_back(rodrigues_align(tree.rest_dirs[i - 1], b));
  }
  return out;
}

SkeletonFrame forward_kinematics(const KinematicTree& tree, const std::vector<Mat3>& rotations,
                                 const Vec3& root_pos) {
  if (rotations.size() != tree.node_count() - 1)
    throw TopologyMismatchError("need one rotation per non-root node");
  SkeletonFrame out;
  out.positions.resize(tree.node_count());
  out.positions[0] = root_pos;
  for (std::size_t i = 1; i < tree.node_count(); ++i) {
    const Vec3 bone = rotations[i - 1] * (tree.rest_dirs[i - 1] * tree.lengths[i - 1]);
    out.positions[i] = out.positions[tree.parents[i]] + bone;
  }
  return out;
}

SkeletonFrame retarget(const SkeletonFrame& source_frame, const KinematicTree& source_tree,
                       const KinematicTree& target_tree, const Mat3& q, const Vec3& target_root) {
  if (!source_tree.same_topology(target_tree))
    throw TopologyMismatchError("retarget requires identical source and target topologies");
  std::vector<Mat3> rotations = source_rotations(source_frame, source_tree);
  for (Mat3& r : rotations) r = frame_transform(r, q);
  SkeletonFrame out = forward_kinematics(target_tree, rotations, target_root);
  out.timestamp = source_frame.timestamp;
  return out;
}

}  // namespace metaexo::kinematics
