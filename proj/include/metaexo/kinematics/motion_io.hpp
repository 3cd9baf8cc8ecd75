#pragma once

#include <filesystem>
#include <vector>

#include "metaexo/kinematics/human_model.hpp"
#include "metaexo/kinematics/tree.hpp"

namespace metaexo::kinematics {

struct KeypointMotion {
  double fps = 0.0;
  KinematicTree tree;
  std::vector<SkeletonFrame> frames;
};

// JSON schema: fps, names, parents (-1 marks the root), rest_dirs (N-1 x 3),
// lengths (N-1), frames (T x N x 3, meters). The loader enforces every tree
// invariant before returning.
KeypointMotion load_motion(const std::filesystem::path& path);
void save_motion(const std::filesystem::path& path, const KeypointMotion& motion);

struct RetargetedTrajectory {
  std::vector<double> angles;              // elbow flexion per frame, radians
  std::vector<std::vector<double>> joints;  // full IK solution per frame
  std::vector<double> residuals;           // IK objective per frame
  double dt = 0.0;
  int unconverged_frames = 0;
};

// Full pipeline for one motion: retarget every frame onto the model's
// skeleton, run warm-started IK, and read off the elbow flexion angle.
RetargetedTrajectory retarget_to_elbow(const KeypointMotion& motion, const HumanModel& model,
                                       Arm arm, const Mat3& q_transform);

}  // namespace metaexo::kinematics
