#pragma once

#include <cstddef>
#include <vector>

#include "metaexo/kinematics/geom.hpp"
#include "metaexo/kinematics/tree.hpp"

namespace metaexo::kinematics {

enum class Arm { kRight, kLeft };

// Minimal upper-body chain: a torso root with two arms. Each arm hangs from
// a fixed shoulder offset and carries three orthogonal shoulder hinges
// (x, y, z order) plus one elbow flexion hinge, eight DOFs total.
//
// Keypoints: 0 root, 1 r_shoulder, 2 r_elbow, 3 r_wrist,
//            4 l_shoulder, 5 l_elbow, 6 l_wrist.
// DOFs: 0..2 right shoulder, 3 right elbow, 4..6 left shoulder, 7 left elbow.
class HumanModel {
 public:
  static constexpr std::size_t kKeypoints = 7;
  static constexpr std::size_t kDofs = 8;

  double shoulder_offset = 0.20;
  double upper_arm = 0.28;
  double forearm = 0.26;
  double elbow_lo = 0.0;
  double elbow_hi = 2.6;
  double shoulder_lo = -2.8;
  double shoulder_hi = 2.8;

  std::size_t dof_count() const { return kDofs; }
  std::size_t elbow_dof(Arm arm) const { return arm == Arm::kRight ? 3 : 7; }
  double limit_lo(std::size_t dof) const;
  double limit_hi(std::size_t dof) const;

  // Rest-pose tree matching the keypoint layout (arms hanging along -y).
  KinematicTree tree() const;

  // Keypoint positions for joint vector q (root pinned at the origin).
  SkeletonFrame fk(const std::vector<double>& q) const;

  // d(keypoint positions)/dq, row-major (3*kKeypoints) x kDofs.
  std::vector<double> jacobian(const std::vector<double>& q) const;
};

struct IkResult {
  std::vector<double> q;
  double residual = 0.0;  // objective value sum of squared keypoint errors
  int iterations = 0;
  bool converged = false;
};

// Damped Gauss-Newton descent of sum_i ||f_i(q) - P_i||^2 with box clamping
// to joint limits. Never throws on a hard pose; `converged` reports whether
// the first-order tolerance was met within the iteration cap.
IkResult inverse_kinematics(const HumanModel& model, const SkeletonFrame& targets,
                            std::vector<double> q_init);

}  // namespace metaexo::kinematics
