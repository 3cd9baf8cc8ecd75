#include "metaexo/kinematics/motion_io.hpp"

#include <string>

#include "json.hpp"
#include "metaexo/common/error.hpp"
#include "metaexo/common/io.hpp"

namespace metaexo::kinematics {

KeypointMotion load_motion(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": not valid JSON: " + e.what());
  }
  KeypointMotion m;
  try {
    m.fps = j.at("fps").get<double>();
    m.tree.names = j.at("names").get<std::vector<std::string>>();
    m.tree.parents = j.at("parents").get<std::vector<int>>();
    for (const auto& d : j.at("rest_dirs")) {
      if (d.size() != 3) throw IoError(path.string() + ": rest_dirs rows must have 3 entries");
      m.tree.rest_dirs.push_back({d[0].get<double>(), d[1].get<double>(), d[2].get<double>()});
    }
    m.tree.lengths = j.at("lengths").get<std::vector<double>>();
    std::size_t t = 0;
    for (const auto& fr : j.at("frames")) {
      if (fr.size() != m.tree.parents.size())
        throw IoError(path.string() + ": frame " + std::to_string(t) +
                      " keypoint count does not match the tree");
      SkeletonFrame f;
      for (const auto& p : fr) {
        if (p.size() != 3) throw IoError(path.string() + ": keypoints must have 3 coordinates");
        f.positions.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
      }
      f.timestamp = m.fps > 0 ? static_cast<double>(t) / m.fps : 0.0;
      m.frames.push_back(std::move(f));
      ++t;
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": malformed motion file: " + e.what());
  }
  if (!(m.fps > 0)) throw IoError(path.string() + ": fps must be positive");
  m.tree.validate();
  return m;
}

void save_motion(const std::filesystem::path& path, const KeypointMotion& motion) {
  motion.tree.validate();
  nlohmann::json j;
  j["fps"] = motion.fps;
  j["names"] = motion.tree.names;
  j["parents"] = motion.tree.parents;
  nlohmann::json dirs = nlohmann::json::array();
  for (const Vec3& v : motion.tree.rest_dirs) dirs.push_back({v.x, v.y, v.z});
  j["rest_dirs"] = std::move(dirs);
  j["lengths"] = motion.tree.lengths;
  nlohmann::json frames = nlohmann::json::array();
  for (const SkeletonFrame& f : motion.frames) {
    nlohmann::json fr = nlohmann::json::array();
    for (const Vec3& p : f.positions) fr.push_back({p.x, p.y, p.z});
    frames.push_back(std::move(fr));
  }
  j["frames"] = std::move(frames);
  write_text_file(path, j.dump(1) + "\n");
}

RetargetedTrajectory retarget_to_elbow(const KeypointMotion& motion, const HumanModel& model,
                                       Arm arm, const Mat3& q_transform) {
  const KinematicTree target = model.tree();
  if (!motion.tree.same_topology(target))
    throw TopologyMismatchError("motion skeleton does not match the arm model topology");

  RetargetedTrajectory out;
  out.dt = 1.0 / motion.fps;
  out.angles.reserve(motion.frames.size());
  std::vector<double> q(HumanModel::kDofs, 0.0);
  for (const SkeletonFrame& frame : motion.frames) {
    const SkeletonFrame posed = retarget(frame, motion.tree, target, q_transform, {0, 0, 0});
    IkResult ik = inverse_kinematics(model, posed, q);
    if (!ik.converged) ++out.unconverged_frames;
    q = ik.q;  // warm start keeps the joint path continuous
    out.angles.push_back(q[model.elbow_dof(arm)]);
    out.joints.push_back(q);
    out.residuals.push_back(ik.residual);
  }
  return out;
}

}  // namespace metaexo::kinematics
