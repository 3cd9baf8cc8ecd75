#include "metaexo/kinematics/human_model.hpp"

#include <algorithm>
#include <cmath>

#include "metaexo/common/error.hpp"

namespace metaexo::kinematics {

namespace {

struct ArmLayout {
  std::size_t shoulder_kp, elbow_kp, wrist_kp;
  std::size_t dof0;  // first of the four DOFs
  double side;       // +1 right, -1 left
};

ArmLayout layout(Arm arm) {
  if (arm == Arm::kRight) return {1, 2, 3, 0, +1.0};
  return {4, 5, 6, 4, -1.0};
}

// Solves (A + lambda I) x = b for small SPD A via Cholesky, in place.
std::vector<double> solve_damped(std::vector<double> a, std::vector<double> b,
                                 std::size_t n, double lambda) {
  for (std::size_t i = 0; i < n; ++i) a[i * n + i] += lambda;
  // Cholesky A = L L^T
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      if (i == j) {
        if (s <= 0.0) throw Error("IK normal equations lost positive definiteness");
        a[i * n + i] = std::sqrt(s);
      } else {
        a[i * n + j] = s / a[j * n + j];
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {  // L y = b
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * b[k];
    b[i] = s / a[i * n + i];
  }
  for (std::size_t ii = n; ii-- > 0;) {  // L^T x = y
    double s = b[ii];
    for (std::size_t k = ii + 1; k < n; ++k) s -= a[k * n + ii] * b[k];
    b[ii] = s / a[ii * n + ii];
  }
  return b;
}

}  // namespace

double HumanModel::limit_lo(std::size_t dof) const {
  return (dof == 3 || dof == 7) ? elbow_lo : shoulder_lo;
}

double HumanModel::limit_hi(std::size_t dof) const {
  return (dof == 3 || dof == 7) ? elbow_hi : shoulder_hi;
}

KinematicTree HumanModel::tree() const {
  KinematicTree t;
  t.names = {"root", "r_shoulder", "r_elbow", "r_wrist", "l_shoulder", "l_elbow", "l_wrist"};
  t.parents = {-1, 0, 1, 2, 0, 4, 5};
  t.rest_dirs = {{1, 0, 0}, {0, -1, 0}, {0, -1, 0}, {-1, 0, 0}, {0, -1, 0}, {0, -1, 0}};
  t.lengths = {shoulder_offset, upper_arm, forearm,
               shoulder_offset, upper_arm, forearm};
  return t;
}

SkeletonFrame HumanModel::fk(const std::vector<double>& q) const {
  if (q.size() != kDofs) throw ShapeMismatchError("human model expects 8 joint angles");
  SkeletonFrame f;
  f.positions.resize(kKeypoints);
  f.positions[0] = {0, 0, 0};
  for (Arm arm : {Arm::kRight, Arm::kLeft}) {
    const ArmLayout a = layout(arm);
    const Vec3 sho = {a.side * shoulder_offset, 0, 0};
    const Mat3 r_sho = Mat3::rot_x(q[a.dof0]) * Mat3::rot_y(q[a.dof0 + 1]) *
                       Mat3::rot_z(q[a.dof0 + 2]);
    const Vec3 elb = sho + r_sho * Vec3{0, -upper_arm, 0};
    const Mat3 r_elb = r_sho * Mat3::rot_x(q[a.dof0 + 3]);
    const Vec3 wri = elb + r_elb * Vec3{0, -forearm, 0};
    f.positions[a.shoulder_kp] = sho;
    f.positions[a.elbow_kp] = elb;
    f.positions[a.wrist_kp] = wri;
  }
  return f;
}

std::vector<double> HumanModel::jacobian(const std::vector<double>& q) const {
  const SkeletonFrame f = fk(q);
  std::vector<double> jac(3 * kKeypoints * kDofs, 0.0);
  auto put = [&](std::size_t kp, std::size_t dof, const Vec3& d) {
    jac[(3 * kp + 0) * kDofs + dof] = d.x;
    jac[(3 * kp + 1) * kDofs + dof] = d.y;
    jac[(3 * kp + 2) * kDofs + dof] = d.z;
  };
  for (Arm arm : {Arm::kRight, Arm::kLeft}) {
    const ArmLayout a = layout(arm);
    const Mat3 rx = Mat3::rot_x(q[a.dof0]);
    const Mat3 rxy = rx * Mat3::rot_y(q[a.dof0 + 1]);
    const Mat3 r_sho = rxy * Mat3::rot_z(q[a.dof0 + 2]);
    // World axes of the hinges: each later hinge axis is carried by the
    // rotations applied before it.
    const Vec3 ax0 = {1, 0, 0};
    const Vec3 ax1 = rx * Vec3{0, 1, 0};
    const Vec3 ax2 = rxy * Vec3{0, 0, 1};
    const Vec3 ax3 = r_sho * Vec3{1, 0, 0};
    const Vec3 sho = f.positions[a.shoulder_kp];
    const Vec3 elb = f.positions[a.elbow_kp];
    const Vec3 wri = f.positions[a.wrist_kp];
    const Vec3 axes[3] = {ax0, ax1, ax2};
    for (std::size_t j = 0; j < 3; ++j) {
      put(a.elbow_kp, a.dof0 + j, axes[j].cross(elb - sho));
      put(a.wrist_kp, a.dof0 + j, axes[j].cross(wri - sho));
    }
    put(a.wrist_kp, a.dof0 + 3, ax3.cross(wri - elb));
  }
  return jac;
}

IkResult inverse_kinematics(const HumanModel& model, const SkeletonFrame& targets,
                            std::vector<double> q_init) {
  if (targets.positions.size() != HumanModel::kKeypoints)
    throw TopologyMismatchError("IK targets must provide all 7 keypoints");
  if (q_init.size() != HumanModel::kDofs)
    throw ShapeMismatchError("IK initial guess must have 8 joint angles");

  constexpr std::size_t kD = HumanModel::kDofs;
  constexpr std::size_t kR = 3 * HumanModel::kKeypoints;
  constexpr int kMaxIter = 200;
  constexpr double kLambda = 1e-6;
  constexpr double kGradTol = 1e-10;

  auto clamp_q = [&](std::vector<double>& q) {
    for (std::size_t j = 0; j < kD; ++j)
      q[j] = std::clamp(q[j], model.limit_lo(j), model.limit_hi(j));
  };
  clamp_q(q_init);

  auto residual_vec = [&](const std::vector<double>& q, std::vector<double>& r) {
    const SkeletonFrame f = model.fk(q);
    for (std::size_t i = 0; i < HumanModel::kKeypoints; ++i) {
      const Vec3 d = f.positions[i] - targets.positions[i];
      r[3 * i + 0] = d.x;
      r[3 * i + 1] = d.y;
      r[3 * i + 2] = d.z;
    }
  };
  auto objective = [&](const std::vector<double>& r) {
    double s = 0.0;
    for (double x : r) s += x * x;
    return s;
  };

  std::vector<double> q = std::move(q_init);
  std::vector<double> r(kR), grad(kD), jtj(kD * kD), jtr(kD);
  residual_vec(q, r);
  double obj = objective(r);

  IkResult out;
  for (int it = 0; it < kMaxIter; ++it) {
    const std::vector<double> jac = model.jacobian(q);
    // grad = 2 J^T r; projected onto the feasible box at active bounds.
    for (std::size_t j = 0; j < kD; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < kR; ++i) s += jac[i * kD + j] * r[i];
      jtr[j] = s;
      grad[j] = 2.0 * s;
    }
    double gnorm = 0.0;
    for (std::size_t j = 0; j < kD; ++j) {
      double g = grad[j];
      if (q[j] <= model.limit_lo(j) && g > 0) g = 0;
      if (q[j] >= model.limit_hi(j) && g < 0) g = 0;
      gnorm += g * g;
    }
    gnorm = std::sqrt(gnorm);
    out.iterations = it;
    if (gnorm <= kGradTol) {
      out.converged = true;
      break;
    }

    for (std::size_t a = 0; a < kD; ++a)
      for (std::size_t b = a; b < kD; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < kR; ++i) s += jac[i * kD + a] * jac[i * kD + b];
        jtj[a * kD + b] = s;
        jtj[b * kD + a] = s;
      }
    std::vector<double> step = solve_damped(jtj, jtr, kD, kLambda);

    // Backtrack if the full Gauss-Newton step overshoots.
    double scale = 1.0;
    bool accepted = false;
    std::vector<double> q_try(kD), r_try(kR);
    for (int bt = 0; bt < 30; ++bt) {
      for (std::size_t j = 0; j < kD; ++j) q_try[j] = q[j] - scale * step[j];
      clamp_q(q_try);
      residual_vec(q_try, r_try);
      const double obj_try = objective(r_try);
      if (obj_try <= obj) {
        q = q_try;
        r = r_try;
        obj = obj_try;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) break;  // no descent direction left at this scale
  }

  out.q = std::move(q);
  out.residual = obj;
  return out;
}

}  // namespace metaexo::kinematics
