#pragma once

#include <array>

namespace metaexo::kinematics {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  double norm() const;
  Vec3 normalized() const;  // throws DegenerateBoneError near zero length
};

// Row-major 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{};

  static Mat3 identity();
  static Mat3 rot_x(double angle);
  static Mat3 rot_y(double angle);
  static Mat3 rot_z(double angle);
  // Rotation by `angle` about a unit axis.
  static Mat3 axis_angle(const Vec3& axis, double angle);

  Mat3 operator*(const Mat3& o) const;
  Vec3 operator*(const Vec3& v) const;
  Mat3 transposed() const;
  double trace() const;
  double det() const;

  double& at(int r, int c) { return m[r * 3 + c]; }
  double at(int r, int c) const { return m[r * 3 + c]; }
};

// Minimal rotation taking unit vector v onto unit vector b. Near-antipodal
// pairs are handled by a deterministic 180-degree pre-flip about an axis
// orthogonal to v (smallest-component basis trick).
Mat3 rodrigues_align(const Vec3& v, const Vec3& b);

// Conjugation Q R Q^T moving a rotation between coordinate frames.
Mat3 frame_transform(const Mat3& r_source, const Mat3& q);

// Orthonormality and determinant check within tol.
bool is_rotation(const Mat3& r, double tol = 1e-9);

}  // namespace metaexo::kinematics
