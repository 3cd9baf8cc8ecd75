#include "metaexo/kinematics/geom.hpp"

#include <cmath>

#include "metaexo/common/error.hpp"

namespace metaexo::kinematics {

double Vec3::norm() const { return std::sqrt(x * x + y * y + z * z); }

Vec3 Vec3::normalized() const {
  const double n = norm();
  if (n <= 1e-9) throw DegenerateBoneError("cannot normalize a near-zero vector");
  return {x / n, y / n, z / n};
}

Mat3 Mat3::identity() {
  Mat3 r;
  r.m = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  return r;
}

Mat3 Mat3::rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r.m = {1, 0, 0, 0, c, -s, 0, s, c};
  return r;
}

Mat3 Mat3::rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r.m = {c, 0, s, 0, 1, 0, -s, 0, c};
  return r;
}

Mat3 Mat3::rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 r;
  r.m = {c, -s, 0, s, c, 0, 0, 0, 1};
  return r;
}

Mat3 Mat3::axis_angle(const Vec3& axis, double angle) {
  const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  const double x = axis.x, y = axis.y, z = axis.z;
  Mat3 r;
  r.m = {t * x * x + c,     t * x * y - s * z, t * x * z + s * y,
         t * x * y + s * z, t * y * y + c,     t * y * z - s * x,
         t * x * z - s * y, t * y * z + s * x, t * z * z + c};
  return r;
}

Mat3 Mat3::operator*(const Mat3& o) const {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) acc += at(i, k) * o.at(k, j);
      r.at(i, j) = acc;
    }
  return r;
}

Vec3 Mat3::operator*(const Vec3& v) const {
  return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
          m[3] * v.x + m[4] * v.y + m[5] * v.z,
          m[6] * v.x + m[7] * v.y + m[8] * v.z};
}

Mat3 Mat3::transposed() const {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.at(i, j) = at(j, i);
  return r;
}

double Mat3::trace() const { return m[0] + m[4] + m[8]; }

double Mat3::det() const {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

namespace {

void check_unit(const Vec3& v, const char* name) {
  if (std::abs(v.norm() - 1.0) > 1e-9)
    throw Error(std::string("rodrigues_align: ") + name + " is not unit length");
}

// R = I + [w]x + [w]x^2 / (1 + c) with w = v x b, c = v . b. Exact for any
// pair, but 1 + c loses all precision as the vectors approach antipodal.
Mat3 align_direct(const Vec3& v, const Vec3& b) {
  const double c = v.dot(b);
  const Vec3 w = v.cross(b);
  Mat3 wx;
  wx.m = {0, -w.z, w.y, w.z, 0, -w.x, -w.y, w.x, 0};
  const Mat3 wx2 = wx * wx;
  Mat3 r = Mat3::identity();
  const double k = 1.0 / (1.0 + c);
  for (int i = 0; i < 9; ++i) r.m[i] += wx.m[i] + wx2.m[i] * k;
  return r;
}

}  // namespace

Mat3 rodrigues_align(const Vec3& v, const Vec3& b) {
  check_unit(v, "v");
  check_unit(b, "b");
  const double c = v.dot(b);
  if (c > -0.5) return align_direct(v, b);

  // Near-antipodal: flip v by 180 degrees about a deterministic axis
  // orthogonal to v, then align the flipped vector (now well-conditioned).
  int j = 0;
  double best = std::abs(v.x);
  if (std::abs(v.y) < best) {
    best = std::abs(v.y);
    j = 1;
  }
  if (std::abs(v.z) < best) j = 2;
  const Vec3 e = j == 0 ? Vec3{1, 0, 0} : (j == 1 ? Vec3{0, 1, 0} : Vec3{0, 0, 1});
  const Vec3 a0 = v.cross(e).normalized();
  Mat3 r180;
  r180.m = {2 * a0.x * a0.x - 1, 2 * a0.x * a0.y,     2 * a0.x * a0.z,
            2 * a0.x * a0.y,     2 * a0.y * a0.y - 1, 2 * a0.y * a0.z,
            2 * a0.x * a0.z,     2 * a0.y * a0.z,     2 * a0.z * a0.z - 1};
  const Vec3 flipped = {-v.x, -v.y, -v.z};
  return align_direct(flipped, b) * r180;
}

Mat3 frame_transform(const Mat3& r_source, const Mat3& q) {
  return q * r_source * q.transposed();
}

bool is_rotation(const Mat3& r, double tol) {
  const Mat3 rtr = r.transposed() * r;
  const Mat3 id = Mat3::identity();
  for (int i = 0; i < 9; ++i)
    if (std::abs(rtr.m[i] - id.m[i]) > tol) return false;
  return std::abs(r.det() - 1.0) <= tol;
}

}  // namespace metaexo::kinematics
