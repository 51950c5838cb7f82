#include "motion6d/geom6d.hpp"

#include "motion6d/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace motion6d {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kDegenerateW = 1e-7;
}  // namespace

double Quaternion::norm() const { return std::sqrt(dot(*this)); }

Quaternion Quaternion::versor() const {
  const double n = norm();
  if (!(n > 0.0)) {
    throw DegenerateRotation("zero-length quaternion");
  }
  return Quaternion{w / n, x / n, y / n, z / n}.canonical();
}

Quaternion Quaternion::canonical() const { return w < 0.0 ? -*this : *this; }

Vec3 Quaternion::rotate(const Vec3& v) const {
  // v' = v + 2 w (q x v) + 2 q x (q x v)
  const Vec3 q(x, y, z);
  const Vec3 t = 2.0 * q.cross(v);
  return v + w * t + q.cross(t);
}

Mat3 Quaternion::matrix() const {
  Mat3 m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return m;
}

Quaternion operator*(const Quaternion& a, const Quaternion& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

CameraIntrinsics CameraIntrinsics::from_vertical_fov(int height, int width, double vfov_deg) {
  CameraIntrinsics K;
  K.height = height;
  K.width = width;
  K.fy = 0.5 * height / std::tan(0.5 * vfov_deg * kPi / 180.0);
  K.fx = K.fy;
  K.cx = 0.5 * (width - 1);
  K.cy = 0.5 * (height - 1);
  return K;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0 && fy > 0.0) || width <= 0 || height <= 0) {
    throw ConfigError("invalid camera intrinsics");
  }
}

MotionDelta compose(const MotionDelta& a, const MotionDelta& b) {
  return {a.translation + b.translation, (b.rotation * a.rotation).versor()};
}

GnomonicVec gnomonic_project(const Quaternion& q) {
  const Quaternion c = q.canonical();
  if (std::abs(c.w) < kDegenerateW) {
    throw DegenerateRotation("gnomonic projection undefined at 180 degrees");
  }
  return {c.x / c.w, c.y / c.w, c.z / c.w};
}

Quaternion gnomonic_unproject(const GnomonicVec& g) {
  const double n = std::sqrt(1.0 + g.gx * g.gx + g.gy * g.gy + g.gz * g.gz);
  return {1.0 / n, g.gx / n, g.gy / n, g.gz / n};
}

double geodesic_angle(const Quaternion& q1, const Quaternion& q2) {
  const double d = std::clamp(std::abs(q1.dot(q2)), 0.0, 1.0);
  return 2.0 * std::acos(d);
}

NonMetricDelta translation_delta(const Pose& src, const Pose& tgt, const CameraIntrinsics& K) {
  const Vec3& s = src.position;
  const Vec3& t = tgt.position;
  if (!(s.z() > 0.0) || !(t.z() > 0.0)) {
    throw BehindCamera("translation_delta requires z > 0");
  }
  return {K.fx * (t.x() / t.z() - s.x() / s.z()), K.fy * (t.y() / t.z() - s.y() / s.z()),
          std::log(s.z() / t.z())};
}

Quaternion rotation_delta(const Pose& src, const Pose& tgt) {
  return (tgt.orientation * src.orientation.conjugate()).versor();
}

MotionDelta motion_delta(const Pose& src, const Pose& tgt, const CameraIntrinsics& K) {
  return {translation_delta(src, tgt, K), rotation_delta(src, tgt)};
}

Pose integrate_delta(const Pose& state, const MotionDelta& d, const CameraIntrinsics& K) {
  const Vec3& p = state.position;
  if (!(p.z() > 0.0)) {
    throw BehindCamera("integrate_delta requires z > 0");
  }
  const double z = p.z() / std::exp(d.translation.vz);
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw BehindCamera("integrated depth left the valid range");
  }
  const double u = p.x() / p.z() + d.translation.vx / K.fx;
  const double v = p.y() / p.z() + d.translation.vy / K.fy;
  Pose out;
  out.position = Vec3(u * z, v * z, z);
  out.orientation = (d.rotation * state.orientation).versor();
  return out;
}

PoseError pose_error(const Pose& a, const Pose& b) {
  return {(a.position - b.position).norm(), geodesic_angle(a.orientation, b.orientation)};
}

bool within_success_threshold(const PoseError& e) {
  return e.meters <= kSuccessMeters && e.radians <= kSuccessDegrees * kPi / 180.0;
}

NonMetricState NonMetricState::from_pose(const Pose& p) {
  if (!(p.position.z() > 0.0)) {
    throw BehindCamera("anchor pose behind camera");
  }
  return {p.position.x() / p.position.z(), p.position.y() / p.position.z(), std::log(p.position.z()),
          p.orientation.versor()};
}

Pose NonMetricState::to_pose() const {
  const double z = std::exp(log_z);
  return {Vec3(u * z, v * z, z), orientation};
}

void NonMetricState::apply(const MotionDelta& d, const CameraIntrinsics& K) {
  u += d.translation.vx / K.fx;
  v += d.translation.vy / K.fy;
  log_z -= d.translation.vz;
  orientation = (d.rotation * orientation).versor();
}

namespace detail {

Quaternion from_rotation_vector(const Vec3& rv) {
  const double angle = rv.norm();
  if (angle < 1e-12) {
    return Quaternion{1.0, 0.5 * rv.x(), 0.5 * rv.y(), 0.5 * rv.z()}.versor();
  }
  const Vec3 axis = rv / angle;
  const double s = std::sin(0.5 * angle);
  return Quaternion{std::cos(0.5 * angle), axis.x() * s, axis.y() * s, axis.z() * s}.versor();
}

Vec3 to_rotation_vector(const Quaternion& q) {
  const Quaternion c = q.versor();
  const Vec3 im(c.x, c.y, c.z);
  const double s = im.norm();
  if (s < 1e-12) {
    return 2.0 * im;
  }
  const double angle = 2.0 * std::atan2(s, c.w);
  return im * (angle / s);
}

Quaternion fractional(const Quaternion& q, double t) {
  return from_rotation_vector(t * to_rotation_vector(q));
}

}  // namespace detail

void write_trajectory(std::ostream& os, const std::vector<TrajectoryRecord>& traj) {
  os << "# frame x y z qw qx qy qz\n";
  os << std::setprecision(17);
  for (const auto& r : traj) {
    const auto& p = r.pose.position;
    const auto& q = r.pose.orientation;
    os << r.frame << ' ' << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << q.w << ' ' << q.x << ' ' << q.y
       << ' ' << q.z << '\n';
  }
}

void write_trajectory(const std::string& path, const std::vector<TrajectoryRecord>& traj) {
  std::ofstream os(path);
  if (!os) {
    throw IoError("cannot open " + path);
  }
  write_trajectory(os, traj);
}

std::vector<TrajectoryRecord> read_trajectory(std::istream& is) {
  std::vector<TrajectoryRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') {
      continue;
    }
    std::istringstream ls(line);
    TrajectoryRecord r;
    double x, y, z;
    auto& q = r.pose.orientation;
    if (!(ls >> r.frame >> x >> y >> z >> q.w >> q.x >> q.y >> q.z)) {
      throw IoError("malformed trajectory line: " + line);
    }
    r.pose.position = Vec3(x, y, z);
    out.push_back(r);
  }
  return out;
}

std::vector<TrajectoryRecord> read_trajectory(const std::string& path) {
  std::ifstream is(path);
  if (!is) {
    throw IoError("cannot open " + path);
  }
  return read_trajectory(is);
}

}  // namespace motion6d
