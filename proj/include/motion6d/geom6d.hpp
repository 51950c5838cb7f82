#pragma once

// Rotation / translation representations for frame-to-frame object motion.
//
// Conventions:
//  * camera frame is x right, y down, z forward (pinhole, OpenCV style);
//  * quaternions are stored w-first and kept in the qw >= 0 hemisphere;
//  * relative rotations left-multiply: q_tgt = q_rel * q_src.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace motion6d {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct Quaternion {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static Quaternion identity() { return {}; }

  double norm() const;
  double dot(const Quaternion& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }

  /// Scaled to unit length and flipped into the qw >= 0 hemisphere.
  Quaternion versor() const;
  Quaternion canonical() const;
  Quaternion conjugate() const { return {w, -x, -y, -z}; }
  Quaternion operator-() const { return {-w, -x, -y, -z}; }

  Vec3 rotate(const Vec3& v) const;
  Mat3 matrix() const;
};

/// Hamilton product.
Quaternion operator*(const Quaternion& a, const Quaternion& b);

struct GnomonicVec {
  double gx = 0.0;
  double gy = 0.0;
  double gz = 0.0;
};

/// Image-space shift (pixels, focal-length scaled) plus log scale change.
struct NonMetricDelta {
  double vx = 0.0;
  double vy = 0.0;
  double vz = 0.0;

  NonMetricDelta operator+(const NonMetricDelta& o) const { return {vx + o.vx, vy + o.vy, vz + o.vz}; }
  NonMetricDelta operator-() const { return {-vx, -vy, -vz}; }
  NonMetricDelta operator*(double s) const { return {vx * s, vy * s, vz * s}; }
};

struct Pose {
  Vec3 position = Vec3(0.0, 0.0, 1.0);
  Quaternion orientation;
};

struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  /// Pinhole with square pixels, focal length from the vertical field of view,
  /// principal point at the image center (pixel centers at integer coordinates).
  static CameraIntrinsics from_vertical_fov(int height, int width, double vfov_deg = 45.0);

  void validate() const;
};

struct MotionDelta {
  NonMetricDelta translation;
  Quaternion rotation;

  static MotionDelta identity() { return {}; }
  MotionDelta inverse() const { return {-translation, rotation.conjugate().canonical()}; }
};

/// Composition of two deltas: first `a`, then `b`.
MotionDelta compose(const MotionDelta& a, const MotionDelta& b);

GnomonicVec gnomonic_project(const Quaternion& q);
Quaternion gnomonic_unproject(const GnomonicVec& g);

/// 2 acos(|<q1, q2>|), in [0, pi].
double geodesic_angle(const Quaternion& q1, const Quaternion& q2);

NonMetricDelta translation_delta(const Pose& src, const Pose& tgt, const CameraIntrinsics& K);
Quaternion rotation_delta(const Pose& src, const Pose& tgt);
MotionDelta motion_delta(const Pose& src, const Pose& tgt, const CameraIntrinsics& K);

Pose integrate_delta(const Pose& state, const MotionDelta& d, const CameraIntrinsics& K);

struct PoseError {
  double meters = 0.0;
  double radians = 0.0;
};

PoseError pose_error(const Pose& a, const Pose& b);

constexpr double kSuccessMeters = 0.05;
constexpr double kSuccessDegrees = 5.0;

/// The 5cm-5deg rule.
bool within_success_threshold(const PoseError& e);

/// Accumulator of integrated non-metric motion: (x/z, y/z, log z) plus orientation.
/// Composition in these coordinates is exactly additive.
struct NonMetricState {
  double u = 0.0;
  double v = 0.0;
  double log_z = 0.0;
  Quaternion orientation;

  static NonMetricState from_pose(const Pose& p);
  Pose to_pose() const;
  void apply(const MotionDelta& d, const CameraIntrinsics& K);
};

namespace detail {
// Internal helpers for simulation and noise models; not part of the estimator-facing API.
Quaternion from_rotation_vector(const Vec3& rv);
Vec3 to_rotation_vector(const Quaternion& q);
/// q^t along the shortest arc (q canonicalised first).
Quaternion fractional(const Quaternion& q, double t);
}  // namespace detail

// Trajectory text file: "frame x y z qw qx qy qz" per line, '#' comments.
struct TrajectoryRecord {
  int frame = 0;
  Pose pose;
};

void write_trajectory(std::ostream& os, const std::vector<TrajectoryRecord>& traj);
void write_trajectory(const std::string& path, const std::vector<TrajectoryRecord>& traj);
std::vector<TrajectoryRecord> read_trajectory(std::istream& is);
std::vector<TrajectoryRecord> read_trajectory(const std::string& path);

}  // namespace motion6d
