#include "motion6d/synthgen.hpp"

#include <cmath>
#include <numbers>

namespace motion6d::synth {

namespace {

// Mean of a Maxwell (3D isotropic Gaussian) speed is sigma * 2 sqrt(2/pi).
constexpr double kMaxwellMeanFactor = 2.0 * 0.79788456080286535588;  // 2 sqrt(2/pi)

Vec3 gaussian3(Rng& rng, double sigma) {
  std::normal_distribution<double> n(0.0, sigma);
  const double x = n(rng), y = n(rng), z = n(rng);
  return {x, y, z};
}

}  // namespace

double DynamicsParams::stationary_sigma() const { return mean_speed / kMaxwellMeanFactor; }
double DynamicsParams::stationary_angular_sigma() const { return mean_angular_speed / kMaxwellMeanFactor; }

// AR(1): v' = d v + e with var(e) = s^2 has stationary variance s^2 / (1 - d^2).
double DynamicsParams::velocity_kick_sigma() const { return stationary_sigma() * std::sqrt(1.0 - damping * damping); }
double DynamicsParams::angular_kick_sigma() const {
  return stationary_angular_sigma() * std::sqrt(1.0 - damping * damping);
}

BodyState sample_initial_state(Rng& rng, const DynamicsParams& params, double margin) {
  BodyState s;
  const double half = 0.5 * params.box_side - margin;
  std::uniform_real_distribution<double> u(-half, half);
  const double x = u(rng), y = u(rng), z = u(rng);
  s.pose.position = params.box_center + Vec3(x, y, z);
  std::normal_distribution<double> n(0.0, 1.0);
  const double qw = n(rng), qx = n(rng), qy = n(rng), qz = n(rng);
  s.pose.orientation = Quaternion{qw, qx, qy, qz}.versor();
  s.velocity = gaussian3(rng, params.stationary_sigma());
  s.angular_velocity = gaussian3(rng, params.stationary_angular_sigma());
  return s;
}

void step_dynamics(BodyState& s, const Vec3& accel, const Vec3& angular_accel, const DynamicsParams& params,
                   double margin) {
  const double dt = params.dt;
  s.velocity = params.damping * s.velocity + accel * dt;
  s.angular_velocity = params.damping * s.angular_velocity + angular_accel * dt;
  s.pose.position += s.velocity * dt;
  s.pose.orientation = (detail::from_rotation_vector(s.angular_velocity * dt) * s.pose.orientation).versor();

  const double half = 0.5 * params.box_side - margin;
  for (int k = 0; k < 3; ++k) {
    const double lo = params.box_center[k] - half, hi = params.box_center[k] + half;
    // A single reflection suffices while a step moves less than the box width.
    if (s.pose.position[k] < lo) {
      s.pose.position[k] = std::min(2.0 * lo - s.pose.position[k], hi);
      s.velocity[k] = -s.velocity[k];
    } else if (s.pose.position[k] > hi) {
      s.pose.position[k] = std::max(2.0 * hi - s.pose.position[k], lo);
      s.velocity[k] = -s.velocity[k];
    }
  }
}

void step_dynamics(BodyState& s, Rng& rng, const DynamicsParams& params, double margin) {
  const Vec3 a = gaussian3(rng, params.velocity_kick_sigma() / params.dt);
  const Vec3 alpha = gaussian3(rng, params.angular_kick_sigma() / params.dt);
  step_dynamics(s, a, alpha, params, margin);
}

}  // namespace motion6d::synth
