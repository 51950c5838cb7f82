#include "motion6d/errors.hpp"
#include "motion6d/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace motion6d::synth {

namespace {

constexpr double kDensity = 1000.0;
constexpr double kPi = std::numbers::pi;

double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

Quaternion random_rotation(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return Quaternion{n(rng), n(rng), n(rng), n(rng)}.versor();
}

PrimitiveSpec sample_primitive(Rng& rng, PrimitiveKind kind) {
  PrimitiveSpec p;
  p.kind = kind;
  const double s = uniform(rng, 0.04, 0.11);
  switch (p.kind) {
    case PrimitiveKind::Sphere:
      p.size = Vec3::Constant(s);
      break;
    case PrimitiveKind::Box:
      p.size = Vec3(s * uniform(rng, 0.4, 0.9), s * uniform(rng, 0.4, 0.9), s * uniform(rng, 0.4, 0.9));
      break;
    case PrimitiveKind::Cylinder: {
      const double r = s * uniform(rng, 0.4, 0.9);
      p.size = Vec3(r, r, s * uniform(rng, 0.4, 1.0));
      break;
    }
    case PrimitiveKind::Ellipsoid:
      p.size = Vec3(s, s * uniform(rng, 0.4, 1.0), s * uniform(rng, 0.4, 1.0));
      break;
    case PrimitiveKind::Capsule: {
      const double r = s * uniform(rng, 0.35, 0.7);
      p.size = Vec3(r, r, s * uniform(rng, 0.3, 0.8));
      break;
    }
  }
  p.orientation = random_rotation(rng);
  // Offsets stay within half the primitive's inner radius, so every primitive
  // contains the common origin and the union is connected.
  const double inner = p.size.minCoeff();
  Vec3 dir(std::normal_distribution<double>(0, 1)(rng), std::normal_distribution<double>(0, 1)(rng),
           std::normal_distribution<double>(0, 1)(rng));
  dir.normalize();
  p.offset = dir * (0.5 * inner * std::cbrt(uniform(rng, 0.0, 1.0)));
  return p;
}

struct MassProps {
  double mass = 0.0;
  Mat3 inertia = Mat3::Zero();  // about the primitive center, primitive axes
};

MassProps mass_properties(const PrimitiveSpec& p) {
  const double a = p.size.x(), b = p.size.y(), c = p.size.z();
  MassProps m;
  switch (p.kind) {
    case PrimitiveKind::Sphere:
    case PrimitiveKind::Ellipsoid:
      m.mass = kDensity * 4.0 / 3.0 * kPi * a * b * c;
      m.inertia.diagonal() << b * b + c * c, a * a + c * c, a * a + b * b;
      m.inertia *= m.mass / 5.0;
      break;
    case PrimitiveKind::Box:
      m.mass = kDensity * 8.0 * a * b * c;
      m.inertia.diagonal() << b * b + c * c, a * a + c * c, a * a + b * b;
      m.inertia *= m.mass / 3.0;
      break;
    case PrimitiveKind::Cylinder: {
      m.mass = kDensity * kPi * a * a * 2.0 * c;
      const double side = m.mass * (3.0 * a * a + 4.0 * c * c) / 12.0;
      m.inertia.diagonal() << side, side, m.mass * a * a / 2.0;
      break;
    }
    case PrimitiveKind::Capsule: {
      const double mc = kDensity * kPi * a * a * 2.0 * c;
      const double mh = kDensity * 2.0 / 3.0 * kPi * a * a * a;  // one hemisphere
      const double d = c + 3.0 * a / 8.0;
      const double side = mc * (3.0 * a * a + 4.0 * c * c) / 12.0 + 2.0 * (83.0 / 320.0 * mh * a * a + mh * d * d);
      const double axial = mc * a * a / 2.0 + 2.0 * (2.0 / 5.0 * mh * a * a);
      m.mass = mc + 2.0 * mh;
      m.inertia.diagonal() << side, side, axial;
      break;
    }
  }
  return m;
}

}  // namespace

const char* kind_name(PrimitiveKind k) {
  switch (k) {
    case PrimitiveKind::Sphere: return "sphere";
    case PrimitiveKind::Box: return "box";
    case PrimitiveKind::Cylinder: return "cylinder";
    case PrimitiveKind::Ellipsoid: return "ellipsoid";
    case PrimitiveKind::Capsule: return "capsule";
  }
  return "?";
}

ObjectSpec sample_object(Rng& rng) {
  // Kinds are drawn once, outside the rejection loop, so the size constraint
  // cannot skew the kind distribution.
  std::array<PrimitiveKind, 3> kinds;
  for (auto& k : kinds) k = static_cast<PrimitiveKind>(std::uniform_int_distribution<int>(0, kPrimitiveKinds - 1)(rng));
  for (int attempt = 0; attempt < kMaxObjectRejects; ++attempt) {
    ObjectSpec o;
    for (int i = 0; i < 3; ++i) o.primitives[i] = sample_primitive(rng, kinds[i]);

    // Recenter on the center of mass and accumulate inertia there.
    Vec3 com = Vec3::Zero();
    std::array<MassProps, 3> props;
    for (int i = 0; i < 3; ++i) {
      props[i] = mass_properties(o.primitives[i]);
      o.mass += props[i].mass;
      com += props[i].mass * o.primitives[i].offset;
    }
    com /= o.mass;
    for (int i = 0; i < 3; ++i) {
      auto& p = o.primitives[i];
      p.offset -= com;
      const Mat3 R = p.orientation.matrix();
      o.inertia += R * props[i].inertia * R.transpose();
      o.inertia += props[i].mass * (p.offset.squaredNorm() * Mat3::Identity() - p.offset * p.offset.transpose());
    }

    std::vector<Vec3> pts;
    for (const auto& p : o.primitives) {
      const Mesh m = tessellate(p, 16);
      pts.insert(pts.end(), m.vertices.begin(), m.vertices.end());
    }
    double diam2 = 0.0, rad2 = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      rad2 = std::max(rad2, pts[i].squaredNorm());
      for (std::size_t j = i + 1; j < pts.size(); ++j) diam2 = std::max(diam2, (pts[i] - pts[j]).squaredNorm());
    }
    o.diameter = std::sqrt(diam2);
    o.bounding_radius = std::sqrt(rad2);
    if (o.diameter < kMinDiameter || o.diameter > kMaxDiameter) continue;

    for (auto& p : o.primitives) p.texture_id = std::uniform_int_distribution<int>(0, 1 << 30)(rng);
    return o;
  }
  throw GenerationError("object diameter outside [0.2, 0.3] m after 100 draws");
}

namespace {

// Surface of revolution about z from a (radius, z) profile running bottom to top.
Mesh revolve(const std::vector<Eigen::Vector2d>& profile, int segments) {
  Mesh m;
  std::vector<double> arc(profile.size(), 0.0);
  for (std::size_t i = 1; i < profile.size(); ++i) arc[i] = arc[i - 1] + (profile[i] - profile[i - 1]).norm();
  const int rings = static_cast<int>(profile.size());
  for (int i = 0; i < rings; ++i) {
    for (int j = 0; j <= segments; ++j) {
      const double phi = 2.0 * kPi * j / segments;
      m.vertices.emplace_back(profile[i].x() * std::cos(phi), profile[i].x() * std::sin(phi), profile[i].y());
      m.uv.emplace_back(static_cast<double>(j) / segments, arc[i] / arc.back());
    }
  }
  const int stride = segments + 1;
  for (int i = 0; i + 1 < rings; ++i) {
    for (int j = 0; j < segments; ++j) {
      const int a = i * stride + j, b = a + 1, c = a + stride, d = c + 1;
      m.triangles.push_back({a, b, d});
      m.triangles.push_back({a, d, c});
    }
  }
  return m;
}

std::vector<Eigen::Vector2d> sphere_profile(int rings, double radius, double split) {
  // Unit-sphere meridian; the upper half is lifted by `split` (capsules).
  std::vector<Eigen::Vector2d> prof;
  for (int i = 0; i <= rings; ++i) {
    const double theta = kPi * i / rings;
    const double rho = std::sin(theta) * radius;
    const double z = -std::cos(theta) * radius;
    if (2 * i < rings) {
      prof.emplace_back(rho, z - split);
    } else if (2 * i > rings) {
      prof.emplace_back(rho, z + split);
    } else {
      prof.emplace_back(rho, z - split);
      if (split > 0.0) prof.emplace_back(rho, z + split);
    }
  }
  return prof;
}

Mesh box_mesh(const Vec3& h) {
  Mesh m;
  // Each face: origin corner plus two edge directions, so uv is affine per face.
  const Vec3 corners[6][3] = {
      {{h.x(), -h.y(), -h.z()}, {0, 2 * h.y(), 0}, {0, 0, 2 * h.z()}},
      {{-h.x(), -h.y(), -h.z()}, {0, 0, 2 * h.z()}, {0, 2 * h.y(), 0}},
      {{-h.x(), h.y(), -h.z()}, {0, 0, 2 * h.z()}, {2 * h.x(), 0, 0}},
      {{-h.x(), -h.y(), -h.z()}, {2 * h.x(), 0, 0}, {0, 0, 2 * h.z()}},
      {{-h.x(), -h.y(), h.z()}, {2 * h.x(), 0, 0}, {0, 2 * h.y(), 0}},
      {{-h.x(), -h.y(), -h.z()}, {0, 2 * h.y(), 0}, {2 * h.x(), 0, 0}},
  };
  for (const auto& f : corners) {
    const int base = static_cast<int>(m.vertices.size());
    for (int k = 0; k < 4; ++k) {
      const double s = (k == 1 || k == 2) ? 1.0 : 0.0;
      const double t = (k >= 2) ? 1.0 : 0.0;
      m.vertices.push_back(f[0] + s * f[1] + t * f[2]);
      m.uv.emplace_back(s, t);
    }
    m.triangles.push_back({base, base + 1, base + 2});
    m.triangles.push_back({base, base + 2, base + 3});
  }
  return m;
}

}  // namespace

Mesh tessellate(const PrimitiveSpec& p, int segments) {
  const int rings = std::max(4, segments / 2);
  Mesh m;
  switch (p.kind) {
    case PrimitiveKind::Sphere:
    case PrimitiveKind::Ellipsoid:
      m = revolve(sphere_profile(rings, 1.0, 0.0), segments);
      for (auto& v : m.vertices) v = v.cwiseProduct(p.size);
      break;
    case PrimitiveKind::Capsule:
      m = revolve(sphere_profile(rings % 2 ? rings + 1 : rings, p.size.x(), p.size.z()), segments);
      break;
    case PrimitiveKind::Cylinder: {
      const double r = p.size.x(), h = p.size.z();
      m = revolve({{0.0, -h}, {r, -h}, {r, h}, {0.0, h}}, segments);
      break;
    }
    case PrimitiveKind::Box:
      m = box_mesh(p.size);
      break;
  }
  const Mat3 R = p.orientation.matrix();
  for (auto& v : m.vertices) v = R * v + p.offset;
  return m;
}

}  // namespace motion6d::synth
