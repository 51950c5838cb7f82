#pragma once
// Synthetic floating-object sequences: procedural three-primitive objects with
// random textures, random-wrench rigid-body motion inside a 1 m cube, a
// z-buffered software rasterizer, and an on-disk archive format.

#include "motion6d/config.hpp"
#include "motion6d/geom6d.hpp"
#include "motion6d/image.hpp"
#include "motion6d/pngio.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace motion6d::synth {

using Rng = std::mt19937_64;

enum class PrimitiveKind { Sphere = 0, Box, Cylinder, Ellipsoid, Capsule };
inline constexpr int kPrimitiveKinds = 5;
const char* kind_name(PrimitiveKind k);

inline constexpr double kMinDiameter = 0.20;
inline constexpr double kMaxDiameter = 0.30;
inline constexpr int kMaxObjectRejects = 100;

struct PrimitiveSpec {
  PrimitiveKind kind = PrimitiveKind::Sphere;
  // sphere (r, r, r); box half-extents; cylinder and capsule (r, r, half-length);
  // ellipsoid semi-axes.
  Vec3 size = Vec3::Constant(0.05);
  Vec3 offset = Vec3::Zero();
  Quaternion orientation;
  int texture_id = 0;
};

struct ObjectSpec {
  std::array<PrimitiveSpec, 3> primitives;
  double mass = 0.0;  // uniform density 1000 kg/m^3, overlaps counted twice
  Mat3 inertia = Mat3::Zero();  // about the center of mass, object frame
  double diameter = 0.0;  // max distance between surface vertices
  double bounding_radius = 0.0;  // max distance of a surface vertex from the origin
};

/// Object frame origin is the center of mass. Throws GenerationError after
/// kMaxObjectRejects draws outside [kMinDiameter, kMaxDiameter].
ObjectSpec sample_object(Rng& rng);

// ---- meshes -----------------------------------------------------------------

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Eigen::Vector2d> uv;
  std::vector<std::array<int, 3>> triangles;
};

inline constexpr int kMeshSegments = 24;

/// Surface of one primitive in object coordinates (offset and orientation applied).
Mesh tessellate(const PrimitiveSpec& p, int segments = kMeshSegments);

// ---- dynamics ---------------------------------------------------------------

struct BodyState {
  Pose pose;
  Vec3 velocity = Vec3::Zero();  // m/s, camera frame
  Vec3 angular_velocity = Vec3::Zero();  // rad/s, camera frame
};

struct DynamicsParams {
  double dt = 1.0 / 30.0;
  double damping = 0.9;  // per-step velocity retention
  double mean_speed = 0.5;  // m/s, stationary target
  double mean_angular_speed = 3.14159265358979323846;  // rad/s (0.5 rev/s)
  Vec3 box_center = Vec3(0.0, 0.0, 2.0);
  double box_side = 1.0;

  /// Per-axis std of the velocity increment added each step; chosen so the
  /// stationary speed distribution (Maxwell) has the requested mean.
  double velocity_kick_sigma() const;
  double angular_kick_sigma() const;
  /// Per-axis std of the stationary velocity distribution.
  double stationary_sigma() const;
  double stationary_angular_sigma() const;
};

/// Uniform position in the box shrunk by `margin`, uniform orientation, and a
/// twist drawn from the stationary distribution.
BodyState sample_initial_state(Rng& rng, const DynamicsParams& params, double margin);

/// One semi-implicit Euler step with explicit accelerations (m/s^2, rad/s^2).
/// The object origin is kept `margin` inside the box walls by elastic reflection.
void step_dynamics(BodyState& s, const Vec3& accel, const Vec3& angular_accel, const DynamicsParams& params,
                   double margin);
/// Same step with a Gaussian random wrench.
void step_dynamics(BodyState& s, Rng& rng, const DynamicsParams& params, double margin);

// ---- textures and rendering -------------------------------------------------

enum class TextureKind { Checkerboard = 0, Noise, Stripes, Flat };

Image procedural_texture(Rng& rng, int height, int width);
Image procedural_texture(Rng& rng, int height, int width, TextureKind kind);

/// Sorted *.png paths in `dir` (empty string or missing dir gives an empty list).
std::vector<std::string> list_images(const std::string& dir);
/// Random crop of a loaded image resized bilinearly to height x width.
Image random_view(const Image& source, Rng& rng, int height, int width);

struct SceneObject {
  ObjectSpec spec;
  std::array<Mesh, 3> meshes;
  std::array<Image, 3> textures;
};

SceneObject make_scene_object(const ObjectSpec& spec, std::array<Image, 3> textures);

struct RenderResult {
  Image rgb;
  LabelImage labels;  // 0 background, i + 1 for object i
};

/// Z-buffered rasterization with perspective-correct texture coordinates and
/// no shading. Objects with any vertex closer than 1 cm to the camera plane
/// are skipped triangle by triangle.
RenderResult render(const std::vector<const SceneObject*>& objects, const std::vector<Pose>& poses,
                    const Image& background, const CameraIntrinsics& K);

// ---- sequences and archives -------------------------------------------------

struct GenerationConfig {
  int count = 2000;
  int objects = 1;
  int frames = 31;
  int height = 240;
  int width = 320;
  double vfov_deg = 45.0;
  double fps = 30.0;
  std::uint64_t seed = 1;
  std::string texture_dir;
  std::string background_dir;
  // frame-0 silhouettes of every object must have at least this many pixels
  int min_initial_pixels = 50;

  static GenerationConfig from_config(const Config& c);
  void to_config(Config& c) const;
  DynamicsParams dynamics() const;
  CameraIntrinsics intrinsics() const;
};

/// A live scene: objects, background and body states, stepped on demand.
class Scene {
 public:
  /// Rejection-samples objects, textures, background and initial states until
  /// every object covers at least cfg.min_initial_pixels in the first render.
  /// Throws GenerationError after 100 draws.
  static Scene sample(const GenerationConfig& cfg, Rng& rng);

  /// Random-wrench step of every object.
  void step(Rng& rng);
  RenderResult render() const;

  int num_objects() const { return static_cast<int>(objects_.size()); }
  std::vector<Pose> poses() const;
  BodyState& state(int i) { return states_.at(i); }
  const BodyState& state(int i) const { return states_.at(i); }
  const SceneObject& object(int i) const { return objects_.at(i); }
  const CameraIntrinsics& intrinsics() const { return K_; }
  const DynamicsParams& dynamics() const { return params_; }

 private:
  std::vector<SceneObject> objects_;
  std::vector<BodyState> states_;
  Image background_;
  CameraIntrinsics K_;
  DynamicsParams params_;
};

struct SequenceSample {
  std::vector<Image> frames;
  std::vector<LabelImage> labels;
  std::vector<std::vector<Pose>> poses;  // [frame][object]
  CameraIntrinsics intrinsics;
  int num_objects = 0;
  std::uint64_t seed = 0;

  int length() const { return static_cast<int>(frames.size()); }
  /// Binary mask of object `obj` at frame t.
  Image mask(int t, int obj) const;
};

std::uint64_t sequence_seed(std::uint64_t base, std::uint64_t index);

/// Pure function of (cfg, seed).
SequenceSample generate_sequence(const GenerationConfig& cfg, std::uint64_t seed);

void write_sequence(const std::string& dir, const SequenceSample& s);
SequenceSample read_sequence(const std::string& dir);

/// Writes seq_XXXXXX directories in parallel, then manifest.txt.
void generate_dataset(const GenerationConfig& cfg, const std::string& root, int workers);

class Dataset {
 public:
  struct SampleRef {
    int sequence = 0;
    int object = 0;
  };

  static Dataset open(const std::string& root);

  const std::string& root() const { return root_; }
  const GenerationConfig& config() const { return cfg_; }
  int num_sequences() const { return static_cast<int>(dirs_.size()); }
  /// Every object of every sequence is a separate tracking sample.
  int num_samples() const { return num_sequences() * cfg_.objects; }
  SampleRef sample(int k) const { return {k / cfg_.objects, k % cfg_.objects}; }
  std::uint64_t seed(int sequence) const { return seeds_.at(sequence); }
  SequenceSample load(int sequence) const;

 private:
  std::string root_;
  GenerationConfig cfg_;
  std::vector<std::string> dirs_;
  std::vector<std::uint64_t> seeds_;
};

}  // namespace motion6d::synth
