#include "motion6d/errors.hpp"
#include "motion6d/synthgen.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace motion6d::synth {

namespace fs = std::filesystem;

GenerationConfig GenerationConfig::from_config(const Config& c) {
  GenerationConfig g;
  g.count = static_cast<int>(c.get_int("data.count", g.count));
  g.objects = static_cast<int>(c.get_int("data.objects", g.objects));
  g.frames = static_cast<int>(c.get_int("data.frames", g.frames));
  g.height = static_cast<int>(c.get_int("data.height", g.height));
  g.width = static_cast<int>(c.get_int("data.width", g.width));
  g.vfov_deg = c.get_double("data.vfov", g.vfov_deg);
  g.fps = c.get_double("data.fps", g.fps);
  g.seed = std::stoull(c.get_string("data.seed", std::to_string(g.seed)));
  g.texture_dir = c.get_string("data.texture_dir", g.texture_dir);
  g.background_dir = c.get_string("data.background_dir", g.background_dir);
  g.min_initial_pixels = static_cast<int>(c.get_int("data.min_initial_pixels", g.min_initial_pixels));
  if (g.count < 0 || g.objects < 1 || g.frames < 2 || g.height < 8 || g.width < 8 || g.fps <= 0.0) {
    throw ConfigError("invalid data.* configuration");
  }
  return g;
}

void GenerationConfig::to_config(Config& c) const {
  c.set("data.count", count);
  c.set("data.objects", objects);
  c.set("data.frames", frames);
  c.set("data.height", height);
  c.set("data.width", width);
  std::ostringstream v;
  v << std::setprecision(17) << vfov_deg;
  c.set("data.vfov", v.str());
  std::ostringstream f;
  f << std::setprecision(17) << fps;
  c.set("data.fps", f.str());
  c.set("data.seed", std::to_string(seed));
  c.set("data.texture_dir", texture_dir);
  c.set("data.background_dir", background_dir);
  c.set("data.min_initial_pixels", min_initial_pixels);
}

DynamicsParams GenerationConfig::dynamics() const {
  DynamicsParams p;
  p.dt = 1.0 / fps;
  return p;
}

CameraIntrinsics GenerationConfig::intrinsics() const { return CameraIntrinsics::from_vertical_fov(height, width, vfov_deg); }

Image SequenceSample::mask(int t, int obj) const {
  const LabelImage& l = labels.at(t);
  return binary_mask_from_labels(l.labels, l.height, l.width, obj + 1);
}

std::uint64_t sequence_seed(std::uint64_t base, std::uint64_t index) {
  // splitmix64 finaliser over a mixed (base, index) pair
  std::uint64_t z = base * 0x9E3779B97F4A7C15ull + index + 0x632BE59BD9B4E019ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

namespace {

Image make_texture(Rng& rng, const std::vector<std::string>& sources, int h, int w) {
  if (sources.empty()) return procedural_texture(rng, h, w);
  const auto& path = sources[std::uniform_int_distribution<std::size_t>(0, sources.size() - 1)(rng)];
  return random_view(read_png_rgb(path), rng, h, w);
}

long label_count(const LabelImage& l, int id) {
  long n = 0;
  for (unsigned char v : l.labels) n += (v == id);
  return n;
}

constexpr int kTextureSize = 64;
constexpr int kMaxSceneRejects = 100;

}  // namespace

Scene Scene::sample(const GenerationConfig& cfg, Rng& rng) {
  const auto tex_sources = list_images(cfg.texture_dir);
  const auto bg_sources = list_images(cfg.background_dir);
  for (int attempt = 0; attempt < kMaxSceneRejects; ++attempt) {
    Scene sc;
    sc.K_ = cfg.intrinsics();
    sc.params_ = cfg.dynamics();
    for (int i = 0; i < cfg.objects; ++i) {
      const ObjectSpec spec = sample_object(rng);
      std::array<Image, 3> tex;
      for (auto& t : tex) t = make_texture(rng, tex_sources, kTextureSize, kTextureSize);
      sc.objects_.push_back(make_scene_object(spec, std::move(tex)));
    }
    sc.background_ = make_texture(rng, bg_sources, cfg.height, cfg.width);
    for (const auto& o : sc.objects_) {
      sc.states_.push_back(sample_initial_state(rng, sc.params_, o.spec.bounding_radius));
    }
    const RenderResult first = sc.render();
    bool visible = true;
    for (int i = 0; i < cfg.objects; ++i) visible = visible && label_count(first.labels, i + 1) >= cfg.min_initial_pixels;
    if (visible) return sc;
  }
  throw GenerationError("no scene with visible objects after 100 draws");
}

void Scene::step(Rng& rng) {
  for (std::size_t i = 0; i < states_.size(); ++i) {
    step_dynamics(states_[i], rng, params_, objects_[i].spec.bounding_radius);
  }
}

std::vector<Pose> Scene::poses() const {
  std::vector<Pose> p;
  for (const auto& s : states_) p.push_back(s.pose);
  return p;
}

RenderResult Scene::render() const {
  std::vector<const SceneObject*> ptrs;
  for (const auto& o : objects_) ptrs.push_back(&o);
  return synth::render(ptrs, poses(), background_, K_);
}

SequenceSample generate_sequence(const GenerationConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  Scene scene = Scene::sample(cfg, rng);
  SequenceSample out;
  out.intrinsics = scene.intrinsics();
  out.num_objects = cfg.objects;
  out.seed = seed;
  for (int t = 0; t < cfg.frames; ++t) {
    if (t > 0) scene.step(rng);
    RenderResult r = scene.render();
    out.poses.push_back(scene.poses());
    out.frames.push_back(std::move(r.rgb));
    out.labels.push_back(std::move(r.labels));
  }
  return out;
}

namespace {

std::string frame_name(const std::string& dir, const char* stem, int t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%03d.png", stem, t);
  return (fs::path(dir) / buf).string();
}

}  // namespace

void write_sequence(const std::string& dir, const SequenceSample& s) {
  fs::create_directories(dir);
  for (int t = 0; t < s.length(); ++t) {
    write_png(frame_name(dir, "frame", t), s.frames[t]);
    write_label_png(frame_name(dir, "labels", t), s.labels[t]);
  }
  std::ofstream poses(fs::path(dir) / "poses.txt");
  poses << "# frame object x y z qw qx qy qz\n" << std::setprecision(17);
  for (int t = 0; t < s.length(); ++t) {
    for (int o = 0; o < s.num_objects; ++o) {
      const Pose& p = s.poses[t][o];
      poses << t << ' ' << o << ' ' << p.position.x() << ' ' << p.position.y() << ' ' << p.position.z() << ' '
            << p.orientation.w << ' ' << p.orientation.x << ' ' << p.orientation.y << ' ' << p.orientation.z << '\n';
    }
  }
  std::ofstream intr(fs::path(dir) / "intrinsics.txt");
  intr << "# fx fy cx cy width height\n"
       << std::setprecision(17) << s.intrinsics.fx << ' ' << s.intrinsics.fy << ' ' << s.intrinsics.cx << ' '
       << s.intrinsics.cy << ' ' << s.intrinsics.width << ' ' << s.intrinsics.height << '\n';
  std::ofstream meta(fs::path(dir) / "sequence.txt");
  meta << "frames = " << s.length() << "\nobjects = " << s.num_objects << "\nseed = " << s.seed << '\n';
  if (!poses || !intr || !meta) throw IoError("failed writing sequence metadata in " + dir);
}

namespace {

std::vector<std::string> data_lines(std::istream& is) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    out.push_back(line);
  }
  return out;
}

}  // namespace

SequenceSample read_sequence(const std::string& dir) {
  const Config meta = Config::from_file((fs::path(dir) / "sequence.txt").string());
  SequenceSample s;
  const int frames = static_cast<int>(meta.get_int("frames", 0));
  s.num_objects = static_cast<int>(meta.get_int("objects", 0));
  s.seed = std::stoull(meta.require_string("seed"));
  if (frames < 1 || s.num_objects < 1) throw IoError(dir + ": bad sequence.txt");

  std::ifstream intr(fs::path(dir) / "intrinsics.txt");
  if (!intr) throw IoError(dir + ": missing intrinsics.txt");
  const auto il = data_lines(intr);
  if (il.size() != 1) throw IoError(dir + ": bad intrinsics.txt");
  std::istringstream is(il[0]);
  if (!(is >> s.intrinsics.fx >> s.intrinsics.fy >> s.intrinsics.cx >> s.intrinsics.cy >> s.intrinsics.width >>
        s.intrinsics.height)) {
    throw IoError(dir + ": bad intrinsics.txt");
  }

  std::ifstream pf(fs::path(dir) / "poses.txt");
  if (!pf) throw IoError(dir + ": missing poses.txt");
  s.poses.assign(frames, std::vector<Pose>(s.num_objects));
  std::vector<int> seen(static_cast<std::size_t>(frames) * s.num_objects, 0);
  for (const auto& line : data_lines(pf)) {
    std::istringstream ls(line);
    int t = 0, o = 0;
    Pose p;
    if (!(ls >> t >> o >> p.position.x() >> p.position.y() >> p.position.z() >> p.orientation.w >> p.orientation.x >>
          p.orientation.y >> p.orientation.z) ||
        t < 0 || t >= frames || o < 0 || o >= s.num_objects) {
      throw IoError(dir + ": bad pose line: " + line);
    }
    s.poses[t][o] = p;
    seen[static_cast<std::size_t>(t) * s.num_objects + o] = 1;
  }
  for (int v : seen) {
    if (!v) throw IoError(dir + ": missing poses");
  }

  for (int t = 0; t < frames; ++t) {
    s.frames.push_back(read_png_rgb(frame_name(dir, "frame", t)));
    s.labels.push_back(read_label_png(frame_name(dir, "labels", t)));
    if (s.frames.back().height() != s.intrinsics.height || s.frames.back().width() != s.intrinsics.width) {
      throw IoError(dir + ": frame size does not match intrinsics");
    }
  }
  return s;
}

namespace {

std::string sequence_dir_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "seq_%06d", i);
  return buf;
}

}  // namespace

void generate_dataset(const GenerationConfig& cfg, const std::string& root, int workers) {
  fs::create_directories(root);
  std::string first_error;
#pragma omp parallel for schedule(dynamic) num_threads(workers > 0 ? workers : 1)
  for (int i = 0; i < cfg.count; ++i) {
    try {
      const SequenceSample s = generate_sequence(cfg, sequence_seed(cfg.seed, static_cast<std::uint64_t>(i)));
      write_sequence((fs::path(root) / sequence_dir_name(i)).string(), s);
    } catch (const std::exception& e) {
#pragma omp critical(motion6d_generate_error)
      if (first_error.empty()) first_error = e.what();
    }
  }
  if (!first_error.empty()) throw GenerationError(first_error);

  Config manifest;
  cfg.to_config(manifest);
  manifest.set("format", std::string("motion6d-dataset-1"));
  for (int i = 0; i < cfg.count; ++i) {
    manifest.set("sequence." + sequence_dir_name(i), std::to_string(sequence_seed(cfg.seed, i)));
  }
  manifest.write_file((fs::path(root) / "manifest.txt").string());
}

Dataset Dataset::open(const std::string& root) {
  const fs::path mpath = fs::path(root) / "manifest.txt";
  if (!fs::exists(mpath)) throw IoError("no dataset manifest at " + mpath.string());
  const Config m = Config::from_file(mpath.string());
  if (m.get_string("format", "") != "motion6d-dataset-1") throw IoError(root + ": unknown dataset format");
  Dataset d;
  d.root_ = root;
  d.cfg_ = GenerationConfig::from_config(m);
  for (const auto& [key, value] : m.values()) {
    if (key.rfind("sequence.", 0) != 0) continue;
    d.dirs_.push_back((fs::path(root) / key.substr(9)).string());
    d.seeds_.push_back(std::stoull(value));
  }
  if (static_cast<int>(d.dirs_.size()) != d.cfg_.count) throw IoError(root + ": manifest count mismatch");
  return d;
}

SequenceSample Dataset::load(int sequence) const { return read_sequence(dirs_.at(sequence)); }

}  // namespace motion6d::synth
