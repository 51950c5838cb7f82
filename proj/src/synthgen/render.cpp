#include "motion6d/errors.hpp"
#include "motion6d/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numbers>

namespace motion6d::synth {

namespace {

using Color = Eigen::Vector3f;

Color random_color(Rng& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  const float r = u(rng), g = u(rng), b = u(rng);
  return {r, g, b};
}

void put(Image& img, int r, int c, const Color& col) {
  float* px = img.pixel(r, c);
  px[0] = col[0];
  px[1] = col[1];
  px[2] = col[2];
}

// Bilinear interpolation of a coarse random colour lattice.
void add_value_noise(Image& img, Rng& rng, int cells, float amplitude) {
  const int gh = cells + 1, gw = cells + 1;
  std::vector<Color> grid(static_cast<std::size_t>(gh) * gw);
  for (auto& c : grid) c = random_color(rng);
  for (int r = 0; r < img.height(); ++r) {
    const double fr = static_cast<double>(r) / img.height() * cells;
    const int r0 = std::min(static_cast<int>(fr), cells - 1);
    const float tr = static_cast<float>(fr - r0);
    for (int c = 0; c < img.width(); ++c) {
      const double fc = static_cast<double>(c) / img.width() * cells;
      const int c0 = std::min(static_cast<int>(fc), cells - 1);
      const float tc = static_cast<float>(fc - c0);
      const Color v = (1 - tr) * ((1 - tc) * grid[r0 * gw + c0] + tc * grid[r0 * gw + c0 + 1]) +
                      tr * ((1 - tc) * grid[(r0 + 1) * gw + c0] + tc * grid[(r0 + 1) * gw + c0 + 1]);
      float* px = img.pixel(r, c);
      for (int k = 0; k < 3; ++k) px[k] += amplitude * v[k];
    }
  }
}

}  // namespace

Image procedural_texture(Rng& rng, int height, int width) {
  // Flat colours are kept rare: they carry no rotation cue.
  std::discrete_distribution<int> kinds({0.3, 0.3, 0.3, 0.1});
  return procedural_texture(rng, height, width, static_cast<TextureKind>(kinds(rng)));
}

Image procedural_texture(Rng& rng, int height, int width, TextureKind kind) {
  Image img(height, width, 3);
  switch (kind) {
    case TextureKind::Checkerboard: {
      const Color a = random_color(rng), b = random_color(rng);
      const int cells = std::uniform_int_distribution<int>(2, 8)(rng);
      for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
          const int cr = r * cells / height, cc = c * cells / width;
          put(img, r, c, ((cr + cc) % 2) ? a : b);
        }
      break;
    }
    case TextureKind::Noise: {
      const int octaves = 3;
      float amp = 0.5f;
      int cells = std::uniform_int_distribution<int>(2, 5)(rng);
      for (int o = 0; o < octaves; ++o) {
        add_value_noise(img, rng, cells, amp);
        cells *= 2;
        amp *= 0.5f;
      }
      // Total amplitude 0.875; stretch to the full range.
      for (float& v : img.data()) v = std::clamp(v / 0.875f, 0.0f, 1.0f);
      break;
    }
    case TextureKind::Stripes: {
      const Color a = random_color(rng), b = random_color(rng);
      const double angle = std::uniform_real_distribution<double>(0.0, std::numbers::pi)(rng);
      const double period = std::uniform_real_distribution<double>(0.1, 0.4)(rng) * std::min(height, width);
      const double ca = std::cos(angle), sa = std::sin(angle);
      for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
          const double t = (c * ca + r * sa) / period;
          put(img, r, c, (t - std::floor(t)) < 0.5 ? a : b);
        }
      break;
    }
    case TextureKind::Flat: {
      const Color a = random_color(rng);
      for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) put(img, r, c, a);
      break;
    }
  }
  return img;
}

std::vector<std::string> list_images(const std::string& dir) {
  std::vector<std::string> out;
  if (dir.empty()) return out;
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw IoError("image directory not found: " + dir);
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png") out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

Image random_view(const Image& source, Rng& rng, int height, int width) {
  // Largest window with the target aspect ratio, scaled by a random factor in [0.5, 1].
  const double aspect = static_cast<double>(width) / height;
  double wh = source.height(), ww = wh * aspect;
  if (ww > source.width()) {
    ww = source.width();
    wh = ww / aspect;
  }
  const double s = std::uniform_real_distribution<double>(0.5, 1.0)(rng);
  wh *= s;
  ww *= s;
  const double r0 = std::uniform_real_distribution<double>(0.0, source.height() - wh)(rng);
  const double c0 = std::uniform_real_distribution<double>(0.0, source.width() - ww)(rng);
  Image out(height, width, 3);
  for (int r = 0; r < height; ++r) {
    const double sr = std::clamp(r0 + (r + 0.5) * wh / height - 0.5, 0.0, source.height() - 1.0);
    const int a = static_cast<int>(sr);
    const double tr = sr - a;
    const int a1 = std::min(a + 1, source.height() - 1);
    for (int c = 0; c < width; ++c) {
      const double sc = std::clamp(c0 + (c + 0.5) * ww / width - 0.5, 0.0, source.width() - 1.0);
      const int b = static_cast<int>(sc);
      const double tc = sc - b;
      const int b1 = std::min(b + 1, source.width() - 1);
      for (int k = 0; k < 3; ++k) {
        out.at(r, c, k) = static_cast<float>((1 - tr) * ((1 - tc) * source.at(a, b, k) + tc * source.at(a, b1, k)) +
                                             tr * ((1 - tc) * source.at(a1, b, k) + tc * source.at(a1, b1, k)));
      }
    }
  }
  return out;
}

SceneObject make_scene_object(const ObjectSpec& spec, std::array<Image, 3> textures) {
  SceneObject o;
  o.spec = spec;
  for (int i = 0; i < 3; ++i) o.meshes[i] = tessellate(spec.primitives[i]);
  o.textures = std::move(textures);
  return o;
}

namespace {

constexpr double kNearPlane = 0.01;

void sample_texture(const Image& tex, double u, double v, float* out) {
  // Wrapping bilinear lookup.
  const double x = (u - std::floor(u)) * tex.width() - 0.5;
  const double y = (v - std::floor(v)) * tex.height() - 0.5;
  const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
  const float tx = static_cast<float>(x - x0), ty = static_cast<float>(y - y0);
  auto wrap = [](int i, int n) { return ((i % n) + n) % n; };
  const int xa = wrap(x0, tex.width()), xb = wrap(x0 + 1, tex.width());
  const int ya = wrap(y0, tex.height()), yb = wrap(y0 + 1, tex.height());
  const float* p00 = tex.pixel(ya, xa);
  const float* p01 = tex.pixel(ya, xb);
  const float* p10 = tex.pixel(yb, xa);
  const float* p11 = tex.pixel(yb, xb);
  for (int k = 0; k < 3; ++k) {
    out[k] = (1 - ty) * ((1 - tx) * p00[k] + tx * p01[k]) + ty * ((1 - tx) * p10[k] + tx * p11[k]);
  }
}

}  // namespace

RenderResult render(const std::vector<const SceneObject*>& objects, const std::vector<Pose>& poses,
                    const Image& background, const CameraIntrinsics& K) {
  const int H = K.height, W = K.width;
  if (background.height() != H || background.width() != W || background.channels() != 3) {
    throw Error("background does not match camera resolution");
  }
  RenderResult out{background, LabelImage{H, W, std::vector<unsigned char>(static_cast<std::size_t>(H) * W, 0)}};
  std::vector<double> depth(static_cast<std::size_t>(H) * W, std::numeric_limits<double>::infinity());

  struct Projected {
    double px, py, inv_z;
  };
  std::vector<Projected> proj;
  for (std::size_t oi = 0; oi < objects.size(); ++oi) {
    const SceneObject& obj = *objects[oi];
    const Mat3 R = poses[oi].orientation.matrix();
    const Vec3& t = poses[oi].position;
    const auto label = static_cast<unsigned char>(oi + 1);
    for (int pi = 0; pi < 3; ++pi) {
      const Mesh& mesh = obj.meshes[pi];
      const Image& tex = obj.textures[pi];
      proj.resize(mesh.vertices.size());
      for (std::size_t vi = 0; vi < mesh.vertices.size(); ++vi) {
        const Vec3 p = R * mesh.vertices[vi] + t;
        proj[vi] = {K.fx * p.x() / p.z() + K.cx, K.fy * p.y() / p.z() + K.cy, p.z() > kNearPlane ? 1.0 / p.z() : -1.0};
      }
      for (const auto& tri : mesh.triangles) {
        const Projected& a = proj[tri[0]];
        const Projected& b = proj[tri[1]];
        const Projected& c = proj[tri[2]];
        if (a.inv_z <= 0 || b.inv_z <= 0 || c.inv_z <= 0) continue;
        const double area = (b.px - a.px) * (c.py - a.py) - (b.py - a.py) * (c.px - a.px);
        if (std::abs(area) < 1e-12) continue;
        const int c_lo = std::max(0, static_cast<int>(std::ceil(std::min({a.px, b.px, c.px}))));
        const int c_hi = std::min(W - 1, static_cast<int>(std::floor(std::max({a.px, b.px, c.px}))));
        const int r_lo = std::max(0, static_cast<int>(std::ceil(std::min({a.py, b.py, c.py}))));
        const int r_hi = std::min(H - 1, static_cast<int>(std::floor(std::max({a.py, b.py, c.py}))));
        const auto& uva = mesh.uv[tri[0]];
        const auto& uvb = mesh.uv[tri[1]];
        const auto& uvc = mesh.uv[tri[2]];
        for (int r = r_lo; r <= r_hi; ++r) {
          for (int col = c_lo; col <= c_hi; ++col) {
            // Barycentric weights from signed sub-areas; pixel centers at integers.
            const double w0 = ((b.px - col) * (c.py - r) - (b.py - r) * (c.px - col)) / area;
            const double w1 = ((c.px - col) * (a.py - r) - (c.py - r) * (a.px - col)) / area;
            const double w2 = 1.0 - w0 - w1;
            if (w0 < 0 || w1 < 0 || w2 < 0) continue;
            const double iz = w0 * a.inv_z + w1 * b.inv_z + w2 * c.inv_z;
            const double z = 1.0 / iz;
            const std::size_t idx = static_cast<std::size_t>(r) * W + col;
            if (z >= depth[idx]) continue;
            depth[idx] = z;
            out.labels.labels[idx] = label;
            const double u = (w0 * a.inv_z * uva.x() + w1 * b.inv_z * uvb.x() + w2 * c.inv_z * uvc.x()) * z;
            const double v = (w0 * a.inv_z * uva.y() + w1 * b.inv_z * uvb.y() + w2 * c.inv_z * uvc.y()) * z;
            sample_texture(tex, u, v, out.rgb.pixel(r, col));
          }
        }
      }
    }
  }
  return out;
}

}  // namespace motion6d::synth
