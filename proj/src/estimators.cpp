#include "motion6d/estimators.hpp"

#include "motion6d/errors.hpp"
#include "motion6d/nn/optim.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace motion6d {

PrevMaskMode parse_prev_mask_mode(const std::string& name) {
  if (name == "keep-object") return PrevMaskMode::KeepObject;
  if (name == "keep-background") return PrevMaskMode::KeepBackground;
  throw ConfigError("model.prev_mask_mode must be keep-object or keep-background, got " + name);
}

const char* prev_mask_mode_name(PrevMaskMode m) {
  return m == PrevMaskMode::KeepObject ? "keep-object" : "keep-background";
}

Image segmentation_input(const Image& prev_rgb, const Image& prev_mask, const Image& curr_rgb, const CropSpec& crop,
                         PrevMaskMode mode) {
  Image masked(prev_rgb.height(), prev_rgb.width(), 3);
  for (int r = 0; r < prev_rgb.height(); ++r) {
    for (int c = 0; c < prev_rgb.width(); ++c) {
      const float m = prev_mask.at(r, c);
      const float w = mode == PrevMaskMode::KeepObject ? m : 1.0f - m;
      for (int k = 0; k < 3; ++k) masked.at(r, c, k) = prev_rgb.at(r, c, k) * w;
    }
  }
  return concat_channels(concat_channels(extract_crop(masked, crop), extract_crop(prev_mask, crop)),
                         extract_crop(curr_rgb, crop));
}

Image motion_input(const Image& rgb, const Image& mask, const CropSpec& crop) {
  return add_coord_channels(concat_channels(extract_crop(rgb, crop), extract_crop(mask, crop)));
}

std::pair<CropSpec, CropSpec> translation_crops(const Image& prev_mask, int out_size) {
  const CropSpec c = translation_crop(mask_stats(prev_mask), prev_mask.height(), prev_mask.width(), out_size);
  return {c, c};
}

std::pair<CropSpec, CropSpec> rotation_crops(const Image& prev_mask, const Image& curr_mask, int out_size) {
  return {rotation_crop(mask_stats(prev_mask), out_size), rotation_crop(mask_stats(curr_mask), out_size)};
}

void pack_images(const std::vector<const Image*>& images, nn::Tensor& out) {
  if (images.empty()) throw Error("pack_images: no images");
  const Image& first = *images.front();
  const int n = static_cast<int>(images.size());
  if (out.shape() != nn::Shape{n, first.channels(), first.height(), first.width()}) {
    out = nn::Tensor(n, first.channels(), first.height(), first.width());
  }
  const int H = first.height(), W = first.width(), C = first.channels();
  for (int i = 0; i < n; ++i) {
    const Image& img = *images[i];
    if (img.height() != H || img.width() != W || img.channels() != C) throw Error("pack_images: size mismatch");
    float* dst = out.sample(i);
    const auto src = img.data();
    for (int c = 0; c < C; ++c) {
      for (int p = 0; p < H * W; ++p) dst[static_cast<std::size_t>(c) * H * W + p] = src[static_cast<std::size_t>(p) * C + c];
    }
  }
}

NonMetricDelta translation_from_output(const float* out3) {
  return {out3[0], out3[1], out3[2] / kDepthOutputScale};
}

void translation_to_target(const NonMetricDelta& d, float* out3) {
  out3[0] = static_cast<float>(d.vx);
  out3[1] = static_cast<float>(d.vy);
  out3[2] = static_cast<float>(d.vz * kDepthOutputScale);
}

Quaternion rotation_from_output(const float* out3) { return gnomonic_unproject({out3[0], out3[1], out3[2]}); }

// ---- neural -------------------------------------------------------------------

NeuralSegmentation::NeuralSegmentation(nn::SegmentationNet net, PrevMaskMode mode) : net_(std::move(net)), mode_(mode) {
  reset();
}

void NeuralSegmentation::reset() { net_.reset_state(1); }

Image NeuralSegmentation::step(const Image& prev_rgb, const Image& prev_mask, const Image& curr_rgb, const StepTruth*) {
  const CropSpec crop =
      translation_crop(mask_stats(prev_mask), prev_mask.height(), prev_mask.width(), net_.crop_size());
  const Image in = segmentation_input(prev_rgb, prev_mask, curr_rgb, crop, mode_);
  nn::Tensor x;
  pack_images({&in}, x);
  const nn::Tensor logits = net_.step(x, false);
  Image prob(crop.out_size, crop.out_size, 1);
  for (int i = 0; i < crop.out_size * crop.out_size; ++i) prob.data()[i] = 1.0f / (1.0f + std::exp(-logits[i]));
  return paste_crop(prob, crop, prev_mask.height(), prev_mask.width());
}

NeuralTranslation::NeuralTranslation(nn::MotionBackbone net) : net_(std::move(net)) { reset(); }

void NeuralTranslation::reset() { net_.reset_state(1); }

NonMetricDelta NeuralTranslation::step(const Image& prev_rgb, const Image& prev_mask, const Image& curr_rgb,
                                       const Image& curr_mask, const StepTruth*) {
  const auto [cp, cc] = translation_crops(prev_mask, net_.crop_size());
  const Image a = motion_input(prev_rgb, prev_mask, cp);
  const Image b = motion_input(curr_rgb, curr_mask, cc);
  nn::Tensor ta, tb;
  pack_images({&a}, ta);
  pack_images({&b}, tb);
  const nn::Tensor out = net_.step(ta, tb, false);
  return translation_from_output(out.data());
}

NeuralRotation::NeuralRotation(nn::MotionBackbone net) : net_(std::move(net)) { reset(); }

void NeuralRotation::reset() { net_.reset_state(1); }

Quaternion NeuralRotation::step(const Image& prev_rgb, const Image& prev_mask, const Image& curr_rgb,
                                const Image& curr_mask, const StepTruth*) {
  const auto [cp, cc] = rotation_crops(prev_mask, curr_mask, net_.crop_size());
  const Image a = motion_input(prev_rgb, prev_mask, cp);
  const Image b = motion_input(curr_rgb, curr_mask, cc);
  nn::Tensor ta, tb;
  pack_images({&a}, ta);
  pack_images({&b}, tb);
  const nn::Tensor out = net_.step(ta, tb, false);
  return rotation_from_output(out.data());
}

// ---- oracles --------------------------------------------------------------------

namespace {

const StepTruth& require_truth(const StepTruth* t) {
  if (!t) throw Error("oracle estimator called without ground truth");
  return *t;
}

}  // namespace

Image OracleSegmentation::step(const Image&, const Image& prev_mask, const Image&, const StepTruth* truth) {
  mask_stats(prev_mask);  // same EmptyMask contract as the network
  return require_truth(truth).curr_mask;
}

NoisyOracleTranslation::NoisyOracleTranslation(double sigma_px, std::uint64_t seed) : sigma_(sigma_px), rng_(seed) {}

NonMetricDelta NoisyOracleTranslation::step(const Image&, const Image&, const Image&, const Image&,
                                            const StepTruth* truth) {
  const StepTruth& t = require_truth(truth);
  NonMetricDelta d = translation_delta(t.prev_pose, t.curr_pose, t.intrinsics);
  if (sigma_ > 0.0) {
    std::normal_distribution<double> n(0.0, 1.0);
    d.vx += sigma_ * n(rng_);
    d.vy += sigma_ * n(rng_);
    d.vz += sigma_ / t.intrinsics.fx * n(rng_);
  }
  return d;
}

NoisyOracleRotation::NoisyOracleRotation(double sigma_deg, std::uint64_t seed)
    : sigma_rad_(sigma_deg * std::numbers::pi / 180.0), rng_(seed) {}

Quaternion NoisyOracleRotation::step(const Image&, const Image&, const Image&, const Image&, const StepTruth* truth) {
  const StepTruth& t = require_truth(truth);
  const Quaternion q = rotation_delta(t.prev_pose, t.curr_pose);
  if (sigma_rad_ <= 0.0) return q;
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 axis(n(rng_), n(rng_), n(rng_));
  axis.normalize();
  const double angle = sigma_rad_ * n(rng_);
  return (detail::from_rotation_vector(axis * angle) * q).versor();
}

// ---- bundles --------------------------------------------------------------------

void EstimatorBundle::reset_state() {
  segmentation->reset();
  translation->reset();
  rotation->reset();
}

bool EstimatorBundle::needs_truth() const {
  return segmentation->uses_truth() || !dynamic_cast<NeuralTranslation*>(translation.get()) ||
         !dynamic_cast<NeuralRotation*>(rotation.get());
}

CheckpointSet CheckpointSet::load(const std::string& seg_path, const std::string& trans_path,
                                  const std::string& rot_path) {
  CheckpointSet s;
  if (!seg_path.empty()) {
    nn::SegmentationNet net;
    nn::load_checkpoint(seg_path, net.architecture(), net.parameters());
    s.segmentation = std::move(net);
  }
  if (!trans_path.empty()) {
    nn::MotionBackbone net("trans");
    nn::load_checkpoint(trans_path, net.architecture(), net.parameters());
    s.translation = std::move(net);
  }
  if (!rot_path.empty()) {
    nn::MotionBackbone net("rot");
    nn::load_checkpoint(rot_path, net.architecture(), net.parameters());
    s.rotation = std::move(net);
  }
  return s;
}

EstimatorBundle make_bundle(const std::string& spec, const CheckpointSet& weights, std::uint64_t seed,
                            PrevMaskMode mode) {
  std::string kind = spec;
  bool gtmask = false;
  if (const auto plus = kind.find('+'); plus != std::string::npos) {
    if (kind.substr(plus + 1) != "gtmask") throw ConfigError("unknown estimator modifier in " + spec);
    gtmask = true;
    kind.resize(plus);
  }
  EstimatorBundle b;
  b.description = spec;
  if (kind == "neural") {
    if (!weights.translation || !weights.rotation) throw ConfigError("neural estimators need trans and rot checkpoints");
    if (!gtmask && !weights.segmentation) throw ConfigError("neural segmentation needs a seg checkpoint");
    b.translation = std::make_unique<NeuralTranslation>(*weights.translation);
    b.rotation = std::make_unique<NeuralRotation>(*weights.rotation);
    if (gtmask) {
      b.segmentation = std::make_unique<OracleSegmentation>();
    } else {
      b.segmentation = std::make_unique<NeuralSegmentation>(*weights.segmentation, mode);
    }
    return b;
  }
  double sigma_px = 0.0, sigma_deg = 0.0;
  if (kind.rfind("noisy-oracle:", 0) == 0) {
    std::istringstream is(kind.substr(13));
    char comma = 0;
    if (!(is >> sigma_px >> comma >> sigma_deg) || comma != ',' || sigma_px < 0 || sigma_deg < 0) {
      throw ConfigError("expected noisy-oracle:SIGMA_PX,SIGMA_DEG, got " + spec);
    }
  } else if (kind != "oracle") {
    throw ConfigError("unknown estimator spec " + spec);
  }
  b.segmentation = std::make_unique<OracleSegmentation>();
  b.translation = std::make_unique<NoisyOracleTranslation>(sigma_px, seed);
  b.rotation = std::make_unique<NoisyOracleRotation>(sigma_deg, seed ^ 0x5bd1e995u);
  return b;
}

}  // namespace motion6d
