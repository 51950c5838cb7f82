#pragma once
// Segmentation, translation and rotation estimators behind one interface, with
// neural implementations and ground-truth / noisy ground-truth test doubles.
//
// Every estimator is stateful per sequence; reset() must be called at the start
// of each sequence (or correction phase).

#include "motion6d/cropkit.hpp"
#include "motion6d/geom6d.hpp"
#include "motion6d/image.hpp"
#include "motion6d/nn/models.hpp"

#include <memory>
#include <optional>
#include <random>
#include <string>

namespace motion6d {

/// Ground truth for the current step. Only oracle estimators read it.
struct StepTruth {
  Pose prev_pose;
  Pose curr_pose;
  CameraIntrinsics intrinsics;
  Image curr_mask;
};

/// How the previous RGB is masked in the segmentation input.
enum class PrevMaskMode {
  KeepObject,  // rgb * mask: background suppressed (default)
  KeepBackground,  // rgb * (1 - mask): the object itself blanked
};

/// "keep-object" | "keep-background"; throws ConfigError otherwise.
PrevMaskMode parse_prev_mask_mode(const std::string& name);
const char* prev_mask_mode_name(PrevMaskMode m);

/// The non-metric translation head regresses (vx, vy, kDepthOutputScale * vz)
/// so the log-depth component has the same order of magnitude as the pixel shifts.
inline constexpr double kDepthOutputScale = 300.0;

// ---- input assembly (shared by inference and training) ----------------------

/// 7-channel crop: masked previous RGB, previous mask, current RGB.
Image segmentation_input(const Image& prev_rgb, const Image& prev_mask, const Image& curr_rgb, const CropSpec& crop,
                         PrevMaskMode mode = PrevMaskMode::KeepObject);
/// 6-channel crop: RGB, mask, row and column coordinates.
Image motion_input(const Image& rgb, const Image& mask, const CropSpec& crop);

/// Crops for a frame pair: translation uses the previous mask's window for both
/// frames; rotation uses each frame's own tight window.
std::pair<CropSpec, CropSpec> translation_crops(const Image& prev_mask, int out_size = kDefaultCropSize);
std::pair<CropSpec, CropSpec> rotation_crops(const Image& prev_mask, const Image& curr_mask,
                                             int out_size = kDefaultCropSize);

/// Writes channel-last images into sample slots of an NCHW tensor.
void pack_images(const std::vector<const Image*>& images, nn::Tensor& out);

NonMetricDelta translation_from_output(const float* out3);
void translation_to_target(const NonMetricDelta& d, float* out3);
Quaternion rotation_from_output(const float* out3);

// ---- interfaces ---------------------------------------------------------------

class SegmentationEstimator {
 public:
  virtual ~SegmentationEstimator() = default;
  virtual void reset() = 0;
  /// Full-frame foreground probability for the current frame. Throws EmptyMask
  /// when prev_mask is empty.
  virtual Image step(const Image& prev_rgb, const Image& prev_mask, const Image& curr_rgb, const StepTruth* truth) = 0;
  virtual bool uses_truth() const { return false; }
};

class TranslationEstimator {
 public:
  virtual ~TranslationEstimator() = default;
  virtual void reset() = 0;
  virtual NonMetricDelta step(const Image& prev_rgb, const Image& prev_mask, const Image& curr_rgb,
                              const Image& curr_mask, const StepTruth* truth) = 0;
};

class RotationEstimator {
 public:
  virtual ~RotationEstimator() = default;
  virtual void reset() = 0;
  /// Unit quaternion with qw > 0.
  virtual Quaternion step(const Image& prev_rgb, const Image& prev_mask, const Image& curr_rgb, const Image& curr_mask,
                          const StepTruth* truth) = 0;
};

// ---- neural -------------------------------------------------------------------

class NeuralSegmentation final : public SegmentationEstimator {
 public:
  explicit NeuralSegmentation(nn::SegmentationNet net, PrevMaskMode mode = PrevMaskMode::KeepObject);
  void reset() override;
  Image step(const Image& prev_rgb, const Image& prev_mask, const Image& curr_rgb, const StepTruth* truth) override;
  const nn::SegmentationNet& net() const { return net_; }

 private:
  nn::SegmentationNet net_;
  PrevMaskMode mode_;
};

class NeuralTranslation final : public TranslationEstimator {
 public:
  explicit NeuralTranslation(nn::MotionBackbone net);
  void reset() override;
  NonMetricDelta step(const Image& prev_rgb, const Image& prev_mask, const Image& curr_rgb, const Image& curr_mask,
                      const StepTruth* truth) override;
  const nn::MotionBackbone& net() const { return net_; }

 private:
  nn::MotionBackbone net_;
};

class NeuralRotation final : public RotationEstimator {
 public:
  explicit NeuralRotation(nn::MotionBackbone net);
  void reset() override;
  Quaternion step(const Image& prev_rgb, const Image& prev_mask, const Image& curr_rgb, const Image& curr_mask,
                  const StepTruth* truth) override;
  const nn::MotionBackbone& net() const { return net_; }

 private:
  nn::MotionBackbone net_;
};

// ---- oracles --------------------------------------------------------------------

class OracleSegmentation final : public SegmentationEstimator {
 public:
  void reset() override {}
  Image step(const Image& prev_rgb, const Image& prev_mask, const Image& curr_rgb, const StepTruth* truth) override;
  bool uses_truth() const override { return true; }
};

/// Ground-truth delta plus N(0, sigma_px) on vx, vy and N(0, sigma_px / fx) on vz.
class NoisyOracleTranslation final : public TranslationEstimator {
 public:
  NoisyOracleTranslation(double sigma_px, std::uint64_t seed);
  void reset() override {}
  NonMetricDelta step(const Image& prev_rgb, const Image& prev_mask, const Image& curr_rgb, const Image& curr_mask,
                      const StepTruth* truth) override;

 private:
  double sigma_;
  std::mt19937_64 rng_;
};

/// Ground-truth rotation composed with a rotation of N(0, sigma) angle about a uniform axis.
class NoisyOracleRotation final : public RotationEstimator {
 public:
  NoisyOracleRotation(double sigma_deg, std::uint64_t seed);
  void reset() override {}
  Quaternion step(const Image& prev_rgb, const Image& prev_mask, const Image& curr_rgb, const Image& curr_mask,
                  const StepTruth* truth) override;

 private:
  double sigma_rad_;
  std::mt19937_64 rng_;
};

// ---- bundles --------------------------------------------------------------------

struct EstimatorBundle {
  std::unique_ptr<SegmentationEstimator> segmentation;
  std::unique_ptr<TranslationEstimator> translation;
  std::unique_ptr<RotationEstimator> rotation;
  std::string description;

  void reset_state();
  bool needs_truth() const;
};

/// Trained weights shared by every neural bundle built from them.
struct CheckpointSet {
  std::optional<nn::SegmentationNet> segmentation;
  std::optional<nn::MotionBackbone> translation;
  std::optional<nn::MotionBackbone> rotation;

  static CheckpointSet load(const std::string& seg_path, const std::string& trans_path, const std::string& rot_path);
};

/// Parses "neural", "oracle" or "noisy-oracle:SIGMA_PX,SIGMA_DEG", optionally
/// followed by "+gtmask" to swap in ground-truth segmentation. Oracle bundles
/// always segment with ground truth.
EstimatorBundle make_bundle(const std::string& spec, const CheckpointSet& weights, std::uint64_t seed,
                            PrevMaskMode mode = PrevMaskMode::KeepObject);

}  // namespace motion6d
