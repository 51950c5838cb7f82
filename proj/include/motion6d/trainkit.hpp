#pragma once
// Losses, augmentation, schedules and the per-model training loops.

#include "motion6d/config.hpp"
#include "motion6d/estimators.hpp"
#include "motion6d/synthgen.hpp"

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace motion6d::train {

inline constexpr double kBceClamp = 1e-7;
inline constexpr double kAcosClamp = 1e-7;

// ---- losses -------------------------------------------------------------------
// Each returns the loss and, when the gradient span is non-empty, writes dL/dinput.

/// Mean binary cross entropy over probabilities clamped to [1e-7, 1 - 1e-7].
double seg_loss(std::span<const double> prob, std::span<const double> target, std::span<double> grad_prob = {});
/// Same loss evaluated from logits without clamping (stable form used in training);
/// gradient is (sigmoid(z) - y) / n.
double seg_loss_logits(std::span<const float> logits, std::span<const float> target, std::span<float> grad_logits = {});

/// Mean squared error over the three components.
double trans_loss(const std::array<double, 3>& pred, const std::array<double, 3>& gt, std::array<double, 3>* grad = nullptr);

/// Geodesic angle with |<pred, gt>| clamped to 1 - 1e-7. Gradient is with respect to the
/// four components (w, x, y, z) of a unit pred.
double rot_loss(const Quaternion& pred, const Quaternion& gt, std::array<double, 4>* grad = nullptr);
/// rot_loss of gnomonic_unproject(g); gradient flows through the normalisation.
double rot_loss_gnomonic(const std::array<double, 3>& g, const Quaternion& gt, std::array<double, 3>* grad = nullptr);

// ---- configuration ----------------------------------------------------------------

struct TrainConfig {
  int epochs = 14;
  int batch = 16;
  double lr = 2e-4;
  double weight_decay = 1e-6;
  double lr_decay_factor = 4.0;
  int lr_decay_every = 6;
  double reverse_prob = 0.5;
  double rgb_noise = 0.03;
  double clip_norm = 10.0;
  int curriculum_hold = 4;  // epochs with ground-truth masks only
  double curriculum_max = 0.9;  // reached at the final epoch
  // The segmentation net follows the same schedule, feeding back its own previous
  // prediction instead of the ground-truth previous mask.
  bool seg_self_feed = true;
  // Ground-truth previous masks given to the segmentation net are shifted by up to this
  // many pixels per axis, so copying the previous mask is not a good answer.
  int seg_mask_jitter = 4;
  // Passes of single-step (t-1 -> t) training before the recurrent epochs, with
  // ground-truth masks. Each pass gives one update per frame pair and batch of
  // sequences, ~30x the recurrent rate.
  int pair_passes = 8;
  std::uint64_t seed = 1;
  int max_sequences = -1;  // < 0: whole dataset
  PrevMaskMode prev_mask_mode = PrevMaskMode::KeepObject;

  static TrainConfig from_config(const Config& c);
  void to_config(Config& c) const;
};

/// Learning rate for a 1-based epoch.
double learning_rate(const TrainConfig& cfg, int epoch);
/// Probability of feeding predicted masks to the motion models in a 1-based epoch.
double curriculum_probability(const TrainConfig& cfg, int epoch);

// ---- augmentation -------------------------------------------------------------------

void reverse_sequence(synth::SequenceSample& s);
/// Uniform noise in [-amp, amp] on every RGB value, clamped to [0, 1].
void add_rgb_noise(synth::SequenceSample& s, std::mt19937_64& rng, double amp);
/// Translate a single-channel image by whole pixels; uncovered pixels are zero.
Image shift_image(const Image& m, int drow, int dcol);
void augment(synth::SequenceSample& s, std::mt19937_64& rng, const TrainConfig& cfg);

// ---- training -------------------------------------------------------------------------

enum class ModelKind { Segmentation, Translation, Rotation };
ModelKind parse_model_kind(const std::string& s);
const char* model_kind_name(ModelKind k);

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
  double p_predicted_mask = 0.0;
  double seconds = 0.0;
};

struct TrainOptions {
  std::string checkpoint_out;
  std::string metrics_out;  // per-epoch table
  /// Frozen segmentation for the mask curriculum; without it motion models see
  /// ground-truth masks only.
  const nn::SegmentationNet* frozen_segmentation = nullptr;
  std::ostream* progress = nullptr;
};

/// Trains one model from scratch and writes its checkpoint after every epoch.
/// Throws DivergenceError on a non-finite loss or gradient.
std::vector<EpochRecord> train_model(ModelKind which, const synth::Dataset& data, const TrainConfig& cfg,
                                     const TrainOptions& opts);

/// Recurrent-epoch loss of the freshly initialised network on the first `cfg.batch`
/// samples, without augmentation and with ground-truth masks. Same units as
/// EpochRecord::mean_loss.
double initial_loss(ModelKind which, const synth::Dataset& data, const TrainConfig& cfg);

}  // namespace motion6d::train
