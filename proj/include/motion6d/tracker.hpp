#pragma once
// Full tracking loop over a sequence (segment, estimate, integrate) and the
// per-frame error curves used for evaluation.

#include "motion6d/estimators.hpp"
#include "motion6d/synthgen.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace motion6d::track {

// Metric names. "step_*" compare one predicted delta applied to the true previous
// pose; "int_*" compare the integrated trajectory (anchored at the true frame-0
// pose). Per-axis translation errors are absolute values in cm.
inline constexpr const char* kStepMetrics[] = {"step_x_cm", "step_y_cm", "step_z_cm", "step_trans_cm", "step_rot_deg"};
inline constexpr const char* kIntegratedMetrics[] = {"int_x_cm", "int_y_cm", "int_z_cm", "int_trans_cm", "int_rot_deg"};

/// Area below this fraction of the running median raises the low-confidence flag.
inline constexpr double kLowAreaFraction = 0.1;

/// Result of one tracking step.
struct StepOutput {
  Image mask;  // never empty: the previous mask is reused when segmentation fails
  MotionDelta delta;
  bool low_confidence = false;
};

/// Segments the current frame and estimates the motion into it. `areas` holds
/// the accepted mask areas so far and is extended on success.
StepOutput track_step(EstimatorBundle& bundle, const Image& prev_rgb, const Image& prev_mask, const Image& curr_rgb,
                      const StepTruth* truth, std::vector<long>& areas);

struct TrackReport {
  // metric -> value per frame t = 1 .. T-1 (index t - 1)
  std::map<std::string, std::vector<double>> series;
  std::vector<NonMetricDelta> raw_step_error;  // predicted minus true, non-metric units
  std::vector<bool> low_confidence;
  std::string estimator;
  int object = 0;
  int num_objects = 1;

  int frames() const { return static_cast<int>(low_confidence.size()); }
  const std::vector<double>& at(const std::string& metric) const;
  /// Mean of a metric over frames [first, last] (1-based, inclusive, clipped to the report).
  double mean(const std::string& metric, int first, int last) const;
};

struct TrackResult {
  std::vector<Pose> trajectory;  // frame 0 .. T-1; anchored, or relative to (0, 0, 1) otherwise
  std::vector<MotionDelta> deltas;  // estimated delta into frame t at index t - 1
  std::vector<Image> masks;  // mask used at each frame (frame 0 is ground truth)
  TrackReport report;
};

/// Tracks `object` through the sequence starting from its ground-truth frame-0
/// mask. Errors are scored against the stored poses; integrated errors only when
/// an anchor is given. The bundle is reset first. Empty masks never abort: the
/// previous mask is reused and the frame flagged.
TrackResult track_sequence(const synth::SequenceSample& sample, int object, EstimatorBundle& bundle,
                           const std::optional<Pose>& anchor);

/// Errors of predicting zero motion at every frame.
TrackReport baseline_static(const synth::SequenceSample& sample, int object);

// ---- split evaluation ------------------------------------------------------------

struct CurveRow {
  int frame = 0;
  std::string metric;
  double mean = 0.0;
  double stderr_ = 0.0;
  std::string config;
};

/// Per-frame mean and standard error of every metric across reports.
std::vector<CurveRow> aggregate(const std::vector<TrackReport>& reports, const std::string& config);

/// "pred-<split>" for neural, "gtmask-<split>" for neural+gtmask, "<spec>-<split>" otherwise.
std::string config_label(const std::string& spec, const std::string& split);

struct SplitEvaluation {
  std::string config;
  std::vector<TrackReport> reports;
  std::vector<CurveRow> rows;
};

/// Tracks every sample of the archive (each object of each sequence, up to
/// max_samples if >= 0) with a fresh bundle built from `spec`.
SplitEvaluation evaluate_split(const synth::Dataset& data, const std::string& split, const std::string& spec,
                               const CheckpointSet& weights, int max_samples, int workers,
                               PrevMaskMode mode = PrevMaskMode::KeepObject);

/// Tab-separated with header "frame metric mean stderr config".
void write_curve_table(std::ostream& os, const std::vector<CurveRow>& rows);
void write_curve_table(const std::string& path, const std::vector<CurveRow>& rows);
std::vector<CurveRow> read_curve_table(const std::string& path);

}  // namespace motion6d::track
