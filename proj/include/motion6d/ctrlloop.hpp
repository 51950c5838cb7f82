#pragma once
// Control experiment: perturb an object while tracking it, command the return
// from the integrated estimates, then iteratively correct against the stored
// target frame. Ground-truth poses are used only for scoring (and by oracle
// estimators, which read them by definition).

#include "motion6d/estimators.hpp"
#include "motion6d/synthgen.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace motion6d::ctrl {

/// Largest rotation commanded in one open-loop sub-step.
inline constexpr double kMaxSubstepDegrees = 30.0;

/// Realizes a camera-frame motion delta on one object exactly, leaving it at rest.
class IdealController {
 public:
  void apply(synth::BodyState& body, const MotionDelta& d, const CameraIntrinsics& K) const;
};

/// Number of equal sub-steps for a commanded rotation: max(1, ceil(angle / 30 deg)).
int substep_count(const Quaternion& q);
/// The i-th equal fraction of `d` split into n parts (translation / n, rotation^(1/n)).
MotionDelta substep(const MotionDelta& d, int n);

/// Sum of translations and composition of rotations, oldest first.
MotionDelta accumulate(const std::vector<MotionDelta>& deltas);

struct CorrectionInput {
  const Image* current_rgb = nullptr;
  const Image* current_mask = nullptr;
  const Image* target_rgb = nullptr;
  const Image* target_mask = nullptr;
  const StepTruth* truth = nullptr;  // current -> target poses, for oracle estimators only
};

/// Estimates current -> target motion with freshly reset motion estimators and
/// returns it scaled by `gain` (translation scaled, rotation raised to the gain).
/// Throws EmptyMask when either mask is empty.
MotionDelta correction_iteration(const CorrectionInput& in, EstimatorBundle& bundle, double gain = 1.0);

enum class Failure { None, Position, Orientation, Both };
const char* failure_name(Failure f);
Failure classify(const PoseError& e);

struct TrialConfig {
  int objects = 1;  // 1: No-occ, 3: Occ (target is object 0)
  int perturb_steps = 30;
  int max_corrections = 100;
  double gain = 1.0;
  synth::GenerationConfig scene;  // resolution, intrinsics, dynamics
};

struct ControlResult {
  bool success_open_loop = false;
  bool success_after_corrections = false;
  int corrections_used = 0;
  int skipped_corrections = 0;  // empty masks
  int iterations_to_success = -1;  // first iteration within threshold, 0 = already after open loop
  PoseError open_loop_error;
  PoseError final_error;
  std::vector<PoseError> trace;  // after each correction
  Failure failure = Failure::None;
  int low_confidence_frames = 0;
};

/// One trial: sample a scene, record the target frame, perturb for T steps while
/// tracking, return open loop, then run the corrections.
ControlResult run_trial(const TrialConfig& cfg, EstimatorBundle& bundle, std::uint64_t seed);

struct ExperimentConfig {
  std::vector<int> perturb_steps{30, 60, 90};
  std::vector<int> settings{1, 3};  // objects per scene
  int trials = 100;
  int max_corrections = 100;
  double gain = 1.0;
  std::uint64_t seed = 1;
  std::string estimators = "neural";
  PrevMaskMode prev_mask_mode = PrevMaskMode::KeepObject;
  synth::GenerationConfig scene;

  static ExperimentConfig from_config(const Config& c);
  void to_config(Config& c) const;
};

struct ConvergenceRow {
  std::string setting;  // "No-occ" or "Occ"
  int perturb_steps = 0;
  int trials = 0;
  double open_loop_rate = 0.0;
  double corrected_rate = 0.0;
  double mean_iterations_to_success = 0.0;  // over corrected successes
  int fail_position = 0;
  int fail_orientation = 0;
  int fail_both = 0;
};

struct Experiment {
  std::vector<ConvergenceRow> rows;
  std::vector<std::vector<ControlResult>> trials;  // parallel to rows
};

std::string setting_name(int objects);

Experiment run_control_experiment(const ExperimentConfig& cfg, const CheckpointSet& weights, int workers);

/// Tab-separated: setting T trials open_loop_rate corrected_rate mean_iterations fail_pos fail_rot fail_both.
void write_convergence_table(std::ostream& os, const std::vector<ConvergenceRow>& rows);
void write_convergence_table(const std::string& path, const std::vector<ConvergenceRow>& rows);
std::vector<ConvergenceRow> read_convergence_table(const std::string& path);

}  // namespace motion6d::ctrl
