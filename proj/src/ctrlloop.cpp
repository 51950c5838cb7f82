#include "motion6d/ctrlloop.hpp"

#include "motion6d/errors.hpp"
#include "motion6d/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace motion6d::ctrl {

namespace {

using synth::RenderResult;

constexpr double kPi = std::numbers::pi;
// Commands that would put the object closer than this or farther than kMaxDepth are refused.
constexpr double kMinDepth = 0.1;
constexpr double kMaxDepth = 100.0;

Image target_mask_of(const RenderResult& r) {
  return binary_mask_from_labels(r.labels.labels, r.labels.height, r.labels.width, 1);
}

bool finite(const MotionDelta& d) {
  return std::isfinite(d.translation.vx) && std::isfinite(d.translation.vy) && std::isfinite(d.translation.vz) &&
         std::isfinite(d.rotation.w) && std::isfinite(d.rotation.x) && std::isfinite(d.rotation.y) &&
         std::isfinite(d.rotation.z);
}

}  // namespace

void IdealController::apply(synth::BodyState& body, const MotionDelta& d, const CameraIntrinsics& K) const {
  if (!finite(d)) throw Error("controller: non-finite command");
  const Pose next = integrate_delta(body.pose, d, K);
  if (!(next.position.z() >= kMinDepth && next.position.z() <= kMaxDepth)) {
    throw BehindCamera("controller: commanded depth out of range");
  }
  body.pose = next;
  body.velocity.setZero();
  body.angular_velocity.setZero();
}

int substep_count(const Quaternion& q) {
  const double deg = geodesic_angle(q, Quaternion::identity()) * 180.0 / kPi;
  return std::max(1, static_cast<int>(std::ceil(deg / kMaxSubstepDegrees - 1e-9)));
}

MotionDelta substep(const MotionDelta& d, int n) {
  return {d.translation * (1.0 / n), detail::fractional(d.rotation, 1.0 / n)};
}

MotionDelta accumulate(const std::vector<MotionDelta>& deltas) {
  MotionDelta acc = MotionDelta::identity();
  for (const auto& d : deltas) acc = compose(acc, d);
  return acc;
}

MotionDelta correction_iteration(const CorrectionInput& in, EstimatorBundle& bundle, double gain) {
  bundle.translation->reset();
  bundle.rotation->reset();
  mask_stats(*in.current_mask);
  mask_stats(*in.target_mask);
  MotionDelta d;
  d.translation = bundle.translation->step(*in.current_rgb, *in.current_mask, *in.target_rgb, *in.target_mask, in.truth);
  d.rotation = bundle.rotation->step(*in.current_rgb, *in.current_mask, *in.target_rgb, *in.target_mask, in.truth);
  if (gain != 1.0) d = {d.translation * gain, detail::fractional(d.rotation, gain)};
  return d;
}

const char* failure_name(Failure f) {
  switch (f) {
    case Failure::None: return "none";
    case Failure::Position: return "position";
    case Failure::Orientation: return "orientation";
    case Failure::Both: return "both";
  }
  return "?";
}

Failure classify(const PoseError& e) {
  const bool pos = e.meters > kSuccessMeters;
  const bool rot = e.radians > kSuccessDegrees * kPi / 180.0;
  if (pos && rot) return Failure::Both;
  if (pos) return Failure::Position;
  if (rot) return Failure::Orientation;
  return Failure::None;
}

ControlResult run_trial(const TrialConfig& cfg, EstimatorBundle& bundle, std::uint64_t seed) {
  synth::Rng rng(seed);
  synth::GenerationConfig gc = cfg.scene;
  gc.objects = cfg.objects;
  synth::Scene scene = synth::Scene::sample(gc, rng);
  const CameraIntrinsics& K = scene.intrinsics();
  const IdealController controller;
  synth::BodyState& body = scene.state(0);

  const RenderResult target = scene.render();
  const Image target_mask = target_mask_of(target);
  const Pose target_pose = body.pose;
  ControlResult res;

  // Perturb while tracking; only estimated deltas drive the return.
  bundle.reset_state();
  Image prev_rgb = target.rgb, prev_mask = target_mask;
  std::vector<long> areas{mask_area(target_mask)};
  std::vector<MotionDelta> estimates;
  for (int t = 1; t <= cfg.perturb_steps; ++t) {
    const Pose before = body.pose;
    scene.step(rng);
    RenderResult r = scene.render();
    const StepTruth truth{before, body.pose, K, target_mask_of(r)};
    track::StepOutput out = track::track_step(bundle, prev_rgb, prev_mask, r.rgb, &truth, areas);
    res.low_confidence_frames += out.low_confidence;
    estimates.push_back(out.delta);
    prev_rgb = std::move(r.rgb);
    prev_mask = std::move(out.mask);
  }
  for (int i = 0; i < scene.num_objects(); ++i) {
    scene.state(i).velocity.setZero();
    scene.state(i).angular_velocity.setZero();
  }

  // Open-loop return in sub-steps of at most 30 degrees.
  const MotionDelta back = accumulate(estimates).inverse();
  const int n = substep_count(back.rotation);
  try {
    for (int i = 0; i < n; ++i) controller.apply(body, substep(back, n), K);
  } catch (const Error&) {
    // Unrealizable command: the object stays where the last valid sub-step left it.
  }
  res.open_loop_error = pose_error(body.pose, target_pose);
  res.success_open_loop = within_success_threshold(res.open_loop_error);
  if (res.success_open_loop) res.iterations_to_success = 0;

  // Corrections. The current mask is segmented from the stored target frame and
  // mask with a fresh state, since the object is expected near its target.
  Image current_mask;
  auto observe = [&]() {
    RenderResult r = scene.render();
    const StepTruth truth{target_pose, body.pose, K, target_mask_of(r)};
    bundle.segmentation->reset();
    Image m;
    try {
      m = bundle.segmentation->step(target.rgb, target_mask, r.rgb, &truth);
    } catch (const EmptyMask&) {
    }
    if (!m.empty() && mask_area(m) > 0) current_mask = std::move(m);
    return std::move(r.rgb);
  };
  Image current_rgb = observe();
  for (int it = 1; it <= cfg.max_corrections; ++it) {
    ++res.corrections_used;
    const StepTruth truth{body.pose, target_pose, K, target_mask};
    try {
      if (current_mask.empty()) throw EmptyMask("no current mask");
      const MotionDelta d =
          correction_iteration({&current_rgb, &current_mask, &target.rgb, &target_mask, &truth}, bundle, cfg.gain);
      controller.apply(body, d, K);
      current_rgb = observe();
    } catch (const Error&) {
      ++res.skipped_corrections;
    }
    const PoseError e = pose_error(body.pose, target_pose);
    res.trace.push_back(e);
    if (res.iterations_to_success < 0 && within_success_threshold(e)) res.iterations_to_success = it;
  }
  res.final_error = res.trace.empty() ? res.open_loop_error : res.trace.back();
  res.success_after_corrections = within_success_threshold(res.final_error);
  res.failure = classify(res.final_error);
  return res;
}

// ---- experiment -------------------------------------------------------------------

ExperimentConfig ExperimentConfig::from_config(const Config& c) {
  ExperimentConfig e;
  e.scene = synth::GenerationConfig::from_config(c);
  e.perturb_steps = c.get_int_list("control.perturb", e.perturb_steps);
  e.settings = c.get_int_list("control.settings", e.settings);
  e.trials = static_cast<int>(c.get_int("control.trials", e.trials));
  e.max_corrections = static_cast<int>(c.get_int("control.max_corrections", e.max_corrections));
  e.gain = c.get_double("control.gain", e.gain);
  e.seed = std::stoull(c.get_string("control.seed", std::to_string(e.seed)));
  e.estimators = c.get_string("control.estimators", e.estimators);
  e.prev_mask_mode = parse_prev_mask_mode(c.get_string("model.prev_mask_mode", "keep-object"));
  for (int t : e.perturb_steps) {
    if (t < 0) throw ConfigError("control.perturb entries must be >= 0");
  }
  for (int s : e.settings) {
    if (s < 1) throw ConfigError("control.settings entries must be >= 1");
  }
  if (e.trials < 1 || e.max_corrections < 0 || !(e.gain > 0.0)) throw ConfigError("invalid control.* configuration");
  return e;
}

void ExperimentConfig::to_config(Config& c) const {
  scene.to_config(c);
  auto join = [](const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
  };
  c.set("control.perturb", join(perturb_steps));
  c.set("control.settings", join(settings));
  c.set("control.trials", trials);
  c.set("control.max_corrections", max_corrections);
  c.set("control.gain", gain);
  c.set("control.seed", std::to_string(seed));
  c.set("control.estimators", estimators);
  c.set("model.prev_mask_mode", std::string(prev_mask_mode_name(prev_mask_mode)));
}

std::string setting_name(int objects) { return objects == 1 ? "No-occ" : objects == 3 ? "Occ" : "objects" + std::to_string(objects); }

Experiment run_control_experiment(const ExperimentConfig& cfg, const CheckpointSet& weights, int workers) {
  make_bundle(cfg.estimators, weights, 0, cfg.prev_mask_mode);  // validate the spec up front
  Experiment ex;
  for (int objects : cfg.settings) {
    for (int T : cfg.perturb_steps) {
      TrialConfig tc;
      tc.objects = objects;
      tc.perturb_steps = T;
      tc.max_corrections = cfg.max_corrections;
      tc.gain = cfg.gain;
      tc.scene = cfg.scene;
      const std::uint64_t cell = synth::sequence_seed(cfg.seed, static_cast<std::uint64_t>(objects) * 100000 + T);
      std::vector<ControlResult> results(cfg.trials);
      std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, workers))
      for (int i = 0; i < cfg.trials; ++i) {
        try {
          const std::uint64_t seed = synth::sequence_seed(cell, i);
          EstimatorBundle b = make_bundle(cfg.estimators, weights, seed ^ 0xc0ffee, cfg.prev_mask_mode);
          results[i] = run_trial(tc, b, seed);
        } catch (...) {
#pragma omp critical
          if (!failure) failure = std::current_exception();
        }
      }
      if (failure) std::rethrow_exception(failure);

      ConvergenceRow row;
      row.setting = setting_name(objects);
      row.perturb_steps = T;
      row.trials = cfg.trials;
      int open = 0, corrected = 0;
      double iters = 0.0;
      for (const auto& r : results) {
        open += r.success_open_loop;
        if (r.success_after_corrections) {
          ++corrected;
          iters += std::max(0, r.iterations_to_success);
        }
        row.fail_position += r.failure == Failure::Position;
        row.fail_orientation += r.failure == Failure::Orientation;
        row.fail_both += r.failure == Failure::Both;
      }
      row.open_loop_rate = static_cast<double>(open) / cfg.trials;
      row.corrected_rate = static_cast<double>(corrected) / cfg.trials;
      row.mean_iterations_to_success = corrected ? iters / corrected : 0.0;
      ex.rows.push_back(row);
      ex.trials.push_back(std::move(results));
    }
  }
  return ex;
}

void write_convergence_table(std::ostream& os, const std::vector<ConvergenceRow>& rows) {
  os << "setting\tT\ttrials\topen_loop_rate\tcorrected_rate\tmean_iterations\tfail_position\tfail_orientation\tfail_both\n";
  os << std::setprecision(6);
  for (const auto& r : rows) {
    os << r.setting << '\t' << r.perturb_steps << '\t' << r.trials << '\t' << r.open_loop_rate << '\t'
       << r.corrected_rate << '\t' << r.mean_iterations_to_success << '\t' << r.fail_position << '\t'
       << r.fail_orientation << '\t' << r.fail_both << '\n';
  }
}

void write_convergence_table(const std::string& path, const std::vector<ConvergenceRow>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  write_convergence_table(os, rows);
  if (!os) throw IoError("short write on " + path);
}

std::vector<ConvergenceRow> read_convergence_table(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(is, line) || line.rfind("setting\tT", 0) != 0) throw IoError(path + ": not a convergence table");
  std::vector<ConvergenceRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    ConvergenceRow r;
    if (!(ls >> r.setting >> r.perturb_steps >> r.trials >> r.open_loop_rate >> r.corrected_rate >>
          r.mean_iterations_to_success >> r.fail_position >> r.fail_orientation >> r.fail_both)) {
      throw IoError(path + ": malformed row");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace motion6d::ctrl
