#include "doctest.h"

#include "motion6d/ctrlloop.hpp"
#include "motion6d/errors.hpp"

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

using namespace motion6d;
using namespace motion6d::ctrl;
namespace fs = std::filesystem;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

TrialConfig small_trial(int objects, int T, int corrections) {
  TrialConfig tc;
  tc.objects = objects;
  tc.perturb_steps = T;
  tc.max_corrections = corrections;
  return tc;
}

// Predicts no motion for the first `blind` calls, then the exact delta.
class LateTranslation final : public TranslationEstimator {
 public:
  explicit LateTranslation(int blind) : blind_(blind) {}
  void reset() override {}
  NonMetricDelta step(const Image&, const Image&, const Image&, const Image&, const StepTruth* t) override {
    return calls_++ < blind_ ? NonMetricDelta{} : translation_delta(t->prev_pose, t->curr_pose, t->intrinsics);
  }

 private:
  int blind_, calls_ = 0;
};

class LateRotation final : public RotationEstimator {
 public:
  explicit LateRotation(int blind) : blind_(blind) {}
  void reset() override {}
  Quaternion step(const Image&, const Image&, const Image&, const Image&, const StepTruth* t) override {
    return calls_++ < blind_ ? Quaternion::identity() : rotation_delta(t->prev_pose, t->curr_pose);
  }

 private:
  int blind_, calls_ = 0;
};

// Under-shoots the true delta and adds a fixed-direction bias plus noise, both
// proportional to the remaining error. Bias and noise live in (vx / fx, vy / fy, vz),
// where the three axes have comparable metric scale.
class BiasedTranslation final : public TranslationEstimator {
 public:
  BiasedTranslation(Vec3 dir, std::uint64_t seed) : dir_(dir.normalized()), rng_(seed) {}
  void reset() override {}
  NonMetricDelta step(const Image&, const Image&, const Image&, const Image&, const StepTruth* t) override {
    const CameraIntrinsics& K = t->intrinsics;
    const NonMetricDelta d = translation_delta(t->prev_pose, t->curr_pose, K);
    const Vec3 w(d.vx / K.fx, d.vy / K.fy, d.vz);
    std::normal_distribution<double> n(0.0, 0.02 * w.norm());
    const Vec3 e = 0.8 * w + 0.1 * w.norm() * dir_ + Vec3(n(rng_), n(rng_), n(rng_));
    return {e.x() * K.fx, e.y() * K.fy, e.z()};
  }

 private:
  Vec3 dir_;
  std::mt19937_64 rng_;
};

class BiasedRotation final : public RotationEstimator {
 public:
  BiasedRotation(Vec3 dir, std::uint64_t seed) : dir_(dir.normalized()), rng_(seed) {}
  void reset() override {}
  Quaternion step(const Image&, const Image&, const Image&, const Image&, const StepTruth* t) override {
    const Quaternion q = rotation_delta(t->prev_pose, t->curr_pose);
    const double angle = geodesic_angle(q, Quaternion::identity());
    std::normal_distribution<double> n(0.0, 0.02 * angle);
    const Vec3 bias = 0.1 * angle * dir_ + Vec3(n(rng_), n(rng_), n(rng_));
    return (detail::from_rotation_vector(bias) * detail::fractional(q, 0.8)).canonical();
  }

 private:
  Vec3 dir_;
  std::mt19937_64 rng_;
};

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("motion6d_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("oracle control succeeds open loop for every perturbation length") {
  for (int T : {0, 30, 60, 90}) {
    EstimatorBundle b = make_bundle("oracle", {}, 0);
    const ControlResult r = run_trial(small_trial(1, T, 2), b, 100 + T);
    INFO("T=" << T);
    CHECK(r.success_open_loop);
    CHECK(r.open_loop_error.meters < 1e-4);
    CHECK(r.open_loop_error.radians < 1e-4);
    CHECK(r.success_after_corrections);
    CHECK(r.final_error.meters < 1e-4);
    CHECK(r.iterations_to_success == 0);
    CHECK(r.skipped_corrections == 0);
    CHECK(r.failure == Failure::None);
  }
  EstimatorBundle b = make_bundle("oracle", {}, 0);
  const ControlResult occ = run_trial(small_trial(3, 30, 1), b, 7);
  CHECK(occ.success_open_loop);
  CHECK(occ.final_error.meters < 1e-4);
}

TEST_CASE("accumulated delta composed with its inverse is the identity") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<MotionDelta> ds;
    for (int i = 0; i < 90; ++i) {
      ds.push_back({{3 * n(rng), 3 * n(rng), 0.01 * n(rng)},
                    detail::from_rotation_vector(Vec3(n(rng), n(rng), n(rng)) * 0.1).canonical()});
    }
    const MotionDelta acc = accumulate(ds);
    const MotionDelta id = compose(acc, acc.inverse());
    CHECK(std::abs(id.translation.vx) < 1e-9);
    CHECK(std::abs(id.translation.vy) < 1e-9);
    CHECK(std::abs(id.translation.vz) < 1e-9);
    CHECK(geodesic_angle(id.rotation, Quaternion::identity()) < 1e-9);
  }
}

TEST_CASE("sub-steps realize the full command") {
  CHECK(substep_count(Quaternion::identity()) == 1);
  CHECK(substep_count(detail::from_rotation_vector(Vec3(0, 0, 30 * kDeg))) == 1);
  CHECK(substep_count(detail::from_rotation_vector(Vec3(0, 0, 31 * kDeg))) == 2);
  CHECK(substep_count(detail::from_rotation_vector(Vec3(0, 175 * kDeg, 0))) == 6);

  const CameraIntrinsics K = CameraIntrinsics::from_vertical_fov(240, 320);
  const MotionDelta d{{20.0, -10.0, 0.2}, detail::from_rotation_vector(Vec3(1.0, 2.0, -0.5)).canonical()};
  const int n = substep_count(d.rotation);
  CHECK(n == 5);
  synth::BodyState a, b;
  a.pose.position = b.pose.position = Vec3(0.1, -0.05, 2.0);
  a.velocity = Vec3(1, 1, 1);
  const IdealController c;
  c.apply(a, d, K);
  for (int i = 0; i < n; ++i) c.apply(b, substep(d, n), K);
  const PoseError e = pose_error(a.pose, b.pose);
  CHECK(e.meters < 1e-12);
  CHECK(e.radians < 1e-9);
  CHECK(a.velocity.norm() == 0.0);
  CHECK(a.angular_velocity.norm() == 0.0);
}

TEST_CASE("controller refuses unrealizable commands") {
  const CameraIntrinsics K = CameraIntrinsics::from_vertical_fov(240, 320);
  synth::BodyState s;
  s.pose.position = Vec3(0, 0, 2);
  const IdealController c;
  CHECK_THROWS_AS(c.apply(s, {{0, 0, 5.0}, Quaternion::identity()}, K), BehindCamera);
  CHECK_THROWS_AS(c.apply(s, {{NAN, 0, 0}, Quaternion::identity()}, K), Error);
  CHECK(s.pose.position.z() == 2.0);
}

TEST_CASE("current equal to target gives a zero command") {
  synth::GenerationConfig g;
  g.frames = 1;
  const synth::SequenceSample s = synth::generate_sequence(g, 3);
  const Image mask = s.mask(0, 0);
  const StepTruth truth{s.poses[0][0], s.poses[0][0], s.intrinsics, mask};
  for (const char* spec : {"oracle", "noisy-oracle:0,0"}) {
    EstimatorBundle b = make_bundle(spec, {}, 1);
    const MotionDelta d = correction_iteration({&s.frames[0], &mask, &s.frames[0], &mask, &truth}, b);
    CHECK(d.translation.vx == 0.0);
    CHECK(d.translation.vy == 0.0);
    CHECK(d.translation.vz == 0.0);
    CHECK(geodesic_angle(d.rotation, Quaternion::identity()) == 0.0);
  }
  EstimatorBundle b = make_bundle("oracle", {}, 1);
  const Image empty(mask.height(), mask.width(), 1);
  CHECK_THROWS_AS(correction_iteration({&s.frames[0], &empty, &s.frames[0], &mask, &truth}, b), EmptyMask);
}

TEST_CASE("exact estimates with unit gain reach the target in one correction") {
  for (int T : {30, 60}) {
    EstimatorBundle b = make_bundle("oracle", {}, 0);
    b.translation = std::make_unique<LateTranslation>(T);
    b.rotation = std::make_unique<LateRotation>(T);
    const ControlResult r = run_trial(small_trial(1, T, 3), b, 40 + T);
    INFO("T=" << T << " open-loop error " << r.open_loop_error.meters);
    CHECK_FALSE(r.success_open_loop);
    CHECK(r.iterations_to_success == 1);
    CHECK(r.trace.front().meters < 1e-4);
    CHECK(r.trace.front().radians < 1e-4);
    CHECK(r.success_after_corrections);
  }
}

TEST_CASE("biased noisy estimates decrease the error monotonically") {
  const CameraIntrinsics K = CameraIntrinsics::from_vertical_fov(240, 320);
  const Image rgb(240, 320, 3);
  Image mask(240, 320, 1);
  mask.at(120, 160) = 1.0f;
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(1.0, 3.0);
  const IdealController c;
  for (int trial = 0; trial < 100; ++trial) {
    Pose target;
    target.position = Vec3(0.2 * n(rng), 0.2 * n(rng), u(rng));
    target.orientation = detail::from_rotation_vector(Vec3(n(rng), n(rng), n(rng))).canonical();
    synth::BodyState body;
    body.pose.position = target.position + Vec3(0.1 * n(rng), 0.1 * n(rng), 0.2 * n(rng));
    body.pose.orientation =
        (detail::from_rotation_vector(Vec3(n(rng), n(rng), n(rng)) * 0.5) * target.orientation).canonical();

    EstimatorBundle b = make_bundle("oracle", {}, 0);
    b.translation = std::make_unique<BiasedTranslation>(Vec3(n(rng), n(rng), n(rng)), trial);
    b.rotation = std::make_unique<BiasedRotation>(Vec3(n(rng), n(rng), n(rng)), trial + 1000);
    PoseError prev = pose_error(body.pose, target);
    for (int it = 0; it < 15; ++it) {
      const StepTruth truth{body.pose, target, K, mask};
      c.apply(body, correction_iteration({&rgb, &mask, &rgb, &mask, &truth}, b), K);
      const PoseError e = pose_error(body.pose, target);
      CHECK(e.meters <= prev.meters + 1e-12);
      CHECK(e.radians <= prev.radians + 1e-7);  // acos round-off near zero
      if (prev.meters > 1e-9) CHECK(e.meters < prev.meters);
      if (prev.radians > 1e-6) CHECK(e.radians < prev.radians);
      prev = e;
    }
    CHECK(within_success_threshold(prev));
  }
}

TEST_CASE("failure taxonomy") {
  CHECK(classify({0.01, 1 * kDeg}) == Failure::None);
  CHECK(classify({0.06, 1 * kDeg}) == Failure::Position);
  CHECK(classify({0.01, 6 * kDeg}) == Failure::Orientation);
  CHECK(classify({0.06, 6 * kDeg}) == Failure::Both);
  CHECK(classify({0.05, 5 * kDeg}) == Failure::None);
  CHECK(std::string(failure_name(Failure::Both)) == "both");
}

TEST_CASE("experiment grid, configuration and table round trip") {
  ExperimentConfig cfg;
  cfg.perturb_steps = {0, 5};
  cfg.settings = {1, 3};
  cfg.trials = 2;
  cfg.max_corrections = 1;
  cfg.estimators = "oracle";
  const Experiment ex = run_control_experiment(cfg, {}, 2);
  REQUIRE(ex.rows.size() == 4);
  CHECK(ex.rows[0].setting == "No-occ");
  CHECK(ex.rows[3].setting == "Occ");
  CHECK(ex.rows[3].perturb_steps == 5);
  for (const auto& row : ex.rows) {
    CHECK(row.open_loop_rate == 1.0);
    CHECK(row.corrected_rate == 1.0);
  }
  const Experiment again = run_control_experiment(cfg, {}, 1);
  CHECK(again.trials[3][1].final_error.meters == ex.trials[3][1].final_error.meters);

  Config c;
  cfg.to_config(c);
  const ExperimentConfig back = ExperimentConfig::from_config(c);
  CHECK(back.perturb_steps == cfg.perturb_steps);
  CHECK(back.settings == cfg.settings);
  CHECK(back.trials == 2);
  CHECK(back.estimators == "oracle");
  c.set("control.gain", 0.0);
  CHECK_THROWS_AS(ExperimentConfig::from_config(c), ConfigError);

  TempDir dir("conv");
  const std::string path = (dir.path / "c.tsv").string();
  write_convergence_table(path, ex.rows);
  const auto rows = read_convergence_table(path);
  REQUIRE(rows.size() == 4);
  CHECK(rows[2].setting == "Occ");
  CHECK(rows[2].corrected_rate == 1.0);
  CHECK(rows[1].perturb_steps == 5);
}
