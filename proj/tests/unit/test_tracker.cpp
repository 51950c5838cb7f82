#include "doctest.h"

#include "motion6d/errors.hpp"
#include "motion6d/tracker.hpp"

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

using namespace motion6d;
using namespace motion6d::track;
namespace fs = std::filesystem;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

const synth::SequenceSample& long_sequence() {
  static const synth::SequenceSample s = [] {
    synth::GenerationConfig g;
    g.frames = 101;
    return synth::generate_sequence(g, 99);
  }();
  return s;
}

// Ground-truth segmentation that returns a tiny or empty mask at chosen frames.
class FlakySegmentation final : public SegmentationEstimator {
 public:
  explicit FlakySegmentation(std::vector<int> empty_at, std::vector<int> tiny_at)
      : empty_at_(std::move(empty_at)), tiny_at_(std::move(tiny_at)) {}
  void reset() override { t_ = 0; }
  Image step(const Image&, const Image& prev_mask, const Image&, const StepTruth* truth) override {
    mask_stats(prev_mask);
    ++t_;
    Image m = truth->curr_mask;
    if (std::find(empty_at_.begin(), empty_at_.end(), t_) != empty_at_.end()) return Image(m.height(), m.width(), 1);
    if (std::find(tiny_at_.begin(), tiny_at_.end(), t_) != tiny_at_.end()) {
      const MaskStats st = mask_stats(m);
      Image tiny(m.height(), m.width(), 1);
      tiny.at(static_cast<int>(st.centroid_row), static_cast<int>(st.centroid_col)) = 1.0f;
      return tiny;
    }
    return m;
  }
  bool uses_truth() const override { return true; }

 private:
  std::vector<int> empty_at_, tiny_at_;
  int t_ = 0;
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

TEST_CASE("oracle tracking is exact over 100 frames") {
  const auto& s = long_sequence();
  EstimatorBundle b = make_bundle("oracle", {}, 0);
  const TrackResult r = track_sequence(s, 0, b, s.poses[0][0]);
  REQUIRE(r.trajectory.size() == 101);
  REQUIRE(r.report.frames() == 100);
  for (int t = 0; t < 101; ++t) {
    const PoseError e = pose_error(r.trajectory[t], s.poses[t][0]);
    REQUIRE(e.meters < 1e-5);
    REQUIRE(e.radians < 1e-5);
  }
  for (double v : r.report.at("int_trans_cm")) CHECK(v < 1e-3);
  for (double v : r.report.at("step_rot_deg")) CHECK(v < 1e-5 / kDeg);
  for (double v : r.report.at("iou")) CHECK(v == 1.0);
}

TEST_CASE("noisy rotation oracle drifts like a random walk") {
  // Composition of 100 rotations of N(0, 1 deg) about uniform axes: the rotation
  // vector has per-axis std 1 deg * sqrt(100 / 3), so the mean angle is about 9.2 deg.
  const auto& s = long_sequence();
  double sum = 0.0;
  const int trials = 100;
  for (int i = 0; i < trials; ++i) {
    EstimatorBundle b = make_bundle("noisy-oracle:0,1", {}, 1000 + i);
    const TrackResult r = track_sequence(s, 0, b, s.poses[0][0]);
    sum += r.report.at("int_rot_deg").back();
    CHECK(r.report.at("int_trans_cm").back() < 1e-3);
  }
  const double mean = sum / trials;
  INFO("mean frame-100 drift " << mean);
  CHECK(mean >= 5.0);
  CHECK(mean <= 15.0);
}

TEST_CASE("integrated errors equal brute-force composition of the deltas") {
  synth::GenerationConfig g;
  g.frames = 12;
  for (int k = 0; k < 10; ++k) {
    const synth::SequenceSample s = synth::generate_sequence(g, 500 + k);
    EstimatorBundle b = make_bundle("noisy-oracle:2,3", {}, k);
    const TrackResult r = track_sequence(s, 0, b, s.poses[0][0]);
    Pose brute = s.poses[0][0];
    for (int t = 1; t < s.length(); ++t) {
      brute = integrate_delta(brute, r.deltas[t - 1], s.intrinsics);
      const PoseError e = pose_error(brute, r.trajectory[t]);
      CHECK(e.meters < 1e-9);
      CHECK(e.radians < 1e-7);
      const PoseError gt = pose_error(brute, s.poses[t][0]);
      CHECK(r.report.at("int_trans_cm")[t - 1] == doctest::Approx(gt.meters * 100).epsilon(1e-6));
      CHECK(r.report.at("int_rot_deg")[t - 1] == doctest::Approx(gt.radians / kDeg).epsilon(1e-6));
    }
  }
}

TEST_CASE("single-step errors do not depend on the anchor") {
  synth::GenerationConfig g;
  g.frames = 10;
  const synth::SequenceSample s = synth::generate_sequence(g, 8);
  EstimatorBundle a = make_bundle("noisy-oracle:1,1", {}, 3), b = make_bundle("noisy-oracle:1,1", {}, 3);
  const TrackResult anchored = track_sequence(s, 0, a, s.poses[0][0]);
  const TrackResult relative = track_sequence(s, 0, b, std::nullopt);
  for (const char* m : kStepMetrics) CHECK(anchored.report.at(m) == relative.report.at(m));
  CHECK(relative.report.series.count("int_trans_cm") == 0);
  CHECK(relative.trajectory.front().position.isApprox(Vec3(0, 0, 1)));
}

TEST_CASE("empty and tiny masks raise the low-confidence flag without aborting") {
  synth::GenerationConfig g;
  g.frames = 10;
  const synth::SequenceSample s = synth::generate_sequence(g, 21);
  EstimatorBundle b = make_bundle("oracle", {}, 0);
  b.segmentation = std::make_unique<FlakySegmentation>(std::vector<int>{3}, std::vector<int>{6});
  const TrackResult r = track_sequence(s, 0, b, s.poses[0][0]);
  REQUIRE(r.report.frames() == 9);
  for (int t = 1; t <= 9; ++t) CHECK(r.report.low_confidence[t - 1] == (t == 3 || t == 6));
  // Frame 3 reused the frame-2 mask.
  CHECK(r.masks[3] == r.masks[2]);
  CHECK(mask_area(r.masks[6]) == 1);
}

TEST_CASE("static baseline") {
  synth::GenerationConfig g;
  g.frames = 31;
  SUBCASE("a static object has zero error") {
    synth::SequenceSample s = synth::generate_sequence(g, 4);
    for (auto& p : s.poses) p = s.poses[0];
    const TrackReport r = baseline_static(s, 0);
    for (const char* m : kStepMetrics) {
      for (double v : r.at(m)) CHECK(v == 0.0);
    }
  }
  SUBCASE("average motion gives about 1.67 cm and 6 degrees per frame") {
    double trans = 0.0, rot = 0.0;
    const int n = 40;
    for (int k = 0; k < n; ++k) {
      const TrackReport r = baseline_static(synth::generate_sequence(g, 7000 + k), 0);
      trans += r.mean("step_trans_cm", 1, 30);
      rot += r.mean("step_rot_deg", 1, 30);
    }
    INFO("trans " << trans / n << " rot " << rot / n);
    CHECK(trans / n == doctest::Approx(50.0 / 30.0).epsilon(0.2));
    CHECK(rot / n == doctest::Approx(6.0).epsilon(0.2));
  }
}

TEST_CASE("aggregation and curve tables") {
  TrackReport a, b;
  a.series["m"] = {1.0, 2.0};
  b.series["m"] = {3.0, 2.0};
  const auto rows = aggregate({a, b}, "cfg");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].frame == 1);
  CHECK(rows[0].mean == 2.0);
  CHECK(rows[0].stderr_ == doctest::Approx(1.0));  // sd sqrt(2) over sqrt(2)
  CHECK(rows[1].stderr_ == 0.0);

  std::ostringstream os;
  write_curve_table(os, rows);
  CHECK(os.str().rfind("frame\tmetric\tmean\tstderr\tconfig\n", 0) == 0);

  TempDir dir("curves");
  const std::string path = (dir.path / "c.tsv").string();
  write_curve_table(path, rows);
  const auto back = read_curve_table(path);
  REQUIRE(back.size() == 2);
  CHECK(back[1].metric == "m");
  CHECK(back[1].config == "cfg");
  CHECK(back[0].mean == 2.0);
  CHECK(config_label("neural", "multi") == "pred-multi");
  CHECK(config_label("neural+gtmask", "single") == "gtmask-single");
}

TEST_CASE("split evaluation with the oracle is near zero and deterministic") {
  TempDir dir("split");
  synth::GenerationConfig g;
  g.count = 2;
  g.objects = 3;
  g.frames = 8;
  synth::generate_dataset(g, dir.path.string(), 1);
  const synth::Dataset ds = synth::Dataset::open(dir.path.string());
  const SplitEvaluation ev = evaluate_split(ds, "multi", "oracle", {}, -1, 2);
  CHECK(ev.reports.size() == 6);
  CHECK(ev.config == "oracle-multi");
  for (const auto& row : ev.rows) {
    if (row.metric.rfind("int_", 0) == 0 || row.metric.rfind("step_", 0) == 0) CHECK(row.mean < 1e-3);
  }
  const SplitEvaluation again = evaluate_split(ds, "multi", "noisy-oracle:1,1", {}, 4, 1);
  const SplitEvaluation twice = evaluate_split(ds, "multi", "noisy-oracle:1,1", {}, 4, 2);
  REQUIRE(again.rows.size() == twice.rows.size());
  for (std::size_t i = 0; i < again.rows.size(); ++i) CHECK(again.rows[i].mean == twice.rows[i].mean);
}

TEST_CASE("neural tracking is deterministic for fixed weights") {
  synth::GenerationConfig g;
  g.frames = 5;
  const synth::SequenceSample s = synth::generate_sequence(g, 3);
  CheckpointSet w;
  w.segmentation.emplace();
  w.segmentation->init(1);
  w.translation.emplace("trans");
  w.translation->init(2);
  w.rotation.emplace("rot");
  w.rotation->init(3);
  EstimatorBundle a = make_bundle("neural", w, 0), b = make_bundle("neural", w, 0);
  const TrackResult ra = track_sequence(s, 0, a, s.poses[0][0]);
  const TrackResult rb = track_sequence(s, 0, b, s.poses[0][0]);
  CHECK(ra.report.series == rb.report.series);
}
