#include "doctest.h"

#include "motion6d/errors.hpp"
#include "motion6d/estimators.hpp"
#include "motion6d/synthgen.hpp"

#include <cmath>
#include <numbers>

using namespace motion6d;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

const synth::SequenceSample& sequence() {
  static const synth::SequenceSample s = [] {
    synth::GenerationConfig g;
    g.frames = 6;
    return synth::generate_sequence(g, 2718);
  }();
  return s;
}

StepTruth truth_at(const synth::SequenceSample& s, int t) {
  return {s.poses[t - 1][0], s.poses[t][0], s.intrinsics, s.mask(t, 0)};
}

CheckpointSet random_weights() {
  CheckpointSet w;
  w.segmentation.emplace();
  w.segmentation->init(1);
  w.translation.emplace("trans");
  w.translation->init(2);
  w.rotation.emplace("rot");
  w.rotation->init(3);
  return w;
}

struct StepOut {
  Image mask;
  NonMetricDelta d;
  Quaternion q;
};

std::vector<StepOut> run_bundle(EstimatorBundle& b, const synth::SequenceSample& s) {
  std::vector<StepOut> out;
  Image prev = s.mask(0, 0);
  for (int t = 1; t < s.length(); ++t) {
    const StepTruth tr = truth_at(s, t);
    const Image curr = b.segmentation->step(s.frames[t - 1], prev, s.frames[t], &tr);
    out.push_back({curr, b.translation->step(s.frames[t - 1], prev, s.frames[t], curr, &tr),
                   b.rotation->step(s.frames[t - 1], prev, s.frames[t], curr, &tr)});
    prev = curr;
  }
  return out;
}

}  // namespace

TEST_CASE("segmentation input masks the previous frame") {
  Image rgb(8, 8, 3, 0.5f), curr(8, 8, 3, 0.25f), mask(8, 8, 1);
  for (int r = 2; r < 6; ++r)
    for (int c = 2; c < 6; ++c) mask.at(r, c) = 1.0f;
  const CropSpec identity{3.5, 3.5, 8.0, 8.0, 8};
  const Image keep = segmentation_input(rgb, mask, curr, identity, PrevMaskMode::KeepObject);
  const Image blank = segmentation_input(rgb, mask, curr, identity, PrevMaskMode::KeepBackground);
  REQUIRE(keep.channels() == 7);
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) {
      const float m = mask.at(r, c);
      CHECK(keep.at(r, c, 0) == doctest::Approx(0.5f * m));
      CHECK(blank.at(r, c, 0) == doctest::Approx(0.5f * (1 - m)));
      CHECK(keep.at(r, c, 3) == doctest::Approx(m));
      CHECK(keep.at(r, c, 6) == doctest::Approx(0.25f));
    }
  }
}

TEST_CASE("pack_images writes channel planes per sample") {
  Image a(2, 3, 2), b(2, 3, 2);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < 2; ++k) a.at(r, c, k) = static_cast<float>(100 * k + 10 * r + c), b.at(r, c, k) = -a.at(r, c, k);
  nn::Tensor t;
  pack_images({&a, &b}, t);
  CHECK(t.shape() == nn::Shape{2, 2, 2, 3});
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < 2; ++k) {
        CHECK(t.at(0, k, r, c) == a.at(r, c, k));
        CHECK(t.at(1, k, r, c) == b.at(r, c, k));
      }
  Image wrong(3, 3, 2);
  CHECK_THROWS_AS(pack_images({&a, &wrong}, t), Error);
}

TEST_CASE("translation output scaling inverts") {
  const NonMetricDelta d{1.5, -2.0, 0.004};
  float out[3];
  translation_to_target(d, out);
  CHECK(out[2] == doctest::Approx(0.004 * kDepthOutputScale));
  const NonMetricDelta back = translation_from_output(out);
  CHECK(back.vx == doctest::Approx(d.vx));
  CHECK(back.vy == doctest::Approx(d.vy));
  CHECK(back.vz == doctest::Approx(d.vz).epsilon(1e-6));
}

TEST_CASE("untrained networks honour the output contracts") {
  const auto& s = sequence();
  const CheckpointSet w = random_weights();
  EstimatorBundle b = make_bundle("neural", w, 0);
  const auto out = run_bundle(b, s);
  REQUIRE(out.size() == static_cast<std::size_t>(s.length() - 1));
  for (const auto& o : out) {
    CHECK(o.mask.height() == 240);
    CHECK(o.mask.width() == 320);
    CHECK(o.mask.channels() == 1);
    for (float v : o.mask.data()) REQUIRE((v >= 0.0f && v <= 1.0f));
    CHECK(std::isfinite(o.d.vx));
    CHECK(std::isfinite(o.d.vy));
    CHECK(std::isfinite(o.d.vz));
    CHECK(o.q.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(o.q.w > 0.0);
  }
}

TEST_CASE("rotation outputs stay on the unit hemisphere for random weights") {
  const auto& s = sequence();
  const Image m0 = s.mask(0, 0), m1 = s.mask(1, 0);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    nn::MotionBackbone net("rot");
    net.init(seed, 10.0f);  // large head gain: outputs far from identity
    NeuralRotation est(net);
    for (int k = 0; k < 3; ++k) {
      const Quaternion q = est.step(s.frames[0], m0, s.frames[1], m1, nullptr);
      CHECK(q.norm() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(q.w > 0.0);
    }
  }
}

TEST_CASE("neural estimators reject empty previous masks") {
  const auto& s = sequence();
  const CheckpointSet w = random_weights();
  EstimatorBundle b = make_bundle("neural", w, 0);
  const Image empty(240, 320, 1);
  CHECK_THROWS_AS(b.segmentation->step(s.frames[0], empty, s.frames[1], nullptr), EmptyMask);
  CHECK_THROWS_AS(b.translation->step(s.frames[0], empty, s.frames[1], s.mask(1, 0), nullptr), EmptyMask);
  CHECK_THROWS_AS(b.rotation->step(s.frames[0], empty, s.frames[1], s.mask(1, 0), nullptr), EmptyMask);
  OracleSegmentation oracle;
  const StepTruth tr = truth_at(s, 1);
  CHECK_THROWS_AS(oracle.step(s.frames[0], empty, s.frames[1], &tr), EmptyMask);
}

TEST_CASE("oracle bundle returns ground truth exactly") {
  const auto& s = sequence();
  EstimatorBundle b = make_bundle("oracle", {}, 0);
  CHECK(b.needs_truth());
  const auto out = run_bundle(b, s);
  for (int t = 1; t < s.length(); ++t) {
    const auto& o = out[t - 1];
    CHECK(o.mask == s.mask(t, 0));
    const NonMetricDelta d = translation_delta(s.poses[t - 1][0], s.poses[t][0], s.intrinsics);
    CHECK(o.d.vx == d.vx);
    CHECK(o.d.vy == d.vy);
    CHECK(o.d.vz == d.vz);
    CHECK(geodesic_angle(o.q, rotation_delta(s.poses[t - 1][0], s.poses[t][0])) == 0.0);
  }
  // Identical frames and poses: zero motion.
  const StepTruth still{s.poses[0][0], s.poses[0][0], s.intrinsics, s.mask(0, 0)};
  const NonMetricDelta z = b.translation->step(s.frames[0], s.mask(0, 0), s.frames[0], s.mask(0, 0), &still);
  CHECK(z.vx == 0.0);
  CHECK(z.vy == 0.0);
  CHECK(z.vz == 0.0);
  const Quaternion q = b.rotation->step(s.frames[0], s.mask(0, 0), s.frames[0], s.mask(0, 0), &still);
  CHECK(geodesic_angle(q, Quaternion::identity()) == 0.0);
  CHECK_THROWS_AS(b.rotation->step(s.frames[0], s.mask(0, 0), s.frames[0], s.mask(0, 0), nullptr), Error);
}

TEST_CASE("noisy oracle spread matches the configured sigma within 10%") {
  const auto& s = sequence();
  const StepTruth tr = truth_at(s, 1);
  const NonMetricDelta gt = translation_delta(tr.prev_pose, tr.curr_pose, tr.intrinsics);
  const Quaternion gq = rotation_delta(tr.prev_pose, tr.curr_pose);
  const double sigma_px = 2.0, sigma_deg = 3.0;
  NoisyOracleTranslation nt(sigma_px, 7);
  NoisyOracleRotation nr(sigma_deg, 8);
  const int n = 10000;
  double sx = 0, sy = 0, sz = 0, sa = 0;
  for (int i = 0; i < n; ++i) {
    const NonMetricDelta d = nt.step(s.frames[0], tr.curr_mask, s.frames[1], tr.curr_mask, &tr);
    sx += (d.vx - gt.vx) * (d.vx - gt.vx);
    sy += (d.vy - gt.vy) * (d.vy - gt.vy);
    sz += (d.vz - gt.vz) * (d.vz - gt.vz);
    const double a = geodesic_angle(nr.step(s.frames[0], tr.curr_mask, s.frames[1], tr.curr_mask, &tr), gq);
    sa += a * a;
  }
  CHECK(std::sqrt(sx / n) == doctest::Approx(sigma_px).epsilon(0.1));
  CHECK(std::sqrt(sy / n) == doctest::Approx(sigma_px).epsilon(0.1));
  CHECK(std::sqrt(sz / n) == doctest::Approx(sigma_px / s.intrinsics.fx).epsilon(0.1));
  // The perturbation angle is N(0, sigma) about a random axis, so its RMS is sigma.
  CHECK(std::sqrt(sa / n) == doctest::Approx(sigma_deg * kDeg).epsilon(0.1));
}

TEST_CASE("reset makes neural runs repeatable and the state matters") {
  const auto& s = sequence();
  const CheckpointSet w = random_weights();
  EstimatorBundle b = make_bundle("neural", w, 0);
  const auto first = run_bundle(b, s);
  b.reset_state();
  const auto second = run_bundle(b, s);
  for (std::size_t i = 0; i < first.size(); ++i) {
    CHECK(first[i].mask == second[i].mask);
    CHECK(first[i].d.vx == second[i].d.vx);
    CHECK(first[i].q.x == second[i].q.x);
  }

  // The same input at step 1 and after several steps gives different outputs.
  NeuralTranslation est(*w.translation);
  const Image m0 = s.mask(0, 0), m1 = s.mask(1, 0);
  const NonMetricDelta fresh = est.step(s.frames[0], m0, s.frames[1], m1, nullptr);
  NonMetricDelta later{};
  for (int k = 0; k < 4; ++k) later = est.step(s.frames[0], m0, s.frames[1], m1, nullptr);
  CHECK(std::abs(fresh.vx - later.vx) + std::abs(fresh.vy - later.vy) + std::abs(fresh.vz - later.vz) > 1e-6);
}

TEST_CASE("interleaved bundles are isolated") {
  synth::GenerationConfig g;
  g.frames = 5;
  const synth::SequenceSample a = synth::generate_sequence(g, 11), c = synth::generate_sequence(g, 12);
  const CheckpointSet w = random_weights();
  EstimatorBundle ba = make_bundle("neural+gtmask", w, 0), bc = make_bundle("neural+gtmask", w, 0);
  const auto solo_a = run_bundle(ba, a);
  const auto solo_c = run_bundle(bc, c);
  ba.reset_state();
  bc.reset_state();
  for (int t = 1; t < a.length(); ++t) {
    for (auto [b, s, solo] : {std::tuple{&ba, &a, &solo_a}, std::tuple{&bc, &c, &solo_c}}) {
      const StepTruth tr = truth_at(*s, t);
      const Image prev = s->mask(t - 1, 0);
      const Image curr = b->segmentation->step(s->frames[t - 1], prev, s->frames[t], &tr);
      const NonMetricDelta d = b->translation->step(s->frames[t - 1], prev, s->frames[t], curr, &tr);
      const Quaternion q = b->rotation->step(s->frames[t - 1], prev, s->frames[t], curr, &tr);
      CHECK(d.vx == (*solo)[t - 1].d.vx);
      CHECK(d.vz == (*solo)[t - 1].d.vz);
      CHECK(q.y == (*solo)[t - 1].q.y);
    }
  }
}

TEST_CASE("bundle specs") {
  const CheckpointSet w = random_weights();
  CHECK_FALSE(make_bundle("neural", w, 0).needs_truth());
  CHECK(make_bundle("neural+gtmask", w, 0).needs_truth());
  CHECK(make_bundle("noisy-oracle:1,2.5", {}, 0).description == "noisy-oracle:1,2.5");
  CHECK_THROWS_AS(make_bundle("neural", {}, 0), ConfigError);
  CHECK_THROWS_AS(make_bundle("noisy-oracle:1", {}, 0), ConfigError);
  CHECK_THROWS_AS(make_bundle("noisy-oracle:-1,2", {}, 0), ConfigError);
  CHECK_THROWS_AS(make_bundle("oracle+foo", {}, 0), ConfigError);
  CHECK_THROWS_AS(make_bundle("magic", {}, 0), ConfigError);
}
