#include "doctest.h"

#include "motion6d/cropkit.hpp"
#include "motion6d/errors.hpp"
#include "motion6d/nn/optim.hpp"
#include "motion6d/trainkit.hpp"

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>

using namespace motion6d;
using namespace motion6d::train;
namespace fs = std::filesystem;

namespace {

double rel_err(double a, double b) { return std::abs(a - b) / std::max({1e-6, std::abs(a), std::abs(b)}); }

Quaternion random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  return Quaternion{n(rng), n(rng), n(rng), n(rng)}.versor();
}

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

TEST_CASE("segmentation loss reference values") {
  const std::vector<double> half(10, 0.5), ones(10, 1.0), zeros(10, 0.0);
  CHECK(seg_loss(half, ones) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(seg_loss(half, zeros) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  // Saturated wrong predictions hit the clamp instead of infinity.
  CHECK(seg_loss(zeros, ones) == doctest::Approx(-std::log(1e-7)).epsilon(1e-9));
  CHECK(seg_loss(ones, ones) == doctest::Approx(-std::log(1.0 - 1e-7)).epsilon(1e-6));

  const std::vector<float> z(10, 0.0f), y(10, 1.0f);
  CHECK(seg_loss_logits(z, y) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("logit form agrees with the probability form") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-6.0, 6.0), t(0.0, 1.0);
  std::vector<float> z(200), y(200);
  std::vector<double> p(200), yd(200);
  for (int i = 0; i < 200; ++i) {
    z[i] = static_cast<float>(u(rng));
    y[i] = static_cast<float>(t(rng));
    p[i] = 1.0 / (1.0 + std::exp(-static_cast<double>(z[i])));
    yd[i] = y[i];
  }
  std::vector<float> gz(200);
  std::vector<double> gp(200);
  CHECK(seg_loss_logits(z, y, gz) == doctest::Approx(seg_loss(p, yd, gp)).epsilon(1e-9));
  // Chain rule: dL/dz = dL/dp * p (1 - p).
  for (int i = 0; i < 200; ++i) CHECK(gz[i] == doctest::Approx(gp[i] * p[i] * (1 - p[i])).epsilon(1e-5));
}

TEST_CASE("translation loss reference values") {
  CHECK(trans_loss({1, 0, 0}, {0, 0, 0}) == doctest::Approx(1.0 / 3.0));
  CHECK(trans_loss({1, 1, 1}, {0, 0, 0}) == doctest::Approx(1.0));
  CHECK(trans_loss({2, -1, 0.5}, {2, -1, 0.5}) == 0.0);
}

TEST_CASE("rotation loss is zero for q and -q and the angle otherwise") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const Quaternion q = random_unit(rng);
    // The clamp caps the loss floor at 2 acos(1 - 1e-7) ~ 9e-4 rad.
    CHECK(rot_loss(q, q) < 1e-3);
    CHECK(rot_loss(-q, q) < 1e-3);
    const Quaternion r = random_unit(rng);
    CHECK(rot_loss(r, q) == doctest::Approx(geodesic_angle(r, q)).epsilon(1e-6));
  }
  const Quaternion quarter{std::cos(std::numbers::pi / 4), std::sin(std::numbers::pi / 4), 0, 0};
  CHECK(rot_loss(quarter, Quaternion::identity()) == doctest::Approx(std::numbers::pi / 2));
}

TEST_CASE("analytic loss gradients match central differences") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> n;
  std::uniform_real_distribution<double> u01(0.05, 0.95);
  const double h = 1e-4;
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    // seg_loss
    std::vector<double> p(8), y(8), g(8);
    for (int i = 0; i < 8; ++i) p[i] = u01(rng), y[i] = u01(rng);
    seg_loss(p, y, g);
    for (int i = 0; i < 8; ++i) {
      auto q = p;
      q[i] += h;
      const double up = seg_loss(q, y);
      q[i] -= 2 * h;
      const double dn = seg_loss(q, y);
      CHECK(rel_err(g[i], (up - dn) / (2 * h)) < 1e-3);
    }

    // trans_loss
    const std::array<double, 3> a{n(rng), n(rng), n(rng)}, b{n(rng), n(rng), n(rng)};
    std::array<double, 3> ga{};
    trans_loss(a, b, &ga);
    for (int k = 0; k < 3; ++k) {
      auto ap = a, am = a;
      ap[k] += h;
      am[k] -= h;
      CHECK(rel_err(ga[k], (trans_loss(ap, b) - trans_loss(am, b)) / (2 * h)) < 1e-3);
    }

    // rot_loss through the gnomonic parametrisation; keep away from the clamp.
    const Quaternion gt = random_unit(rng);
    std::array<double, 3> gv{0.5 * n(rng), 0.5 * n(rng), 0.5 * n(rng)};
    if (rot_loss(gnomonic_unproject({gv[0], gv[1], gv[2]}), gt) < 1e-2) continue;
    std::array<double, 3> gg{};
    rot_loss_gnomonic(gv, gt, &gg);
    for (int k = 0; k < 3; ++k) {
      auto vp = gv, vm = gv;
      vp[k] += h;
      vm[k] -= h;
      CHECK(rel_err(gg[k], (rot_loss_gnomonic(vp, gt) - rot_loss_gnomonic(vm, gt)) / (2 * h)) < 1e-3);
    }
    ++checked;
  }
  CHECK(checked > 90);
}

TEST_CASE("rotation gradient vanishes at the clamp") {
  std::array<double, 4> g{1, 1, 1, 1};
  rot_loss(Quaternion::identity(), Quaternion::identity(), &g);
  for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("learning rate schedule") {
  TrainConfig cfg;
  CHECK(learning_rate(cfg, 1) == doctest::Approx(2e-4));
  CHECK(learning_rate(cfg, 6) == doctest::Approx(2e-4));
  CHECK(learning_rate(cfg, 7) == doctest::Approx(5e-5));
  CHECK(learning_rate(cfg, 12) == doctest::Approx(5e-5));
  CHECK(learning_rate(cfg, 13) == doctest::Approx(1.25e-5));
  CHECK(learning_rate(cfg, 14) == doctest::Approx(1.25e-5));
}

TEST_CASE("curriculum probability is zero early and rises monotonically") {
  TrainConfig cfg;
  for (int e = 1; e <= cfg.curriculum_hold; ++e) CHECK(curriculum_probability(cfg, e) == 0.0);
  double last = 0.0;
  for (int e = 1; e <= cfg.epochs; ++e) {
    const double p = curriculum_probability(cfg, e);
    CHECK(p >= last);
    CHECK(p <= cfg.curriculum_max);
    last = p;
  }
  CHECK(curriculum_probability(cfg, cfg.epochs) == doctest::Approx(cfg.curriculum_max));
}

TEST_CASE("train config round trips and validates") {
  TrainConfig t;
  t.epochs = 3;
  t.lr = 1e-3;
  t.seed = 99;
  t.prev_mask_mode = PrevMaskMode::KeepBackground;
  t.seg_self_feed = false;
  Config c;
  t.to_config(c);
  const TrainConfig back = TrainConfig::from_config(c);
  CHECK(back.epochs == 3);
  CHECK(back.lr == 1e-3);
  CHECK(back.seed == 99);
  CHECK(back.prev_mask_mode == PrevMaskMode::KeepBackground);
  CHECK_FALSE(back.seg_self_feed);
  c.set("train.seg_mask_jitter", -1);
  CHECK_THROWS_AS(TrainConfig::from_config(c), ConfigError);
  c.set("train.seg_mask_jitter", 2);
  c.set("train.reverse_prob", std::string("1.5"));
  CHECK_THROWS_AS(TrainConfig::from_config(c), ConfigError);
}

TEST_CASE("sequence reversal is an involution that inverts every delta") {
  synth::GenerationConfig g;
  g.frames = 8;
  const synth::SequenceSample orig = synth::generate_sequence(g, 31);
  synth::SequenceSample rev = orig;
  reverse_sequence(rev);
  const int T = orig.length();
  for (int t = 0; t + 1 < T; ++t) {
    const Pose& a = orig.poses[t][0];
    const Pose& b = orig.poses[t + 1][0];
    const Pose& ra = rev.poses[T - 2 - t][0];
    const Pose& rb = rev.poses[T - 1 - t][0];
    const NonMetricDelta fwd = translation_delta(a, b, orig.intrinsics);
    const NonMetricDelta bwd = translation_delta(ra, rb, orig.intrinsics);
    CHECK(bwd.vx == doctest::Approx(-fwd.vx).epsilon(1e-9));
    CHECK(bwd.vy == doctest::Approx(-fwd.vy).epsilon(1e-9));
    CHECK(bwd.vz == doctest::Approx(-fwd.vz).epsilon(1e-9));
    CHECK(geodesic_angle(rotation_delta(ra, rb) * rotation_delta(a, b), Quaternion::identity()) < 1e-7);
  }
  reverse_sequence(rev);
  for (int t = 0; t < T; ++t) {
    CHECK(rev.frames[t] == orig.frames[t]);
    CHECK(rev.labels[t].labels == orig.labels[t].labels);
    CHECK(rev.poses[t][0].position == orig.poses[t][0].position);
  }
}

TEST_CASE("mask shift moves the centroid by the shift and round trips in the interior") {
  Image m(20, 30, 1);
  for (int r = 8; r < 12; ++r)
    for (int c = 10; c < 15; ++c) m.at(r, c) = 1.0f;
  const MaskStats before = mask_stats(m);
  const Image moved = shift_image(m, 3, -4);
  const MaskStats after = mask_stats(moved);
  CHECK(after.pixel_count == before.pixel_count);
  CHECK(after.centroid_row == doctest::Approx(before.centroid_row + 3));
  CHECK(after.centroid_col == doctest::Approx(before.centroid_col - 4));
  CHECK(shift_image(moved, -3, 4) == m);
  CHECK(shift_image(m, 0, 0) == m);
  CHECK(mask_area(shift_image(m, 0, 30)) == 0);
}

TEST_CASE("rgb noise stays in range and leaves masks and poses alone") {
  synth::GenerationConfig g;
  g.frames = 4;
  const synth::SequenceSample orig = synth::generate_sequence(g, 5);
  synth::SequenceSample s = orig;
  std::mt19937_64 rng(1);
  add_rgb_noise(s, rng, 0.03);
  double max_diff = 0.0;
  bool changed = false;
  for (int t = 0; t < s.length(); ++t) {
    CHECK(s.labels[t].labels == orig.labels[t].labels);
    CHECK(s.poses[t][0].position == orig.poses[t][0].position);
    for (std::size_t k = 0; k < s.frames[t].size(); ++k) {
      const float v = s.frames[t].data()[k];
      REQUIRE(v >= 0.0f);
      REQUIRE(v <= 1.0f);
      max_diff = std::max(max_diff, static_cast<double>(std::abs(v - orig.frames[t].data()[k])));
      changed = changed || v != orig.frames[t].data()[k];
    }
  }
  CHECK(changed);
  CHECK(max_diff <= 0.03 + 1e-6);
}

TEST_CASE("one-epoch training smoke run on 32 sequences") {
  TempDir dir("train_smoke");
  synth::GenerationConfig g;
  g.count = 32;
  g.frames = 8;
  g.seed = 4242;
  synth::generate_dataset(g, (dir.path / "data").string(), 1);
  const synth::Dataset ds = synth::Dataset::open((dir.path / "data").string());

  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch = 16;
  cfg.pair_passes = 1;

  TrainOptions seg_opts;
  seg_opts.checkpoint_out = (dir.path / "seg.ckpt").string();
  seg_opts.metrics_out = (dir.path / "seg.metrics").string();
  const auto seg_log = train_model(ModelKind::Segmentation, ds, cfg, seg_opts);
  REQUIRE(seg_log.size() == 1);
  CHECK(std::isfinite(seg_log[0].mean_loss));
  CHECK(seg_log[0].mean_loss > 0.0);
  CHECK(fs::exists(seg_opts.checkpoint_out));
  {
    std::ifstream m(seg_opts.metrics_out);
    const std::string text{std::istreambuf_iterator<char>(m), {}};
    CHECK(text.find("# pair pass 1 mean_loss") != std::string::npos);
    CHECK(text.find("# initial_loss") != std::string::npos);
  }
  // The untrained loss is a pure function of data, seed and config.
  for (ModelKind k : {ModelKind::Segmentation, ModelKind::Translation, ModelKind::Rotation}) {
    const double a = initial_loss(k, ds, cfg);
    CHECK(std::isfinite(a));
    CHECK(a > 0.0);
    CHECK(initial_loss(k, ds, cfg) == a);
  }

  // Motion models with the predicted-mask curriculum fully on.
  const CheckpointSet frozen = CheckpointSet::load(seg_opts.checkpoint_out, "", "");
  REQUIRE(frozen.segmentation.has_value());
  cfg.curriculum_hold = 0;
  cfg.curriculum_max = 1.0;
  for (ModelKind k : {ModelKind::Translation, ModelKind::Rotation}) {
    TrainOptions opts;
    opts.checkpoint_out = (dir.path / (std::string(model_kind_name(k)) + ".ckpt")).string();
    opts.frozen_segmentation = &*frozen.segmentation;
    const auto log = train_model(k, ds, cfg, opts);
    REQUIRE(log.size() == 1);
    CHECK(log[0].p_predicted_mask == 1.0);
    CHECK(std::isfinite(log[0].mean_loss));
    CHECK(fs::exists(opts.checkpoint_out));
  }
  const CheckpointSet all = CheckpointSet::load((dir.path / "seg.ckpt").string(), (dir.path / "trans.ckpt").string(),
                                                (dir.path / "rot.ckpt").string());
  CHECK(all.translation.has_value());
  CHECK(all.rotation.has_value());
  CHECK_THROWS_AS(CheckpointSet::load("", (dir.path / "rot.ckpt").string(), ""), IoError);

  // Same seed and data give the same weights bit for bit.
  TrainConfig small = cfg;
  small.max_sequences = 4;
  small.batch = 2;
  TrainOptions r1, r2;
  r1.checkpoint_out = (dir.path / "r1.ckpt").string();
  r2.checkpoint_out = (dir.path / "r2.ckpt").string();
  train_model(ModelKind::Rotation, ds, small, r1);
  train_model(ModelKind::Rotation, ds, small, r2);
  std::ifstream f1(r1.checkpoint_out, std::ios::binary), f2(r2.checkpoint_out, std::ios::binary);
  const std::string b1{std::istreambuf_iterator<char>(f1), {}}, b2{std::istreambuf_iterator<char>(f2), {}};
  CHECK(b1.size() > 1000);
  CHECK(b1 == b2);

  // Segmentation fed its own predictions: reproducible, and a different run from teacher forcing.
  TrainConfig fed = small;
  fed.batch = 4;
  fed.pair_passes = 0;
  TrainOptions s1, s2, s3;
  s1.checkpoint_out = (dir.path / "s1.ckpt").string();
  s2.checkpoint_out = (dir.path / "s2.ckpt").string();
  s3.checkpoint_out = (dir.path / "s3.ckpt").string();
  const auto fed_log = train_model(ModelKind::Segmentation, ds, fed, s1);
  REQUIRE(fed_log.size() == 1);
  CHECK(fed_log[0].p_predicted_mask == 1.0);
  CHECK(std::isfinite(fed_log[0].mean_loss));
  train_model(ModelKind::Segmentation, ds, fed, s2);
  fed.seg_self_feed = false;
  train_model(ModelKind::Segmentation, ds, fed, s3);
  auto slurp = [](const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string{std::istreambuf_iterator<char>(f), {}};
  };
  CHECK(slurp(s1.checkpoint_out) == slurp(s2.checkpoint_out));
  CHECK(slurp(s1.checkpoint_out) != slurp(s3.checkpoint_out));

  // An absurd learning rate must surface as a divergence, not silently continue.
  TrainConfig wild = cfg;
  wild.batch = 4;
  wild.max_sequences = 16;
  wild.lr = 1e30;
  wild.clip_norm = 1e30;
  CHECK_THROWS_AS(train_model(ModelKind::Translation, ds, wild, {}), DivergenceError);
}
