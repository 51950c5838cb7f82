#include "motion6d/trainkit.hpp"

#include "motion6d/errors.hpp"
#include "motion6d/nn/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <sstream>
#include <type_traits>

namespace motion6d::train {

// ---- losses -------------------------------------------------------------------

double seg_loss(std::span<const double> prob, std::span<const double> target, std::span<double> grad_prob) {
  if (prob.size() != target.size() || prob.empty()) throw Error("seg_loss: size mismatch");
  const double n = static_cast<double>(prob.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) {
    const double p = std::clamp(prob[i], kBceClamp, 1.0 - kBceClamp);
    const double y = target[i];
    sum -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    if (!grad_prob.empty()) {
      const bool clamped = prob[i] < kBceClamp || prob[i] > 1.0 - kBceClamp;
      grad_prob[i] = clamped ? 0.0 : (-y / p + (1.0 - y) / (1.0 - p)) / n;
    }
  }
  return sum / n;
}

double seg_loss_logits(std::span<const float> logits, std::span<const float> target, std::span<float> grad_logits) {
  if (logits.size() != target.size() || logits.empty()) throw Error("seg_loss_logits: size mismatch");
  const double n = static_cast<double>(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i], y = target[i];
    sum += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    if (!grad_logits.empty()) grad_logits[i] = static_cast<float>((1.0 / (1.0 + std::exp(-z)) - y) / n);
  }
  return sum / n;
}

double trans_loss(const std::array<double, 3>& pred, const std::array<double, 3>& gt, std::array<double, 3>* grad) {
  double sum = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double d = pred[k] - gt[k];
    sum += d * d;
    if (grad) (*grad)[k] = 2.0 * d / 3.0;
  }
  return sum / 3.0;
}

double rot_loss(const Quaternion& pred, const Quaternion& gt, std::array<double, 4>* grad) {
  const double d = pred.dot(gt);
  const double a = std::abs(d);
  const double limit = 1.0 - kAcosClamp;
  const double ac = std::min(a, limit);
  if (grad) {
    if (a >= limit) {
      grad->fill(0.0);
    } else {
      const double s = (d >= 0.0 ? 1.0 : -1.0) * -2.0 / std::sqrt(1.0 - a * a);
      *grad = {s * gt.w, s * gt.x, s * gt.y, s * gt.z};
    }
  }
  return 2.0 * std::acos(ac);
}

double rot_loss_gnomonic(const std::array<double, 3>& g, const Quaternion& gt, std::array<double, 3>* grad) {
  const double n = std::sqrt(1.0 + g[0] * g[0] + g[1] * g[1] + g[2] * g[2]);
  const Quaternion p{1.0 / n, g[0] / n, g[1] / n, g[2] / n};
  std::array<double, 4> gp{};
  const double loss = rot_loss(p, gt, grad ? &gp : nullptr);
  if (grad) {
    // d p / d q~ = (I - p p^T) / n for q~ = (1, g); keep the columns of g.
    const double pv[4] = {p.w, p.x, p.y, p.z};
    const double pg = pv[0] * gp[0] + pv[1] * gp[1] + pv[2] * gp[2] + pv[3] * gp[3];
    for (int k = 0; k < 3; ++k) (*grad)[k] = (gp[k + 1] - pv[k + 1] * pg) / n;
  }
  return loss;
}

// ---- configuration ----------------------------------------------------------------

TrainConfig TrainConfig::from_config(const Config& c) {
  TrainConfig t;
  t.epochs = static_cast<int>(c.get_int("train.epochs", t.epochs));
  t.batch = static_cast<int>(c.get_int("train.batch", t.batch));
  t.lr = c.get_double("train.lr", t.lr);
  t.weight_decay = c.get_double("train.weight_decay", t.weight_decay);
  t.lr_decay_factor = c.get_double("train.lr_decay_factor", t.lr_decay_factor);
  t.lr_decay_every = static_cast<int>(c.get_int("train.lr_decay_every", t.lr_decay_every));
  t.reverse_prob = c.get_double("train.reverse_prob", t.reverse_prob);
  t.rgb_noise = c.get_double("train.rgb_noise", t.rgb_noise);
  t.clip_norm = c.get_double("train.clip_norm", t.clip_norm);
  t.curriculum_hold = static_cast<int>(c.get_int("train.curriculum_hold", t.curriculum_hold));
  t.curriculum_max = c.get_double("train.curriculum_max", t.curriculum_max);
  t.seed = std::stoull(c.get_string("train.seed", std::to_string(t.seed)));
  t.max_sequences = static_cast<int>(c.get_int("train.max_sequences", t.max_sequences));
  t.seg_self_feed = c.get_bool("train.seg_self_feed", t.seg_self_feed);
  t.seg_mask_jitter = static_cast<int>(c.get_int("train.seg_mask_jitter", t.seg_mask_jitter));
  t.pair_passes = static_cast<int>(c.get_int("train.pair_passes", t.pair_passes));
  t.prev_mask_mode = parse_prev_mask_mode(c.get_string("model.prev_mask_mode", "keep-object"));
  if (t.epochs < 1 || t.batch < 1 || t.lr <= 0 || t.lr_decay_factor <= 0 || t.lr_decay_every < 1 ||
      t.reverse_prob < 0 || t.reverse_prob > 1 || t.rgb_noise < 0 || t.clip_norm <= 0 || t.curriculum_max < 0 ||
      t.curriculum_max > 1 || t.seg_mask_jitter < 0 ||
      t.pair_passes < 0) {
    throw ConfigError("invalid train.* configuration");
  }
  return t;
}

void TrainConfig::to_config(Config& c) const {
  auto num = [&](const char* key, double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    c.set(key, os.str());
  };
  c.set("train.epochs", epochs);
  c.set("train.batch", batch);
  num("train.lr", lr);
  num("train.weight_decay", weight_decay);
  num("train.lr_decay_factor", lr_decay_factor);
  c.set("train.lr_decay_every", lr_decay_every);
  num("train.reverse_prob", reverse_prob);
  num("train.rgb_noise", rgb_noise);
  num("train.clip_norm", clip_norm);
  c.set("train.curriculum_hold", curriculum_hold);
  num("train.curriculum_max", curriculum_max);
  c.set("train.seed", std::to_string(seed));
  c.set("train.max_sequences", max_sequences);
  c.set("train.seg_self_feed", std::string(seg_self_feed ? "true" : "false"));
  c.set("train.seg_mask_jitter", seg_mask_jitter);
  c.set("train.pair_passes", pair_passes);
  c.set("model.prev_mask_mode", std::string(prev_mask_mode_name(prev_mask_mode)));
}

double learning_rate(const TrainConfig& cfg, int epoch) {
  return cfg.lr / std::pow(cfg.lr_decay_factor, (epoch - 1) / cfg.lr_decay_every);
}

double curriculum_probability(const TrainConfig& cfg, int epoch) {
  if (epoch <= cfg.curriculum_hold) return 0.0;
  const int ramp = cfg.epochs - cfg.curriculum_hold;
  if (ramp <= 0) return cfg.curriculum_max;
  return cfg.curriculum_max * std::min(1.0, static_cast<double>(epoch - cfg.curriculum_hold) / ramp);
}

// ---- augmentation -------------------------------------------------------------------

void reverse_sequence(synth::SequenceSample& s) {
  std::reverse(s.frames.begin(), s.frames.end());
  std::reverse(s.labels.begin(), s.labels.end());
  std::reverse(s.poses.begin(), s.poses.end());
}

void add_rgb_noise(synth::SequenceSample& s, std::mt19937_64& rng, double amp) {
  if (amp <= 0.0) return;
  std::uniform_real_distribution<float> u(static_cast<float>(-amp), static_cast<float>(amp));
  for (auto& f : s.frames) {
    for (float& v : f.data()) v = std::clamp(v + u(rng), 0.0f, 1.0f);
  }
}

Image shift_image(const Image& m, int drow, int dcol) {
  Image out(m.height(), m.width(), 1);
  for (int r = std::max(0, drow); r < std::min(m.height(), m.height() + drow); ++r) {
    for (int c = std::max(0, dcol); c < std::min(m.width(), m.width() + dcol); ++c) {
      out.at(r, c) = m.at(r - drow, c - dcol);
    }
  }
  return out;
}

void augment(synth::SequenceSample& s, std::mt19937_64& rng, const TrainConfig& cfg) {
  if (std::bernoulli_distribution(cfg.reverse_prob)(rng)) reverse_sequence(s);
  add_rgb_noise(s, rng, cfg.rgb_noise);
}

// ---- training -------------------------------------------------------------------------

ModelKind parse_model_kind(const std::string& s) {
  if (s == "seg") return ModelKind::Segmentation;
  if (s == "trans") return ModelKind::Translation;
  if (s == "rot") return ModelKind::Rotation;
  throw ConfigError("model must be seg, trans or rot: " + s);
}

const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Segmentation: return "seg";
    case ModelKind::Translation: return "trans";
    case ModelKind::Rotation: return "rot";
  }
  return "?";
}

namespace {

using Clock = std::chrono::steady_clock;

struct BatchItem {
  synth::SequenceSample seq;
  int object = 0;
};

bool is_empty(const Image& m) { return mask_area(m) == 0; }

// Batched rollout of the frozen segmentation network, seeded with the frame-0
// ground-truth mask. Empty predictions fall back to the previous mask.
std::vector<std::vector<Image>> predict_masks(const nn::SegmentationNet& frozen, const std::vector<BatchItem>& items,
                                              const std::vector<int>& which, PrevMaskMode mode) {
  std::vector<std::vector<Image>> out(which.size());
  if (which.empty()) return out;
  nn::SegmentationNet net = frozen;
  const int B = static_cast<int>(which.size());
  net.reset_state(B);
  const int T = items[which[0]].seq.length();
  for (int i = 0; i < B; ++i) out[i].push_back(items[which[i]].seq.mask(0, items[which[i]].object));
  std::vector<Image> inputs(B);
  std::vector<CropSpec> crops(B);
  nn::Tensor x;
  for (int t = 1; t < T; ++t) {
    std::vector<const Image*> ptrs;
    for (int i = 0; i < B; ++i) {
      const auto& s = items[which[i]].seq;
      const Image& prev = out[i][t - 1];
      crops[i] = translation_crop(mask_stats(prev), prev.height(), prev.width(), net.crop_size());
      inputs[i] = segmentation_input(s.frames[t - 1], prev, s.frames[t], crops[i], mode);
      ptrs.push_back(&inputs[i]);
    }
    pack_images(ptrs, x);
    const nn::Tensor logits = net.step(x, false);
    const int S = net.crop_size();
    for (int i = 0; i < B; ++i) {
      Image prob(S, S, 1);
      const float* z = logits.sample(i);
      for (int p = 0; p < S * S; ++p) prob.data()[p] = 1.0f / (1.0f + std::exp(-z[p]));
      Image full = paste_crop(prob, crops[i], out[i][t - 1].height(), out[i][t - 1].width());
      out[i].push_back(is_empty(full) ? out[i][t - 1] : std::move(full));
    }
  }
  return out;
}

struct Trainer {
  ModelKind which;
  const synth::Dataset& data;
  const TrainConfig& cfg;
  const TrainOptions& opts;
  std::mt19937_64 rng;

  std::vector<BatchItem> load_batch(const std::vector<int>& samples) {
    std::vector<BatchItem> items;
    for (int k : samples) {
      const auto ref = data.sample(k);
      BatchItem it{data.load(ref.sequence), ref.object};
      augment(it.seq, rng, cfg);
      items.push_back(std::move(it));
    }
    return items;
  }

  Image jittered(const Image& m) {
    if (cfg.seg_mask_jitter == 0) return m;
    std::uniform_int_distribution<int> jitter(-cfg.seg_mask_jitter, cfg.seg_mask_jitter);
    const int dr = jitter(rng), dc = jitter(rng);
    Image shifted = shift_image(m, dr, dc);
    return is_empty(shifted) ? m : shifted;
  }

  // Single-step training on frame pairs with fresh recurrent state. A batch of
  // sequences is loaded once and each sample visits its pairs in random order;
  // `step` runs forward and backward for one set of pairs and returns the loss.
  template <typename Net, typename StepFn>
  void pair_passes(Net& net, std::ostream* metrics, StepFn&& step) {
    const nn::ParamList params = net.parameters();
    nn::RmsProp opt(params, {.lr = cfg.lr, .alpha = 0.99, .eps = 1e-8, .weight_decay = cfg.weight_decay});
    int n = data.num_samples();
    if (cfg.max_sequences >= 0) n = std::min(n, cfg.max_sequences * data.config().objects);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    const std::string name = model_kind_name(which);
    for (int pass = 1; pass <= cfg.pair_passes; ++pass) {
      std::shuffle(order.begin(), order.end(), rng);
      double total = 0.0;
      int updates = 0;
      for (int start = 0; start < n; start += cfg.batch) {
        const std::vector<int> ids(order.begin() + start, order.begin() + std::min(n, start + cfg.batch));
        // Only pairs where both masks are non-empty; a sample without any is dropped,
        // and shorter lists are cycled.
        std::vector<BatchItem> items;
        std::vector<std::vector<int>> visit;
        for (auto& it : load_batch(ids)) {
          std::vector<int> v;
          for (int t = 1; t < it.seq.length(); ++t) {
            if (!is_empty(it.seq.mask(t - 1, it.object)) && !is_empty(it.seq.mask(t, it.object))) v.push_back(t);
          }
          if (v.empty()) continue;
          std::shuffle(v.begin(), v.end(), rng);
          items.push_back(std::move(it));
          visit.push_back(std::move(v));
        }
        if (items.empty()) continue;
        const int B = static_cast<int>(items.size());
        const int T = items[0].seq.length();
        std::vector<int> frames(B);
        for (int j = 0; j + 1 < T; ++j) {
          for (int b = 0; b < B; ++b) frames[b] = visit[b][j % visit[b].size()];
          opt.zero_grad();
          net.reset_state(B);
          const double loss = step(net, items, frames);
          net.clear_tape();
          if (!std::isfinite(loss) || !nn::grads_finite(params)) {
            throw DivergenceError(name + ": non-finite loss in pair pass " + std::to_string(pass));
          }
          nn::clip_grad_norm(params, cfg.clip_norm);
          opt.step();
          total += loss;
          ++updates;
        }
        if (opts.progress) {
          *opts.progress << "[" << name << "] pair pass " << pass << " sequences " << std::min(n, start + cfg.batch)
                         << "/" << n << " mean " << total / std::max(1, updates) << std::endl;
        }
      }
      if (metrics) *metrics << "# pair pass " << pass << " mean_loss " << total / std::max(1, updates) << std::endl;
    }
  }

  double seg_pair_step(nn::SegmentationNet& net, const std::vector<BatchItem>& items, const std::vector<int>& frames) {
    const int B = static_cast<int>(items.size());
    const int S = net.crop_size();
    std::vector<Image> inputs(B), targets(B);
    std::vector<const Image*> xp, yp;
    for (int b = 0; b < B; ++b) {
      const auto& s = items[b].seq;
      const int t = frames[b];
      const Image prev = jittered(s.mask(t - 1, items[b].object));
      const CropSpec crop = translation_crop(mask_stats(prev), prev.height(), prev.width(), S);
      inputs[b] = segmentation_input(s.frames[t - 1], prev, s.frames[t], crop, cfg.prev_mask_mode);
      targets[b] = extract_crop(s.mask(t, items[b].object), crop);
      xp.push_back(&inputs[b]);
      yp.push_back(&targets[b]);
    }
    nn::Tensor x, y;
    pack_images(xp, x);
    pack_images(yp, y);
    const nn::Tensor logits = net.step(x, true);
    nn::Tensor g(logits.shape());
    const double loss = seg_loss_logits(logits.span(), y.span(), g.span());
    net.begin_backward();
    net.backward_step(g);
    return loss;
  }

  // Loss and output gradient of one motion step for sample b, averaged over the batch.
  double motion_loss(const BatchItem& item, int t, const float* o, float* gb, int B) const {
    const auto& s = item.seq;
    const Pose& p0 = s.poses[t - 1][item.object];
    const Pose& p1 = s.poses[t][item.object];
    std::array<double, 3> grad{};
    double loss;
    if (which == ModelKind::Translation) {
      float tgt[3];
      translation_to_target(translation_delta(p0, p1, s.intrinsics), tgt);
      loss = trans_loss({o[0], o[1], o[2]}, {tgt[0], tgt[1], tgt[2]}, &grad) / B;
    } else {
      loss = rot_loss_gnomonic({o[0], o[1], o[2]}, rotation_delta(p0, p1), &grad) / B;
    }
    for (int k = 0; k < 3; ++k) gb[k] = static_cast<float>(grad[k] / B);
    return loss;
  }

  double motion_pair_step(nn::MotionBackbone& net, const std::vector<BatchItem>& items, const std::vector<int>& frames) {
    const int B = static_cast<int>(items.size());
    std::vector<Image> in_prev(B), in_curr(B);
    std::vector<const Image*> pa, pb;
    for (int b = 0; b < B; ++b) {
      const auto& s = items[b].seq;
      const int t = frames[b];
      const Image mp = s.mask(t - 1, items[b].object);
      const Image mc = s.mask(t, items[b].object);
      const auto [cp, cc] = which == ModelKind::Translation ? translation_crops(mp, net.crop_size())
                                                            : rotation_crops(mp, mc, net.crop_size());
      in_prev[b] = motion_input(s.frames[t - 1], mp, cp);
      in_curr[b] = motion_input(s.frames[t], mc, cc);
      pa.push_back(&in_prev[b]);
      pb.push_back(&in_curr[b]);
    }
    nn::Tensor xa, xb;
    pack_images(pa, xa);
    pack_images(pb, xb);
    const nn::Tensor out = net.step(xa, xb, true);
    nn::Tensor g(out.shape());
    double loss = 0.0;
    for (int b = 0; b < B; ++b) loss += motion_loss(items[b], frames[b], out.sample(b), g.sample(b), B);
    net.begin_backward();
    net.backward_step(g);
    return loss;
  }

  // With probability p_self per sample, the previous mask is the network's own
  // (detached) prediction from the last step, as at inference; otherwise a jittered
  // ground-truth mask.
  double seg_batch(nn::SegmentationNet& net, const std::vector<BatchItem>& items, double p_self) {
    const int B = static_cast<int>(items.size());
    const int T = items[0].seq.length();
    const int S = net.crop_size();
    net.reset_state(B);
    std::vector<nn::Tensor> grads;
    std::vector<CropSpec> crops(B);
    std::vector<Image> inputs(B), targets(B), fed(B);
    std::vector<char> self_fed(B, 0);
    nn::Tensor x, y;
    double loss = 0.0;
    for (int b = 0; b < B; ++b) {
      fed[b] = jittered(items[b].seq.mask(0, items[b].object));
      crops[b] = translation_crop(mask_stats(fed[b]), fed[b].height(), fed[b].width(), S);
      self_fed[b] = cfg.seg_self_feed && std::bernoulli_distribution(p_self)(rng);
    }
    for (int t = 1; t < T; ++t) {
      std::vector<const Image*> xp, yp;
      for (int b = 0; b < B; ++b) {
        const auto& s = items[b].seq;
        if (!self_fed[b]) fed[b] = jittered(s.mask(t - 1, items[b].object));
        const Image& prev = fed[b];
        if (!is_empty(prev)) crops[b] = translation_crop(mask_stats(prev), prev.height(), prev.width(), S);
        inputs[b] = segmentation_input(s.frames[t - 1], prev, s.frames[t], crops[b], cfg.prev_mask_mode);
        targets[b] = extract_crop(s.mask(t, items[b].object), crops[b]);
        xp.push_back(&inputs[b]);
        yp.push_back(&targets[b]);
      }
      pack_images(xp, x);
      pack_images(yp, y);
      const nn::Tensor logits = net.step(x, true);
      nn::Tensor g(logits.shape());
      loss += seg_loss_logits(logits.span(), y.span(), g.span());
      grads.push_back(std::move(g));
      for (int b = 0; b < B; ++b) {
        if (!self_fed[b]) continue;
        Image prob(S, S, 1);
        const float* z = logits.sample(b);
        for (int p = 0; p < S * S; ++p) prob.data()[p] = 1.0f / (1.0f + std::exp(-z[p]));
        Image full = paste_crop(prob, crops[b], fed[b].height(), fed[b].width());
        if (!is_empty(full)) fed[b] = std::move(full);
      }
    }
    net.begin_backward();
    for (int t = T - 2; t >= 0; --t) net.backward_step(grads[t]);
    return loss;
  }

  double motion_batch(nn::MotionBackbone& net, const std::vector<BatchItem>& items, double p_pred) {
    const int B = static_cast<int>(items.size());
    const int T = items[0].seq.length();

    // Mask source per sample: curriculum draw, then the frozen segmentation rollout.
    std::vector<int> use_pred;
    std::vector<int> pred_slot(B, -1);
    for (int b = 0; b < B; ++b) {
      if (opts.frozen_segmentation && std::bernoulli_distribution(p_pred)(rng)) {
        pred_slot[b] = static_cast<int>(use_pred.size());
        use_pred.push_back(b);
      }
    }
    const auto predicted = opts.frozen_segmentation
                               ? predict_masks(*opts.frozen_segmentation, items, use_pred, cfg.prev_mask_mode)
                               : std::vector<std::vector<Image>>{};
    auto mask_at = [&](int b, int t) -> Image {
      if (pred_slot[b] >= 0) return predicted[pred_slot[b]][t];
      return items[b].seq.mask(t, items[b].object);
    };

    net.reset_state(B);
    std::vector<nn::Tensor> grads;
    std::vector<CropSpec> crop_prev(B), crop_curr(B);
    std::vector<Image> in_prev(B), in_curr(B), masks_prev(B);
    for (int b = 0; b < B; ++b) {
      masks_prev[b] = mask_at(b, 0);
      const MaskStats st = mask_stats(masks_prev[b]);
      crop_prev[b] = which == ModelKind::Translation
                         ? translation_crop(st, masks_prev[b].height(), masks_prev[b].width(), net.crop_size())
                         : rotation_crop(st, net.crop_size());
      crop_curr[b] = crop_prev[b];
    }
    nn::Tensor xa, xb;
    double loss = 0.0;
    for (int t = 1; t < T; ++t) {
      std::vector<const Image*> pa, pb;
      std::vector<Image> masks_curr(B);
      for (int b = 0; b < B; ++b) {
        const auto& s = items[b].seq;
        masks_curr[b] = mask_at(b, t);
        const Image& mp = masks_prev[b];
        const Image& mc = masks_curr[b];
        // Empty masks keep the last valid window, as the tracker does.
        if (which == ModelKind::Translation) {
          if (!is_empty(mp)) crop_prev[b] = translation_crop(mask_stats(mp), mp.height(), mp.width(), net.crop_size());
          crop_curr[b] = crop_prev[b];
        } else {
          if (!is_empty(mp)) crop_prev[b] = rotation_crop(mask_stats(mp), net.crop_size());
          if (!is_empty(mc)) crop_curr[b] = rotation_crop(mask_stats(mc), net.crop_size());
        }
        in_prev[b] = motion_input(s.frames[t - 1], mp, crop_prev[b]);
        in_curr[b] = motion_input(s.frames[t], mc, crop_curr[b]);
        pa.push_back(&in_prev[b]);
        pb.push_back(&in_curr[b]);
      }
      pack_images(pa, xa);
      pack_images(pb, xb);
      const nn::Tensor out = net.step(xa, xb, true);
      nn::Tensor g(out.shape());
      for (int b = 0; b < B; ++b) loss += motion_loss(items[b], t, out.sample(b), g.sample(b), B);
      grads.push_back(std::move(g));
      masks_prev = std::move(masks_curr);
    }
    net.begin_backward();
    for (int t = T - 2; t >= 0; --t) net.backward_step(grads[t]);
    return loss;
  }

  template <typename Net, typename BatchFn>
  std::vector<EpochRecord> run(Net& net, BatchFn&& batch_fn) {
    const nn::ParamList params = net.parameters();
    nn::RmsProp opt(params, {.lr = cfg.lr, .alpha = 0.99, .eps = 1e-8, .weight_decay = cfg.weight_decay});
    int n = data.num_samples();
    if (cfg.max_sequences >= 0) n = std::min(n, cfg.max_sequences * data.config().objects);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    std::ofstream metrics;
    if (!opts.metrics_out.empty()) {
      metrics.open(opts.metrics_out);
      if (!metrics) throw IoError("cannot write " + opts.metrics_out);
      metrics << "# epoch mean_loss lr p_predicted_mask seconds\n";
      metrics << "# initial_loss " << std::setprecision(8) << initial_loss(which, data, cfg) << '\n';
    }
    if constexpr (std::is_same_v<Net, nn::SegmentationNet>) {
      pair_passes(net, metrics.is_open() ? &metrics : nullptr,
                  [&](Net& n, const std::vector<BatchItem>& items, const std::vector<int>& frames) {
                    return seg_pair_step(n, items, frames);
                  });
    } else {
      pair_passes(net, metrics.is_open() ? &metrics : nullptr,
                  [&](Net& n, const std::vector<BatchItem>& items, const std::vector<int>& frames) {
                    return motion_pair_step(n, items, frames);
                  });
    }
    std::vector<EpochRecord> log;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
      const auto t0 = Clock::now();
      const double lr = learning_rate(cfg, epoch);
      const double p = curriculum_probability(cfg, epoch);
      opt.set_lr(lr);
      std::shuffle(order.begin(), order.end(), rng);
      double total = 0.0;
      int batches = 0;
      const int nb = (n + cfg.batch - 1) / cfg.batch;
      for (int start = 0; start < n; start += cfg.batch) {
        const std::vector<int> ids(order.begin() + start, order.begin() + std::min(n, start + cfg.batch));
        const auto items = load_batch(ids);
        opt.zero_grad();
        const double loss = batch_fn(net, items, p);
        if (!std::isfinite(loss) || !nn::grads_finite(params)) {
          throw DivergenceError(std::string(model_kind_name(which)) + ": non-finite loss at epoch " +
                                std::to_string(epoch));
        }
        nn::clip_grad_norm(params, cfg.clip_norm);
        opt.step();
        net.clear_tape();
        total += loss;
        ++batches;
        if (opts.progress && (batches % 10 == 0 || batches == nb)) {
          *opts.progress << "[" << model_kind_name(which) << "] epoch " << epoch << " batch " << batches << "/" << nb
                         << " loss " << loss << " mean " << total / batches << std::endl;
        }
      }
      EpochRecord rec{epoch, total / std::max(1, batches), lr, p,
                      std::chrono::duration<double>(Clock::now() - t0).count()};
      log.push_back(rec);
      if (metrics) {
        metrics << rec.epoch << ' ' << std::setprecision(8) << rec.mean_loss << ' ' << rec.lr << ' '
                << rec.p_predicted_mask << ' ' << rec.seconds << std::endl;
      }
      if (!opts.checkpoint_out.empty()) nn::save_checkpoint(opts.checkpoint_out, net.architecture(), params);
    }
    return log;
  }
};

template <typename Net, typename BatchFn>
double untrained_loss(Net& net, const synth::Dataset& data, const TrainConfig& cfg, BatchFn&& batch_fn) {
  std::vector<BatchItem> items;
  for (int k = 0; k < std::min(cfg.batch, data.num_samples()); ++k) {
    const auto ref = data.sample(k);
    items.push_back({data.load(ref.sequence), ref.object});
  }
  const double loss = batch_fn(net, items);
  net.clear_tape();
  for (nn::Param* p : net.parameters()) p->zero_grad();
  return loss;
}

}  // namespace

double initial_loss(ModelKind which, const synth::Dataset& data, const TrainConfig& cfg) {
  if (data.num_samples() == 0) throw IoError("empty dataset " + data.root());
  TrainConfig plain = cfg;
  plain.seg_mask_jitter = 0;
  const TrainOptions none;
  Trainer tr{which, data, plain, none, std::mt19937_64(cfg.seed)};
  if (which == ModelKind::Segmentation) {
    nn::SegmentationNet net;
    net.init(cfg.seed);
    return untrained_loss(net, data, plain, [&](nn::SegmentationNet& n, const std::vector<BatchItem>& items) {
      return tr.seg_batch(n, items, 0.0);
    });
  }
  nn::MotionBackbone net(which == ModelKind::Translation ? "trans" : "rot");
  net.init(cfg.seed);
  return untrained_loss(net, data, plain, [&](nn::MotionBackbone& n, const std::vector<BatchItem>& items) {
    return tr.motion_batch(n, items, 0.0);
  });
}

std::vector<EpochRecord> train_model(ModelKind which, const synth::Dataset& data, const TrainConfig& cfg,
                                     const TrainOptions& opts) {
  if (data.num_samples() == 0) throw IoError("empty dataset " + data.root());
  Trainer tr{which, data, cfg, opts, std::mt19937_64(cfg.seed)};
  if (which == ModelKind::Segmentation) {
    nn::SegmentationNet net;
    net.init(cfg.seed);
    return tr.run(net, [&](nn::SegmentationNet& n, const std::vector<BatchItem>& items, double p) {
      return tr.seg_batch(n, items, p);
    });
  }
  nn::MotionBackbone net(which == ModelKind::Translation ? "trans" : "rot");
  net.init(cfg.seed);
  return tr.run(net, [&](nn::MotionBackbone& n, const std::vector<BatchItem>& items, double p) {
    return tr.motion_batch(n, items, p);
  });
}

}  // namespace motion6d::train
