#include "motion6d/nn/models.hpp"

#include <stdexcept>

namespace motion6d::nn {

namespace {
constexpr std::array<int, 7> kSegChannels = {16, 16, 32, 32, 64, 64, 128};
constexpr std::array<int, 7> kSegStrides = {2, 1, 2, 1, 2, 1, 2};
constexpr std::array<int, 6> kMotionChannels = {8, 16, 32, 64, 128, 128};
constexpr std::array<int, 6> kMotionStrides = {2, 2, 2, 2, 1, 1};
constexpr int kCorrChannels = 32;
constexpr int kMotionHidden = 128;
constexpr std::array<int, 3> kHeadWidths = {256, 128, 64};
}  // namespace

SegmentationNet::SegmentationNet(int crop_size) : crop_(crop_size) {
  if (crop_size % 16 != 0) {
    throw std::invalid_argument("segmentation crop size must be a multiple of 16");
  }
  int cin = kInputChannels;
  for (int j = 0; j < 7; ++j) {
    enc_[j] = Conv2d("seg.enc" + std::to_string(j), {cin, kSegChannels[j], 3, kSegStrides[j]});
    cin = kSegChannels[j];
  }
  lstm_ = ConvLstmCell("seg.convlstm", kSegChannels[6], kLstmChannels);
  // Decoder layer j mirrors encoder layer 6 - j.
  cin = kLstmChannels;
  for (int j = 0; j < 7; ++j) {
    const int cout = j < 6 ? kSegChannels[5 - j] : 1;
    dec_[j] = Conv2d("seg.dec" + std::to_string(j), {cin, cout, 3, 1});
    cin = cout;
  }
}

void SegmentationNet::init(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& c : enc_) c.init(rng);
  lstm_.init(rng);
  for (int j = 0; j < 7; ++j) dec_[j].init(rng, j == 6 ? 0.1f : 1.0f);
}

void SegmentationNet::reset_state(int batch) {
  const int s = crop_ / 16;
  state_ = lstm_.zero_state(batch, s, s);
}

Tensor SegmentationNet::step(const Tensor& x, bool record) {
  if (x.c() != kInputChannels || x.h() != crop_ || x.w() != crop_) {
    throw std::invalid_argument("SegmentationNet: unexpected input shape");
  }
  if (state_.h.n() != x.n()) reset_state(x.n());
  std::array<Tensor, 7> e;
  const Tensor* a = &x;
  for (int j = 0; j < 7; ++j) {
    e[j] = enc_act_[j].forward(enc_[j].forward(*a, record), record);
    a = &e[j];
  }
  Tensor d = lstm_.forward(e[6], state_, record);
  for (int j = 0; j < 6; ++j) {
    Tensor in = (j % 2 == 0) ? upsample2x(d) : std::move(d);
    d = dec_act_[j].forward(dec_[j].forward(in, record), record);
    add_inplace(d, e[5 - j]);
  }
  return dec_[6].forward(upsample2x(d), record);
}

void SegmentationNet::begin_backward() {
  carry_ = lstm_.zero_state(state_.h.n(), state_.h.h(), state_.h.w());
}

void SegmentationNet::backward_step(const Tensor& grad_logits) {
  std::array<Tensor, 6> skip;
  Tensor g = upsample2x_grad(dec_[6].backward(grad_logits));
  for (int j = 5; j >= 0; --j) {
    skip[5 - j] = g;
    g = dec_[j].backward(dec_act_[j].backward(g));
    if (j % 2 == 0) g = upsample2x_grad(g);
  }
  g = lstm_.backward(g, carry_);
  for (int j = 6; j >= 0; --j) {
    if (j < 6) add_inplace(g, skip[j]);
    g = enc_[j].backward(enc_act_[j].backward(g), j > 0);
  }
}

ParamList SegmentationNet::parameters() {
  ParamList out;
  for (auto& c : enc_) c.collect(out);
  lstm_.collect(out);
  for (auto& c : dec_) c.collect(out);
  return out;
}

void SegmentationNet::clear_tape() {
  for (auto& c : enc_) c.clear_tape();
  for (auto& a : enc_act_) a.clear_tape();
  lstm_.clear_tape();
  for (auto& c : dec_) c.clear_tape();
  for (auto& a : dec_act_) a.clear_tape();
}

std::string SegmentationNet::architecture() const { return "segmentation crop=" + std::to_string(crop_); }

MotionBackbone::MotionBackbone(std::string name, int crop_size) : name_(std::move(name)), crop_(crop_size) {
  if (crop_size != 64) {
    throw std::invalid_argument("MotionBackbone expects 64x64 crops (4x4 bottleneck)");
  }
  int cin = kInputChannels;
  for (int j = 0; j < 6; ++j) {
    enc_[j] = Conv2d(name_ + ".enc" + std::to_string(j), {cin, kMotionChannels[j], 3, kMotionStrides[j]});
    cin = kMotionChannels[j];
  }
  corr_ = Conv2d(name_ + ".corr", {2 * cin, kCorrChannels, 1, 1});
  lstm_ = LstmCell(name_ + ".lstm", kCorrChannels * 16, kMotionHidden);
  int in = kMotionHidden;
  for (int j = 0; j < 3; ++j) {
    head_[j] = Linear(name_ + ".fc" + std::to_string(j), in, kHeadWidths[j]);
    in = kHeadWidths[j];
  }
  head_[3] = Linear(name_ + ".out", in, kOutputs);
}

void MotionBackbone::init(std::uint64_t seed, float head_gain) {
  Rng rng(seed);
  for (auto& c : enc_) c.init(rng);
  corr_.init(rng);
  lstm_.init(rng);
  for (int j = 0; j < 4; ++j) head_[j].init(rng, j == 3 ? head_gain : 1.0f);
}

void MotionBackbone::reset_state(int batch) { state_ = lstm_.zero_state(batch); }

Tensor MotionBackbone::encode(const Tensor& x, bool record) {
  Tensor a = x;
  for (int j = 0; j < 6; ++j) a = enc_act_[j].forward(enc_[j].forward(a, record), record);
  return a;
}

void MotionBackbone::encode_backward(const Tensor& grad) {
  Tensor g = grad;
  for (int j = 5; j >= 0; --j) g = enc_[j].backward(enc_act_[j].backward(g), j > 0);
}

Tensor MotionBackbone::step(const Tensor& prev, const Tensor& curr, bool record) {
  if (prev.c() != kInputChannels || prev.h() != crop_ || prev.shape() != curr.shape()) {
    throw std::invalid_argument("MotionBackbone: unexpected input shape");
  }
  if (state_.h.n() != prev.n()) reset_state(prev.n());
  Tensor fp = encode(prev, record);
  Tensor fc = encode(curr, record);
  Tensor r = corr_act_.forward(corr_.forward(concat_channels(fp, fc), record), record);
  r.reshape({r.n(), static_cast<int>(r.size() / r.n()), 1, 1});
  Tensor a = lstm_.forward(r, state_, record);
  for (int j = 0; j < 3; ++j) a = head_act_[j].forward(head_[j].forward(a, record), record);
  return head_[3].forward(a, record);
}

void MotionBackbone::begin_backward() { carry_ = lstm_.zero_state(state_.h.n()); }

void MotionBackbone::backward_step(const Tensor& grad_out) {
  Tensor g = head_[3].backward(grad_out);
  for (int j = 2; j >= 0; --j) g = head_[j].backward(head_act_[j].backward(g));
  g = lstm_.backward(g, carry_);
  g.reshape({g.n(), kCorrChannels, 4, 4});
  g = corr_.backward(corr_act_.backward(g));
  Tensor gp, gc;
  split_channels(g, kMotionChannels[5], gp, gc);
  encode_backward(gc);
  encode_backward(gp);
}

ParamList MotionBackbone::parameters() {
  ParamList out;
  for (auto& c : enc_) c.collect(out);
  corr_.collect(out);
  lstm_.collect(out);
  for (auto& l : head_) l.collect(out);
  return out;
}

void MotionBackbone::clear_tape() {
  for (auto& c : enc_) c.clear_tape();
  for (auto& a : enc_act_) a.clear_tape();
  corr_.clear_tape();
  corr_act_.clear_tape();
  lstm_.clear_tape();
  for (auto& l : head_) l.clear_tape();
  for (auto& a : head_act_) a.clear_tape();
}

std::string MotionBackbone::architecture() const {
  return "motion name=" + name_ + " crop=" + std::to_string(crop_);
}

}  // namespace motion6d::nn
