#pragma once

// The two estimator network architectures.
//
// SegmentationNet (per step, crop side S = 64):
//   input 7 x S x S  (masked previous RGB, previous mask, current RGB)
//   encoder   7 conv3x3 layers, channels 16-16-32-32-64-64-128, stride 2 on layers 1/3/5/7 -> 128 x S/16
//   ConvLSTM  128 hidden channels
//   decoder   7 layers mirroring the encoder (nearest 2x upsample where the encoder strided),
//             each of the first six outputs skip-added to the mirrored encoder activation
//   output    1 x S x S logits
//
// MotionBackbone (per step, crop side 64):
//   shared encoder over each 6-channel frame: 6 conv3x3 layers, channels 8-16-32-64-128-128,
//   first four stride 2 -> 128 x 4 x 4
//   1x1 correlation conv over the concatenated pair -> 32 x 4 x 4, flattened to 512
//   LSTM with 128 hidden units (512 gate units) -> FC 256-128-64 -> 3 outputs

#include "motion6d/nn/layers.hpp"

#include <array>
#include <cstdint>
#include <string>

namespace motion6d::nn {

class SegmentationNet {
 public:
  static constexpr int kInputChannels = 7;
  static constexpr int kLstmChannels = 128;

  explicit SegmentationNet(int crop_size = 64);

  void init(std::uint64_t seed);
  void reset_state(int batch);
  /// One recurrent step; returns logits N x 1 x S x S.
  Tensor step(const Tensor& x, bool record);

  /// Backward through time: call begin_backward() once, then backward_step() for
  /// each recorded step in reverse order.
  void begin_backward();
  void backward_step(const Tensor& grad_logits);

  ParamList parameters();
  void clear_tape();
  const RecurrentState& state() const { return state_; }
  int crop_size() const { return crop_; }
  std::string architecture() const;

 private:
  int crop_;
  std::array<Conv2d, 7> enc_;
  std::array<LeakyRelu, 7> enc_act_;
  ConvLstmCell lstm_;
  std::array<Conv2d, 7> dec_;
  std::array<LeakyRelu, 6> dec_act_;
  RecurrentState state_;
  RecurrentState carry_;
};

class MotionBackbone {
 public:
  static constexpr int kInputChannels = 6;
  static constexpr int kOutputs = 3;

  explicit MotionBackbone(std::string name = "motion", int crop_size = 64);

  /// `head_gain` scales the initial output layer so untrained outputs start near 0.
  void init(std::uint64_t seed, float head_gain = 0.1f);
  void reset_state(int batch);
  /// prev, curr: N x 6 x 64 x 64; returns N x 3.
  Tensor step(const Tensor& prev, const Tensor& curr, bool record);

  void begin_backward();
  void backward_step(const Tensor& grad_out);

  ParamList parameters();
  void clear_tape();
  const RecurrentState& state() const { return state_; }
  int crop_size() const { return crop_; }
  const std::string& name() const { return name_; }
  std::string architecture() const;

 private:
  Tensor encode(const Tensor& x, bool record);
  void encode_backward(const Tensor& g);

  std::string name_;
  int crop_;
  std::array<Conv2d, 6> enc_;
  std::array<LeakyRelu, 6> enc_act_;
  Conv2d corr_;
  LeakyRelu corr_act_;
  LstmCell lstm_;
  std::array<Linear, 4> head_;
  std::array<LeakyRelu, 3> head_act_;
  RecurrentState state_;
  RecurrentState carry_;
};

}  // namespace motion6d::nn
