#pragma once

// Trainable layers with a LIFO tape for backpropagation through time.
//
// forward(x, record=true) pushes whatever backward needs; backward() pops it,
// accumulates parameter gradients and returns the input gradient. A layer
// applied several times per step (shared weights) must be unwound in exact
// reverse order of the forward calls.

#include "motion6d/nn/kernels.hpp"
#include "motion6d/nn/tensor.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace motion6d::nn {

using Rng = std::mt19937_64;

inline constexpr float kLeakySlope = 0.01f;

struct Param {
  std::string name;
  std::vector<float> value;
  std::vector<float> grad;

  Param() = default;
  Param(std::string n, std::size_t count) : name(std::move(n)), value(count, 0.0f), grad(count, 0.0f) {}
  std::size_t size() const { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0f); }
};

using ParamList = std::vector<Param*>;

std::size_t count_parameters(const ParamList& params);

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, ConvGeometry g);

  Tensor forward(const Tensor& x, bool record);
  Tensor backward(const Tensor& gy, bool input_grad = true);

  /// He-uniform weights scaled by `gain`, zero bias.
  void init(Rng& rng, float gain = 1.0f);
  void collect(ParamList& out) { out.push_back(&w_); out.push_back(&b_); }
  void clear_tape() { tape_.clear(); }
  std::size_t tape_depth() const { return tape_.size(); }
  const ConvGeometry& geometry() const { return g_; }
  Param& weight() { return w_; }
  Param& bias() { return b_; }

 private:
  ConvGeometry g_;
  Param w_;
  Param b_;
  std::vector<Tensor> tape_;
};

class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out);

  Tensor forward(const Tensor& x, bool record);
  Tensor backward(const Tensor& gy, bool input_grad = true);

  void init(Rng& rng, float gain = 1.0f);
  void collect(ParamList& out) { out.push_back(&w_); out.push_back(&b_); }
  void clear_tape() { tape_.clear(); }
  int in_features() const { return in_; }
  int out_features() const { return out_; }
  Param& weight() { return w_; }
  Param& bias() { return b_; }

 private:
  int in_ = 0;
  int out_ = 0;
  Param w_;
  Param b_;
  std::vector<Tensor> tape_;
};

class LeakyRelu {
 public:
  Tensor forward(const Tensor& x, bool record);
  Tensor backward(const Tensor& gy);
  void clear_tape() { tape_.clear(); }

 private:
  std::vector<Tensor> tape_;
};

struct RecurrentState {
  Tensor h;
  Tensor c;
};

/// LSTM cell, gate order (input, forget, cell, output); forget bias starts at 1.
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(const std::string& name, int in, int hidden);

  RecurrentState zero_state(int batch) const;
  /// Advances `state` in place and returns the new hidden state.
  Tensor forward(const Tensor& x, RecurrentState& state, bool record);
  /// gh: gradient w.r.t. this step's output h (excluding the recurrent path).
  /// `carry` holds dL/dh and dL/dc flowing back from the next step and is
  /// updated to the values for the previous step.
  Tensor backward(const Tensor& gh, RecurrentState& carry);

  void init(Rng& rng);
  void collect(ParamList& out) { gates_.collect(out); }
  void clear_tape();
  int hidden() const { return hidden_; }

 private:
  struct Saved {
    Tensor gates;  // post-activation i, f, g, o: N x 4H
    Tensor c_prev;
    Tensor tanh_c;
  };
  int in_ = 0;
  int hidden_ = 0;
  Linear gates_;
  std::vector<Saved> tape_;
};

/// Convolutional LSTM cell (3x3 kernel over [x, h]), same gate layout as LstmCell.
class ConvLstmCell {
 public:
  ConvLstmCell() = default;
  ConvLstmCell(const std::string& name, int in_channels, int hidden_channels);

  RecurrentState zero_state(int batch, int height, int width) const;
  Tensor forward(const Tensor& x, RecurrentState& state, bool record);
  Tensor backward(const Tensor& gh, RecurrentState& carry);

  void init(Rng& rng);
  void collect(ParamList& out) { gates_.collect(out); }
  void clear_tape();
  int hidden() const { return hidden_; }

 private:
  struct Saved {
    Tensor gates;  // N x 4H x h x w
    Tensor c_prev;
    Tensor tanh_c;
  };
  int in_ = 0;
  int hidden_ = 0;
  Conv2d gates_;
  std::vector<Saved> tape_;
};

inline Tensor upsample2x(const Tensor& x) {
  Tensor y;
  parallel::upsample2x_forward(x, y);
  return y;
}

inline Tensor upsample2x_grad(const Tensor& gy) {
  Tensor gx;
  parallel::upsample2x_backward(gy, gx);
  return gx;
}

}  // namespace motion6d::nn
