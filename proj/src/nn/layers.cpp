#include "motion6d/nn/layers.hpp"

#include <cassert>
#include <cmath>

namespace motion6d::nn {

std::size_t count_parameters(const ParamList& params) {
  std::size_t n = 0;
  for (const Param* p : params) n += p->size();
  return n;
}

namespace {

void he_uniform(Param& w, std::size_t fan_in, float gain, Rng& rng) {
  const float bound = gain * std::sqrt(6.0f / ((1.0f + kLeakySlope * kLeakySlope) * static_cast<float>(fan_in)));
  std::uniform_real_distribution<float> dist(-bound, bound);
  for (float& v : w.value) v = dist(rng);
}

float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

// Elementwise LSTM gate math shared by the dense and convolutional cells.
// Per sample, `pre` holds four consecutive blocks of S values (i, f, g, o).
void gates_forward(const Tensor& pre, const Tensor& c_prev, Tensor& gates, Tensor& c, Tensor& tanh_c, Tensor& h) {
  const int N = pre.n();
  const std::size_t S = c_prev.size() / N;
  gates = Tensor(pre.shape());
  c = Tensor(c_prev.shape());
  tanh_c = Tensor(c_prev.shape());
  h = Tensor(c_prev.shape());
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n) {
    const float* p = pre.data() + n * 4 * S;
    float* g = gates.data() + n * 4 * S;
    const float* cp = c_prev.data() + n * S;
    float* cn = c.data() + n * S;
    float* tc = tanh_c.data() + n * S;
    float* hn = h.data() + n * S;
    for (std::size_t s = 0; s < S; ++s) {
      const float i = sigmoid(p[s]);
      const float f = sigmoid(p[S + s]);
      const float gg = std::tanh(p[2 * S + s]);
      const float o = sigmoid(p[3 * S + s]);
      g[s] = i;
      g[S + s] = f;
      g[2 * S + s] = gg;
      g[3 * S + s] = o;
      cn[s] = f * cp[s] + i * gg;
      tc[s] = std::tanh(cn[s]);
      hn[s] = o * tc[s];
    }
  }
}

// dh, dc: total gradients w.r.t. this step's h and c. Writes dpre and dc_prev.
void gates_backward(const Tensor& gates, const Tensor& c_prev, const Tensor& tanh_c, const Tensor& dh,
                    const Tensor& dc, Tensor& dpre, Tensor& dc_prev) {
  const int N = gates.n();
  const std::size_t S = c_prev.size() / N;
  dpre = Tensor(gates.shape());
  dc_prev = Tensor(c_prev.shape());
#pragma omp parallel for schedule(static)
  for (int n = 0; n < N; ++n) {
    const float* g = gates.data() + n * 4 * S;
    const float* cp = c_prev.data() + n * S;
    const float* tc = tanh_c.data() + n * S;
    const float* gh = dh.data() + n * S;
    const float* gc = dc.data() + n * S;
    float* dp = dpre.data() + n * 4 * S;
    float* dcp = dc_prev.data() + n * S;
    for (std::size_t s = 0; s < S; ++s) {
      const float i = g[s], f = g[S + s], gg = g[2 * S + s], o = g[3 * S + s];
      const float d_o = gh[s] * tc[s];
      const float d_c = gh[s] * o * (1.0f - tc[s] * tc[s]) + gc[s];
      dp[s] = d_c * gg * i * (1.0f - i);
      dp[S + s] = d_c * cp[s] * f * (1.0f - f);
      dp[2 * S + s] = d_c * i * (1.0f - gg * gg);
      dp[3 * S + s] = d_o * o * (1.0f - o);
      dcp[s] = d_c * f;
    }
  }
}

void set_forget_bias(Param& b, std::size_t block, float value) {
  for (std::size_t i = block; i < 2 * block; ++i) b.value[i] = value;
}

}  // namespace

Conv2d::Conv2d(const std::string& name, ConvGeometry g)
    : g_(g), w_(name + ".weight", g.weight_count()), b_(name + ".bias", static_cast<std::size_t>(g.cout)) {}

Tensor Conv2d::forward(const Tensor& x, bool record) {
  assert(x.c() == g_.cin);
  Tensor y;
  parallel::conv2d_forward(g_, x, w_.value, b_.value, y);
  if (record) tape_.push_back(x);
  return y;
}

Tensor Conv2d::backward(const Tensor& gy, bool input_grad) {
  assert(!tape_.empty());
  Tensor x = std::move(tape_.back());
  tape_.pop_back();
  Tensor gx;
  parallel::conv2d_backward(g_, x, w_.value, gy, input_grad ? &gx : nullptr, w_.grad, b_.grad);
  return gx;
}

void Conv2d::init(Rng& rng, float gain) {
  he_uniform(w_, static_cast<std::size_t>(g_.cin) * g_.kernel * g_.kernel, gain, rng);
  std::fill(b_.value.begin(), b_.value.end(), 0.0f);
}

Linear::Linear(const std::string& name, int in, int out)
    : in_(in), out_(out), w_(name + ".weight", static_cast<std::size_t>(in) * out),
      b_(name + ".bias", static_cast<std::size_t>(out)) {}

Tensor Linear::forward(const Tensor& x, bool record) {
  assert(x.size() / x.n() == static_cast<std::size_t>(in_));
  Tensor y;
  parallel::linear_forward(x, w_.value, b_.value, out_, y);
  if (record) tape_.push_back(x);
  return y;
}

Tensor Linear::backward(const Tensor& gy, bool input_grad) {
  assert(!tape_.empty());
  Tensor x = std::move(tape_.back());
  tape_.pop_back();
  Tensor gx;
  parallel::linear_backward(x, w_.value, gy, input_grad ? &gx : nullptr, w_.grad, b_.grad);
  return gx;
}

void Linear::init(Rng& rng, float gain) {
  he_uniform(w_, static_cast<std::size_t>(in_), gain, rng);
  std::fill(b_.value.begin(), b_.value.end(), 0.0f);
}

Tensor LeakyRelu::forward(const Tensor& x, bool record) {
  Tensor y;
  parallel::leaky_relu_forward(x, kLeakySlope, y);
  if (record) tape_.push_back(y);
  return y;
}

Tensor LeakyRelu::backward(const Tensor& gy) {
  assert(!tape_.empty());
  Tensor y = std::move(tape_.back());
  tape_.pop_back();
  Tensor gx;
  parallel::leaky_relu_backward(y, gy, kLeakySlope, gx);
  return gx;
}

LstmCell::LstmCell(const std::string& name, int in, int hidden)
    : in_(in), hidden_(hidden), gates_(name + ".gates", in + hidden, 4 * hidden) {}

RecurrentState LstmCell::zero_state(int batch) const { return {Tensor(batch, hidden_), Tensor(batch, hidden_)}; }

Tensor LstmCell::forward(const Tensor& x, RecurrentState& state, bool record) {
  Tensor xin = x;
  xin.reshape({x.n(), static_cast<int>(x.size() / x.n()), 1, 1});
  Tensor pre = gates_.forward(concat_channels(xin, state.h), record);
  Saved s;
  Tensor c, h;
  gates_forward(pre, state.c, s.gates, c, s.tanh_c, h);
  if (record) {
    s.c_prev = std::move(state.c);
    tape_.push_back(std::move(s));
  }
  state.c = std::move(c);
  state.h = h;
  return h;
}

Tensor LstmCell::backward(const Tensor& gh, RecurrentState& carry) {
  assert(!tape_.empty());
  Saved s = std::move(tape_.back());
  tape_.pop_back();
  Tensor dh = gh;
  add_inplace(dh, carry.h);
  Tensor dpre, dc_prev;
  gates_backward(s.gates, s.c_prev, s.tanh_c, dh, carry.c, dpre, dc_prev);
  Tensor dcat = gates_.backward(dpre);
  Tensor dx, dh_prev;
  split_channels(dcat, in_, dx, dh_prev);
  carry.h = std::move(dh_prev);
  carry.c = std::move(dc_prev);
  return dx;
}

void LstmCell::init(Rng& rng) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(hidden_));
  std::uniform_real_distribution<float> dist(-bound, bound);
  for (float& v : gates_.weight().value) v = dist(rng);
  std::fill(gates_.bias().value.begin(), gates_.bias().value.end(), 0.0f);
  set_forget_bias(gates_.bias(), static_cast<std::size_t>(hidden_), 1.0f);
}

void LstmCell::clear_tape() {
  tape_.clear();
  gates_.clear_tape();
}

ConvLstmCell::ConvLstmCell(const std::string& name, int in_channels, int hidden_channels)
    : in_(in_channels), hidden_(hidden_channels),
      gates_(name + ".gates", ConvGeometry{in_channels + hidden_channels, 4 * hidden_channels, 3, 1}) {}

RecurrentState ConvLstmCell::zero_state(int batch, int height, int width) const {
  return {Tensor(batch, hidden_, height, width), Tensor(batch, hidden_, height, width)};
}

Tensor ConvLstmCell::forward(const Tensor& x, RecurrentState& state, bool record) {
  Tensor pre = gates_.forward(concat_channels(x, state.h), record);
  Saved s;
  Tensor c, h;
  gates_forward(pre, state.c, s.gates, c, s.tanh_c, h);
  if (record) {
    s.c_prev = std::move(state.c);
    tape_.push_back(std::move(s));
  }
  state.c = std::move(c);
  state.h = h;
  return h;
}

Tensor ConvLstmCell::backward(const Tensor& gh, RecurrentState& carry) {
  assert(!tape_.empty());
  Saved s = std::move(tape_.back());
  tape_.pop_back();
  Tensor dh = gh;
  add_inplace(dh, carry.h);
  Tensor dpre, dc_prev;
  gates_backward(s.gates, s.c_prev, s.tanh_c, dh, carry.c, dpre, dc_prev);
  Tensor dcat = gates_.backward(dpre);
  Tensor dx, dh_prev;
  split_channels(dcat, in_, dx, dh_prev);
  carry.h = std::move(dh_prev);
  carry.c = std::move(dc_prev);
  return dx;
}

void ConvLstmCell::init(Rng& rng) {
  gates_.init(rng, 1.0f);
  const std::size_t block = static_cast<std::size_t>(hidden_);
  set_forget_bias(gates_.bias(), block, 1.0f);
}

void ConvLstmCell::clear_tape() {
  tape_.clear();
  gates_.clear_tape();
}

}  // namespace motion6d::nn
