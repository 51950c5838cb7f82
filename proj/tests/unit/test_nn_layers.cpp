#include "doctest.h"

#include "motion6d/nn/layers.hpp"
#include "motion6d/nn/models.hpp"
#include "motion6d/nn/optim.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>

using namespace motion6d::nn;

namespace {

Tensor random_tensor(Shape s, std::mt19937_64& rng, float scale = 1.0f) {
  Tensor t(s);
  std::uniform_real_distribution<float> u(-scale, scale);
  for (float& v : t.span()) v = u(rng);
  return t;
}

double dot(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return s;
}

// Compares analytic parameter gradients against central differences of `loss`
// for a handful of randomly chosen coordinates.
void check_param_grads(const ParamList& params, const std::function<double()>& loss, std::mt19937_64& rng,
                       int probes, float step, double tol) {
  for (int k = 0; k < probes; ++k) {
    Param& p = *params[std::uniform_int_distribution<std::size_t>(0, params.size() - 1)(rng)];
    const std::size_t i = std::uniform_int_distribution<std::size_t>(0, p.size() - 1)(rng);
    const float orig = p.value[i];
    p.value[i] = orig + step;
    const double lp = loss();
    p.value[i] = orig - step;
    const double lm = loss();
    p.value[i] = orig;
    const double numeric = (lp - lm) / (2.0 * step);
    const double analytic = p.grad[i];
    INFO(p.name, "[", i, "] numeric=", numeric, " analytic=", analytic);
    CHECK(std::abs(numeric - analytic) <= tol * std::max(1.0, std::abs(numeric)));
  }
}

}  // namespace

TEST_CASE("LSTM cell backpropagates through time") {
  std::mt19937_64 rng(1);
  LstmCell cell("lstm", 5, 4);
  Rng init(2);
  cell.init(init);
  ParamList params;
  cell.collect(params);
  const int T = 4;
  std::vector<Tensor> xs, rs;
  for (int t = 0; t < T; ++t) {
    xs.push_back(random_tensor({3, 5, 1, 1}, rng));
    rs.push_back(random_tensor({3, 4, 1, 1}, rng));
  }
  auto loss = [&]() {
    RecurrentState s = cell.zero_state(3);
    double l = 0.0;
    for (int t = 0; t < T; ++t) l += dot(cell.forward(xs[t], s, false), rs[t]);
    return l;
  };
  for (Param* p : params) p->zero_grad();
  RecurrentState s = cell.zero_state(3);
  for (int t = 0; t < T; ++t) cell.forward(xs[t], s, true);
  RecurrentState carry = cell.zero_state(3);
  std::vector<Tensor> gx(T);
  for (int t = T - 1; t >= 0; --t) gx[t] = cell.backward(rs[t], carry);
  check_param_grads(params, loss, rng, 30, 1e-2f, 2e-2);

  // input gradient at t = 0 by finite differences
  for (int i = 0; i < 5; ++i) {
    const float orig = xs[0][i];
    xs[0][i] = orig + 1e-2f;
    const double lp = loss();
    xs[0][i] = orig - 1e-2f;
    const double lm = loss();
    xs[0][i] = orig;
    CHECK(gx[0][i] == doctest::Approx((lp - lm) / 2e-2).epsilon(2e-2).scale(1.0));
  }
}

TEST_CASE("ConvLSTM cell backpropagates through time") {
  std::mt19937_64 rng(3);
  ConvLstmCell cell("clstm", 2, 3);
  Rng init(4);
  cell.init(init);
  ParamList params;
  cell.collect(params);
  const int T = 3;
  std::vector<Tensor> xs, rs;
  for (int t = 0; t < T; ++t) {
    xs.push_back(random_tensor({2, 2, 4, 4}, rng));
    rs.push_back(random_tensor({2, 3, 4, 4}, rng));
  }
  auto loss = [&]() {
    RecurrentState s = cell.zero_state(2, 4, 4);
    double l = 0.0;
    for (int t = 0; t < T; ++t) l += dot(cell.forward(xs[t], s, false), rs[t]);
    return l;
  };
  for (Param* p : params) p->zero_grad();
  RecurrentState s = cell.zero_state(2, 4, 4);
  for (int t = 0; t < T; ++t) cell.forward(xs[t], s, true);
  RecurrentState carry = cell.zero_state(2, 4, 4);
  for (int t = T - 1; t >= 0; --t) cell.backward(rs[t], carry);
  check_param_grads(params, loss, rng, 30, 1e-2f, 2e-2);
}

TEST_CASE("parameter counts are close to the published budgets") {
  SegmentationNet seg;
  const auto nseg = count_parameters(seg.parameters());
  MotionBackbone mot;
  const auto nmot = count_parameters(mot.parameters());
  MESSAGE("segmentation params ", nseg, ", motion params ", nmot);
  CHECK(nseg > 1.2e6);
  CHECK(nseg < 1.8e6);
  CHECK(nmot > 0.56e6);
  CHECK(nmot < 0.84e6);
}

TEST_CASE("segmentation net gradients through two recurrent steps") {
  std::mt19937_64 rng(5);
  SegmentationNet net(16);
  net.init(6);
  const auto params = net.parameters();
  std::vector<Tensor> xs = {random_tensor({2, 7, 16, 16}, rng), random_tensor({2, 7, 16, 16}, rng)};
  std::vector<Tensor> rs = {random_tensor({2, 1, 16, 16}, rng), random_tensor({2, 1, 16, 16}, rng)};
  auto loss = [&]() {
    net.reset_state(2);
    double l = 0.0;
    for (int t = 0; t < 2; ++t) l += dot(net.step(xs[t], false), rs[t]);
    return l;
  };
  for (Param* p : params) p->zero_grad();
  net.reset_state(2);
  for (int t = 0; t < 2; ++t) net.step(xs[t], true);
  net.begin_backward();
  for (int t = 1; t >= 0; --t) net.backward_step(rs[t]);
  check_param_grads(params, loss, rng, 40, 5e-3f, 5e-2);
}

TEST_CASE("motion backbone gradients through two recurrent steps") {
  std::mt19937_64 rng(7);
  MotionBackbone net;
  net.init(8, 1.0f);
  const auto params = net.parameters();
  std::vector<Tensor> ps, cs, rs;
  for (int t = 0; t < 2; ++t) {
    ps.push_back(random_tensor({2, 6, 64, 64}, rng));
    cs.push_back(random_tensor({2, 6, 64, 64}, rng));
    rs.push_back(random_tensor({2, 3, 1, 1}, rng));
  }
  auto loss = [&]() {
    net.reset_state(2);
    double l = 0.0;
    for (int t = 0; t < 2; ++t) l += dot(net.step(ps[t], cs[t], false), rs[t]);
    return l;
  };
  for (Param* p : params) p->zero_grad();
  net.reset_state(2);
  for (int t = 0; t < 2; ++t) net.step(ps[t], cs[t], true);
  net.begin_backward();
  for (int t = 1; t >= 0; --t) net.backward_step(rs[t]);
  check_param_grads(params, loss, rng, 40, 5e-3f, 5e-2);
}

TEST_CASE("rmsprop step and gradient clipping") {
  Param p("p", 2);
  p.value = {1.0f, -1.0f};
  p.grad = {3.0f, 4.0f};
  ParamList ps = {&p};
  CHECK(clip_grad_norm(ps, 1.0) == doctest::Approx(5.0));
  CHECK(p.grad[0] == doctest::Approx(0.6f));
  CHECK(p.grad[1] == doctest::Approx(0.8f));

  RmsProp opt(ps, {.lr = 0.01, .alpha = 0.99, .eps = 1e-8, .weight_decay = 0.0});
  opt.step();
  // first step: v = 0.01 g^2, update = lr * g / (0.1 |g|) = 10 lr
  CHECK(p.value[0] == doctest::Approx(1.0 - 0.1));
  CHECK(p.value[1] == doctest::Approx(-1.0 - 0.1));
}

TEST_CASE("checkpoint round trip and mismatch detection") {
  MotionBackbone a("trans"), b("trans"), c("rot");
  a.init(1);
  b.init(2);
  const auto path = (std::filesystem::temp_directory_path() / "motion6d_ckpt_test.bin").string();
  save_checkpoint(path, a.architecture(), a.parameters());
  load_checkpoint(path, b.architecture(), b.parameters());
  const auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) REQUIRE(pa[i]->value == pb[i]->value);
  CHECK(read_checkpoint_architecture(path) == a.architecture());
  CHECK_THROWS(load_checkpoint(path, c.architecture(), c.parameters()));
  std::filesystem::remove(path);
}
