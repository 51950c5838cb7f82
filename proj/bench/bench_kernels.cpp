// Parallel kernels against the serial reference, plus full recurrent steps of
// the three networks at training batch size.
#include "motion6d/nn/kernels.hpp"
#include "motion6d/nn/models.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

using namespace motion6d::nn;

namespace {

struct ConvCase {
  ConvGeometry g;
  Tensor x;
  std::vector<float> w, b, gw, gb;
  Tensor y, gx;
};

ConvCase make_case(int batch, int cin, int cout, int extent, int stride) {
  ConvCase c{{cin, cout, 3, stride}, Tensor(batch, cin, extent, extent), {}, {}, {}, {}, {}, {}};
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(-1, 1);
  for (float& v : c.x.span()) v = u(rng);
  c.w.resize(c.g.weight_count());
  for (float& v : c.w) v = u(rng);
  c.b.assign(cout, 0.1f);
  c.gw.assign(c.w.size(), 0.0f);
  c.gb.assign(cout, 0.0f);
  return c;
}

template <bool Parallel>
void BM_ConvForward(benchmark::State& st) {
  ConvCase c = make_case(16, static_cast<int>(st.range(0)), static_cast<int>(st.range(1)),
                         static_cast<int>(st.range(2)), 1);
  for (auto _ : st) {
    if constexpr (Parallel) {
      parallel::conv2d_forward(c.g, c.x, c.w, c.b, c.y);
    } else {
      reference::conv2d_forward(c.g, c.x, c.w, c.b, c.y);
    }
    benchmark::DoNotOptimize(c.y.span().data());
  }
}

template <bool Parallel>
void BM_ConvBackward(benchmark::State& st) {
  ConvCase c = make_case(16, static_cast<int>(st.range(0)), static_cast<int>(st.range(1)),
                         static_cast<int>(st.range(2)), 1);
  parallel::conv2d_forward(c.g, c.x, c.w, c.b, c.y);
  for (auto _ : st) {
    if constexpr (Parallel) {
      parallel::conv2d_backward(c.g, c.x, c.w, c.y, &c.gx, c.gw, c.gb);
    } else {
      reference::conv2d_backward(c.g, c.x, c.w, c.y, &c.gx, c.gw, c.gb);
    }
    benchmark::DoNotOptimize(c.gx.span().data());
  }
}

void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({16, 16, 32})->Args({64, 64, 8})->Args({256, 512, 4})->Unit(benchmark::kMillisecond);
}

void BM_SegmentationStep(benchmark::State& st) {
  SegmentationNet net;
  net.init(1);
  Tensor x(16, SegmentationNet::kInputChannels, 64, 64);
  x.fill(0.5f);
  const bool train = st.range(0) != 0;
  Tensor g(16, 1, 64, 64);
  g.fill(0.01f);
  for (auto _ : st) {
    net.reset_state(16);
    net.step(x, train);
    if (train) {
      net.begin_backward();
      net.backward_step(g);
    }
  }
}

void BM_MotionStep(benchmark::State& st) {
  MotionBackbone net;
  net.init(1);
  Tensor a(16, 6, 64, 64), b(16, 6, 64, 64), g(16, 3, 1, 1);
  a.fill(0.3f);
  b.fill(0.6f);
  g.fill(0.01f);
  const bool train = st.range(0) != 0;
  for (auto _ : st) {
    net.reset_state(16);
    net.step(a, b, train);
    if (train) {
      net.begin_backward();
      net.backward_step(g);
    }
  }
}

}  // namespace

BENCHMARK(BM_ConvForward<true>)->Apply(conv_args);
BENCHMARK(BM_ConvForward<false>)->Apply(conv_args);
BENCHMARK(BM_ConvBackward<true>)->Apply(conv_args);
BENCHMARK(BM_ConvBackward<false>)->Apply(conv_args);
BENCHMARK(BM_SegmentationStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MotionStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
