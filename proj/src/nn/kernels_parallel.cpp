#include "motion6d/nn/kernels.hpp"

#include <Eigen/Core>

#include <cstring>
#include <vector>

namespace motion6d::nn::parallel {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRow = Eigen::Map<RowMat>;
using ConstMapRow = Eigen::Map<const RowMat>;

// Scratch buffers reused across calls; kernels are not re-entrant per thread.
std::vector<float>& scratch(int slot) {
  thread_local std::vector<float> buffers[3];
  return buffers[slot];
}

// cols[(ci*k + ky)*k + kx][n*P + p]
void im2col(const ConvGeometry& g, const Tensor& x, int ho, int wo, float* cols) {
  const int N = x.n(), H = x.h(), W = x.w(), k = g.kernel, s = g.stride, pad = g.pad();
  const std::size_t P = static_cast<std::size_t>(ho) * wo;
  const std::size_t NP = P * N;
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int ci = 0; ci < g.cin; ++ci) {
      const float* src = x.sample(n) + static_cast<std::size_t>(ci) * H * W;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          float* dst = cols + (static_cast<std::size_t>(ci * k + ky) * k + kx) * NP + n * P;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * s - pad + ky;
            float* row = dst + static_cast<std::size_t>(oy) * wo;
            if (iy < 0 || iy >= H) {
              std::memset(row, 0, sizeof(float) * wo);
              continue;
            }
            const float* srow = src + static_cast<std::size_t>(iy) * W;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * s - pad + kx;
              row[ox] = (ix >= 0 && ix < W) ? srow[ix] : 0.0f;
            }
          }
        }
      }
    }
  }
}

void col2im(const ConvGeometry& g, const float* cols, int ho, int wo, Tensor& gx) {
  const int N = gx.n(), H = gx.h(), W = gx.w(), k = g.kernel, s = g.stride, pad = g.pad();
  const std::size_t P = static_cast<std::size_t>(ho) * wo;
  const std::size_t NP = P * N;
  gx.fill(0.0f);
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int ci = 0; ci < g.cin; ++ci) {
      float* dst = gx.sample(n) + static_cast<std::size_t>(ci) * H * W;
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const float* src = cols + (static_cast<std::size_t>(ci * k + ky) * k + kx) * NP + n * P;
          for (int oy = 0; oy < ho; ++oy) {
            const int iy = oy * s - pad + ky;
            if (iy < 0 || iy >= H) continue;
            const float* row = src + static_cast<std::size_t>(oy) * wo;
            float* drow = dst + static_cast<std::size_t>(iy) * W;
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * s - pad + kx;
              if (ix >= 0 && ix < W) drow[ix] += row[ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace

void conv2d_forward(const ConvGeometry& g, const Tensor& x, std::span<const float> w, std::span<const float> b,
                    Tensor& y) {
  const int N = x.n();
  const int ho = g.out_extent(x.h());
  const int wo = g.out_extent(x.w());
  const int K = g.cin * g.kernel * g.kernel;
  const std::size_t P = static_cast<std::size_t>(ho) * wo;
  const std::size_t NP = P * N;

  auto& cols = scratch(0);
  cols.resize(static_cast<std::size_t>(K) * NP);
  im2col(g, x, ho, wo, cols.data());

  auto& out = scratch(1);
  out.resize(static_cast<std::size_t>(g.cout) * NP);
  MapRow Y(out.data(), g.cout, static_cast<Eigen::Index>(NP));
  Y.noalias() = ConstMapRow(w.data(), g.cout, K) * ConstMapRow(cols.data(), K, static_cast<Eigen::Index>(NP));

  if (y.shape() != Shape{N, g.cout, ho, wo}) y = Tensor(N, g.cout, ho, wo);
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int co = 0; co < g.cout; ++co) {
      const float* src = out.data() + co * NP + n * P;
      float* dst = y.sample(n) + co * P;
      const float bias = b[co];
      for (std::size_t p = 0; p < P; ++p) dst[p] = src[p] + bias;
    }
  }
}

void conv2d_backward(const ConvGeometry& g, const Tensor& x, std::span<const float> w, const Tensor& gy, Tensor* gx,
                     std::span<float> gw, std::span<float> gb) {
  const int N = x.n();
  const int ho = gy.h();
  const int wo = gy.w();
  const int K = g.cin * g.kernel * g.kernel;
  const std::size_t P = static_cast<std::size_t>(ho) * wo;
  const std::size_t NP = P * N;

  auto& gyc = scratch(1);
  gyc.resize(static_cast<std::size_t>(g.cout) * NP);
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int co = 0; co < g.cout; ++co) {
      std::memcpy(gyc.data() + co * NP + n * P, gy.sample(n) + co * P, sizeof(float) * P);
    }
  }
  ConstMapRow GY(gyc.data(), g.cout, static_cast<Eigen::Index>(NP));
  Eigen::Map<Eigen::VectorXf>(gb.data(), g.cout) += GY.rowwise().sum();

  auto& cols = scratch(0);
  cols.resize(static_cast<std::size_t>(K) * NP);
  im2col(g, x, ho, wo, cols.data());
  MapRow(gw.data(), g.cout, K).noalias() += GY * ConstMapRow(cols.data(), K, static_cast<Eigen::Index>(NP)).transpose();

  if (gx != nullptr) {
    auto& gcols = scratch(2);
    gcols.resize(static_cast<std::size_t>(K) * NP);
    MapRow(gcols.data(), K, static_cast<Eigen::Index>(NP)).noalias() =
        ConstMapRow(w.data(), g.cout, K).transpose() * GY;
    if (gx->shape() != x.shape()) *gx = Tensor(x.shape());
    col2im(g, gcols.data(), ho, wo, *gx);
  }
}

void linear_forward(const Tensor& x, std::span<const float> w, std::span<const float> b, int out, Tensor& y) {
  const int N = x.n();
  const int in = static_cast<int>(x.size() / N);
  if (y.shape() != Shape{N, out, 1, 1}) y = Tensor(N, out);
  MapRow Y(y.data(), N, out);
  Y.noalias() = ConstMapRow(x.data(), N, in) * ConstMapRow(w.data(), out, in).transpose();
  Y.rowwise() += Eigen::Map<const Eigen::RowVectorXf>(b.data(), out);
}

void linear_backward(const Tensor& x, std::span<const float> w, const Tensor& gy, Tensor* gx, std::span<float> gw,
                     std::span<float> gb) {
  const int N = x.n();
  const int in = static_cast<int>(x.size() / N);
  const int out = gy.c();
  ConstMapRow GY(gy.data(), N, out);
  ConstMapRow X(x.data(), N, in);
  MapRow(gw.data(), out, in).noalias() += GY.transpose() * X;
  Eigen::Map<Eigen::RowVectorXf>(gb.data(), out) += GY.colwise().sum();
  if (gx != nullptr) {
    if (gx->shape() != x.shape()) *gx = Tensor(x.shape());
    MapRow(gx->data(), N, in).noalias() = GY * ConstMapRow(w.data(), out, in);
  }
}

void leaky_relu_forward(const Tensor& x, float slope, Tensor& y) {
  if (y.shape() != x.shape()) y = Tensor(x.shape());
  const std::size_t n = x.size();
  const float* xs = x.data();
  float* ys = y.data();
#pragma omp parallel for simd schedule(static)
  for (std::size_t i = 0; i < n; ++i) ys[i] = xs[i] > 0.0f ? xs[i] : slope * xs[i];
}

void leaky_relu_backward(const Tensor& y, const Tensor& gy, float slope, Tensor& gx) {
  if (gx.shape() != y.shape()) gx = Tensor(y.shape());
  const std::size_t n = y.size();
  const float* ys = y.data();
  const float* gs = gy.data();
  float* out = gx.data();
#pragma omp parallel for simd schedule(static)
  for (std::size_t i = 0; i < n; ++i) out[i] = ys[i] > 0.0f ? gs[i] : slope * gs[i];
}

void upsample2x_forward(const Tensor& x, Tensor& y) {
  const int N = x.n(), C = x.c(), H = x.h(), W = x.w();
  if (y.shape() != Shape{N, C, 2 * H, 2 * W}) y = Tensor(N, C, 2 * H, 2 * W);
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      for (int i = 0; i < 2 * H; ++i) {
        for (int j = 0; j < 2 * W; ++j) y.at(n, c, i, j) = x.at(n, c, i / 2, j / 2);
      }
    }
  }
}

void upsample2x_backward(const Tensor& gy, Tensor& gx) {
  const int N = gy.n(), C = gy.c(), H = gy.h() / 2, W = gy.w() / 2;
  if (gx.shape() != Shape{N, C, H, W}) gx = Tensor(N, C, H, W);
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int c = 0; c < C; ++c) {
      for (int i = 0; i < H; ++i) {
        for (int j = 0; j < W; ++j) {
          gx.at(n, c, i, j) = gy.at(n, c, 2 * i, 2 * j) + gy.at(n, c, 2 * i, 2 * j + 1) +
                              gy.at(n, c, 2 * i + 1, 2 * j) + gy.at(n, c, 2 * i + 1, 2 * j + 1);
        }
      }
    }
  }
}

}  // namespace motion6d::nn::parallel
