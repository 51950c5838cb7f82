#include "motion6d/nn/kernels.hpp"

#include <vector>

namespace motion6d::nn::reference {

void conv2d_forward(const ConvGeometry& g, const Tensor& x, std::span<const float> w, std::span<const float> b,
                    Tensor& y) {
  const int N = x.n(), H = x.h(), W = x.w(), k = g.kernel, pad = g.pad();
  const int ho = g.out_extent(H), wo = g.out_extent(W);
  y = Tensor(N, g.cout, ho, wo);
  for (int n = 0; n < N; ++n) {
    for (int co = 0; co < g.cout; ++co) {
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          double acc = b[co];
          for (int ci = 0; ci < g.cin; ++ci) {
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * g.stride - pad + ky;
                const int ix = ox * g.stride - pad + kx;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                acc += static_cast<double>(w[((co * g.cin + ci) * k + ky) * k + kx]) * x.at(n, ci, iy, ix);
              }
            }
          }
          y.at(n, co, oy, ox) = static_cast<float>(acc);
        }
      }
    }
  }
}

void conv2d_backward(const ConvGeometry& g, const Tensor& x, std::span<const float> w, const Tensor& gy, Tensor* gx,
                     std::span<float> gw, std::span<float> gb) {
  const int N = x.n(), H = x.h(), W = x.w(), k = g.kernel, pad = g.pad();
  const int ho = gy.h(), wo = gy.w();
  std::vector<double> gxd(x.size(), 0.0);
  std::vector<double> gwd(gw.size(), 0.0);
  std::vector<double> gbd(gb.size(), 0.0);
  for (int n = 0; n < N; ++n) {
    for (int co = 0; co < g.cout; ++co) {
      for (int oy = 0; oy < ho; ++oy) {
        for (int ox = 0; ox < wo; ++ox) {
          const double d = gy.at(n, co, oy, ox);
          gbd[co] += d;
          for (int ci = 0; ci < g.cin; ++ci) {
            for (int ky = 0; ky < k; ++ky) {
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * g.stride - pad + ky;
                const int ix = ox * g.stride - pad + kx;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                const std::size_t wi = ((co * g.cin + ci) * k + ky) * k + kx;
                gwd[wi] += d * x.at(n, ci, iy, ix);
                gxd[((static_cast<std::size_t>(n) * g.cin + ci) * H + iy) * W + ix] += d * w[wi];
              }
            }
          }
        }
      }
    }
  }
  for (std::size_t i = 0; i < gw.size(); ++i) gw[i] += static_cast<float>(gwd[i]);
  for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += static_cast<float>(gbd[i]);
  if (gx != nullptr) {
    *gx = Tensor(x.shape());
    for (std::size_t i = 0; i < gxd.size(); ++i) (*gx)[i] = static_cast<float>(gxd[i]);
  }
}

void linear_forward(const Tensor& x, std::span<const float> w, std::span<const float> b, int out, Tensor& y) {
  const int N = x.n();
  const int in = static_cast<int>(x.size() / N);
  y = Tensor(N, out);
  for (int n = 0; n < N; ++n) {
    for (int o = 0; o < out; ++o) {
      double acc = b[o];
      for (int i = 0; i < in; ++i) acc += static_cast<double>(w[o * in + i]) * x[n * in + i];
      y[n * out + o] = static_cast<float>(acc);
    }
  }
}

void linear_backward(const Tensor& x, std::span<const float> w, const Tensor& gy, Tensor* gx, std::span<float> gw,
                     std::span<float> gb) {
  const int N = x.n();
  const int in = static_cast<int>(x.size() / N);
  const int out = gy.c();
  if (gx != nullptr) *gx = Tensor(x.shape());
  for (int n = 0; n < N; ++n) {
    for (int o = 0; o < out; ++o) {
      const float d = gy[n * out + o];
      gb[o] += d;
      for (int i = 0; i < in; ++i) {
        gw[o * in + i] += d * x[n * in + i];
      }
    }
    if (gx != nullptr) {
      for (int i = 0; i < in; ++i) {
        double acc = 0.0;
        for (int o = 0; o < out; ++o) acc += static_cast<double>(gy[n * out + o]) * w[o * in + i];
        (*gx)[n * in + i] = static_cast<float>(acc);
      }
    }
  }
}

void leaky_relu_forward(const Tensor& x, float slope, Tensor& y) {
  y = Tensor(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0f ? x[i] : slope * x[i];
}

void leaky_relu_backward(const Tensor& y, const Tensor& gy, float slope, Tensor& gx) {
  gx = Tensor(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) gx[i] = y[i] > 0.0f ? gy[i] : slope * gy[i];
}

void upsample2x_forward(const Tensor& x, Tensor& y) {
  y = Tensor(x.n(), x.c(), 2 * x.h(), 2 * x.w());
  for (int n = 0; n < y.n(); ++n)
    for (int c = 0; c < y.c(); ++c)
      for (int i = 0; i < y.h(); ++i)
        for (int j = 0; j < y.w(); ++j) y.at(n, c, i, j) = x.at(n, c, i / 2, j / 2);
}

void upsample2x_backward(const Tensor& gy, Tensor& gx) {
  gx = Tensor(gy.n(), gy.c(), gy.h() / 2, gy.w() / 2);
  for (int n = 0; n < gy.n(); ++n)
    for (int c = 0; c < gy.c(); ++c)
      for (int i = 0; i < gy.h(); ++i)
        for (int j = 0; j < gy.w(); ++j) gx.at(n, c, i / 2, j / 2) += gy.at(n, c, i, j);
}

}  // namespace motion6d::nn::reference
