#pragma once

// Compute kernels for the estimator networks. Two implementations share one
// signature set:
//   nn::parallel  - im2col + Eigen GEMM, OpenMP over batch samples (production path)
//   nn::reference - direct serial loops in double precision (test oracle)
//
// Convolutions use square kernels, zero padding k/2 and weights laid out
// [cout][cin][k][k]. Backward functions overwrite the input gradient and
// accumulate into the weight and bias gradients.

#include "motion6d/nn/tensor.hpp"

#include <span>

namespace motion6d::nn {

struct ConvGeometry {
  int cin = 0;
  int cout = 0;
  int kernel = 3;
  int stride = 1;

  int pad() const { return kernel / 2; }
  int out_extent(int in) const { return (in + 2 * pad() - kernel) / stride + 1; }
  std::size_t weight_count() const { return static_cast<std::size_t>(cout) * cin * kernel * kernel; }
};

namespace parallel {
void conv2d_forward(const ConvGeometry& g, const Tensor& x, std::span<const float> w, std::span<const float> b,
                    Tensor& y);
void conv2d_backward(const ConvGeometry& g, const Tensor& x, std::span<const float> w, const Tensor& gy, Tensor* gx,
                     std::span<float> gw, std::span<float> gb);
// x: N x in (H = W = 1), w: [out][in]
void linear_forward(const Tensor& x, std::span<const float> w, std::span<const float> b, int out, Tensor& y);
void linear_backward(const Tensor& x, std::span<const float> w, const Tensor& gy, Tensor* gx, std::span<float> gw,
                     std::span<float> gb);
void leaky_relu_forward(const Tensor& x, float slope, Tensor& y);
// y is the forward output; sign(y) == sign(x) for slope > 0
void leaky_relu_backward(const Tensor& y, const Tensor& gy, float slope, Tensor& gx);
void upsample2x_forward(const Tensor& x, Tensor& y);
void upsample2x_backward(const Tensor& gy, Tensor& gx);
}  // namespace parallel

namespace reference {
void conv2d_forward(const ConvGeometry& g, const Tensor& x, std::span<const float> w, std::span<const float> b,
                    Tensor& y);
void conv2d_backward(const ConvGeometry& g, const Tensor& x, std::span<const float> w, const Tensor& gy, Tensor* gx,
                     std::span<float> gw, std::span<float> gb);
// x: N x in (H = W = 1), w: [out][in]
void linear_forward(const Tensor& x, std::span<const float> w, std::span<const float> b, int out, Tensor& y);
void linear_backward(const Tensor& x, std::span<const float> w, const Tensor& gy, Tensor* gx, std::span<float> gw,
                     std::span<float> gb);
void leaky_relu_forward(const Tensor& x, float slope, Tensor& y);
// y is the forward output; sign(y) == sign(x) for slope > 0
void leaky_relu_backward(const Tensor& y, const Tensor& gy, float slope, Tensor& gx);
void upsample2x_forward(const Tensor& x, Tensor& y);
void upsample2x_backward(const Tensor& gy, Tensor& gx);
}  // namespace reference

}  // namespace motion6d::nn
