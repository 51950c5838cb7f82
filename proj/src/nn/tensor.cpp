#include "motion6d/nn/tensor.hpp"

#include <cstring>
#include <stdexcept>

namespace motion6d::nn {

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
    throw std::invalid_argument("concat_channels: shape mismatch");
  }
  Tensor out(a.n(), a.c() + b.c(), a.h(), a.w());
  const std::size_t sa = a.size() / a.n();
  const std::size_t sb = b.size() / b.n();
  for (int n = 0; n < a.n(); ++n) {
    std::memcpy(out.sample(n), a.sample(n), sa * sizeof(float));
    std::memcpy(out.sample(n) + sa, b.sample(n), sb * sizeof(float));
  }
  return out;
}

void split_channels(const Tensor& x, int ca, Tensor& a, Tensor& b) {
  const int cb = x.c() - ca;
  a = Tensor(x.n(), ca, x.h(), x.w());
  b = Tensor(x.n(), cb, x.h(), x.w());
  const std::size_t sa = a.size() / x.n();
  const std::size_t sb = b.size() / x.n();
  for (int n = 0; n < x.n(); ++n) {
    std::memcpy(a.sample(n), x.sample(n), sa * sizeof(float));
    std::memcpy(b.sample(n), x.sample(n) + sa, sb * sizeof(float));
  }
}

void add_inplace(Tensor& y, const Tensor& x) {
  if (y.size() != x.size()) {
    throw std::invalid_argument("add_inplace: size mismatch");
  }
  float* yd = y.data();
  const float* xd = x.data();
  const std::size_t n = y.size();
#pragma omp parallel for simd schedule(static)
  for (std::size_t i = 0; i < n; ++i) yd[i] += xd[i];
}

}  // namespace motion6d::nn
