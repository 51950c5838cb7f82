#pragma once

#include "motion6d/nn/layers.hpp"

#include <string>
#include <vector>

namespace motion6d::nn {

/// RMSProp with L2 weight decay folded into the gradient, matching the
/// common torch.optim.RMSprop defaults (alpha 0.99, eps 1e-8).
class RmsProp {
 public:
  struct Options {
    double lr = 2e-4;
    double alpha = 0.99;
    double eps = 1e-8;
    double weight_decay = 1e-6;
  };

  RmsProp(ParamList params, Options opts);

  void set_lr(double lr) { opts_.lr = lr; }
  double lr() const { return opts_.lr; }
  void zero_grad();
  void step();

 private:
  ParamList params_;
  Options opts_;
  std::vector<std::vector<float>> square_avg_;
};

/// Rescales all gradients so their global L2 norm is at most max_norm; returns the pre-clip norm.
double clip_grad_norm(const ParamList& params, double max_norm);

bool grads_finite(const ParamList& params);

// Self-describing checkpoint: a text header (format tag, architecture string,
// parameter names and sizes) followed by raw little-endian float32 blocks.
void save_checkpoint(const std::string& path, const std::string& architecture, const ParamList& params);
/// Loads into `params`; throws IoError on architecture, name or size mismatch.
void load_checkpoint(const std::string& path, const std::string& architecture, const ParamList& params);
std::string read_checkpoint_architecture(const std::string& path);

}  // namespace motion6d::nn
