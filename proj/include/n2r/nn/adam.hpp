#pragma once

#include "n2r/nn/unet.hpp"

#include <map>
#include <string>
#include <vector>

namespace n2r::nn {

struct AdamConfig
{
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct OptimState
{
  AdamConfig cfg;
  long step = 0;
  std::map<std::string, std::vector<T>> m;
  std::map<std::string, std::vector<T>> v;
};

// Bias-corrected Adam update over every parameter of `p`. Throws UsageError
// if a parameter has no gradient; gradients are left in place.
template <typename T>
void adam_step(ModelParams<T> &p, OptimState<T> &s);

} // namespace n2r::nn
