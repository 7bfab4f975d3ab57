#pragma once

#include "n2r/nn/tensor.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace n2r::nn {

struct GradCheckResult
{
  std::string name;
  int coords = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

using ScalarFn = std::function<Tensor<double>(std::vector<Tensor<double>> const &)>;

// Compares reverse-mode gradients against central finite differences at
// `ncoords` coordinates drawn uniformly from the inputs that require grad.
// rel = |a - n| / max(|a|, |n|, 1e-6).
GradCheckResult gradient_check(std::string name,
                               ScalarFn const &f,
                               std::vector<Tensor<double>> inputs,
                               int ncoords,
                               std::uint64_t seed,
                               double eps = 1e-4,
                               double tol = 1e-3);

// Every differentiable op plus a depth-2 / base-4 U-Net on a 2x16x16 input.
std::vector<GradCheckResult> standard_gradient_checks(std::uint64_t seed, int ncoords = 50);

} // namespace n2r::nn
