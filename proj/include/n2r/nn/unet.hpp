#pragma once

#include "n2r/nn/tensor.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace n2r::nn {

struct UNetConfig
{
  int depth = 4;         // number of pooling levels
  int base_channels = 32; // output channels of the first convolution
  int in_channels = 2;   // real, imaginary
  int out_channels = 2;
  double leaky_slope = 0.2;
};

// Named parameter bundle. Names are canonical and stable across
// serialisation, e.g. "enc0.conv1.weight", "up1.bias", "final.weight".
template <typename T>
class ModelParams
{
public:
  ModelParams() = default;
  explicit ModelParams(UNetConfig cfg)
    : cfg_{cfg}
  {
  }

  [[nodiscard]] UNetConfig const &config() const { return cfg_; }
  [[nodiscard]] std::vector<std::string> const &names() const { return order_; }
  [[nodiscard]] Tensor<T> const &at(std::string const &name) const;
  [[nodiscard]] Tensor<T> &at(std::string const &name);
  [[nodiscard]] bool contains(std::string const &name) const { return tensors_.count(name) != 0; }
  void add(std::string name, Tensor<T> t);

  [[nodiscard]] std::size_t parameter_count() const;
  void zero_grad();
  // Independent copy (fresh leaves, same values).
  [[nodiscard]] ModelParams clone() const;
  template <typename U>
  [[nodiscard]] ModelParams<U> cast() const;

private:
  UNetConfig cfg_;
  std::vector<std::string> order_;
  std::map<std::string, Tensor<T>> tensors_;
};

// Kaiming fan-in initialisation with the seedable generator; biases and
// normalisation offsets start at zero, normalisation gains at one.
template <typename T>
ModelParams<T> init_unet(UNetConfig const &cfg, std::uint64_t seed);

// Encoder (conv block, pool) x depth, bottleneck block, decoder
// (up-conv + skip concat, conv block) x depth, then a 1x1 projection.
// x is [in_channels, H, W] with H, W divisible by 2^depth.
template <typename T>
Tensor<T> unet_forward(ModelParams<T> const &p, Tensor<T> const &x);

} // namespace n2r::nn
