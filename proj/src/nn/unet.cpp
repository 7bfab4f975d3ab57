#include "n2r/nn/unet.hpp"

#include <cmath>

namespace n2r::nn {

template <typename T>
Tensor<T> const &ModelParams<T>::at(std::string const &name) const
{
  auto it = tensors_.find(name);
  if (it == tensors_.end()) { throw UsageError("ModelParams: no parameter named '" + name + "'"); }
  return it->second;
}

template <typename T>
Tensor<T> &ModelParams<T>::at(std::string const &name)
{
  auto it = tensors_.find(name);
  if (it == tensors_.end()) { throw UsageError("ModelParams: no parameter named '" + name + "'"); }
  return it->second;
}

template <typename T>
void ModelParams<T>::add(std::string name, Tensor<T> t)
{
  if (tensors_.count(name)) { throw UsageError("ModelParams: duplicate parameter '" + name + "'"); }
  order_.push_back(name);
  tensors_.emplace(std::move(name), std::move(t));
}

template <typename T>
std::size_t ModelParams<T>::parameter_count() const
{
  std::size_t n = 0;
  for (auto const &[k, t] : tensors_) {
    n += t.numel();
  }
  return n;
}

template <typename T>
void ModelParams<T>::zero_grad()
{
  for (auto &[k, t] : tensors_) {
    t.zero_grad();
  }
}

template <typename T>
ModelParams<T> ModelParams<T>::clone() const
{
  ModelParams out(cfg_);
  for (auto const &name : order_) {
    auto const &t = tensors_.at(name);
    out.add(name, Tensor<T>(t.shape(), std::vector<T>(t.data().begin(), t.data().end()), t.requires_grad()));
  }
  return out;
}

template <typename T>
template <typename U>
ModelParams<U> ModelParams<T>::cast() const
{
  ModelParams<U> out(cfg_);
  for (auto const &name : order_) {
    auto const &t = tensors_.at(name);
    out.add(name, Tensor<U>(t.shape(), std::vector<U>(t.data().begin(), t.data().end()), t.requires_grad()));
  }
  return out;
}

namespace {

template <typename T>
struct Builder
{
  ModelParams<T> &p;
  Rng &rng;

  void kaiming(std::string const &name, Shape shape, int fan_in)
  {
    double const sd = std::sqrt(2.0 / fan_in);
    std::vector<T> v(numel(shape));
    for (auto &x : v) {
      x = static_cast<T>(sd * rng.normal());
    }
    p.add(name, Tensor<T>(std::move(shape), std::move(v), true));
  }
  void constant(std::string const &name, Shape shape, T value)
  {
    auto const n = numel(shape);
    p.add(name, Tensor<T>(std::move(shape), std::vector<T>(n, value), true));
  }
  void conv(std::string const &prefix, int in, int out, int k)
  {
    kaiming(prefix + ".weight", {out, in, k, k}, in * k * k);
    constant(prefix + ".bias", {out}, T{0});
  }
  void norm(std::string const &prefix, int c)
  {
    constant(prefix + ".gamma", {c}, T{1});
    constant(prefix + ".beta", {c}, T{0});
  }
  void block(std::string const &prefix, int in, int out)
  {
    conv(prefix + ".conv1", in, out, 3);
    norm(prefix + ".norm1", out);
    conv(prefix + ".conv2", out, out, 3);
    norm(prefix + ".norm2", out);
  }
};

template <typename T>
Tensor<T> conv_block(ModelParams<T> const &p, std::string const &prefix, Tensor<T> x, double slope)
{
  for (char const *i : {"1", "2"}) {
    x = conv2d(x, p.at(prefix + ".conv" + i + ".weight"), p.at(prefix + ".conv" + i + ".bias"));
    x = instance_norm(x, p.at(prefix + ".norm" + i + ".gamma"), p.at(prefix + ".norm" + i + ".beta"));
    x = leaky_relu(x, slope);
  }
  return x;
}

} // namespace

template <typename T>
ModelParams<T> init_unet(UNetConfig const &cfg, std::uint64_t seed)
{
  if (cfg.depth < 0 || cfg.base_channels < 1 || cfg.in_channels < 1 || cfg.out_channels < 1) {
    throw ConfigError("init_unet: invalid architecture");
  }
  ModelParams<T> p(cfg);
  Rng rng(seed);
  Builder<T> b{p, rng};
  int in = cfg.in_channels;
  for (int l = 0; l < cfg.depth; ++l) {
    int const out = cfg.base_channels << l;
    b.block("enc" + std::to_string(l), in, out);
    in = out;
  }
  b.block("bottleneck", in, cfg.base_channels << cfg.depth);
  for (int l = cfg.depth - 1; l >= 0; --l) {
    int const hi = cfg.base_channels << (l + 1), lo = cfg.base_channels << l;
    std::string const up = "up" + std::to_string(l);
    b.kaiming(up + ".weight", {hi, lo, 2, 2}, hi);
    b.constant(up + ".bias", {lo}, T{0});
    b.block("dec" + std::to_string(l), 2 * lo, lo);
  }
  b.conv("final", cfg.base_channels, cfg.out_channels, 1);
  return p;
}

template <typename T>
Tensor<T> unet_forward(ModelParams<T> const &p, Tensor<T> const &x)
{
  auto const &cfg = p.config();
  if (!x.defined() || x.shape().size() != 3 || x.dim(0) != cfg.in_channels) {
    throw DimensionError("unet_forward: expected input [" + std::to_string(cfg.in_channels) + ", H, W]");
  }
  int const div = 1 << cfg.depth;
  if (x.dim(1) % div != 0 || x.dim(2) % div != 0) {
    throw DimensionError("unet_forward: spatial size " + to_string(x.shape()) + " not divisible by 2^" +
                         std::to_string(cfg.depth));
  }
  std::vector<Tensor<T>> skips;
  Tensor<T> h = x;
  for (int l = 0; l < cfg.depth; ++l) {
    h = conv_block(p, "enc" + std::to_string(l), h, cfg.leaky_slope);
    skips.push_back(h);
    h = avg_pool2(h);
  }
  h = conv_block(p, "bottleneck", h, cfg.leaky_slope);
  for (int l = cfg.depth - 1; l >= 0; --l) {
    std::string const up = "up" + std::to_string(l);
    h = conv_transpose2x2(h, p.at(up + ".weight"), p.at(up + ".bias"));
    h = concat_channels(h, skips[static_cast<std::size_t>(l)]);
    h = conv_block(p, "dec" + std::to_string(l), h, cfg.leaky_slope);
  }
  return conv2d(h, p.at("final.weight"), p.at("final.bias"));
}

template class ModelParams<float>;
template class ModelParams<double>;
template ModelParams<double> ModelParams<float>::cast<double>() const;
template ModelParams<float> ModelParams<double>::cast<float>() const;
template ModelParams<float> ModelParams<float>::cast<float>() const;
template ModelParams<double> ModelParams<double>::cast<double>() const;
template ModelParams<float> init_unet<float>(UNetConfig const &, std::uint64_t);
template ModelParams<double> init_unet<double>(UNetConfig const &, std::uint64_t);
template Tensor<float> unet_forward<float>(ModelParams<float> const &, Tensor<float> const &);
template Tensor<double> unet_forward<double>(ModelParams<double> const &, Tensor<double> const &);

} // namespace n2r::nn
