#include "n2r/nn/gradcheck.hpp"
#include "n2r/nn/unet.hpp"

#include <algorithm>
#include <cmath>

namespace n2r::nn {

GradCheckResult gradient_check(std::string name,
                               ScalarFn const &f,
                               std::vector<Tensor<double>> inputs,
                               int ncoords,
                               std::uint64_t seed,
                               double eps,
                               double tol)
{
  for (auto &t : inputs) {
    t.zero_grad();
  }
  backward(f(inputs));

  std::vector<std::pair<std::size_t, std::size_t>> pool;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    if (!inputs[i].requires_grad()) { continue; }
    for (std::size_t j = 0; j < inputs[i].numel(); ++j) {
      pool.emplace_back(i, j);
    }
  }
  if (pool.empty()) { throw UsageError("gradient_check: no inputs require grad"); }
  Rng rng(seed);
  auto const n = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(ncoords));
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
  }

  GradCheckResult res{std::move(name), static_cast<int>(n), 0.0, true};
  NoGrad guard;
  for (std::size_t c = 0; c < n; ++c) {
    auto [ti, j] = pool[c];
    auto &t = inputs[ti];
    double const analytic = t.has_grad() ? t.grad()[j] : 0.0;
    double const orig = t.data()[j];
    t.mutable_data()[j] = orig + eps;
    double const fp = f(inputs).item();
    t.mutable_data()[j] = orig - eps;
    double const fm = f(inputs).item();
    t.mutable_data()[j] = orig;
    double const numeric = (fp - fm) / (2.0 * eps);
    double const denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    res.max_rel_error = std::max(res.max_rel_error, std::abs(analytic - numeric) / denom);
  }
  res.passed = res.max_rel_error < tol;
  return res;
}

namespace {

Tensor<double> random_tensor(Shape shape, Rng &rng, double sd = 1.0)
{
  std::vector<double> v(numel(shape));
  for (auto &x : v) {
    x = sd * rng.normal();
  }
  return Tensor<double>(std::move(shape), std::move(v), true);
}

// Random linear functional keeps every output coordinate in play.
Tensor<double> probe(Tensor<double> const &y, std::uint64_t seed)
{
  Rng rng(seed);
  std::vector<double> w(y.numel());
  for (auto &x : w) {
    x = rng.normal();
  }
  return sum(mul(y, Tensor<double>(y.shape(), std::move(w))));
}

} // namespace

std::vector<GradCheckResult> standard_gradient_checks(std::uint64_t seed, int ncoords)
{
  std::vector<GradCheckResult> out;
  Rng rng(seed);
  std::uint64_t const ps = rng.next();

  out.push_back(gradient_check(
    "conv2d", [ps](auto const &in) { return probe(conv2d(in[0], in[1], in[2]), ps); },
    {random_tensor({3, 8, 8}, rng), random_tensor({4, 3, 3, 3}, rng), random_tensor({4}, rng)}, ncoords, rng.next()));
  out.push_back(gradient_check(
    "conv2d_1x1", [ps](auto const &in) { return probe(conv2d(in[0], in[1], in[2]), ps); },
    {random_tensor({3, 8, 8}, rng), random_tensor({2, 3, 1, 1}, rng), random_tensor({2}, rng)}, ncoords, rng.next()));
  out.push_back(gradient_check(
    "conv_transpose2x2", [ps](auto const &in) { return probe(conv_transpose2x2(in[0], in[1], in[2]), ps); },
    {random_tensor({3, 4, 4}, rng), random_tensor({3, 2, 2, 2}, rng), random_tensor({2}, rng)}, ncoords, rng.next()));
  out.push_back(gradient_check(
    "instance_norm", [ps](auto const &in) { return probe(instance_norm(in[0], in[1], in[2]), ps); },
    {random_tensor({3, 8, 8}, rng), random_tensor({3}, rng), random_tensor({3}, rng)}, ncoords, rng.next()));
  out.push_back(gradient_check(
    "leaky_relu", [ps](auto const &in) { return probe(leaky_relu(in[0]), ps); }, {random_tensor({2, 8, 8}, rng)},
    ncoords, rng.next()));
  out.push_back(gradient_check(
    "avg_pool2", [ps](auto const &in) { return probe(avg_pool2(in[0]), ps); }, {random_tensor({2, 8, 8}, rng)},
    ncoords, rng.next()));
  out.push_back(gradient_check(
    "concat_channels", [ps](auto const &in) { return probe(concat_channels(in[0], in[1]), ps); },
    {random_tensor({2, 4, 4}, rng), random_tensor({3, 4, 4}, rng)}, ncoords, rng.next()));
  out.push_back(gradient_check(
    "add", [ps](auto const &in) { return probe(add(in[0], in[1]), ps); },
    {random_tensor({2, 4, 4}, rng), random_tensor({2, 4, 4}, rng)}, ncoords, rng.next()));
  out.push_back(gradient_check(
    "mul", [ps](auto const &in) { return probe(mul(in[0], in[1]), ps); },
    {random_tensor({2, 4, 4}, rng), random_tensor({2, 4, 4}, rng)}, ncoords, rng.next()));
  out.push_back(gradient_check(
    "scale", [ps](auto const &in) { return probe(scale(in[0], -1.7), ps); }, {random_tensor({2, 4, 8}, rng)},
    ncoords, rng.next()));
  out.push_back(gradient_check(
    "sum", [](auto const &in) { return sum(in[0]); }, {random_tensor({2, 4, 8}, rng)}, ncoords, rng.next()));
  out.push_back(gradient_check(
    "complex_l1", [](auto const &in) { return complex_l1(in[0], in[1]); },
    {random_tensor({2, 8, 8}, rng), random_tensor({2, 8, 8}, rng)}, ncoords, rng.next()));

  UNetConfig cfg;
  cfg.depth = 2;
  cfg.base_channels = 4;
  auto params = init_unet<double>(cfg, rng.next());
  std::vector<Tensor<double>> inputs;
  for (auto const &n : params.names()) {
    inputs.push_back(params.at(n));
  }
  auto const x = random_tensor({2, 16, 16}, rng).detach();
  auto const target = random_tensor({2, 16, 16}, rng).detach();
  out.push_back(gradient_check(
    "unet(depth=2,base=4)",
    [&](auto const &in) {
      // `in` aliases the parameter nodes, so the bundle sees perturbations.
      (void)in;
      return complex_l1(unet_forward(params, x), target);
    },
    inputs, ncoords, rng.next()));
  return out;
}

} // namespace n2r::nn
