#include "n2r/nn/adam.hpp"
#include "n2r/nn/gradcheck.hpp"
#include "n2r/nn/unet.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace n2r;
using namespace n2r::nn;
using Catch::Approx;

namespace {

Tensor<double> randn(Shape s, std::uint64_t seed, bool rg = false)
{
  Rng rng(seed);
  std::vector<double> v(numel(s));
  for (auto &x : v) {
    x = rng.normal();
  }
  return Tensor<double>(std::move(s), std::move(v), rg);
}

double at3(Tensor<double> const &t, int c, int y, int x) { return t.data()[(c * t.dim(1) + y) * t.dim(2) + x]; }

// Block counts for a conv block, an up-convolution and the full U-Net.
std::size_t block_params(std::size_t in, std::size_t out) { return 9 * in * out + 9 * out * out + 6 * out; }
std::size_t param_formula(int depth, std::size_t base, std::size_t in, std::size_t out)
{
  std::size_t n = 0, c = in;
  for (int l = 0; l < depth; ++l) {
    n += block_params(c, base << l);
    c = base << l;
  }
  n += block_params(c, base << depth);
  for (int l = depth - 1; l >= 0; --l) {
    std::size_t const hi = base << (l + 1), lo = base << l;
    n += 4 * hi * lo + lo + block_params(2 * lo, lo);
  }
  return n + base * out + out;
}

} // namespace

TEST_CASE("conv2d matches a direct loop", "[nn][conv]")
{
  auto const x = randn({3, 6, 5}, 1), k = randn({4, 3, 3, 3}, 2), b = randn({4}, 3);
  auto const y = conv2d(x, k, b);
  REQUIRE(y.shape() == Shape{4, 6, 5});
  for (int co = 0; co < 4; ++co) {
    for (int yy = 0; yy < 6; ++yy) {
      for (int xx = 0; xx < 5; ++xx) {
        double acc = b.data()[co];
        for (int ci = 0; ci < 3; ++ci) {
          for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
              int const sy = yy + i - 1, sx = xx + j - 1;
              if (sy < 0 || sy >= 6 || sx < 0 || sx >= 5) { continue; }
              acc += k.data()[((co * 3 + ci) * 3 + i) * 3 + j] * at3(x, ci, sy, sx);
            }
          }
        }
        REQUIRE(at3(y, co, yy, xx) == Approx(acc).margin(1e-12));
      }
    }
  }
  CHECK_THROWS_AS(conv2d(x, randn({4, 2, 3, 3}, 4), b), DimensionError);
  CHECK_THROWS_AS(conv2d(x, randn({4, 3, 2, 2}, 4), b), DimensionError);
}

TEST_CASE("conv_transpose2x2 matches a direct scatter", "[nn][conv]")
{
  auto const x = randn({3, 4, 5}, 5), k = randn({3, 2, 2, 2}, 6), b = randn({2}, 7);
  auto const y = conv_transpose2x2(x, k, b);
  REQUIRE(y.shape() == Shape{2, 8, 10});
  for (int co = 0; co < 2; ++co) {
    for (int yy = 0; yy < 8; ++yy) {
      for (int xx = 0; xx < 10; ++xx) {
        double acc = b.data()[co];
        for (int ci = 0; ci < 3; ++ci) {
          acc += at3(x, ci, yy / 2, xx / 2) * k.data()[((ci * 2 + co) * 2 + yy % 2) * 2 + xx % 2];
        }
        REQUIRE(at3(y, co, yy, xx) == Approx(acc).margin(1e-12));
      }
    }
  }
}

TEST_CASE("instance norm standardises each channel", "[nn][norm]")
{
  auto const x = randn({3, 8, 8}, 8);
  std::vector<double> g{1.0, 2.0, 0.5}, bt{0.0, -1.0, 3.0};
  auto const y = instance_norm(x, Tensor<double>({3}, g), Tensor<double>({3}, bt));
  for (int c = 0; c < 3; ++c) {
    double m = 0.0, m2 = 0.0, xm = 0.0, xm2 = 0.0;
    for (int i = 0; i < 64; ++i) {
      double const v = y.data()[c * 64 + i], u = x.data()[c * 64 + i];
      m += v;
      m2 += v * v;
      xm += u;
      xm2 += u * u;
    }
    m /= 64;
    xm /= 64;
    double const var = m2 / 64 - m * m, xvar = xm2 / 64 - xm * xm;
    CHECK(m == Approx(bt[c]).margin(1e-12));
    CHECK(var == Approx(g[c] * g[c] * xvar / (xvar + 1e-5)).epsilon(1e-10));
  }
}

TEST_CASE("pointwise and reshaping ops", "[nn]")
{
  std::vector<double> v{-2.0, -0.5, 0.0, 1.5};
  auto const x = Tensor<double>({1, 2, 2}, v);
  auto const r = leaky_relu(x, 0.2);
  CHECK(r.data()[0] == Approx(-0.4));
  CHECK(r.data()[1] == Approx(-0.1));
  CHECK(r.data()[2] == 0.0);
  CHECK(r.data()[3] == 1.5);

  auto const p = avg_pool2(x);
  REQUIRE(p.shape() == Shape{1, 1, 1});
  CHECK(p.item() == Approx(-0.25));
  CHECK_THROWS_AS(avg_pool2(Tensor<double>::zeros({1, 3, 4})), DimensionError);

  auto const c = concat_channels(x, scale(x, 2.0));
  REQUIRE(c.shape() == Shape{2, 2, 2});
  CHECK(c.data()[4] == -4.0);
  CHECK_THROWS_AS(concat_channels(x, Tensor<double>::zeros({1, 4, 4})), DimensionError);

  CHECK(sum(mul(x, x)).item() == Approx(4.0 + 0.25 + 2.25));
  CHECK(sum(add(x, x)).item() == Approx(-2.0));
  CHECK_THROWS_AS(add(x, Tensor<double>::zeros({4})), DimensionError);
}

TEST_CASE("complex L1 loss", "[nn][loss]")
{
  std::vector<double> pred{3.0, 0.0, 4.0, 0.0}; // re channel then im channel, 1x2 pixels
  auto const l = complex_l1(Tensor<double>({2, 1, 2}, pred), Tensor<double>::zeros({2, 1, 2}));
  CHECK(l.item() == Approx((5.0 + 1e-8) / 2.0).epsilon(1e-12));
  auto const z = complex_l1(Tensor<double>({2, 1, 2}, pred), Tensor<double>({2, 1, 2}, pred));
  CHECK(z.item() == Approx(1e-8).epsilon(1e-12));
}

TEST_CASE("reverse-mode accumulation and no-grad", "[nn][autodiff]")
{
  auto x = randn({1, 2, 2}, 9, true);
  backward(sum(add(x, x)));
  for (double g : x.grad()) {
    CHECK(g == 2.0);
  }
  backward(sum(x));
  for (double g : x.grad()) {
    CHECK(g == 3.0);
  }
  x.zero_grad();
  {
    NoGrad ng;
    auto const y = sum(mul(x, x));
    CHECK_FALSE(y.requires_grad());
    CHECK_THROWS_AS(backward(y), UsageError);
  }
  CHECK_FALSE(NoGrad::active());
  auto const d = x.detach();
  CHECK_FALSE(d.requires_grad());
  CHECK_THROWS_AS(backward(sum(mul(d, d))), UsageError);
}

TEST_CASE("finite-difference gradient checks", "[nn][gradcheck]")
{
  auto const results = standard_gradient_checks(2024, 50);
  std::vector<std::string> names;
  for (auto const &r : results) {
    names.push_back(r.name);
    INFO(r.name << " max rel error " << r.max_rel_error);
    CHECK(r.passed);
    CHECK(r.coords == 50);
  }
  for (char const *op : {"conv2d", "conv_transpose2x2", "instance_norm", "leaky_relu", "avg_pool2",
                         "concat_channels", "add", "mul", "scale", "sum", "complex_l1"}) {
    CHECK(std::find(names.begin(), names.end(), op) != names.end());
  }
  CHECK(names.back().rfind("unet", 0) == 0);

  // A deliberately wrong gradient is caught.
  auto const bad = gradient_check(
    "bad", [](auto const &in) { return sum(mul(in[0].detach(), in[0])); }, {randn({4}, 3, true)}, 4, 0);
  CHECK_FALSE(bad.passed);
}

TEST_CASE("U-Net structure", "[nn][unet]")
{
  SECTION("parameter count")
  {
    auto const p = init_unet<float>({}, 0);
    CHECK(p.parameter_count() == 7765730u);
    CHECK(p.parameter_count() == param_formula(4, 32, 2, 2));
    for (auto [d, b] : {std::pair{2, 4}, {3, 8}, {1, 2}}) {
      UNetConfig cfg;
      cfg.depth = d;
      cfg.base_channels = b;
      CHECK(init_unet<double>(cfg, 0).parameter_count() == param_formula(d, b, 2, 2));
    }
  }
  SECTION("canonical names")
  {
    UNetConfig cfg;
    cfg.depth = 2;
    cfg.base_channels = 4;
    auto const p = init_unet<double>(cfg, 0);
    for (char const *n : {"enc0.conv1.weight", "enc1.norm2.gamma", "bottleneck.conv2.bias", "up1.weight",
                          "up0.bias", "dec0.norm1.beta", "final.weight", "final.bias"}) {
      CHECK(p.contains(n));
    }
    CHECK(p.at("up1.weight").shape() == Shape{16, 8, 2, 2});
    CHECK_THROWS_AS(p.at("nope"), UsageError);
  }
  SECTION("initialisation")
  {
    auto const a = init_unet<float>({}, 3), b = init_unet<float>({}, 3);
    auto const wa = a.at("dec0.conv1.weight").data(), wb = b.at("dec0.conv1.weight").data();
    CHECK(std::equal(wa.begin(), wa.end(), wb.begin()));
    double s2 = 0.0;
    auto const w = a.at("bottleneck.conv2.weight").data();
    for (float v : w) {
      s2 += static_cast<double>(v) * v;
    }
    CHECK(std::sqrt(s2 / w.size()) == Approx(std::sqrt(2.0 / (512 * 9))).epsilon(0.02));
    CHECK(a.at("enc0.conv1.bias").data()[0] == 0.0f);
    CHECK(a.at("enc0.norm1.gamma").data()[0] == 1.0f);
  }
  SECTION("forward shape, precision agreement, shape errors")
  {
    UNetConfig cfg;
    cfg.depth = 2;
    cfg.base_channels = 4;
    auto const p = init_unet<double>(cfg, 1);
    auto const x = randn({2, 16, 32}, 2);
    auto const y = unet_forward(p, x);
    REQUIRE(y.shape() == Shape{2, 16, 32});
    auto const pf = p.cast<float>();
    auto const xf = Tensor<float>({2, 16, 32}, std::vector<float>(x.data().begin(), x.data().end()));
    auto const yf = unet_forward(pf, xf);
    for (std::size_t i = 0; i < y.numel(); ++i) {
      REQUIRE(yf.data()[i] == Approx(y.data()[i]).margin(1e-3));
    }
    CHECK_THROWS_AS(unet_forward(p, randn({2, 18, 16}, 0)), DimensionError);
    CHECK_THROWS_AS(unet_forward(p, randn({3, 16, 16}, 0)), DimensionError);
  }
}

TEST_CASE("Adam optimiser", "[nn][adam]")
{
  UNetConfig cfg;
  cfg.depth = 1;
  cfg.base_channels = 2;
  auto p = init_unet<double>(cfg, 0);
  OptimState<double> st;
  CHECK_THROWS_AS(adam_step(p, st), UsageError);

  SECTION("first step moves each weight by lr against the gradient sign")
  {
    auto const before = p.clone();
    auto const x = randn({2, 4, 4}, 1), t = randn({2, 4, 4}, 2);
    backward(complex_l1(unet_forward(p, x), t));
    adam_step(p, st);
    CHECK(st.step == 1);
    auto const &w = p.at("enc0.conv1.weight");
    auto const w0 = before.at("enc0.conv1.weight").data();
    for (std::size_t i = 0; i < w.numel(); ++i) {
      double const g = w.grad()[i];
      double const expected = w0[i] - 1e-3 * g / (std::abs(g) + 1e-8);
      REQUIRE(w.data()[i] == Approx(expected).margin(1e-12));
    }
  }
  SECTION("minimises a quadratic")
  {
    ModelParams<double> q;
    q.add("w", Tensor<double>({3}, {5.0, -3.0, 1.0}, true));
    OptimState<double> s;
    s.cfg.lr = 0.05;
    for (int i = 0; i < 2000; ++i) {
      q.zero_grad();
      backward(sum(mul(q.at("w"), q.at("w"))));
      adam_step(q, s);
    }
    for (double v : q.at("w").data()) {
      CHECK(std::abs(v) < 1e-2);
    }
  }
}
