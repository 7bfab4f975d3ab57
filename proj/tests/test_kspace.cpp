#include "n2r/kspace.hpp"
#include "support.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace n2r;
using Catch::Approx;

TEST_CASE("fft2c of a constant image puts all energy in the DC bin", "[kspace][fft]")
{
  ComplexImage x(8, 8);
  for (auto &v : x.data()) {
    v = 1.0;
  }
  auto const k = fft2c(x);
  for (int y = 0; y < 8; ++y) {
    for (int xx = 0; xx < 8; ++xx) {
      double const expected = (y == 4 && xx == 4) ? 8.0 : 0.0;
      CHECK(std::abs(k(y, xx) - Complex(expected)) < 1e-12);
    }
  }
}

TEST_CASE("fft2c round trip and unitarity", "[kspace][fft]")
{
  auto const x = test::random_image(64, 64, 11);
  auto const k = fft2c(x);
  CHECK(std::abs(k.norm() - x.norm()) / x.norm() < 1e-6);
  auto const back = ifft2c(k);
  CHECK(test::max_abs_diff(back.data(), x.data()) < 1e-6);
}

TEST_CASE("fft2c matches a direct DFT", "[kspace][fft]")
{
  ComplexImage delta(8, 8);
  delta(4, 4) = 1.0;
  auto const k = fft2c(delta);
  for (auto const &v : k.data()) {
    CHECK(std::abs(v) == Approx(1.0 / 8.0).margin(1e-12));
  }
  CHECK(test::max_abs_diff(k.data(), test::direct_dft2c(delta).data()) < 1e-12);

  auto const x = test::random_image(8, 16, 3);
  CHECK(test::max_abs_diff(fft2c(x).data(), test::direct_dft2c(x).data()) < 1e-10);
}

TEST_CASE("fft2c rejects non power-of-two buffers", "[kspace][fft]")
{
  std::vector<Complex> buf(12 * 12);
  CHECK_THROWS_AS(fft2c_inplace(buf, 12, 12), DimensionError);
  CHECK_THROWS_AS(ComplexImage(12, 16), DimensionError);
}

TEST_CASE("Poisson-disc masks", "[kspace][mask]")
{
  SECTION("full size at R=12 with a 20x20 calibration block")
  {
    auto const m = make_poisson_disc_mask(320, 256, 12.0, 20, 0);
    double const expected = 320.0 * 256.0 / 12.0;
    CHECK(std::abs(static_cast<double>(m.count()) - expected) <= 0.1 * expected);
    for (int y = 160 - 10; y < 160 + 10; ++y) {
      for (int x = 128 - 10; x < 128 + 10; ++x) {
        REQUIRE(m(y, x));
      }
    }
  }
  SECTION("R=1 samples everything")
  {
    auto const m = make_poisson_disc_mask(64, 64, 1.0, 0, 0);
    CHECK(m.count() == 64u * 64u);
  }
  SECTION("deterministic given the seed")
  {
    CHECK(make_poisson_disc_mask(64, 64, 4.0, 8, 7) == make_poisson_disc_mask(64, 64, 4.0, 8, 7));
    CHECK_FALSE(make_poisson_disc_mask(64, 64, 4.0, 8, 7) == make_poisson_disc_mask(64, 64, 4.0, 8, 8));
  }
  SECTION("acceleration within 10% across R and sizes")
  {
    for (double r : {2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 16.0}) {
      for (int n : {32, 64, 128}) {
        int const calib = n == 32 ? 4 : 8;
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
          auto const m = make_poisson_disc_mask(n, n, r, calib, seed);
          INFO("R=" << r << " n=" << n << " seed=" << seed);
          CHECK(std::abs(m.empirical_acceleration() - r) <= 0.1 * r);
        }
      }
    }
  }
  SECTION("density falls off away from the centre")
  {
    auto const m = make_poisson_disc_mask(128, 128, 8.0, 8, 1);
    int inner = 0, ninner = 0, outer = 0, nouter = 0;
    for (int y = 0; y < 128; ++y) {
      for (int x = 0; x < 128; ++x) {
        double const d = std::hypot(y - 64.0, x - 64.0);
        if (d > 8 && d < 30) {
          ++ninner;
          inner += m(y, x);
        } else if (d > 50) {
          ++nouter;
          outer += m(y, x);
        }
      }
    }
    CHECK(static_cast<double>(inner) / ninner > 1.5 * static_cast<double>(outer) / nouter);
  }
  SECTION("infeasible calibration budget is a config error")
  {
    CHECK_THROWS_AS(make_poisson_disc_mask(32, 32, 16.0, 20, 0), ConfigError);
    CHECK_THROWS_AS(make_poisson_disc_mask(32, 32, 0.5, 4, 0), ConfigError);
  }
}

TEST_CASE("synthetic coil sensitivities", "[kspace][coils]")
{
  SECTION("single coil has unit magnitude")
  {
    auto const s = make_coil_sensitivities(64, 64, 1, 0);
    for (auto const &v : s.data()) {
      REQUIRE(std::abs(v) == Approx(1.0).margin(1e-12));
    }
  }
  SECTION("sum-of-squares normalised")
  {
    auto const s = make_coil_sensitivities(64, 64, 8, 0);
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        double sos = 0.0;
        for (int c = 0; c < 8; ++c) {
          sos += std::norm(s(c, y, x));
        }
        REQUIRE(std::abs(sos - 1.0) < 1e-6);
      }
    }
  }
  SECTION("smooth maps")
  {
    auto const s = make_coil_sensitivities(64, 64, 4, 3);
    double worst = 0.0;
    for (int c = 0; c < 4; ++c) {
      for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
          if (x + 1 < 64) { worst = std::max(worst, std::abs(std::abs(s(c, y, x + 1)) - std::abs(s(c, y, x)))); }
          if (y + 1 < 64) { worst = std::max(worst, std::abs(std::abs(s(c, y + 1, x)) - std::abs(s(c, y, x)))); }
        }
      }
    }
    CHECK(worst < 0.1);
  }
  SECTION("unnormalised maps are rejected")
  {
    std::vector<Complex> d(2 * 8 * 8, Complex(1.0));
    CHECK_THROWS_AS(CoilSensitivities(2, 8, 8, d), NumericalError);
  }
}

TEST_CASE("ellipse phantoms", "[kspace][phantom]")
{
  auto const a = make_phantom(64, 64, 0);
  double mx = 0.0;
  for (auto const &v : a.data()) {
    mx = std::max(mx, std::abs(v));
  }
  CHECK(mx <= 1.0 + 1e-9);
  CHECK(mx > 0.0);
  CHECK(a == make_phantom(64, 64, 0));

  auto const b = make_phantom(64, 64, 1), c = make_phantom(64, 64, 2);
  double diff = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    diff += std::norm(b.data()[i] - c.data()[i]);
  }
  CHECK(std::sqrt(diff) / b.norm() > 0.01);
}

TEST_CASE("forward model", "[kspace][operator]")
{
  SECTION("zero image gives zero k-space")
  {
    auto const s = make_coil_sensitivities(16, 16, 3, 1);
    auto const y = forward_model(ComplexImage(16, 16), s, SamplingMask::full(16, 16));
    for (auto const &v : y.data()) {
      REQUIRE(v == Complex{});
    }
  }
  SECTION("one unit coil and full sampling reduce to the DFT")
  {
    auto const x = test::random_image(16, 16, 5);
    auto const s = make_coil_sensitivities(16, 16, 1, 0);
    std::vector<Complex> ones(16 * 16, Complex(1.0));
    CoilSensitivities const unit(1, 16, 16, ones);
    auto const y = forward_model(x, unit, SamplingMask::full(16, 16));
    CHECK(test::max_abs_diff(y.data(), fft2c(x).data()) < 1e-12);
  }
  SECTION("matches a dense application of mask * F * S")
  {
    int const n = 16;
    auto const x = test::random_image(n, n, 21);
    auto const s = test::random_maps(2, n, n, 22);
    auto const m = test::random_mask(n, n, 0.4, 23);
    auto const y = forward_model(x, s, m);
    for (int c = 0; c < 2; ++c) {
      ComplexImage sx(n, n);
      for (int yy = 0; yy < n; ++yy) {
        for (int xx = 0; xx < n; ++xx) {
          sx(yy, xx) = s(c, yy, xx) * x(yy, xx);
        }
      }
      auto const f = test::direct_dft2c(sx);
      for (int yy = 0; yy < n; ++yy) {
        for (int xx = 0; xx < n; ++xx) {
          Complex const expected = m(yy, xx) ? f(yy, xx) : Complex{};
          REQUIRE(std::abs(y(c, yy, xx) - expected) < 1e-10);
        }
      }
    }
  }
  SECTION("shape mismatch")
  {
    CHECK_THROWS_AS(forward_model(ComplexImage(16, 16), make_coil_sensitivities(8, 8, 1, 0), SamplingMask::full(16, 16)),
                    DimensionError);
  }
}

TEST_CASE("adjoint SENSE", "[kspace][operator]")
{
  SECTION("zero k-space gives zero image")
  {
    auto const s = make_coil_sensitivities(16, 16, 2, 0);
    auto const x = adjoint_sense(KSpace(2, SamplingMask::full(16, 16), std::vector<Complex>(2 * 256)), s);
    CHECK(x.norm() == 0.0);
  }
  SECTION("fully sampled noiseless round trip")
  {
    auto const x = make_phantom(64, 64, 4);
    auto const s = make_coil_sensitivities(64, 64, 4, 4);
    auto const back = adjoint_sense(forward_model(x, s, SamplingMask::full(64, 64)), s);
    CHECK(test::max_abs_diff(back.data(), x.data()) < 1e-5);
  }
  SECTION("dot-product test over random shapes and coil counts")
  {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
      int const h = 8 << rng.below(3), w = 8 << rng.below(3);
      int const c = 1 + static_cast<int>(rng.below(4));
      auto const x = test::random_image(h, w, rng.next());
      auto const s = test::random_maps(c, h, w, rng.next());
      auto const m = test::random_mask(h, w, rng.uniform(0.1, 0.9), rng.next());
      auto const z = test::random_kspace(c, m, rng.next());
      Complex const lhs = inner_product(forward_model(x, s, m).data(), z.data());
      Complex const rhs = inner_product(x.data(), adjoint_sense(z, s).data());
      REQUIRE(std::abs(lhs - rhs) <= 1e-5 * std::abs(lhs));
    }
  }
  SECTION("coil count mismatch")
  {
    auto const z = test::random_kspace(3, SamplingMask::full(16, 16), 1);
    CHECK_THROWS_AS(adjoint_sense(z, make_coil_sensitivities(16, 16, 2, 0)), DimensionError);
  }
}

TEST_CASE("masked noise injection", "[kspace][noise]")
{
  auto const x = make_phantom(64, 64, 9);
  auto const s = make_coil_sensitivities(64, 64, 4, 9);
  auto const mask = make_poisson_disc_mask(64, 64, 4.0, 8, 9);
  auto const y = forward_model(x, s, mask);
  auto const ref = adjoint_sense(y, s);

  SECTION("sigma = 0 is the identity")
  {
    auto const out = add_masked_noise(y, {0.0, 1}, ref);
    CHECK(test::max_abs_diff(out.data(), y.data()) == 0.0);
  }
  SECTION("unsampled locations stay exactly zero")
  {
    std::vector<std::uint8_t> d(64 * 64, 1);
    d[0] = 0;
    SamplingMask const m(64, 64, d, 1.0, 0);
    auto const out = add_masked_noise(forward_model(x, s, m), {0.2, 3}, ref);
    for (int c = 0; c < 4; ++c) {
      REQUIRE(out(c, 0, 0) == Complex{});
    }
    auto const out2 = add_masked_noise(y, {0.7, 4}, ref);
    for (int c = 0; c < 4; ++c) {
      for (int yy = 0; yy < 64; ++yy) {
        for (int xx = 0; xx < 64; ++xx) {
          if (!mask(yy, xx)) { REQUIRE(out2(c, yy, xx) == Complex{}); }
        }
      }
    }
  }
  SECTION("per-component standard deviation is sigma * p95")
  {
    auto const full = SamplingMask::full(64, 64);
    auto const yf = forward_model(x, s, full);
    auto const out = add_masked_noise(yf, {0.5, 17}, ref);
    double const p95 = magnitude_percentile(ref, 95.0);
    double sum = 0.0, sum2 = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < out.data().size(); ++i) {
      double const d = (out.data()[i] - yf.data()[i]).real();
      sum += d;
      sum2 += d * d;
      ++n;
    }
    REQUIRE(n >= 10000);
    double const mean = sum / n;
    double const sd = std::sqrt(sum2 / n - mean * mean);
    CHECK(std::abs(sd - 0.5 * p95) <= 0.05 * 0.5 * p95);
  }
  SECTION("deterministic given the seed")
  {
    auto const a = add_masked_noise(y, {0.3, 5}, ref);
    auto const b = add_masked_noise(y, {0.3, 5}, ref);
    CHECK(test::max_abs_diff(a.data(), b.data()) == 0.0);
  }
  SECTION("negative sigma is rejected")
  {
    CHECK_THROWS_AS(add_masked_noise(y, {-0.1, 5}, ref), ConfigError);
  }
}

TEST_CASE("95th-percentile normalisation", "[kspace][normalize]")
{
  std::vector<double> v(100);
  for (int i = 0; i < 100; ++i) {
    v[i] = 100 - i;
  }
  CHECK(percentile(v, 95.0) == Approx(95.05).epsilon(1e-12));
  CHECK(percentile(v, 0.0) == 1.0);
  CHECK(percentile(v, 100.0) == 100.0);

  auto x = make_phantom(32, 32, 2);
  auto const [xn, s] = normalize_p95(x);
  CHECK(magnitude_percentile(xn, 95.0) == Approx(1.0).epsilon(1e-12));
  CHECK(test::max_abs_diff(scaled(xn, s).data(), x.data()) < 1e-12);

  auto const again = normalize_p95(xn);
  CHECK(again.scale == Approx(1.0).epsilon(1e-12));
  CHECK(test::max_abs_diff(again.image.data(), xn.data()) < 1e-12);

  auto const seven = normalize_p95(scaled(x, 7.0));
  CHECK(seven.scale == Approx(7.0 * s).epsilon(1e-12));
  CHECK(test::max_abs_diff(seven.image.data(), xn.data()) < 1e-12);

  CHECK_THROWS_AS(normalize_p95(ComplexImage(16, 16)), DegenerateInputError);
}
