#pragma once

#include "n2r/kspace.hpp"

#include <cmath>
#include <complex>
#include <numbers>

namespace n2r::test {

inline ComplexImage random_image(int h, int w, std::uint64_t seed)
{
  Rng rng(seed);
  ComplexImage x(h, w);
  for (auto &v : x.data()) {
    auto const [a, b] = rng.normal_pair();
    v = Complex(a, b);
  }
  return x;
}

inline CoilSensitivities random_maps(int ncoils, int h, int w, std::uint64_t seed)
{
  Rng rng(seed);
  std::vector<Complex> d(static_cast<std::size_t>(ncoils) * h * w);
  for (auto &v : d) {
    auto const [a, b] = rng.normal_pair();
    v = Complex(a, b);
  }
  return CoilSensitivities::normalized(ncoils, h, w, std::move(d));
}

inline SamplingMask random_mask(int h, int w, double keep, std::uint64_t seed)
{
  Rng rng(seed);
  std::vector<std::uint8_t> d(static_cast<std::size_t>(h) * w);
  for (auto &v : d) {
    v = rng.uniform() < keep ? 1 : 0;
  }
  return SamplingMask(h, w, std::move(d), 1.0, 0);
}

inline KSpace random_kspace(int ncoils, SamplingMask const &mask, std::uint64_t seed)
{
  Rng rng(seed);
  std::vector<Complex> d(static_cast<std::size_t>(ncoils) * mask.height() * mask.width());
  for (auto &v : d) {
    auto const [a, b] = rng.normal_pair();
    v = Complex(a, b);
  }
  return KSpace(ncoils, mask, std::move(d));
}

// Direct O(N^2) centred orthonormal DFT, independent of FFTW.
inline ComplexImage direct_dft2c(ComplexImage const &x)
{
  int const h = x.height(), w = x.width();
  ComplexImage out(h, w);
  double const s = 1.0 / std::sqrt(static_cast<double>(h) * w);
  for (int ky = 0; ky < h; ++ky) {
    for (int kx = 0; kx < w; ++kx) {
      Complex acc{};
      for (int y = 0; y < h; ++y) {
        for (int xx = 0; xx < w; ++xx) {
          double const ph = -2.0 * std::numbers::pi *
                            (static_cast<double>((ky - h / 2) * (y - h / 2)) / h +
                             static_cast<double>((kx - w / 2) * (xx - w / 2)) / w);
          acc += x(y, xx) * std::polar(1.0, ph);
        }
      }
      out(ky, kx) = s * acc;
    }
  }
  return out;
}

inline double max_abs_diff(std::span<Complex const> a, std::span<Complex const> b)
{
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

} // namespace n2r::test
