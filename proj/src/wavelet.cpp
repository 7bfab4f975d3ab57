#include "n2r/wavelet_cs.hpp"

#include <cmath>
#include <string>

namespace n2r {

namespace {

constexpr int kTaps = static_cast<int>(kDb4Lowpass.size());

constexpr std::array<double, kTaps> highpass()
{
  std::array<double, kTaps> g{};
  for (int n = 0; n < kTaps; ++n) {
    g[n] = ((n % 2) ? -1.0 : 1.0) * kDb4Lowpass[kTaps - 1 - n];
  }
  return g;
}
constexpr auto kHighpass = highpass();

// One periodic analysis step over n samples spaced `stride` apart.
void analyze(Complex *line, int n, std::ptrdiff_t stride, std::vector<Complex> &tmp)
{
  tmp.assign(n, Complex{});
  int const half = n / 2;
  for (int k = 0; k < half; ++k) {
    Complex a{}, d{};
    for (int t = 0; t < kTaps; ++t) {
      Complex const v = line[((2 * k + t) % n) * stride];
      a += kDb4Lowpass[t] * v;
      d += kHighpass[t] * v;
    }
    tmp[k] = a;
    tmp[half + k] = d;
  }
  for (int i = 0; i < n; ++i) {
    line[i * stride] = tmp[i];
  }
}

void synthesize(Complex *line, int n, std::ptrdiff_t stride, std::vector<Complex> &tmp)
{
  tmp.assign(n, Complex{});
  int const half = n / 2;
  for (int k = 0; k < half; ++k) {
    Complex const a = line[k * stride], d = line[(half + k) * stride];
    for (int t = 0; t < kTaps; ++t) {
      tmp[(2 * k + t) % n] += kDb4Lowpass[t] * a + kHighpass[t] * d;
    }
  }
  for (int i = 0; i < n; ++i) {
    line[i * stride] = tmp[i];
  }
}

void check_levels(int h, int w, int levels)
{
  if (levels < 0) { throw DimensionError("dwt2: levels must be non-negative"); }
  long const div = 1L << levels;
  if (h % div != 0 || w % div != 0 || (levels > 0 && (h / div < 1 || w / div < 1))) {
    throw DimensionError("dwt2: " + std::to_string(h) + "x" + std::to_string(w) + " not divisible by 2^" +
                         std::to_string(levels));
  }
}

} // namespace

WaveletCoeffs dwt2(ComplexImage const &x, int levels)
{
  int const h = x.height(), w = x.width();
  check_levels(h, w, levels);
  ComplexImage c = x;
  std::vector<Complex> tmp;
  Complex *base = c.data().data();
  for (int l = 0; l < levels; ++l) {
    int const lh = h >> l, lw = w >> l;
    for (int y = 0; y < lh; ++y) {
      analyze(base + static_cast<std::ptrdiff_t>(y) * w, lw, 1, tmp);
    }
    for (int xx = 0; xx < lw; ++xx) {
      analyze(base + xx, lh, w, tmp);
    }
  }
  return {std::move(c), levels};
}

ComplexImage idwt2(WaveletCoeffs const &coeffs)
{
  int const h = coeffs.data.height(), w = coeffs.data.width();
  check_levels(h, w, coeffs.levels);
  ComplexImage x = coeffs.data;
  std::vector<Complex> tmp;
  Complex *base = x.data().data();
  for (int l = coeffs.levels - 1; l >= 0; --l) {
    int const lh = h >> l, lw = w >> l;
    for (int xx = 0; xx < lw; ++xx) {
      synthesize(base + xx, lh, w, tmp);
    }
    for (int y = 0; y < lh; ++y) {
      synthesize(base + static_cast<std::ptrdiff_t>(y) * w, lw, 1, tmp);
    }
  }
  return x;
}

WaveletCoeffs soft_threshold(WaveletCoeffs const &c, double tau)
{
  if (!(tau >= 0.0)) { throw ConfigError("soft_threshold: tau must be non-negative"); }
  WaveletCoeffs out = c;
  if (tau == 0.0) { return out; }
  for (auto &z : out.data.data()) {
    double const m = std::abs(z);
    z = m > tau ? z * ((m - tau) / m) : Complex{};
  }
  return out;
}

double l1_norm(WaveletCoeffs const &c)
{
  double s = 0.0;
  for (auto const &z : c.data.data()) {
    s += std::abs(z);
  }
  return s;
}

} // namespace n2r
