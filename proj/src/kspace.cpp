#include "n2r/kspace.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace n2r {

namespace {

std::string dims(int h, int w) { return std::to_string(h) + "x" + std::to_string(w); }

void require_image_dims(int h, int w)
{
  if (h < 8 || w < 8 || !is_power_of_two(h) || !is_power_of_two(w)) {
    throw DimensionError("image dimensions must be powers of two >= 8, got " + dims(h, w));
  }
}

} // namespace

// ---------------------------------------------------------------- ComplexImage

ComplexImage::ComplexImage(int height, int width)
  : h_{height}
  , w_{width}
{
  require_image_dims(height, width);
  data_.assign(static_cast<std::size_t>(height) * width, Complex{});
}

ComplexImage::ComplexImage(int height, int width, std::vector<Complex> data)
  : h_{height}
  , w_{width}
  , data_{std::move(data)}
{
  require_image_dims(height, width);
  if (data_.size() != static_cast<std::size_t>(height) * width) {
    throw DimensionError("ComplexImage: data size does not match " + dims(height, width));
  }
  check_finite();
}

double ComplexImage::norm() const
{
  double s = 0.0;
  for (auto const &v : data_) {
    s += std::norm(v);
  }
  return std::sqrt(s);
}

void ComplexImage::check_finite() const
{
  for (auto const &v : data_) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) {
      throw NumericalError("ComplexImage contains non-finite values");
    }
  }
}

// ----------------------------------------------------------- CoilSensitivities

CoilSensitivities::CoilSensitivities(int ncoils, int height, int width, std::vector<Complex> data)
  : c_{ncoils}
  , h_{height}
  , w_{width}
  , data_{std::move(data)}
{
  if (ncoils < 1) { throw DimensionError("CoilSensitivities: ncoils must be >= 1"); }
  require_image_dims(height, width);
  std::size_t const npix = static_cast<std::size_t>(height) * width;
  if (data_.size() != npix * ncoils) { throw DimensionError("CoilSensitivities: data size mismatch"); }
  for (std::size_t p = 0; p < npix; ++p) {
    double sos = 0.0;
    for (int c = 0; c < ncoils; ++c) {
      sos += std::norm(data_[c * npix + p]);
    }
    if (std::abs(sos - 1.0) > 1e-6) {
      throw NumericalError("CoilSensitivities: sum-of-squares normalisation violated at pixel " +
                           std::to_string(p));
    }
  }
}

CoilSensitivities CoilSensitivities::normalized(int ncoils, int height, int width, std::vector<Complex> data)
{
  std::size_t const npix = static_cast<std::size_t>(height) * width;
  if (ncoils < 1 || data.size() != npix * ncoils) { throw DimensionError("CoilSensitivities: data size mismatch"); }
  for (std::size_t p = 0; p < npix; ++p) {
    double sos = 0.0;
    for (int c = 0; c < ncoils; ++c) {
      sos += std::norm(data[c * npix + p]);
    }
    if (sos > 0.0) {
      double const inv = 1.0 / std::sqrt(sos);
      for (int c = 0; c < ncoils; ++c) {
        data[c * npix + p] *= inv;
      }
    } else {
      for (int c = 0; c < ncoils; ++c) {
        data[c * npix + p] = 1.0 / std::sqrt(static_cast<double>(ncoils));
      }
    }
  }
  return CoilSensitivities(ncoils, height, width, std::move(data));
}

std::span<Complex const> CoilSensitivities::coil(int c) const
{
  std::size_t const npix = static_cast<std::size_t>(h_) * w_;
  return std::span<Complex const>(data_).subspan(c * npix, npix);
}

// ---------------------------------------------------------------- SamplingMask

SamplingMask::SamplingMask(int height, int width, std::vector<std::uint8_t> data, double acceleration, int calib_size)
  : h_{height}
  , w_{width}
  , data_{std::move(data)}
  , accel_{acceleration}
  , calib_{calib_size}
{
  if (height < 1 || width < 1 || data_.size() != static_cast<std::size_t>(height) * width) {
    throw DimensionError("SamplingMask: data size does not match " + dims(height, width));
  }
  if (acceleration < 1.0) { throw ConfigError("SamplingMask: acceleration must be >= 1"); }
  if (calib_size < 0 || calib_size > std::min(height, width)) {
    throw ConfigError("SamplingMask: calibration size out of range");
  }
  for (auto &v : data_) {
    v = v ? 1 : 0;
  }
  int const y0 = height / 2 - calib_size / 2, x0 = width / 2 - calib_size / 2;
  for (int y = y0; y < y0 + calib_size; ++y) {
    for (int x = x0; x < x0 + calib_size; ++x) {
      if (!(*this)(y, x)) { throw ConfigError("SamplingMask: calibration region is not fully sampled"); }
    }
  }
}

SamplingMask SamplingMask::full(int height, int width)
{
  return SamplingMask(height, width, std::vector<std::uint8_t>(static_cast<std::size_t>(height) * width, 1), 1.0, 0);
}

std::size_t SamplingMask::count() const
{
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

double SamplingMask::empirical_acceleration() const
{
  auto const n = count();
  return n == 0 ? INFINITY : static_cast<double>(data_.size()) / static_cast<double>(n);
}

// ---------------------------------------------------------------------- KSpace

KSpace::KSpace(int ncoils, SamplingMask mask, std::vector<Complex> data)
  : c_{ncoils}
  , mask_{std::move(mask)}
  , data_{std::move(data)}
{
  std::size_t const npix = static_cast<std::size_t>(mask_.height()) * mask_.width();
  if (ncoils < 1 || data_.size() != npix * ncoils) { throw DimensionError("KSpace: data size mismatch"); }
  auto const m = mask_.data();
  for (int c = 0; c < ncoils; ++c) {
    for (std::size_t p = 0; p < npix; ++p) {
      if (!m[p]) { data_[c * npix + p] = Complex{}; }
    }
  }
}

std::span<Complex const> KSpace::coil(int c) const
{
  std::size_t const npix = static_cast<std::size_t>(height()) * width();
  return std::span<Complex const>(data_).subspan(c * npix, npix);
}

KSpace KSpace::undersample(SamplingMask const &mask) const
{
  if (mask.height() != height() || mask.width() != width()) {
    throw DimensionError("KSpace::undersample: mask shape mismatch");
  }
  return KSpace(c_, mask, data_);
}

KSpace KSpace::scaled(double s) const
{
  auto d = data_;
  for (auto &v : d) {
    v *= s;
  }
  return KSpace(c_, mask_, std::move(d));
}

// ------------------------------------------------------------------ operators

KSpace forward_model(ComplexImage const &x, CoilSensitivities const &sens, SamplingMask const &mask)
{
  int const h = x.height(), w = x.width();
  if (sens.height() != h || sens.width() != w || mask.height() != h || mask.width() != w) {
    throw DimensionError("forward_model: shape mismatch between image, maps and mask");
  }
  std::size_t const npix = x.size();
  std::vector<Complex> out(npix * sens.ncoils());
  auto const img = x.data();
  for (int c = 0; c < sens.ncoils(); ++c) {
    auto const s = sens.coil(c);
    std::span<Complex> dst(out.data() + c * npix, npix);
    for (std::size_t p = 0; p < npix; ++p) {
      dst[p] = s[p] * img[p];
    }
    fft2c_inplace(dst, h, w);
  }
  return KSpace(sens.ncoils(), mask, std::move(out));
}

ComplexImage adjoint_sense(KSpace const &y, CoilSensitivities const &sens)
{
  int const h = y.height(), w = y.width();
  if (sens.height() != h || sens.width() != w || sens.ncoils() != y.ncoils()) {
    throw DimensionError("adjoint_sense: k-space and sensitivity maps disagree in shape or coil count");
  }
  ComplexImage out(h, w);
  std::size_t const npix = out.size();
  std::vector<Complex> buf(npix);
  auto dst = out.data();
  for (int c = 0; c < y.ncoils(); ++c) {
    auto const src = y.coil(c);
    std::copy(src.begin(), src.end(), buf.begin());
    ifft2c_inplace(buf, h, w);
    auto const s = sens.coil(c);
    for (std::size_t p = 0; p < npix; ++p) {
      dst[p] += std::conj(s[p]) * buf[p];
    }
  }
  return out;
}

KSpace add_masked_noise(KSpace const &y, NoiseSpec const &spec, ComplexImage const &scale_ref)
{
  if (!(spec.sigma >= 0.0)) { throw ConfigError("add_masked_noise: sigma must be non-negative"); }
  if (spec.sigma == 0.0) { return y; }
  double const std_dev = spec.sigma * magnitude_percentile(scale_ref, 95.0);
  std::vector<Complex> d(y.data().begin(), y.data().end());
  std::size_t const npix = static_cast<std::size_t>(y.height()) * y.width();
  auto const m = y.mask().data();
  Rng rng(spec.seed);
  for (int c = 0; c < y.ncoils(); ++c) {
    for (std::size_t p = 0; p < npix; ++p) {
      if (!m[p]) { continue; }
      auto const [re, im] = rng.normal_pair();
      d[c * npix + p] += Complex(std_dev * re, std_dev * im);
    }
  }
  return KSpace(y.ncoils(), y.mask(), std::move(d));
}

double percentile(std::span<double const> values, double q)
{
  if (values.empty()) { throw DegenerateInputError("percentile of empty set"); }
  if (q < 0.0 || q > 100.0) { throw ConfigError("percentile q must be in [0, 100]"); }
  std::vector<double> v(values.begin(), values.end());
  double const pos = q / 100.0 * static_cast<double>(v.size() - 1);
  auto const lo = static_cast<std::size_t>(std::floor(pos));
  auto const hi = std::min(lo + 1, v.size() - 1);
  std::nth_element(v.begin(), v.begin() + lo, v.end());
  double const a = v[lo];
  double b = a;
  if (hi != lo) { b = *std::min_element(v.begin() + lo + 1, v.end()); }
  return a + (pos - static_cast<double>(lo)) * (b - a);
}

double magnitude_percentile(ComplexImage const &x, double q)
{
  auto const mag = magnitude(x);
  return percentile(mag, q);
}

NormalizedImage normalize_p95(ComplexImage const &x)
{
  double const s = magnitude_percentile(x, 95.0);
  if (!(s > 0.0)) { throw DegenerateInputError("normalize_p95: 95th percentile of |x| is zero"); }
  return {scaled(x, 1.0 / s), s};
}

ComplexImage scaled(ComplexImage const &x, double s)
{
  ComplexImage out = x;
  if (s == 1.0) { return out; }
  for (auto &v : out.data()) {
    v *= s;
  }
  return out;
}

std::vector<double> magnitude(ComplexImage const &x)
{
  std::vector<double> m(x.size());
  auto const d = x.data();
  for (std::size_t i = 0; i < m.size(); ++i) {
    m[i] = std::abs(d[i]);
  }
  return m;
}

Complex inner_product(std::span<Complex const> a, std::span<Complex const> b)
{
  if (a.size() != b.size()) { throw DimensionError("inner_product: size mismatch"); }
  Complex s{};
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += std::conj(a[i]) * b[i];
  }
  return s;
}

} // namespace n2r
