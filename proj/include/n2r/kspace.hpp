#pragma once

#include "n2r/common.hpp"

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

namespace n2r {

using Complex = std::complex<double>;

// H x W complex image, row-major. Dimensions are powers of two and >= 8.
class ComplexImage
{
public:
  ComplexImage() = default;
  ComplexImage(int height, int width);
  ComplexImage(int height, int width, std::vector<Complex> data);

  [[nodiscard]] int height() const { return h_; }
  [[nodiscard]] int width() const { return w_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  Complex &operator()(int y, int x) { return data_[static_cast<std::size_t>(y) * w_ + x]; }
  Complex operator()(int y, int x) const { return data_[static_cast<std::size_t>(y) * w_ + x]; }

  [[nodiscard]] std::span<Complex> data() { return data_; }
  [[nodiscard]] std::span<Complex const> data() const { return data_; }

  [[nodiscard]] double norm() const;
  // Throws NumericalError on NaN/Inf.
  void check_finite() const;

  friend bool operator==(ComplexImage const &a, ComplexImage const &b) = default;

private:
  int h_ = 0, w_ = 0;
  std::vector<Complex> data_;
};

// C x H x W complex receive-coil maps with sum-of-squares normalisation.
class CoilSensitivities
{
public:
  CoilSensitivities() = default;
  // Validates sum_c |S_c|^2 == 1 at every pixel (1e-6).
  CoilSensitivities(int ncoils, int height, int width, std::vector<Complex> data);
  // Rescales arbitrary maps so the SOS invariant holds. Pixels where every
  // coil is zero get a uniform 1/sqrt(C) profile.
  static CoilSensitivities normalized(int ncoils, int height, int width, std::vector<Complex> data);

  [[nodiscard]] int ncoils() const { return c_; }
  [[nodiscard]] int height() const { return h_; }
  [[nodiscard]] int width() const { return w_; }
  [[nodiscard]] std::span<Complex const> coil(int c) const;
  Complex operator()(int c, int y, int x) const
  {
    return data_[(static_cast<std::size_t>(c) * h_ + y) * w_ + x];
  }
  [[nodiscard]] std::span<Complex const> data() const { return data_; }

private:
  int c_ = 0, h_ = 0, w_ = 0;
  std::vector<Complex> data_;
};

// Binary k-space sampling pattern with a fully sampled square calibration
// region centred on DC (index h/2, w/2 after centring).
class SamplingMask
{
public:
  SamplingMask() = default;
  SamplingMask(int height, int width, std::vector<std::uint8_t> data, double acceleration, int calib_size);
  static SamplingMask full(int height, int width);

  [[nodiscard]] int height() const { return h_; }
  [[nodiscard]] int width() const { return w_; }
  [[nodiscard]] double acceleration() const { return accel_; }
  [[nodiscard]] int calib_size() const { return calib_; }
  [[nodiscard]] std::span<std::uint8_t const> data() const { return data_; }
  bool operator()(int y, int x) const { return data_[static_cast<std::size_t>(y) * w_ + x] != 0; }

  [[nodiscard]] std::size_t count() const;
  [[nodiscard]] double empirical_acceleration() const;

  friend bool operator==(SamplingMask const &a, SamplingMask const &b) = default;

private:
  int h_ = 0, w_ = 0;
  std::vector<std::uint8_t> data_;
  double accel_ = 1.0;
  int calib_ = 0;
};

// C x H x W multi-coil measurements. Entries outside the mask are zeroed on
// construction and remain exactly zero under every operation here.
class KSpace
{
public:
  KSpace() = default;
  KSpace(int ncoils, SamplingMask mask, std::vector<Complex> data);

  [[nodiscard]] int ncoils() const { return c_; }
  [[nodiscard]] int height() const { return mask_.height(); }
  [[nodiscard]] int width() const { return mask_.width(); }
  [[nodiscard]] SamplingMask const &mask() const { return mask_; }
  [[nodiscard]] std::span<Complex const> coil(int c) const;
  [[nodiscard]] std::span<Complex const> data() const { return data_; }
  Complex operator()(int c, int y, int x) const
  {
    return data_[(static_cast<std::size_t>(c) * height() + y) * width() + x];
  }

  // Retrospective undersampling: keeps only samples inside `mask`.
  [[nodiscard]] KSpace undersample(SamplingMask const &mask) const;
  [[nodiscard]] KSpace scaled(double s) const;

private:
  int c_ = 0;
  SamplingMask mask_;
  std::vector<Complex> data_;
};

struct NoiseSpec
{
  double sigma = 0.0; // relative to the 95th-percentile image magnitude
  std::uint64_t seed = 0;
};

// Centred orthonormal 2D DFT: fftshift(F(ifftshift(x))) / sqrt(HW).
ComplexImage fft2c(ComplexImage const &x);
ComplexImage ifft2c(ComplexImage const &x);
// In-place variants over a raw H x W buffer.
void fft2c_inplace(std::span<Complex> buf, int height, int width);
void ifft2c_inplace(std::span<Complex> buf, int height, int width);

SamplingMask make_poisson_disc_mask(int height, int width, double accel, int calib, std::uint64_t seed);
CoilSensitivities make_coil_sensitivities(int height, int width, int ncoils, std::uint64_t seed);
ComplexImage make_phantom(int height, int width, std::uint64_t seed);

// y_c = mask * fft2c(S_c * x)
KSpace forward_model(ComplexImage const &x, CoilSensitivities const &sens, SamplingMask const &mask);
// x = sum_c conj(S_c) * ifft2c(y_c)
ComplexImage adjoint_sense(KSpace const &y, CoilSensitivities const &sens);

// Adds mask * (n_re + i n_im), n ~ N(0, (sigma * p95(|scale_ref|))^2) per
// component, per coil.
KSpace add_masked_noise(KSpace const &y, NoiseSpec const &spec, ComplexImage const &scale_ref);

// Linear interpolation between order statistics (q in [0, 100]).
double percentile(std::span<double const> values, double q);
double magnitude_percentile(ComplexImage const &x, double q);

struct NormalizedImage
{
  ComplexImage image;
  double scale = 1.0;
};
NormalizedImage normalize_p95(ComplexImage const &x);

ComplexImage scaled(ComplexImage const &x, double s);
std::vector<double> magnitude(ComplexImage const &x);
Complex inner_product(std::span<Complex const> a, std::span<Complex const> b); // sum conj(a) * b

} // namespace n2r
