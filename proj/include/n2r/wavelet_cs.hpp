#pragma once

#include "n2r/kspace.hpp"

#include <array>
#include <optional>
#include <span>
#include <vector>

namespace n2r {

// Orthonormal Daubechies wavelet with 4 vanishing moments (8 taps),
// scaling-filter coefficients in reconstruction order.
inline constexpr std::array<double, 8> kDb4Lowpass{
  0.23037781330885523, 0.7148465705525415,   0.6308807679295904,   -0.02798376941698385,
  -0.18703481171888114, 0.030841381835986965, 0.032883011666982945, -0.010597401784997278};

// Multilevel 2D coefficients in the standard layout: the coarsest
// approximation occupies the top-left (H/2^L x W/2^L) block, detail bands
// fill the remaining quadrants of each level.
struct WaveletCoeffs
{
  ComplexImage data;
  int levels = 0;
};

WaveletCoeffs dwt2(ComplexImage const &x, int levels);
ComplexImage idwt2(WaveletCoeffs const &c);

WaveletCoeffs soft_threshold(WaveletCoeffs const &c, double tau);
double l1_norm(WaveletCoeffs const &c);

struct CSConfig
{
  double lambda = 0.0;
  int iters = 25;
  std::optional<double> step; // nullopt = estimate 1/L by power iteration
  int levels = 4;
  int power_iters = 20;
  std::uint64_t power_seed = 0;
};

struct CSResult
{
  ComplexImage image;
  double step = 0.0;
  double lipschitz = 0.0;
  // objective[0] at x0 = A^H y, objective[i] after iteration i.
  std::vector<double> objective;
};

// 0.5 ||A x - y||^2 + lambda ||W x||_1
double cs_objective(KSpace const &y, CoilSensitivities const &sens, ComplexImage const &x, double lambda, int levels);
// Largest eigenvalue of A^H A restricted to y's mask.
double estimate_lipschitz(SamplingMask const &mask, CoilSensitivities const &sens, int iters, std::uint64_t seed);

CSResult cs_solve(KSpace const &y, CoilSensitivities const &sens, CSConfig const &cfg);
ComplexImage cs_reconstruct(KSpace const &y, CoilSensitivities const &sens, CSConfig const &cfg);

// Tabulated regularisation weights for R in {12, 16} and sigma in [0, 1];
// linear in sigma between tabulated columns.
double cs_lambda_schedule(double accel, double sigma);

} // namespace n2r
