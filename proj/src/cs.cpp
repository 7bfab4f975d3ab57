#include "n2r/wavelet_cs.hpp"

#include <array>
#include <cmath>
#include <string>

namespace n2r {

namespace {

// A^H A x for a fixed mask (noise-free normal operator).
ComplexImage normal_op(ComplexImage const &x, CoilSensitivities const &sens, SamplingMask const &mask)
{
  return adjoint_sense(forward_model(x, sens, mask), sens);
}

double residual_energy(KSpace const &y, CoilSensitivities const &sens, ComplexImage const &x)
{
  KSpace const ax = forward_model(x, sens, y.mask());
  double s = 0.0;
  auto const a = ax.data(), b = y.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += std::norm(a[i] - b[i]);
  }
  return s;
}

} // namespace

double cs_objective(KSpace const &y, CoilSensitivities const &sens, ComplexImage const &x, double lambda, int levels)
{
  double const fit = 0.5 * residual_energy(y, sens, x);
  if (lambda == 0.0) { return fit; }
  return fit + lambda * l1_norm(dwt2(x, levels));
}

double estimate_lipschitz(SamplingMask const &mask, CoilSensitivities const &sens, int iters, std::uint64_t seed)
{
  ComplexImage v(sens.height(), sens.width());
  Rng rng(seed);
  for (auto &z : v.data()) {
    auto const [a, b] = rng.normal_pair();
    z = Complex(a, b);
  }
  double lambda = 0.0;
  for (int i = 0; i < iters; ++i) {
    double const n = v.norm();
    if (!(n > 0.0)) { break; }
    v = scaled(v, 1.0 / n);
    ComplexImage const av = normal_op(v, sens, mask);
    lambda = inner_product(v.data(), av.data()).real();
    v = av;
  }
  return lambda;
}

CSResult cs_solve(KSpace const &y, CoilSensitivities const &sens, CSConfig const &cfg)
{
  if (cfg.iters < 1) { throw ConfigError("cs_reconstruct: iters must be >= 1"); }
  if (!(cfg.lambda >= 0.0)) { throw ConfigError("cs_reconstruct: lambda must be non-negative"); }
  if (y.ncoils() != sens.ncoils() || y.height() != sens.height() || y.width() != sens.width()) {
    throw DimensionError("cs_reconstruct: k-space and sensitivity maps disagree");
  }

  CSResult res;
  if (cfg.step) {
    if (!(*cfg.step > 0.0)) { throw ConfigError("cs_reconstruct: step must be positive"); }
    res.step = *cfg.step;
    res.lipschitz = 1.0 / res.step;
  } else {
    res.lipschitz = estimate_lipschitz(y.mask(), sens, cfg.power_iters, cfg.power_seed);
    if (!(res.lipschitz > 0.0) || !std::isfinite(res.lipschitz)) {
      throw NumericalError("cs_reconstruct: power iteration did not produce a positive Lipschitz estimate");
    }
    res.step = 1.0 / res.lipschitz;
  }

  ComplexImage x = adjoint_sense(y, sens);
  ComplexImage const aty = x;
  res.objective.reserve(cfg.iters + 1);
  res.objective.push_back(cs_objective(y, sens, x, cfg.lambda, cfg.levels));
  for (int it = 0; it < cfg.iters; ++it) {
    // Gradient of the data term: A^H A x - A^H y.
    ComplexImage g = normal_op(x, sens, y.mask());
    auto gd = g.data();
    auto const xd = x.data();
    auto const ad = aty.data();
    for (std::size_t i = 0; i < gd.size(); ++i) {
      gd[i] = xd[i] - res.step * (gd[i] - ad[i]);
    }
    x = idwt2(soft_threshold(dwt2(g, cfg.levels), res.step * cfg.lambda));
    res.objective.push_back(cs_objective(y, sens, x, cfg.lambda, cfg.levels));
  }
  res.image = std::move(x);
  return res;
}

ComplexImage cs_reconstruct(KSpace const &y, CoilSensitivities const &sens, CSConfig const &cfg)
{
  return cs_solve(y, sens, cfg).image;
}

double cs_lambda_schedule(double accel, double sigma)
{
  static constexpr std::array<double, 6> kSigma{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  static constexpr std::array<double, 6> kR12{0.07, 0.15, 0.3, 0.6, 0.9, 1.2};
  static constexpr std::array<double, 6> kR16{0.06, 0.12, 0.25, 0.5, 0.8, 1.1};
  std::array<double, 6> const *row = nullptr;
  if (accel == 12.0) {
    row = &kR12;
  } else if (accel == 16.0) {
    row = &kR16;
  } else {
    throw ConfigError("cs_lambda_schedule: no tabulated lambda for R=" + std::to_string(accel));
  }
  if (!(sigma >= 0.0 && sigma <= 1.0)) {
    throw ConfigError("cs_lambda_schedule: sigma " + std::to_string(sigma) + " outside tabulated range [0, 1]");
  }
  for (std::size_t i = 0; i + 1 < kSigma.size(); ++i) {
    if (sigma == kSigma[i]) { return (*row)[i]; }
    if (sigma < kSigma[i + 1]) {
      double const t = (sigma - kSigma[i]) / (kSigma[i + 1] - kSigma[i]);
      return (*row)[i] + t * ((*row)[i + 1] - (*row)[i]);
    }
  }
  return row->back();
}

} // namespace n2r
