#include "n2r/kspace.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace n2r {

namespace {

// Sampling-radius growth with normalised distance from the k-space centre.
// r(p) = r0 * (1 + kDensityFalloff * d(p)), d in [0, sqrt(2)].
constexpr double kDensityFalloff = 2.0;
constexpr int kBisectionSteps = 48;
constexpr double kCountTolerance = 0.02;

struct DartThrower
{
  int h, w;
  std::vector<int> order; // candidate pixel indices, seeded shuffle
  std::vector<double> dist;

  // Number of accepted darts (excluding the calibration block) for base radius r0.
  std::size_t throw_darts(double r0, std::vector<std::uint8_t> &accepted) const
  {
    std::fill(accepted.begin(), accepted.end(), std::uint8_t{0});
    std::size_t n = 0;
    for (int const p : order) {
      double const r = r0 * (1.0 + kDensityFalloff * dist[p]);
      int const y = p / w, x = p % w;
      bool ok = true;
      if (r > 1.0) {
        int const win = static_cast<int>(std::ceil(r));
        double const r2 = r * r;
        for (int dy = -win; dy <= win && ok; ++dy) {
          int const yy = y + dy;
          if (yy < 0 || yy >= h) { continue; }
          for (int dx = -win; dx <= win; ++dx) {
            int const xx = x + dx;
            if (xx < 0 || xx >= w) { continue; }
            if (accepted[static_cast<std::size_t>(yy) * w + xx] && dy * dy + dx * dx < r2) {
              ok = false;
              break;
            }
          }
        }
      }
      if (ok) {
        accepted[p] = 1;
        ++n;
      }
    }
    return n;
  }
};

} // namespace

SamplingMask make_poisson_disc_mask(int height, int width, double accel, int calib, std::uint64_t seed)
{
  if (height < 1 || width < 1) { throw DimensionError("make_poisson_disc_mask: empty mask"); }
  if (!(accel >= 1.0)) { throw ConfigError("make_poisson_disc_mask: acceleration must be >= 1"); }
  if (calib < 0 || calib > std::min(height, width)) {
    throw ConfigError("make_poisson_disc_mask: calibration size exceeds mask dimensions");
  }
  std::size_t const npix = static_cast<std::size_t>(height) * width;
  double const target = static_cast<double>(npix) / accel;
  std::size_t const ncalib = static_cast<std::size_t>(calib) * calib;
  if (static_cast<double>(ncalib) > target * 1.1) {
    throw ConfigError("make_poisson_disc_mask: a " + std::to_string(calib) + "x" + std::to_string(calib) +
                      " calibration region alone exceeds the sample budget for R=" + std::to_string(accel));
  }

  std::vector<std::uint8_t> calib_block(npix, 0);
  int const y0 = height / 2 - calib / 2, x0 = width / 2 - calib / 2;
  for (int y = y0; y < y0 + calib; ++y) {
    for (int x = x0; x < x0 + calib; ++x) {
      calib_block[static_cast<std::size_t>(y) * width + x] = 1;
    }
  }

  if (accel == 1.0) { return SamplingMask::full(height, width); }

  DartThrower dt{height, width, {}, std::vector<double>(npix)};
  double const cy = height / 2.0, cx = width / 2.0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double const ny = (y - cy) / cy, nx = (x - cx) / cx;
      auto const p = static_cast<std::size_t>(y) * width + x;
      dt.dist[p] = std::sqrt(ny * ny + nx * nx);
      if (!calib_block[p]) { dt.order.push_back(static_cast<int>(p)); }
    }
  }
  Rng rng(seed);
  for (std::size_t i = dt.order.size(); i > 1; --i) {
    std::swap(dt.order[i - 1], dt.order[rng.below(i)]);
  }

  // Darts are placed only outside the calibration block.
  double const want = std::max(0.0, target - static_cast<double>(ncalib));
  std::vector<std::uint8_t> accepted(npix), best(npix);
  double lo = 0.0, hi = std::sqrt(accel);
  while (static_cast<double>(dt.throw_darts(hi, accepted)) > want && hi < std::max(height, width)) {
    lo = hi;
    hi *= 2.0;
  }
  double best_err = INFINITY;
  for (int it = 0; it < kBisectionSteps; ++it) {
    double const r0 = 0.5 * (lo + hi);
    auto const n = static_cast<double>(dt.throw_darts(r0, accepted));
    double const err = std::abs(n - want);
    if (err < best_err) {
      best_err = err;
      best = accepted;
    }
    if (err <= kCountTolerance * target) { break; }
    if (n > want) {
      lo = r0;
    } else {
      hi = r0;
    }
  }

  for (std::size_t p = 0; p < npix; ++p) {
    best[p] = (best[p] || calib_block[p]) ? 1 : 0;
  }
  SamplingMask mask(height, width, std::move(best), accel, calib);
  double const achieved = mask.empirical_acceleration();
  if (std::abs(achieved - accel) > 0.1 * accel) {
    throw NumericalError("make_poisson_disc_mask: could not reach R=" + std::to_string(accel) +
                         " (achieved " + std::to_string(achieved) + ")");
  }
  return mask;
}

} // namespace n2r
