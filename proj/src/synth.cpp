#include "n2r/kspace.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace n2r {

using std::numbers::pi;

CoilSensitivities make_coil_sensitivities(int height, int width, int ncoils, std::uint64_t seed)
{
  if (ncoils < 1) { throw ConfigError("make_coil_sensitivities: ncoils must be >= 1"); }
  std::size_t const npix = static_cast<std::size_t>(height) * width;
  std::vector<Complex> data(npix * ncoils);
  Rng rng(seed);
  double const cy = height / 2.0, cx = width / 2.0;
  // Lobe width relative to the smaller image dimension.
  double const lobe = 0.5 * std::min(height, width);
  for (int c = 0; c < ncoils; ++c) {
    double const theta = 2.0 * pi * c / ncoils + rng.uniform(-0.1, 0.1);
    double const py = cy + cy * std::sin(theta);
    double const px = cx + cx * std::cos(theta);
    double const phase0 = rng.uniform(-pi, pi);
    double const ramp_y = rng.uniform(-pi / 2, pi / 2);
    double const ramp_x = rng.uniform(-pi / 2, pi / 2);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        double const d2 = (y - py) * (y - py) + (x - px) * (x - px);
        double const mag = std::exp(-d2 / (2.0 * lobe * lobe));
        double const phase = phase0 + ramp_y * (static_cast<double>(y) / height - 0.5) +
                             ramp_x * (static_cast<double>(x) / width - 0.5);
        data[c * npix + static_cast<std::size_t>(y) * width + x] = std::polar(mag, phase);
      }
    }
  }
  return CoilSensitivities::normalized(ncoils, height, width, std::move(data));
}

ComplexImage make_phantom(int height, int width, std::uint64_t seed)
{
  ComplexImage img(height, width);
  Rng rng(seed);
  struct Ellipse
  {
    double cy, cx, ay, ax, angle, value;
  };
  int const n = 5 + static_cast<int>(rng.below(11));
  std::vector<Ellipse> shapes;
  shapes.reserve(n);
  // Large body ellipse first, then interior structures that add or remove signal.
  shapes.push_back({rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(0.6, 0.85),
                    rng.uniform(0.6, 0.85), rng.uniform(0.0, pi), rng.uniform(0.5, 0.9)});
  for (int i = 1; i < n; ++i) {
    shapes.push_back({rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(0.05, 0.35),
                      rng.uniform(0.05, 0.35), rng.uniform(0.0, pi), rng.uniform(-0.4, 0.5)});
  }
  std::array<double, 6> poly{};
  for (auto &p : poly) {
    p = rng.uniform(-0.5, 0.5);
  }

  for (int y = 0; y < height; ++y) {
    double const v = 2.0 * (y + 0.5) / height - 1.0;
    for (int x = 0; x < width; ++x) {
      double const u = 2.0 * (x + 0.5) / width - 1.0;
      double mag = 0.0;
      for (auto const &e : shapes) {
        double const ca = std::cos(e.angle), sa = std::sin(e.angle);
        double const dy = v - e.cy, dx = u - e.cx;
        double const ry = (ca * dy - sa * dx) / e.ay;
        double const rx = (sa * dy + ca * dx) / e.ax;
        if (ry * ry + rx * rx <= 1.0) { mag += e.value; }
      }
      mag = std::clamp(mag, 0.0, 1.0);
      double const phase = poly[0] + poly[1] * u + poly[2] * v + poly[3] * u * u + poly[4] * u * v + poly[5] * v * v;
      img(y, x) = std::polar(mag, phase);
    }
  }
  return img;
}

} // namespace n2r
