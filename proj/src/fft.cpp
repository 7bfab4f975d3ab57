#include "n2r/kspace.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace n2r {

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
// Plans are created once per shape with FFTW_UNALIGNED so they can run on any
// std::vector<std::complex<double>> buffer.
class PlanCache
{
public:
  static PlanCache &instance()
  {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(int h, int w, int sign)
  {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(h, w, sign);
    if (auto it = plans_.find(key); it != plans_.end()) { return it->second; }
    std::vector<Complex> scratch(static_cast<std::size_t>(h) * w);
    auto *p = reinterpret_cast<fftw_complex *>(scratch.data());
    fftw_plan plan = fftw_plan_dft_2d(h, w, p, p, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache()
  {
    for (auto &[k, p] : plans_) {
      fftw_destroy_plan(p);
    }
  }

private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

// Swaps quadrants. For even dimensions fftshift and ifftshift coincide.
void shift2(std::span<Complex> buf, int h, int w)
{
  int const hh = h / 2, hw = w / 2;
  for (int y = 0; y < hh; ++y) {
    Complex *top = buf.data() + static_cast<std::size_t>(y) * w;
    Complex *bot = buf.data() + static_cast<std::size_t>(y + hh) * w;
    for (int x = 0; x < hw; ++x) {
      std::swap(top[x], bot[x + hw]);
      std::swap(top[x + hw], bot[x]);
    }
  }
}

void check_dims(std::size_t n, int h, int w)
{
  if (!is_power_of_two(h) || !is_power_of_two(w) || h < 2 || w < 2) {
    throw DimensionError("fft2c: dimensions must be powers of two, got " + std::to_string(h) + "x" +
                         std::to_string(w));
  }
  if (n != static_cast<std::size_t>(h) * w) { throw DimensionError("fft2c: buffer size mismatch"); }
}

void centered(std::span<Complex> buf, int h, int w, int sign)
{
  check_dims(buf.size(), h, w);
  shift2(buf, h, w);
  auto *p = reinterpret_cast<fftw_complex *>(buf.data());
  fftw_execute_dft(PlanCache::instance().get(h, w, sign), p, p);
  shift2(buf, h, w);
  double const s = 1.0 / std::sqrt(static_cast<double>(h) * w);
  for (auto &v : buf) {
    v *= s;
  }
}

} // namespace

void fft2c_inplace(std::span<Complex> buf, int height, int width) { centered(buf, height, width, FFTW_FORWARD); }

void ifft2c_inplace(std::span<Complex> buf, int height, int width) { centered(buf, height, width, FFTW_BACKWARD); }

ComplexImage fft2c(ComplexImage const &x)
{
  ComplexImage out = x;
  fft2c_inplace(out.data(), out.height(), out.width());
  return out;
}

ComplexImage ifft2c(ComplexImage const &x)
{
  ComplexImage out = x;
  ifft2c_inplace(out.data(), out.height(), out.width());
  return out;
}

} // namespace n2r
