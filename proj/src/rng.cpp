#include "n2r/common.hpp"

#include <cmath>
#include <numbers>

namespace n2r {

namespace {
constexpr std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
} // namespace

Rng::Rng(std::uint64_t seed)
{
  std::uint64_t x = seed;
  for (auto &w : s_) {
    x = splitmix64(x);
    w = x;
  }
}

Rng::Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys)
  : Rng(derive_seed(seed, keys))
{
}

Rng Rng::split(std::uint64_t key) const
{
  return Rng(derive_seed(s_[0] ^ rotl(s_[1], 17) ^ rotl(s_[2], 31) ^ rotl(s_[3], 47), {key}));
}

std::uint64_t Rng::next()
{
  std::uint64_t const result = rotl(s_[1] * 5, 7) * 9;
  std::uint64_t const t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::below(std::uint64_t n)
{
  if (n == 0) { throw UsageError("Rng::below requires n > 0"); }
  // Rejection sampling on the top of the range to avoid modulo bias.
  std::uint64_t const limit = n * (~std::uint64_t{0} / n);
  std::uint64_t v;
  do {
    v = next();
  } while (v >= limit);
  return v % n;
}

std::pair<double, double> Rng::normal_pair()
{
  double u1 = uniform();
  while (u1 <= 0.0) {
    u1 = uniform();
  }
  double const u2 = uniform();
  double const r = std::sqrt(-2.0 * std::log(u1));
  double const theta = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(theta), r * std::sin(theta)};
}

double Rng::normal() { return normal_pair().first; }

} // namespace n2r
