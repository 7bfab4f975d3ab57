#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <utility>

namespace n2r {

// Error taxonomy shared by every module. The CLI maps these onto exit codes.
struct Error : std::runtime_error
{
  using std::runtime_error::runtime_error;
};
struct DimensionError : Error
{
  using Error::Error;
};
struct ConfigError : Error
{
  using Error::Error;
};
struct UsageError : Error
{
  using Error::Error;
};
struct ParseError : Error
{
  using Error::Error;
};
struct NumericalError : Error
{
  using Error::Error;
};
struct DegenerateInputError : NumericalError
{
  using NumericalError::NumericalError;
};

constexpr bool is_power_of_two(long v) { return v > 0 && (v & (v - 1)) == 0; }

constexpr std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Folds a list of integer keys into a seed. Used to derive independent
// streams, e.g. derive_seed(run_seed, {kStreamMask, step}).
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys)
{
  std::uint64_t h = splitmix64(seed);
  for (auto k : keys) {
    h = splitmix64(h ^ splitmix64(k + 0x632BE59BD9B4E019ull));
  }
  return h;
}

// xoshiro256** with splitmix64 seeding. All distributions are implemented
// here rather than through <random> so streams are identical across
// standard library implementations.
class Rng
{
public:
  using State = std::array<std::uint64_t, 4>;

  explicit Rng(std::uint64_t seed = 0);
  Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);

  // Child stream; does not advance this generator.
  [[nodiscard]] Rng split(std::uint64_t key) const;

  std::uint64_t next();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer on [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  // Two independent standard normals (Box-Muller).
  std::pair<double, double> normal_pair();
  double normal();

  [[nodiscard]] State const &state() const { return s_; }
  void set_state(State const &s) { s_ = s; }

private:
  State s_{};
};

} // namespace n2r
