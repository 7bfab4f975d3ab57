#pragma once

#include "n2r/kspace.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace n2r::io {

inline constexpr std::uint32_t kFormatVersion = 1;

enum class DType : std::uint8_t
{
  Complex64 = 0, // interleaved f32 re/im
  Float32 = 1,
};

// In-memory form of one N2RT record; `values` holds 2 floats per element
// for Complex64.
struct StoredTensor
{
  DType dtype = DType::Float32;
  std::vector<std::uint64_t> dims;
  std::vector<float> values;

  [[nodiscard]] std::size_t elements() const;
};

StoredTensor from_complex(std::span<Complex const> data, std::vector<std::uint64_t> dims);
StoredTensor from_float(std::span<float const> data, std::vector<std::uint64_t> dims);
StoredTensor from_float(std::span<double const> data, std::vector<std::uint64_t> dims);
std::vector<Complex> to_complex(StoredTensor const &t);
std::vector<double> to_double(StoredTensor const &t);

void write_tensor(std::ostream &os, StoredTensor const &t);
StoredTensor read_tensor(std::istream &is);

// Named records in insertion order.
class Archive
{
public:
  void add(std::string name, StoredTensor t);
  [[nodiscard]] bool contains(std::string const &name) const;
  [[nodiscard]] StoredTensor const &at(std::string const &name) const;
  [[nodiscard]] std::vector<std::pair<std::string, StoredTensor>> const &records() const { return records_; }

private:
  std::vector<std::pair<std::string, StoredTensor>> records_;
};

void write_archive(std::ostream &os, Archive const &a);
Archive read_archive(std::istream &is);
void save_archive(std::filesystem::path const &path, Archive const &a);
Archive load_archive(std::filesystem::path const &path);

void save_tensor(std::filesystem::path const &path, StoredTensor const &t);
StoredTensor load_tensor(std::filesystem::path const &path);

} // namespace n2r::io
