#include "n2r/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace n2r::io {

namespace {

static_assert(std::endian::native == std::endian::little, "N2RT I/O assumes a little-endian host");

constexpr char kMagic[4] = {'N', '2', 'R', 'T'};
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;

template <typename U>
void put(std::ostream &os, U v)
{
  os.write(reinterpret_cast<char const *>(&v), sizeof(U));
}

template <typename U>
U get(std::istream &is, char const *what)
{
  U v{};
  if (!is.read(reinterpret_cast<char *>(&v), sizeof(U))) {
    throw ParseError(std::string("N2RT: truncated stream while reading ") + what);
  }
  return v;
}

} // namespace

std::size_t StoredTensor::elements() const
{
  std::size_t n = 1;
  for (auto d : dims) {
    n *= static_cast<std::size_t>(d);
  }
  return n;
}

StoredTensor from_complex(std::span<Complex const> data, std::vector<std::uint64_t> dims)
{
  StoredTensor t{DType::Complex64, std::move(dims), {}};
  if (t.elements() != data.size()) { throw DimensionError("from_complex: dims do not match data size"); }
  t.values.reserve(2 * data.size());
  for (auto const &z : data) {
    t.values.push_back(static_cast<float>(z.real()));
    t.values.push_back(static_cast<float>(z.imag()));
  }
  return t;
}

StoredTensor from_float(std::span<float const> data, std::vector<std::uint64_t> dims)
{
  StoredTensor t{DType::Float32, std::move(dims), {data.begin(), data.end()}};
  if (t.elements() != data.size()) { throw DimensionError("from_float: dims do not match data size"); }
  return t;
}

StoredTensor from_float(std::span<double const> data, std::vector<std::uint64_t> dims)
{
  std::vector<float> f(data.begin(), data.end());
  return from_float(std::span<float const>(f), std::move(dims));
}

std::vector<Complex> to_complex(StoredTensor const &t)
{
  if (t.dtype != DType::Complex64) { throw ParseError("N2RT: expected a complex64 tensor"); }
  std::vector<Complex> out(t.elements());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = Complex(t.values[2 * i], t.values[2 * i + 1]);
  }
  return out;
}

std::vector<double> to_double(StoredTensor const &t)
{
  if (t.dtype != DType::Float32) { throw ParseError("N2RT: expected a float32 tensor"); }
  return {t.values.begin(), t.values.end()};
}

void write_tensor(std::ostream &os, StoredTensor const &t)
{
  std::size_t const per = t.dtype == DType::Complex64 ? 2 : 1;
  if (t.values.size() != per * t.elements()) { throw DimensionError("write_tensor: value count does not match dims"); }
  if (t.dims.size() > 255) { throw DimensionError("write_tensor: too many dimensions"); }
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kFormatVersion);
  put<std::uint8_t>(os, static_cast<std::uint8_t>(t.dtype));
  put<std::uint8_t>(os, static_cast<std::uint8_t>(t.dims.size()));
  for (auto d : t.dims) {
    put<std::uint64_t>(os, d);
  }
  os.write(reinterpret_cast<char const *>(t.values.data()),
           static_cast<std::streamsize>(t.values.size() * sizeof(float)));
  if (!os) { throw Error("write_tensor: stream write failed"); }
}

StoredTensor read_tensor(std::istream &is)
{
  char magic[4];
  if (!is.read(magic, 4)) { throw ParseError("N2RT: truncated stream while reading magic"); }
  if (std::memcmp(magic, kMagic, 4) != 0) { throw ParseError("N2RT: bad magic bytes"); }
  auto const version = get<std::uint32_t>(is, "version");
  if (version != kFormatVersion) { throw ParseError("N2RT: unsupported version " + std::to_string(version)); }
  auto const code = get<std::uint8_t>(is, "dtype");
  if (code > 1) { throw ParseError("N2RT: unknown dtype code " + std::to_string(code)); }
  StoredTensor t;
  t.dtype = static_cast<DType>(code);
  auto const ndim = get<std::uint8_t>(is, "ndim");
  std::uint64_t n = 1;
  for (int i = 0; i < ndim; ++i) {
    t.dims.push_back(get<std::uint64_t>(is, "dims"));
    n *= t.dims.back();
    if (n > kMaxElements) { throw ParseError("N2RT: implausible tensor size"); }
  }
  std::size_t const per = t.dtype == DType::Complex64 ? 2 : 1;
  t.values.resize(per * n);
  if (!is.read(reinterpret_cast<char *>(t.values.data()), static_cast<std::streamsize>(t.values.size() * sizeof(float)))) {
    throw ParseError("N2RT: truncated tensor data");
  }
  return t;
}

void Archive::add(std::string name, StoredTensor t)
{
  if (contains(name)) { throw UsageError("Archive: duplicate record '" + name + "'"); }
  if (name.size() > 0xFFFF) { throw UsageError("Archive: record name too long"); }
  records_.emplace_back(std::move(name), std::move(t));
}

bool Archive::contains(std::string const &name) const
{
  return std::any_of(records_.begin(), records_.end(), [&](auto const &r) { return r.first == name; });
}

StoredTensor const &Archive::at(std::string const &name) const
{
  for (auto const &r : records_) {
    if (r.first == name) { return r.second; }
  }
  throw ParseError("Archive: missing record '" + name + "'");
}

void write_archive(std::ostream &os, Archive const &a)
{
  put<std::uint32_t>(os, static_cast<std::uint32_t>(a.records().size()));
  for (auto const &[name, t] : a.records()) {
    put<std::uint16_t>(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_tensor(os, t);
  }
}

Archive read_archive(std::istream &is)
{
  Archive a;
  auto const count = get<std::uint32_t>(is, "record count");
  for (std::uint32_t i = 0; i < count; ++i) {
    auto const len = get<std::uint16_t>(is, "name length");
    std::string name(len, '\0');
    if (!is.read(name.data(), len)) { throw ParseError("N2RT: truncated record name"); }
    a.add(std::move(name), read_tensor(is));
  }
  return a;
}

void save_archive(std::filesystem::path const &path, Archive const &a)
{
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) { throw ConfigError("cannot open " + path.string() + " for writing"); }
  write_archive(os, a);
}

Archive load_archive(std::filesystem::path const &path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) { throw ConfigError("cannot open " + path.string()); }
  return read_archive(is);
}

void save_tensor(std::filesystem::path const &path, StoredTensor const &t)
{
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) { throw ConfigError("cannot open " + path.string() + " for writing"); }
  write_tensor(os, t);
}

StoredTensor load_tensor(std::filesystem::path const &path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is) { throw ConfigError("cannot open " + path.string()); }
  return read_tensor(is);
}

} // namespace n2r::io
