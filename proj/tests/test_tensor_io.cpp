#include "n2r/tensor_io.hpp"
#include "support.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <sstream>

using namespace n2r;
using namespace n2r::io;

TEST_CASE("N2RT byte layout", "[io]")
{
  std::vector<float> const v{1.0f, -2.5f, 3.0f, 0.25f, 8.0f, 9.0f};
  std::stringstream ss;
  write_tensor(ss, from_float(std::span<float const>(v), {2, 3}));
  std::string const bytes = ss.str();
  REQUIRE(bytes.size() == 4 + 4 + 1 + 1 + 2 * 8 + 6 * 4);
  CHECK(bytes.substr(0, 4) == "N2RT");
  std::uint32_t version = 0;
  std::memcpy(&version, bytes.data() + 4, 4);
  CHECK(version == kFormatVersion);
  CHECK(bytes[8] == 1);
  CHECK(bytes[9] == 2);
  std::uint64_t d0 = 0, d1 = 0;
  std::memcpy(&d0, bytes.data() + 10, 8);
  std::memcpy(&d1, bytes.data() + 18, 8);
  CHECK(d0 == 2);
  CHECK(d1 == 3);
  float f = 0.0f;
  std::memcpy(&f, bytes.data() + 26 + 4, 4);
  CHECK(f == -2.5f);
}

TEST_CASE("N2RT tensor and archive round trips", "[io]")
{
  auto const img = test::random_image(8, 16, 3);
  std::stringstream ss;
  write_tensor(ss, from_complex(img.data(), {8, 16}));
  auto const t = read_tensor(ss);
  CHECK(t.dtype == DType::Complex64);
  CHECK(t.dims == std::vector<std::uint64_t>{8, 16});
  auto const z = to_complex(t);
  for (std::size_t i = 0; i < z.size(); ++i) {
    REQUIRE(z[i].real() == static_cast<float>(img.data()[i].real()));
    REQUIRE(z[i].imag() == static_cast<float>(img.data()[i].imag()));
  }

  Archive a;
  std::vector<float> const w{1, 2, 3, 4};
  a.add("enc0.conv1.weight", from_float(std::span<float const>(w), {1, 1, 2, 2}));
  a.add("target", from_complex(img.data(), {1, 8, 16}));
  a.add("scalar", from_float(std::span<float const>(w.data(), 1), {}));
  CHECK_THROWS_AS(a.add("target", from_float(std::span<float const>(w), {4})), UsageError);
  std::stringstream as;
  write_archive(as, a);
  auto const b = read_archive(as);
  REQUIRE(b.records().size() == 3);
  CHECK(b.records()[0].first == "enc0.conv1.weight");
  CHECK(b.at("enc0.conv1.weight").values == w);
  CHECK(b.at("scalar").dims.empty());
  CHECK(b.at("scalar").values == std::vector<float>{1.0f});
  CHECK_THROWS_AS(b.at("missing"), ParseError);
  CHECK_THROWS_AS(to_double(b.at("target")), ParseError);
}

TEST_CASE("N2RT rejects malformed input", "[io]")
{
  std::vector<float> const v{1, 2, 3, 4};
  std::stringstream ss;
  write_tensor(ss, from_float(std::span<float const>(v), {4}));
  std::string const good = ss.str();

  auto parse = [](std::string s) {
    std::stringstream in(s);
    return read_tensor(in);
  };
  CHECK_NOTHROW(parse(good));
  auto bad = good;
  bad[0] = 'X';
  CHECK_THROWS_AS(parse(bad), ParseError);
  bad = good;
  bad[4] = 9;
  CHECK_THROWS_AS(parse(bad), ParseError);
  bad = good;
  bad[8] = 7;
  CHECK_THROWS_AS(parse(bad), ParseError);
  CHECK_THROWS_AS(parse(good.substr(0, good.size() - 1)), ParseError);
  CHECK_THROWS_AS(parse(""), ParseError);
  CHECK_THROWS_AS(from_float(std::span<float const>(v), {3}), DimensionError);
}
