#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "aerial/image.hpp"
#include "aerial/rng.hpp"
#include "support.hpp"

using namespace aerial;

namespace {

std::vector<unsigned char> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

ImageFormatError::Kind decode_error_kind(const std::string& file) {
  try {
    decode_pnm(bytes_of(file));
  } catch (const ImageFormatError& e) {
    return e.kind();
  }
  FAIL("expected a format error");
  return ImageFormatError::Kind::kMalformedHeader;
}

ImageBuffer random_quantized(int h, int w, int c, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(static_cast<std::size_t>(h) * w * c);
  for (double& x : v) x = static_cast<double>(rng.uniform_index(256)) / 255.0;
  return ImageBuffer(h, w, c, std::move(v));
}

}  // namespace

TEST_CASE("read: 1x1 P5 with byte 255 is [1.0]") {
  const ImageBuffer img = decode_pnm(bytes_of(std::string("P5\n1 1\n255\n") + '\xff'));
  CHECK(img.channels() == 1);
  CHECK(img.at(0, 0, 0) == 1.0);
}

TEST_CASE("read: 1x1 P6 with bytes (0,128,255)") {
  std::string file = "P6\n1 1\n255\n";
  file += '\x00';
  file += '\x80';
  file += '\xff';
  const ImageBuffer img = decode_pnm(bytes_of(file));
  CHECK(img.channels() == 3);
  CHECK(img.at(0, 0, 0) == 0.0);
  CHECK(img.at(0, 0, 1) == 128.0 / 255.0);
  CHECK(img.at(0, 0, 2) == 1.0);
}

TEST_CASE("read: header comments and arbitrary whitespace") {
  const ImageBuffer img = decode_pnm(bytes_of(std::string("P5 # c\n2\t1 # two\n255\n") + "\x10\x20"));
  CHECK(img.width() == 2);
  CHECK(img.height() == 1);
  CHECK(img.at(0, 1, 0) == 32.0 / 255.0);
}

TEST_CASE("read: distinct error kinds") {
  using K = ImageFormatError::Kind;
  CHECK(decode_error_kind("P3\n1 1\n255\n0 0 0") == K::kUnsupportedMagic);
  CHECK(decode_error_kind("XX") == K::kUnsupportedMagic);
  CHECK(decode_error_kind("P5\n1\n") == K::kMalformedHeader);
  CHECK(decode_error_kind("P5\nx 1\n255\n\x01") == K::kMalformedHeader);
  CHECK(decode_error_kind("P5\n0 1\n255\n") == K::kMalformedHeader);
  CHECK(decode_error_kind("P5\n1 1\n65535\n\x01\x01") == K::kUnsupportedMaxval);
  CHECK(decode_error_kind("P5\n1 1\n15\n\x01") == K::kUnsupportedMaxval);
  CHECK(decode_error_kind("P6\n2 2\n255\n\x01\x02\x03") == K::kTruncatedPayload);
}

TEST_CASE("write: quantization is round-half-up") {
  CHECK(quantize_sample(0.5) == 128);
  CHECK(quantize_sample(0.0) == 0);
  CHECK(quantize_sample(1.0) == 255);
  CHECK(quantize_sample(1.5 / 255.0) == 2);
  const auto bytes = encode_pnm(ImageBuffer(1, 1, 1, {0.5}));
  CHECK(bytes.back() == 128);
}

TEST_CASE("write: all-zero 2x2 RGB has 12 zero payload bytes") {
  const auto bytes = encode_pnm(ImageBuffer(2, 2, 3));
  const std::string header = "P6\n2 2\n255\n";
  REQUIRE(bytes.size() == header.size() + 12);
  CHECK(std::string(bytes.begin(), bytes.begin() + header.size()) == header);
  for (std::size_t i = header.size(); i < bytes.size(); ++i) CHECK(bytes[i] == 0);
}

TEST_CASE("write then read is the identity on quantized buffers and files are bit-identical") {
  TempDir dir("img");
  for (int channels : {1, 3}) {
    const ImageBuffer img = random_quantized(8, 8, channels, 99 + channels);
    const auto path = dir / ("a" + std::to_string(channels) + ".pnm");
    write_image(img, path);
    const ImageBuffer back = read_image(path);
    CHECK(back == img);
    const auto path2 = dir / ("b" + std::to_string(channels) + ".pnm");
    write_image(back, path2);
    CHECK(encode_pnm(read_image(path2)) == encode_pnm(img));
  }
}

TEST_CASE("quantization error bound 1/510 over every byte value") {
  for (int k = 0; k < 256; ++k) {
    // Sweep each byte's rounding interval, including both edges.
    for (int s = 0; s <= 100; ++s) {
      const double v = std::clamp((k - 0.5 + s / 100.0 * (1.0 - 1e-12)) / 255.0, 0.0, 1.0);
      const double back = quantize_sample(v) / 255.0;
      REQUIRE(std::abs(back - v) <= 1.0 / 510.0 + 1e-15);
    }
  }
}

TEST_CASE("image buffer rejects out-of-range samples and bad shapes") {
  CHECK_THROWS_AS(ImageBuffer(1, 1, 1, {1.5}), std::invalid_argument);
  CHECK_THROWS_AS(ImageBuffer(1, 1, 2), std::invalid_argument);
  CHECK_THROWS_AS(ImageBuffer(0, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(ImageBuffer(1, 2, 1, {0.0}), std::invalid_argument);
}

TEST_CASE("resize: identity dims are bit-identical") {
  const ImageBuffer img = random_quantized(5, 7, 3, 1);
  CHECK(resize_bilinear(img, 5, 7) == img);
}

TEST_CASE("resize: 2x2 checkerboard to 1x1 is 0.5") {
  const ImageBuffer img(2, 2, 1, {0.0, 1.0, 1.0, 0.0});
  CHECK(resize_bilinear(img, 1, 1).at(0, 0, 0) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("resize: 4x4 gradient to 2x2 matches hand-evaluated bilinear") {
  // v(y, x) = (y + 4x) / 15; separable-linear, so bilinear is exact at any
  // interior coordinate. Output pixel i samples source (i + 0.5) * 2 - 0.5.
  std::vector<double> v;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) v.push_back((y + 4.0 * x) / 15.0);
  const ImageBuffer out = resize_bilinear(ImageBuffer(4, 4, 1, v), 2, 2);
  const double src[2] = {0.5, 2.5};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(out.at(i, j, 0) == doctest::Approx((src[i] + 4.0 * src[j]) / 15.0).epsilon(1e-14));
}

TEST_CASE("resize: output stays within the input range") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ImageBuffer img = random_quantized(9, 6, 3, seed);
    double lo = 1.0, hi = 0.0;
    for (double x : img.data()) lo = std::min(lo, x), hi = std::max(hi, x);
    Rng rng(seed);
    const int oh = 1 + static_cast<int>(rng.uniform_index(20));
    const int ow = 1 + static_cast<int>(rng.uniform_index(20));
    const ImageBuffer out = resize_bilinear(img, oh, ow);
    for (double x : out.data()) {
      CHECK(x >= lo);
      CHECK(x <= hi);
    }
  }
}

TEST_CASE("image_from_vector clamps and maps non-finite values to 0") {
  const std::vector<double> raw = {-1.0, 0.25, 2.0, std::nan("")};
  const ImageBuffer img = image_from_vector(raw, 2, 2, 1);
  CHECK(img.data()[0] == 0.0);
  CHECK(img.data()[1] == 0.25);
  CHECK(img.data()[2] == 1.0);
  CHECK(img.data()[3] == 0.0);
}
