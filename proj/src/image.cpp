#include "aerial/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>

namespace aerial {

ImageBuffer::ImageBuffer(int height, int width, int channels)
    : ImageBuffer(height, width, channels,
                  std::vector<double>(static_cast<std::size_t>(std::max(height, 0)) *
                                      std::max(width, 0) * std::max(channels, 0))) {}

ImageBuffer::ImageBuffer(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  if (height < 1 || width < 1) throw std::invalid_argument("image dimensions must be >= 1");
  if (channels != 1 && channels != 3) throw std::invalid_argument("image must have 1 or 3 channels");
  if (data_.size() != static_cast<std::size_t>(height) * width * channels)
    throw std::invalid_argument("image data length does not match dimensions");
  for (double v : data_) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("image sample outside [0, 1]");
  }
}

unsigned char quantize_sample(double v) {
  const double q = std::floor(v * 255.0 + 0.5);
  return static_cast<unsigned char>(std::clamp(q, 0.0, 255.0));
}

namespace {

using Kind = ImageFormatError::Kind;

// Cursor over the header. Tokens are separated by whitespace; '#' comments
// are skipped for files produced elsewhere.
class HeaderReader {
 public:
  explicit HeaderReader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  int read_int(const char* field) {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_]))
      throw ImageFormatError(Kind::kMalformedHeader, std::string("missing ") + field);
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000)
        throw ImageFormatError(Kind::kMalformedHeader, std::string(field) + " too large");
      ++pos_;
    }
    return static_cast<int>(value);
  }

  // Exactly one whitespace byte separates the maxval from the payload.
  void consume_single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
      throw ImageFormatError(Kind::kMalformedHeader, "missing whitespace before payload");
    ++pos_;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

ImageBuffer decode_pnm(std::span<const unsigned char> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw ImageFormatError(Kind::kUnsupportedMagic, "expected P5 or P6 magic");
  const int channels = bytes[1] == '5' ? 1 : 3;

  HeaderReader header(bytes);
  header.advance(2);
  const int width = header.read_int("width");
  const int height = header.read_int("height");
  const int maxval = header.read_int("maxval");
  if (width < 1 || height < 1) throw ImageFormatError(Kind::kMalformedHeader, "zero dimension");
  if (maxval != 255)
    throw ImageFormatError(Kind::kUnsupportedMaxval, "maxval must be 255, got " + std::to_string(maxval));
  header.consume_single_space();

  const std::size_t count = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() - header.pos() < count)
    throw ImageFormatError(Kind::kTruncatedPayload,
                           "payload has " + std::to_string(bytes.size() - header.pos()) +
                               " bytes, expected " + std::to_string(count));
  std::vector<double> data(count);
  const auto* payload = bytes.data() + header.pos();
  for (std::size_t i = 0; i < count; ++i) data[i] = payload[i] / 255.0;
  return ImageBuffer(height, width, channels, std::move(data));
}

ImageBuffer read_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open image " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_pnm(bytes);
}

std::vector<unsigned char> encode_pnm(const ImageBuffer& image) {
  const std::string header = std::string(image.channels() == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(image.width()) + " " + std::to_string(image.height()) +
                             "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.reserve(out.size() + image.size());
  for (double v : image.data()) out.push_back(quantize_sample(v));
  return out;
}

void write_image(const ImageBuffer& image, const std::filesystem::path& path) {
  const auto bytes = encode_pnm(image);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

double sample_bilinear(const ImageBuffer& image, double sy, double sx, int c) {
  sy = std::clamp(sy, 0.0, static_cast<double>(image.height() - 1));
  sx = std::clamp(sx, 0.0, static_cast<double>(image.width() - 1));
  const int y0 = static_cast<int>(std::floor(sy));
  const int x0 = static_cast<int>(std::floor(sx));
  const int y1 = std::min(y0 + 1, image.height() - 1);
  const int x1 = std::min(x0 + 1, image.width() - 1);
  const double fy = sy - y0;
  const double fx = sx - x0;
  const double top = image.at(y0, x0, c) * (1.0 - fx) + image.at(y0, x1, c) * fx;
  const double bottom = image.at(y1, x0, c) * (1.0 - fx) + image.at(y1, x1, c) * fx;
  return top * (1.0 - fy) + bottom * fy;
}

ImageBuffer resize_bilinear(const ImageBuffer& image, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw std::invalid_argument("resize target must be >= 1x1");
  ImageBuffer out(out_h, out_w, image.channels());
  const double scale_y = static_cast<double>(image.height()) / out_h;
  const double scale_x = static_cast<double>(image.width()) / out_w;
  for (int i = 0; i < out_h; ++i) {
    const double sy = (i + 0.5) * scale_y - 0.5;
    for (int j = 0; j < out_w; ++j) {
      const double sx = (j + 0.5) * scale_x - 0.5;
      for (int c = 0; c < image.channels(); ++c) out.at(i, j, c) = sample_bilinear(image, sy, sx, c);
    }
  }
  return out;
}

ImageBuffer image_from_vector(std::span<const double> values, int height, int width, int channels) {
  std::vector<double> data(values.begin(), values.end());
  for (double& v : data) v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
  return ImageBuffer(height, width, channels, std::move(data));
}

}  // namespace aerial
