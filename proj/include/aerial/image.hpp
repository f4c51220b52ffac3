#pragma once

#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace aerial {

/// H x W x C raster with row-major, channel-interleaved samples in [0, 1].
class ImageBuffer {
 public:
  /// Zero-filled image.
  ImageBuffer(int height, int width, int channels);
  /// Takes ownership of `data`; throws std::invalid_argument if the shape or
  /// any sample is out of range.
  ImageBuffer(int height, int width, int channels, std::vector<double> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }

  double& at(int y, int x, int c) { return data_[index(y, x, c)]; }
  double at(int y, int x, int c) const { return data_[index(y, x, c)]; }

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  bool operator==(const ImageBuffer&) const = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_;
  int width_;
  int channels_;
  std::vector<double> data_;
};

/// Raised by read_image. `kind` distinguishes the failure classes.
class ImageFormatError : public std::runtime_error {
 public:
  enum class Kind { kUnsupportedMagic, kMalformedHeader, kUnsupportedMaxval, kTruncatedPayload };

  ImageFormatError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Reads a binary PGM (P5, 1 channel) or PPM (P6, 3 channels) with maxval 255.
ImageBuffer read_image(const std::filesystem::path& path);
/// Parses an in-memory P5/P6 file.
ImageBuffer decode_pnm(std::span<const unsigned char> bytes);

/// Writes P5 or P6 depending on channel count. Samples are quantized as
/// round-half-up(v * 255), clamped to [0, 255].
void write_image(const ImageBuffer& image, const std::filesystem::path& path);
std::vector<unsigned char> encode_pnm(const ImageBuffer& image);

unsigned char quantize_sample(double v);

/// Bilinear resampling with pixel-center alignment:
/// source coordinate = (i + 0.5) * in / out - 0.5, clamped to the image.
ImageBuffer resize_bilinear(const ImageBuffer& image, int out_h, int out_w);

/// Bilinear sample at continuous index coordinates (sy, sx), clamped to the
/// image, for one channel.
double sample_bilinear(const ImageBuffer& image, double sy, double sx, int c);

/// Returns the image with values clamped to [0, 1] from an arbitrary vector.
ImageBuffer image_from_vector(std::span<const double> values, int height, int width, int channels);

}  // namespace aerial
