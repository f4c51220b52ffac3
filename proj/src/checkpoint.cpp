#include "aerial/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace aerial {

namespace {

class Writer {
 public:
  void magic(const char m[4]) { bytes_.insert(bytes_.end(), m, m + 4); }
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  void expect_magic(const char m[4]) {
    need(4);
    if (std::memcmp(bytes_.data() + pos_, m, 4) != 0)
      throw CheckpointError(std::string("bad checkpoint magic, expected ") + std::string(m, 4));
    pos_ += 4;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  void expect_end() const {
    if (pos_ != bytes_.size()) throw CheckpointError("trailing bytes in checkpoint");
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError("truncated checkpoint");
  }
  std::uint64_t get(int n) {
    need(n);
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += n;
    return v;
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

constexpr char kDenoiserMagic[4] = {'A', 'D', 'K', 'F'};
constexpr char kEmbeddingMagic[4] = {'A', 'D', 'K', 'E'};

}  // namespace

std::vector<std::uint8_t> encode_denoiser(const DenoiserParams& params) {
  params.validate();
  const auto& a = params.arch;
  Writer w;
  w.magic(kDenoiserMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(a.x_dim));
  w.u32(static_cast<std::uint32_t>(a.cond_dim));
  w.u32(static_cast<std::uint32_t>(a.time_dim));
  w.f64(a.time_period);
  w.u32(static_cast<std::uint32_t>(a.hidden.size()));
  for (int width : a.hidden) w.u32(static_cast<std::uint32_t>(width));
  w.u32(static_cast<std::uint32_t>(a.skip_alpha_bar.size()));
  for (double v : a.skip_alpha_bar) w.f64(v);
  w.u64(params.theta.size());
  for (double v : params.theta) w.f64(v);
  return w.take();
}

DenoiserParams decode_denoiser(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  r.expect_magic(kDenoiserMagic);
  if (r.u32() != kCheckpointVersion) throw CheckpointError("unsupported denoiser checkpoint version");
  DenoiserParams p;
  p.arch.x_dim = static_cast<int>(r.u32());
  p.arch.cond_dim = static_cast<int>(r.u32());
  p.arch.time_dim = static_cast<int>(r.u32());
  p.arch.time_period = r.f64();
  const std::uint32_t n_hidden = r.u32();
  if (n_hidden > 64) throw CheckpointError("implausible hidden layer count");
  p.arch.hidden.resize(n_hidden);
  for (auto& width : p.arch.hidden) width = static_cast<int>(r.u32());
  const std::uint32_t n_skip = r.u32();
  if (n_skip > r.remaining() / 8) throw CheckpointError("truncated checkpoint");
  p.arch.skip_alpha_bar.resize(n_skip);
  for (auto& v : p.arch.skip_alpha_bar) v = r.f64();
  const std::uint64_t count = r.u64();
  if (count != r.remaining() / 8) throw CheckpointError("weight count does not match payload");
  p.theta.resize(count);
  for (auto& v : p.theta) v = r.f64();
  r.expect_end();
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("invalid denoiser checkpoint: ") + e.what());
  }
  return p;
}

std::vector<std::uint8_t> encode_vector(const Vector& values, const char magic[4]) {
  Writer w;
  w.magic(magic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(values.size()));
  for (double v : values) w.f64(v);
  return w.take();
}

Vector decode_vector(const std::vector<std::uint8_t>& bytes, const char magic[4]) {
  Reader r(bytes);
  r.expect_magic(magic);
  if (r.u32() != kCheckpointVersion) throw CheckpointError("unsupported vector checkpoint version");
  const std::uint32_t dim = r.u32();
  if (dim != r.remaining() / 8) throw CheckpointError("vector length does not match payload");
  Vector v(dim);
  for (auto& x : v) x = r.f64();
  r.expect_end();
  return v;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void save_denoiser(const DenoiserParams& params, const std::filesystem::path& path) {
  write_file_bytes(path, encode_denoiser(params));
}

DenoiserParams load_denoiser(const std::filesystem::path& path) {
  return decode_denoiser(read_file_bytes(path));
}

void save_embedding(const ConditioningEmbedding& e, const std::filesystem::path& path) {
  write_file_bytes(path, encode_vector(e.values, kEmbeddingMagic));
}

ConditioningEmbedding load_embedding(const std::filesystem::path& path) {
  return ConditioningEmbedding{decode_vector(read_file_bytes(path), kEmbeddingMagic)};
}

std::uint64_t checksum(const DenoiserParams& params) { return fnv1a64(encode_denoiser(params)); }

std::uint64_t checksum(const ConditioningEmbedding& e) {
  return fnv1a64(encode_vector(e.values, kEmbeddingMagic));
}

}  // namespace aerial
