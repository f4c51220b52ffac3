#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "aerial/diffusion.hpp"

namespace aerial {

/// Binary checkpoint layout (all integers and floats little-endian):
///
///   denoiser  "ADKF" u32 version | u32 x_dim u32 cond_dim u32 time_dim
///             f64 time_period u32 n_hidden u32 width[n_hidden] |
///             u64 weight_count f64 theta[weight_count]
///   embedding "ADKE" u32 version | u32 dim f64 values[dim]
///
/// Vectors that are not embeddings (the viewpoint probe) reuse the
/// embedding layout under the magic "ADKP".
inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> encode_denoiser(const DenoiserParams& params);
DenoiserParams decode_denoiser(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> encode_vector(const Vector& values, const char magic[4]);
Vector decode_vector(const std::vector<std::uint8_t>& bytes, const char magic[4]);

void save_denoiser(const DenoiserParams& params, const std::filesystem::path& path);
DenoiserParams load_denoiser(const std::filesystem::path& path);
void save_embedding(const ConditioningEmbedding& e, const std::filesystem::path& path);
ConditioningEmbedding load_embedding(const std::filesystem::path& path);

/// FNV-1a checksum of the serialized form; identifies stage artifacts.
std::uint64_t checksum(const DenoiserParams& params);
std::uint64_t checksum(const ConditioningEmbedding& e);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace aerial
