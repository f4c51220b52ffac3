#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace aerial {

/// splitmix64 finalizer; used to expand seeds and to mix hashes.
std::uint64_t splitmix64(std::uint64_t& state);

/// Seeded 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Derives an independent stream seed from a master seed and a stage tag.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag);

/// xoshiro256** generator seeded through splitmix64, with Box-Muller
/// Gaussian draws. The output sequence is fully specified, so every run is
/// reproducible across compilers and platforms.
///
/// `draws()` counts raw 64-bit words consumed; tests use it to check that
/// noise consumption is independent of conditioning.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  /// Standard normal sample.
  double gaussian();
  std::vector<double> gaussian_vector(std::size_t n);

  std::uint64_t draws() const { return draws_; }

 private:
  std::uint64_t s_[4];
  std::uint64_t draws_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace aerial
