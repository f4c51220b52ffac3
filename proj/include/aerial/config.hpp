#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "aerial/diffusion.hpp"
#include "aerial/prompting.hpp"

namespace aerial {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every knob of a pipeline run. Serialized as flat `key = value` lines;
/// keys match the member names.
struct RunConfig {
  // data
  int image_size = 16;
  int n_scenes = 64;
  // prompts
  int embed_dim = 32;
  std::uint64_t embed_hash_seed = 7;
  // schedule
  int schedule_steps = 50;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  ScheduleKind schedule_kind = ScheduleKind::kCosine;
  // denoiser
  int time_dim = 16;
  double time_period = 100.0;
  std::vector<int> hidden = {128, 128};
  // Clean-image head with a gated x_t skip; false gives a bare epsilon MLP.
  bool skip_output = true;
  // base training
  int train_steps = 2000;
  double train_lr = 1e-3;
  int train_batch = 32;
  double cond_dropout = 0.1;
  // embedding optimization and finetuning
  int embed_steps = 500;
  double embed_lr = 1e-3;
  int finetune_steps = 1000;
  double finetune_lr = 2e-6;
  // homography
  double fill = 0.0;
  // sampling
  int sample_steps = 50;
  double guidance_scale = 3.0;
  double eta = 1.0;
  std::vector<double> alphas = {0.1, 0.3, 0.5, 0.7, 0.9};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4};
  Strategy strategy = Strategy::kAlternating;
  double ablation_alpha = 0.5;
  // run
  std::uint64_t seed = 2023;
  // Not part of the config hash: they do not change any output.
  std::filesystem::path workdir = "runs";
  int threads = 0;

  /// Sets one key from its text form; throws ConfigError on unknown keys or
  /// unparsable values.
  void set(const std::string& key, const std::string& value);
  /// Applies `key = value` lines ('#' starts a comment).
  void merge_text(const std::string& text);
  void merge_file(const std::filesystem::path& path);
  /// Applies a single "key=value" override.
  void apply_override(const std::string& assignment);

  /// Range checks; throws ConfigError before any compute happens.
  void validate() const;

  /// Canonical text of every output-affecting key, one per line.
  std::string canonical_text() const;
  std::map<std::string, std::string> snapshot() const;
  /// 16 hex digits of the FNV-1a hash of canonical_text().
  std::string hash() const;

  int x_dim() const { return image_size * image_size * 3; }
  DenoiserArch arch() const;
  NoiseSchedule schedule() const;
};

}  // namespace aerial
