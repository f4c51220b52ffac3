#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "aerial/diffusion.hpp"
#include "aerial/image.hpp"

namespace aerial {

/// Bias-corrected Adam state for one optimized variable.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  Vector m;
  Vector v;

  AdamState() = default;
  AdamState(std::size_t dim, double learning_rate) : lr(learning_rate), m(dim, 0.0), v(dim, 0.0) {}
};

/// One Adam update of `variable` in place. Throws std::invalid_argument on a
/// dimension mismatch.
void adam_step(AdamState& state, Vector& variable, std::span<const double> grad);

struct TrainReport {
  std::vector<double> losses;  // one per executed step
  std::uint64_t steps = 0;
  double final_loss = 0.0;
  std::uint64_t seed = 0;
  /// Samples whose conditioning was replaced by the null embedding
  /// (base training only).
  std::uint64_t null_conditioning_count = 0;
};

/// Writes "# seed <seed>" then one "<step>\t<loss>" line per step, with
/// losses printed to round-trip precision.
void write_report(const TrainReport& report, const std::filesystem::path& path);
std::string format_report(const TrainReport& report);

class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct StageOptions {
  int steps = 1;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

/// Embedding optimization with the denoiser frozen: starts at `e_init` and
/// runs Adam on the diffusion loss of `target`, one fresh (t, noise) draw per
/// step.
std::pair<ConditioningEmbedding, TrainReport> optimize_embedding(const DenoiserParams& params,
                                                                 const ConditioningEmbedding& e_init,
                                                                 const ImageBuffer& target,
                                                                 const NoiseSchedule& sched,
                                                                 const StageOptions& options);

/// Denoiser finetuning with the embedding frozen.
std::pair<DenoiserParams, TrainReport> finetune_model(const DenoiserParams& params,
                                                      const ConditioningEmbedding& e_opt,
                                                      const ImageBuffer& target,
                                                      const NoiseSchedule& sched,
                                                      const StageOptions& options);

struct TrainingExample {
  Vector x0;
  ConditioningEmbedding e;
};

struct BaseTrainOptions {
  int steps = 2000;
  double lr = 1e-3;
  int batch = 32;
  double cond_dropout = 0.1;
  std::uint64_t seed = 0;
};

/// Minibatch Adam on the epsilon-prediction loss. Each sample's conditioning
/// is replaced by the null (all-zero) embedding with probability
/// cond_dropout. Weights are initialized from a stream derived from the seed.
std::pair<DenoiserParams, TrainReport> train_base_model(const std::vector<TrainingExample>& dataset,
                                                        const DenoiserArch& arch,
                                                        const NoiseSchedule& sched,
                                                        const BaseTrainOptions& options);
/// Same, continuing from explicit initial weights.
std::pair<DenoiserParams, TrainReport> train_base_model(const std::vector<TrainingExample>& dataset,
                                                        DenoiserParams initial,
                                                        const NoiseSchedule& sched,
                                                        const BaseTrainOptions& options);

}  // namespace aerial
