#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "aerial/diffusion.hpp"
#include "aerial/image.hpp"
#include "aerial/prompting.hpp"

namespace aerial {

struct SamplerConfig {
  int steps = 50;               // backward steps; must divide the schedule length
  double guidance_scale = 3.0;  // classifier-free guidance scale s >= 0
  std::uint64_t seed = 0;
  double eta = 1.0;             // 1 = ancestral DDPM noise, 0 = posterior mean only
  bool clip_denoised = true;    // clamp the x0 estimate to [0, 1]
  bool record_trajectory = false;
  int height = 16;
  int width = 16;
  int channels = 3;

  void validate() const;
};

/// x_t and the number of remaining noise levels (T for the initial draw,
/// 0 for the final image).
struct LatentState {
  Vector x;
  int t = 0;
};

struct SampleResult {
  ImageBuffer image;
  std::optional<std::vector<LatentState>> trajectory;
  std::uint64_t rng_draws = 0;  // raw generator words consumed
};

/// eps_null + s * (eps(e) - eps_null). s = 1 and s = 0 return the
/// conditional and unconditional predictions unmodified.
Vector guided_eps(const DenoiserParams& params, std::span<const double> x_t, int t,
                  const ConditioningEmbedding& e, const ConditioningEmbedding& null_e, double scale);

/// Training-schedule timesteps visited by the sampler, noisiest first.
std::vector<int> sampling_timesteps(const NoiseSchedule& sched, int steps);

/// Backward diffusion from x_T ~ N(0, I). Step i is conditioned on
/// plan.steps[i]; each step forms the x0 estimate, takes the DDPM posterior
/// mean and adds eta-scaled posterior noise. Noise is drawn in a fixed order
/// (x_T, then one vector per non-final step) independent of the plan.
SampleResult sample(const DenoiserParams& params, const NoiseSchedule& sched,
                    const ConditioningPlan& plan, const SamplerConfig& cfg);

struct GridCell {
  double alpha = 0.0;
  std::uint64_t seed = 0;
  ImageBuffer image;
};

/// Samples every (alpha, seed) pair, alpha-major. Cells run in parallel on
/// up to `threads` threads; each cell owns its RNG so the result does not
/// depend on the thread count.
std::vector<GridCell> sample_grid(const DenoiserParams& params, const NoiseSchedule& sched,
                                  const ConditioningEmbedding& e_opt,
                                  const ConditioningEmbedding& e_tgt,
                                  const std::vector<double>& alphas, Strategy strategy,
                                  const SamplerConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                  int threads = 0);

/// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware).
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace aerial
