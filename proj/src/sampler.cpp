#include "aerial/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace aerial {

void SamplerConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("sampler needs at least one step");
  if (!(guidance_scale >= 0.0)) throw std::invalid_argument("guidance scale must be >= 0");
  if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must lie in [0, 1]");
  if (height < 1 || width < 1 || (channels != 1 && channels != 3))
    throw std::invalid_argument("invalid sampler output shape");
}

Vector guided_eps(const DenoiserParams& params, std::span<const double> x_t, int t,
                  const ConditioningEmbedding& e, const ConditioningEmbedding& null_e, double scale) {
  ActivationTape tape;
  if (scale == 1.0) {
    denoiser_forward(params, x_t, t, e.values, tape);
    return tape.output;
  }
  denoiser_forward(params, x_t, t, null_e.values, tape);
  Vector uncond = tape.output;
  if (scale == 0.0 || e == null_e) return uncond;
  denoiser_forward(params, x_t, t, e.values, tape);
  const Vector& cond = tape.output;
  for (std::size_t i = 0; i < uncond.size(); ++i) uncond[i] += scale * (cond[i] - uncond[i]);
  return uncond;
}

std::vector<int> sampling_timesteps(const NoiseSchedule& sched, int steps) {
  if (steps < 1 || sched.steps % steps != 0)
    throw std::invalid_argument("sampler steps (" + std::to_string(steps) +
                                ") must evenly divide the schedule length (" +
                                std::to_string(sched.steps) + ")");
  const int stride = sched.steps / steps;
  std::vector<int> ts(steps);
  for (int i = 0; i < steps; ++i) ts[i] = sched.steps - 1 - i * stride;
  return ts;
}

SampleResult sample(const DenoiserParams& params, const NoiseSchedule& sched,
                    const ConditioningPlan& plan, const SamplerConfig& cfg) {
  cfg.validate();
  if (static_cast<int>(plan.size()) != cfg.steps)
    throw std::invalid_argument("conditioning plan length does not match sampler steps");
  const int n = cfg.height * cfg.width * cfg.channels;
  if (n != params.arch.x_dim) throw std::invalid_argument("sampler output shape does not match denoiser");
  const std::vector<int> ts = sampling_timesteps(sched, cfg.steps);
  const int stride = sched.steps / cfg.steps;
  const ConditioningEmbedding null_e{Vector(params.arch.cond_dim, 0.0)};

  Rng rng(cfg.seed);
  Vector x = rng.gaussian_vector(n);
  std::optional<std::vector<LatentState>> trajectory;
  if (cfg.record_trajectory) trajectory.emplace().push_back({x, sched.steps});

  Vector x0(n);
  for (int i = 0; i < cfg.steps; ++i) {
    const int t = ts[i];
    const int prev = t - stride;
    const double ab = sched.alpha_bar[t];
    const double ab_prev = prev >= 0 ? sched.alpha_bar[prev] : 1.0;
    const Vector eps = guided_eps(params, x, t, plan.steps[i], null_e, cfg.guidance_scale);

    const double sqrt_ab = std::sqrt(ab);
    const double sqrt_one_minus_ab = std::sqrt(1.0 - ab);
    for (int k = 0; k < n; ++k) {
      x0[k] = (x[k] - sqrt_one_minus_ab * eps[k]) / sqrt_ab;
      if (cfg.clip_denoised) x0[k] = std::clamp(x0[k], 0.0, 1.0);
    }

    // Posterior q(x_prev | x_t, x0) for the (possibly strided) step.
    const double alpha_step = ab / ab_prev;
    const double beta_step = 1.0 - alpha_step;
    const double coef_x0 = std::sqrt(ab_prev) * beta_step / (1.0 - ab);
    const double coef_xt = std::sqrt(alpha_step) * (1.0 - ab_prev) / (1.0 - ab);
    for (int k = 0; k < n; ++k) x[k] = coef_x0 * x0[k] + coef_xt * x[k];

    if (prev >= 0) {
      const double sigma = cfg.eta * std::sqrt((1.0 - ab_prev) / (1.0 - ab) * beta_step);
      const Vector z = rng.gaussian_vector(n);
      for (int k = 0; k < n; ++k) x[k] += sigma * z[k];
    }
    for (double v : x)
      if (!std::isfinite(v)) throw std::runtime_error("sampler produced a non-finite latent");
    if (trajectory) trajectory->push_back({x, prev + 1});
  }
  return SampleResult{image_from_vector(x, cfg.height, cfg.width, cfg.channels), std::move(trajectory),
                      rng.draws()};
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const std::size_t workers = std::min<std::size_t>(threads, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::vector<GridCell> sample_grid(const DenoiserParams& params, const NoiseSchedule& sched,
                                  const ConditioningEmbedding& e_opt,
                                  const ConditioningEmbedding& e_tgt,
                                  const std::vector<double>& alphas, Strategy strategy,
                                  const SamplerConfig& cfg, const std::vector<std::uint64_t>& seeds,
                                  int threads) {
  if (alphas.empty() || seeds.empty()) throw std::invalid_argument("sample_grid needs alphas and seeds");
  std::vector<std::optional<GridCell>> cells(alphas.size() * seeds.size());
  parallel_for(cells.size(), threads, [&](std::size_t idx) {
    const double alpha = alphas[idx / seeds.size()];
    const std::uint64_t seed = seeds[idx % seeds.size()];
    const ConditioningPlan plan = build_conditioning_plan(strategy, cfg.steps, alpha, e_opt, e_tgt);
    SamplerConfig cell_cfg = cfg;
    cell_cfg.seed = seed;
    cell_cfg.record_trajectory = false;
    cells[idx] = GridCell{alpha, seed, sample(params, sched, plan, cell_cfg).image};
  });
  std::vector<GridCell> out;
  out.reserve(cells.size());
  for (auto& c : cells) out.push_back(std::move(*c));
  return out;
}

}  // namespace aerial
