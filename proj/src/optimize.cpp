#include "aerial/optimize.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace aerial {

void adam_step(AdamState& state, Vector& variable, std::span<const double> grad) {
  if (variable.size() != grad.size() || state.m.size() != variable.size() ||
      state.v.size() != variable.size())
    throw std::invalid_argument("adam_step: dimension mismatch");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < variable.size(); ++i) {
    const double g = grad[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / correction1;
    const double v_hat = state.v[i] / correction2;
    variable[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

std::string format_report(const TrainReport& report) {
  std::ostringstream out;
  out << "# seed " << report.seed << "\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < report.losses.size(); ++i) out << i << '\t' << report.losses[i] << '\n';
  return out.str();
}

void write_report(const TrainReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << format_report(report);
}

namespace {

void check_target(const DenoiserParams& params, const ImageBuffer& target) {
  if (static_cast<int>(target.size()) != params.arch.x_dim)
    throw std::invalid_argument("target image does not match the denoiser's image shape");
}

void check_finite(double loss, const char* stage, std::uint64_t step) {
  if (!std::isfinite(loss))
    throw NonFiniteLossError(std::string(stage) + ": non-finite loss at step " + std::to_string(step));
}

void record(TrainReport& report, double loss) {
  report.losses.push_back(loss);
  report.steps = report.losses.size();
  report.final_loss = loss;
}

}  // namespace

std::pair<ConditioningEmbedding, TrainReport> optimize_embedding(const DenoiserParams& params,
                                                                 const ConditioningEmbedding& e_init,
                                                                 const ImageBuffer& target,
                                                                 const NoiseSchedule& sched,
                                                                 const StageOptions& options) {
  check_target(params, target);
  if (static_cast<int>(e_init.dim()) != params.arch.cond_dim)
    throw std::invalid_argument("embedding dimension does not match the denoiser");
  if (options.steps < 1) throw std::invalid_argument("optimize_embedding needs steps >= 1");

  Rng rng(options.seed);
  ConditioningEmbedding e = e_init;
  AdamState adam(e.dim(), options.lr);
  TrainReport report;
  report.seed = options.seed;
  ActivationTape tape;
  Vector grad(e.dim());
  for (int step = 0; step < options.steps; ++step) {
    const int t = static_cast<int>(rng.uniform_index(sched.steps));
    const Vector noise = rng.gaussian_vector(target.size());
    std::fill(grad.begin(), grad.end(), 0.0);
    const double loss = accumulate_loss_and_grads(params, e.values, target.data(), t, noise, sched,
                                                  1.0, nullptr, &grad, tape);
    check_finite(loss, "optimize_embedding", step);
    adam_step(adam, e.values, grad);
    record(report, loss);
  }
  return {std::move(e), std::move(report)};
}

std::pair<DenoiserParams, TrainReport> finetune_model(const DenoiserParams& params,
                                                      const ConditioningEmbedding& e_opt,
                                                      const ImageBuffer& target,
                                                      const NoiseSchedule& sched,
                                                      const StageOptions& options) {
  check_target(params, target);
  if (static_cast<int>(e_opt.dim()) != params.arch.cond_dim)
    throw std::invalid_argument("embedding dimension does not match the denoiser");
  if (options.steps < 1) throw std::invalid_argument("finetune_model needs steps >= 1");

  Rng rng(options.seed);
  DenoiserParams tuned = params;
  AdamState adam(tuned.theta.size(), options.lr);
  TrainReport report;
  report.seed = options.seed;
  ActivationTape tape;
  Vector grad(tuned.theta.size());
  for (int step = 0; step < options.steps; ++step) {
    const int t = static_cast<int>(rng.uniform_index(sched.steps));
    const Vector noise = rng.gaussian_vector(target.size());
    std::fill(grad.begin(), grad.end(), 0.0);
    const double loss = accumulate_loss_and_grads(tuned, e_opt.values, target.data(), t, noise, sched,
                                                  1.0, &grad, nullptr, tape);
    check_finite(loss, "finetune_model", step);
    adam_step(adam, tuned.theta, grad);
    record(report, loss);
  }
  return {std::move(tuned), std::move(report)};
}

std::pair<DenoiserParams, TrainReport> train_base_model(const std::vector<TrainingExample>& dataset,
                                                        const DenoiserArch& arch,
                                                        const NoiseSchedule& sched,
                                                        const BaseTrainOptions& options) {
  Rng init_rng(derive_seed(options.seed, "init"));
  return train_base_model(dataset, init_denoiser(arch, init_rng), sched, options);
}

std::pair<DenoiserParams, TrainReport> train_base_model(const std::vector<TrainingExample>& dataset,
                                                        DenoiserParams params,
                                                        const NoiseSchedule& sched,
                                                        const BaseTrainOptions& options) {
  if (dataset.empty()) throw std::invalid_argument("train_base_model: empty dataset");
  if (options.batch < 1) throw std::invalid_argument("train_base_model: batch must be >= 1");
  if (!(options.cond_dropout >= 0.0 && options.cond_dropout <= 1.0))
    throw std::invalid_argument("train_base_model: cond_dropout must be in [0, 1]");
  for (const auto& ex : dataset) {
    if (static_cast<int>(ex.x0.size()) != params.arch.x_dim ||
        static_cast<int>(ex.e.dim()) != params.arch.cond_dim)
      throw std::invalid_argument("train_base_model: example shape does not match architecture");
  }

  Rng rng(derive_seed(options.seed, "batches"));
  AdamState adam(params.theta.size(), options.lr);
  TrainReport report;
  report.seed = options.seed;
  ActivationTape tape;
  Vector grad(params.theta.size());
  const Vector null_embedding(params.arch.cond_dim, 0.0);
  const double scale = 1.0 / options.batch;

  const int n = params.arch.x_dim;
  const int d = params.arch.cond_dim;
  Vector x0(static_cast<std::size_t>(options.batch) * n);
  Vector noise(x0.size());
  Vector cond(static_cast<std::size_t>(options.batch) * d);
  std::vector<int> ts(options.batch);

  for (int step = 0; step < options.steps; ++step) {
    for (int b = 0; b < options.batch; ++b) {
      const auto& ex = dataset[rng.uniform_index(dataset.size())];
      ts[b] = static_cast<int>(rng.uniform_index(sched.steps));
      const bool drop = rng.uniform() < options.cond_dropout;
      const Vector z = rng.gaussian_vector(n);
      if (drop) ++report.null_conditioning_count;
      std::copy(ex.x0.begin(), ex.x0.end(), x0.begin() + static_cast<std::size_t>(b) * n);
      std::copy(z.begin(), z.end(), noise.begin() + static_cast<std::size_t>(b) * n);
      const Vector& e = drop ? null_embedding : ex.e.values;
      std::copy(e.begin(), e.end(), cond.begin() + static_cast<std::size_t>(b) * d);
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    const double loss =
        scale * accumulate_batch_loss_and_grads(params, cond, x0, ts, noise, sched, scale, &grad, nullptr, tape);
    check_finite(loss, "train_base_model", step);
    adam_step(adam, params.theta, grad);
    record(report, loss);
  }
  return {std::move(params), std::move(report)};
}

}  // namespace aerial
