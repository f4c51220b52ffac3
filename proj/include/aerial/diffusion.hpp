#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aerial/rng.hpp"

namespace aerial {

using Vector = std::vector<double>;

// ---------------------------------------------------------------------------
// Noise schedule

enum class ScheduleKind { kLinear, kCosine };

ScheduleKind parse_schedule_kind(const std::string& name);
std::string to_string(ScheduleKind kind);

/// Per-timestep beta, alpha = 1 - beta and alpha_bar = running product of
/// alpha. Index 0 is the least noisy step.
struct NoiseSchedule {
  int steps = 0;
  Vector beta;
  Vector alpha;
  Vector alpha_bar;
};

/// linear: beta interpolates [beta_start, beta_end] inclusively.
/// cosine: squared-cosine alpha_bar (offset 0.008) with betas clipped to
/// (0, 0.999]; the beta range is validated but not used.
NoiseSchedule make_schedule(int steps, double beta_start, double beta_end, ScheduleKind kind);

/// sqrt(alpha_bar_t) * x0 + sqrt(1 - alpha_bar_t) * noise.
Vector forward_diffuse(std::span<const double> x0, int t, std::span<const double> noise,
                       const NoiseSchedule& sched);

// ---------------------------------------------------------------------------
// Conditioning embedding

/// A conditioning vector (e_src, e_tgt, e_opt, e1, e2 or the null embedding).
struct ConditioningEmbedding {
  Vector values;

  std::size_t dim() const { return values.size(); }
  bool operator==(const ConditioningEmbedding&) const = default;
};

// ---------------------------------------------------------------------------
// Denoiser

/// Dense epsilon-predictor: input [x_t, sinusoidal(t), e] through `hidden`
/// SiLU layers to a linear output h of x_dim.
///
/// With an empty `skip_alpha_bar` the prediction is h itself. Otherwise h is
/// read as a clean-image estimate and
///   eps_hat = (g * x_t - sqrt(abar_t) * h) / sqrt(1 - abar_t)
/// where g is one extra trainable weight stored last in theta (initialized
/// to 1). A plain MLP struggles to learn the x_t passthrough and the
/// 1/sqrt(1 - abar) gain on its own; this form hands both to it.
struct DenoiserArch {
  int x_dim = 0;
  int cond_dim = 0;
  int time_dim = 16;
  double time_period = 100.0;
  std::vector<int> hidden = {128, 128};
  Vector skip_alpha_bar;

  bool has_skip() const { return !skip_alpha_bar.empty(); }

  int input_dim() const { return x_dim + time_dim + cond_dim; }
  int layer_count() const { return static_cast<int>(hidden.size()) + 1; }
  int layer_in(int l) const { return l == 0 ? input_dim() : hidden[l - 1]; }
  int layer_out(int l) const { return l + 1 == layer_count() ? x_dim : hidden[l]; }
  /// Offset of layer l's weight matrix (out x in, row-major) in theta; the
  /// bias (out) follows the matrix.
  std::size_t layer_offset(int l) const;
  /// Index of the skip gate g (only meaningful when has_skip()).
  std::size_t gate_index() const { return layer_offset(layer_count()); }
  std::size_t weight_count() const;
  void validate() const;

  bool operator==(const DenoiserArch&) const = default;
};

struct DenoiserParams {
  DenoiserArch arch;
  Vector theta;

  /// Throws if theta does not match the architecture or holds non-finite values.
  void validate() const;
  bool operator==(const DenoiserParams&) const = default;
};

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
DenoiserParams init_denoiser(const DenoiserArch& arch, Rng& rng);
DenoiserParams zero_denoiser(const DenoiserArch& arch);

Vector time_embedding(int t, int dim, double period);

/// Activations recorded by denoiser_forward for backprop. Every buffer holds
/// `batch` rows, row-major.
struct ActivationTape {
  int batch = 0;
  std::vector<int> t;
  std::vector<Vector> inputs;  // input to each layer
  std::vector<Vector> pre;     // pre-activation of each hidden layer
  Vector head;                 // linear head h
  Vector output;               // eps_hat
};

struct DenoiserOutput {
  Vector eps;
  ActivationTape tape;
};

DenoiserOutput denoiser_forward(const DenoiserParams& params, std::span<const double> x_t, int t,
                                const ConditioningEmbedding& e);
/// Allocation-reusing form; the prediction is left in tape.output.
void denoiser_forward(const DenoiserParams& params, std::span<const double> x_t, int t,
                      std::span<const double> e, ActivationTape& tape);
/// Batched form: x_t is batch x x_dim, e is batch x cond_dim, one timestep
/// per row. The prediction is left in tape.output (batch x x_dim).
void denoiser_forward_batch(const DenoiserParams& params, std::span<const double> x_t,
                            std::span<const int> t, std::span<const double> e, ActivationTape& tape);

/// Backpropagates d(loss)/d(output) (batch x x_dim) through the tape,
/// accumulating (+=) scale times the gradient into the requested buffers.
/// The embedding gradient is summed over the batch rows. Either pointer may
/// be null.
void denoiser_backward(const DenoiserParams& params, const ActivationTape& tape,
                       std::span<const double> d_output, double scale, Vector* grad_params,
                       Vector* grad_embedding);

// ---------------------------------------------------------------------------
// Simplified diffusion objective

enum class GradTarget { kParams, kEmbedding, kBoth };

struct LossAndGrads {
  double loss = 0.0;
  std::optional<Vector> grad_params;
  std::optional<Vector> grad_embedding;
};

/// loss = ||eps_hat(x_t, t, e) - noise||^2 / dim with x_t = forward_diffuse(x0, t, noise).
LossAndGrads diffusion_loss_and_grads(const DenoiserParams& params, const ConditioningEmbedding& e,
                                      std::span<const double> x0, int t,
                                      std::span<const double> noise, const NoiseSchedule& sched,
                                      GradTarget wrt);

/// Accumulating form used by the training loops: adds scale * gradient into
/// the given buffers and returns the (unscaled) loss.
double accumulate_loss_and_grads(const DenoiserParams& params, std::span<const double> e,
                                 std::span<const double> x0, int t, std::span<const double> noise,
                                 const NoiseSchedule& sched, double scale, Vector* grad_params,
                                 Vector* grad_embedding, ActivationTape& tape);

/// Batched accumulating form: row b of x0/noise/e is one sample at t[b].
/// Returns the sum of the per-sample losses.
double accumulate_batch_loss_and_grads(const DenoiserParams& params, std::span<const double> e,
                                       std::span<const double> x0, std::span<const int> t,
                                       std::span<const double> noise, const NoiseSchedule& sched,
                                       double scale, Vector* grad_params, Vector* grad_embedding,
                                       ActivationTape& tape);

}  // namespace aerial
