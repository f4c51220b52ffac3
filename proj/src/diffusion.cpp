#include "aerial/diffusion.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Core>

namespace aerial {

ScheduleKind parse_schedule_kind(const std::string& name) {
  if (name == "linear") return ScheduleKind::kLinear;
  if (name == "cosine") return ScheduleKind::kCosine;
  throw std::invalid_argument("unknown schedule kind '" + name + "'");
}

std::string to_string(ScheduleKind kind) { return kind == ScheduleKind::kLinear ? "linear" : "cosine"; }

NoiseSchedule make_schedule(int steps, double beta_start, double beta_end, ScheduleKind kind) {
  if (steps < 1) throw std::invalid_argument("schedule needs at least one step");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw std::invalid_argument("schedule requires 0 < beta_start <= beta_end < 1");

  NoiseSchedule s;
  s.steps = steps;
  s.beta.resize(steps);
  if (kind == ScheduleKind::kLinear) {
    for (int t = 0; t < steps; ++t) {
      const double frac = steps == 1 ? 0.0 : static_cast<double>(t) / (steps - 1);
      s.beta[t] = beta_start + (beta_end - beta_start) * frac;
    }
  } else {
    constexpr double kOffset = 0.008;
    auto f = [](double u) {
      const double c = std::cos((u + kOffset) / (1.0 + kOffset) * std::numbers::pi / 2.0);
      return c * c;
    };
    for (int t = 0; t < steps; ++t) {
      const double b = 1.0 - f(static_cast<double>(t + 1) / steps) / f(static_cast<double>(t) / steps);
      s.beta[t] = std::min(b, 0.999);
    }
  }
  s.alpha.resize(steps);
  s.alpha_bar.resize(steps);
  double running = 1.0;
  for (int t = 0; t < steps; ++t) {
    s.alpha[t] = 1.0 - s.beta[t];
    running *= s.alpha[t];
    s.alpha_bar[t] = running;
  }
  return s;
}

Vector forward_diffuse(std::span<const double> x0, int t, std::span<const double> noise,
                       const NoiseSchedule& sched) {
  if (x0.size() != noise.size()) throw std::invalid_argument("forward_diffuse: dimension mismatch");
  if (t < 0 || t >= sched.steps) throw std::out_of_range("forward_diffuse: timestep out of range");
  const double a = std::sqrt(sched.alpha_bar[t]);
  const double b = std::sqrt(1.0 - sched.alpha_bar[t]);
  Vector out(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) out[i] = a * x0[i] + b * noise[i];
  return out;
}

// ---------------------------------------------------------------------------

std::size_t DenoiserArch::layer_offset(int l) const {
  std::size_t offset = 0;
  for (int k = 0; k < l; ++k)
    offset += static_cast<std::size_t>(layer_out(k)) * (layer_in(k) + 1);
  return offset;
}

std::size_t DenoiserArch::weight_count() const { return gate_index() + (has_skip() ? 1 : 0); }

void DenoiserArch::validate() const {
  if (x_dim < 1 || cond_dim < 1) throw std::invalid_argument("denoiser dims must be positive");
  if (time_dim < 2 || time_dim % 2 != 0) throw std::invalid_argument("time_dim must be even and >= 2");
  if (!(time_period > 1.0)) throw std::invalid_argument("time_period must exceed 1");
  for (int w : hidden)
    if (w < 1) throw std::invalid_argument("hidden widths must be positive");
  for (double a : skip_alpha_bar)
    if (!(a > 0.0 && a < 1.0)) throw std::invalid_argument("skip alpha_bar values must lie in (0, 1)");
}

void DenoiserParams::validate() const {
  arch.validate();
  if (theta.size() != arch.weight_count())
    throw std::invalid_argument("weight count does not match architecture");
  for (double v : theta)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite denoiser weight");
}

DenoiserParams init_denoiser(const DenoiserArch& arch, Rng& rng) {
  DenoiserParams p = zero_denoiser(arch);
  for (int l = 0; l < arch.layer_count(); ++l) {
    const int in = arch.layer_in(l);
    const int out = arch.layer_out(l);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    double* w = p.theta.data() + arch.layer_offset(l);
    for (std::size_t i = 0; i < static_cast<std::size_t>(in) * out; ++i)
      w[i] = (2.0 * rng.uniform() - 1.0) * bound;
  }
  if (arch.has_skip()) p.theta[arch.gate_index()] = 1.0;
  return p;
}

DenoiserParams zero_denoiser(const DenoiserArch& arch) {
  arch.validate();
  return DenoiserParams{arch, Vector(arch.weight_count(), 0.0)};
}

Vector time_embedding(int t, int dim, double period) {
  const int half = dim / 2;
  Vector out(dim);
  for (int k = 0; k < half; ++k) {
    const double freq = std::pow(period, -static_cast<double>(k) / half);
    out[k] = std::sin(t * freq);
    out[half + k] = std::cos(t * freq);
  }
  return out;
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }
inline double silu(double z) { return z * sigmoid(z); }
inline double silu_grad(double z) {
  const double s = sigmoid(z);
  return s * (1.0 + z * (1.0 - s));
}

// out = in W^T + 1 b^T for one layer over `batch` rows.
void dense(const double* w, int in_dim, int out_dim, int batch, const Vector& in, Vector& out) {
  out.resize(static_cast<std::size_t>(batch) * out_dim);
  ConstMatrixMap W(w, out_dim, in_dim);
  ConstVectorMap b(w + static_cast<std::size_t>(in_dim) * out_dim, out_dim);
  ConstMatrixMap X(in.data(), batch, in_dim);
  MatrixMap Y(out.data(), batch, out_dim);
  Y.noalias() = X * W.transpose();
  Y.rowwise() += b.transpose();
}

}  // namespace

void denoiser_forward_batch(const DenoiserParams& params, std::span<const double> x_t,
                            std::span<const int> t, std::span<const double> e, ActivationTape& tape) {
  const DenoiserArch& arch = params.arch;
  const int batch = static_cast<int>(t.size());
  if (batch < 1 || x_t.size() != static_cast<std::size_t>(batch) * arch.x_dim ||
      e.size() != static_cast<std::size_t>(batch) * arch.cond_dim)
    throw std::invalid_argument("denoiser_forward: dimension mismatch");
  if (params.theta.size() != arch.weight_count())
    throw std::invalid_argument("denoiser_forward: weight count mismatch");

  if (arch.has_skip())
    for (int ti : t)
      if (ti < 0 || ti >= static_cast<int>(arch.skip_alpha_bar.size()))
        throw std::out_of_range("denoiser_forward: timestep outside the skip schedule");

  const int layers = arch.layer_count();
  const int in_dim = arch.input_dim();
  tape.batch = batch;
  tape.t.assign(t.begin(), t.end());
  tape.inputs.resize(layers);
  tape.pre.resize(layers - 1);

  Vector& input = tape.inputs[0];
  input.resize(static_cast<std::size_t>(batch) * in_dim);
  for (int r = 0; r < batch; ++r) {
    double* row = input.data() + static_cast<std::size_t>(r) * in_dim;
    std::copy_n(x_t.data() + static_cast<std::size_t>(r) * arch.x_dim, arch.x_dim, row);
    const Vector temb = time_embedding(t[r], arch.time_dim, arch.time_period);
    std::copy(temb.begin(), temb.end(), row + arch.x_dim);
    std::copy_n(e.data() + static_cast<std::size_t>(r) * arch.cond_dim, arch.cond_dim,
                row + arch.x_dim + arch.time_dim);
  }

  for (int l = 0; l < layers; ++l) {
    const double* w = params.theta.data() + arch.layer_offset(l);
    if (l + 1 == layers) {
      dense(w, arch.layer_in(l), arch.layer_out(l), batch, tape.inputs[l], tape.head);
    } else {
      dense(w, arch.layer_in(l), arch.layer_out(l), batch, tape.inputs[l], tape.pre[l]);
      Vector& next = tape.inputs[l + 1];
      next.resize(tape.pre[l].size());
      for (std::size_t i = 0; i < next.size(); ++i) next[i] = silu(tape.pre[l][i]);
    }
  }

  if (!arch.has_skip()) {
    tape.output = tape.head;
    return;
  }
  const double gate = params.theta[arch.gate_index()];
  tape.output.resize(tape.head.size());
  for (int r = 0; r < batch; ++r) {
    const double ab = arch.skip_alpha_bar[t[r]];
    const double c_x = 1.0 / std::sqrt(1.0 - ab);
    const double c_h = std::sqrt(ab) * c_x;
    const std::size_t row = static_cast<std::size_t>(r) * arch.x_dim;
    for (int i = 0; i < arch.x_dim; ++i)
      tape.output[row + i] = c_x * gate * x_t[row + i] - c_h * tape.head[row + i];
  }
}

void denoiser_forward(const DenoiserParams& params, std::span<const double> x_t, int t,
                      std::span<const double> e, ActivationTape& tape) {
  const int ts[1] = {t};
  denoiser_forward_batch(params, x_t, ts, e, tape);
}

DenoiserOutput denoiser_forward(const DenoiserParams& params, std::span<const double> x_t, int t,
                                const ConditioningEmbedding& e) {
  DenoiserOutput out;
  denoiser_forward(params, x_t, t, e.values, out.tape);
  out.eps = out.tape.output;
  return out;
}

void denoiser_backward(const DenoiserParams& params, const ActivationTape& tape,
                       std::span<const double> d_output, double scale, Vector* grad_params,
                       Vector* grad_embedding) {
  const DenoiserArch& arch = params.arch;
  const int layers = arch.layer_count();
  const int batch = tape.batch;
  if (d_output.size() != static_cast<std::size_t>(batch) * arch.x_dim)
    throw std::invalid_argument("denoiser_backward: output gradient size mismatch");
  if (grad_params && grad_params->size() != arch.weight_count())
    throw std::invalid_argument("denoiser_backward: gradient buffer size mismatch");
  if (grad_embedding && static_cast<int>(grad_embedding->size()) != arch.cond_dim)
    throw std::invalid_argument("denoiser_backward: embedding gradient size mismatch");

  RowMatrix delta = scale * ConstMatrixMap(d_output.data(), batch, arch.x_dim);
  RowMatrix d_in;

  if (arch.has_skip()) {
    double d_gate = 0.0;
    for (int r = 0; r < batch; ++r) {
      const double ab = arch.skip_alpha_bar[tape.t[r]];
      const double c_x = 1.0 / std::sqrt(1.0 - ab);
      const double c_h = std::sqrt(ab) * c_x;
      const double* x = tape.inputs[0].data() + static_cast<std::size_t>(r) * arch.input_dim();
      double acc = 0.0;
      for (int i = 0; i < arch.x_dim; ++i) acc += delta(r, i) * x[i];
      d_gate += c_x * acc;
      delta.row(r) *= -c_h;
    }
    if (grad_params) (*grad_params)[arch.gate_index()] += d_gate;
  }

  for (int l = layers - 1; l >= 0; --l) {
    const int in_dim = arch.layer_in(l);
    const int out_dim = arch.layer_out(l);
    const double* w = params.theta.data() + arch.layer_offset(l);
    ConstMatrixMap W(w, out_dim, in_dim);
    ConstMatrixMap X(tape.inputs[l].data(), batch, in_dim);

    if (grad_params) {
      double* gw = grad_params->data() + arch.layer_offset(l);
      MatrixMap GW(gw, out_dim, in_dim);
      Eigen::Map<Eigen::VectorXd> gb(gw + static_cast<std::size_t>(in_dim) * out_dim, out_dim);
      GW.noalias() += delta.transpose() * X;
      // Reductions go through an owned temporary: evaluated in place, their
      // summation order follows the destination's alignment.
      const Eigen::VectorXd bias_grad = delta.colwise().sum().transpose();
      gb += bias_grad;
    }

    if (l == 0) {
      if (grad_embedding) {
        const int begin = arch.x_dim + arch.time_dim;
        Eigen::Map<Eigen::RowVectorXd> ge(grad_embedding->data(), arch.cond_dim);
        const RowMatrix per_row = delta * W.middleCols(begin, arch.cond_dim);
        const Eigen::RowVectorXd e_grad = per_row.colwise().sum();
        ge += e_grad;
      }
      break;
    }

    d_in.noalias() = delta * W;
    ConstMatrixMap pre(tape.pre[l - 1].data(), batch, in_dim);
    delta = d_in.binaryExpr(pre, [](double d, double z) { return d * silu_grad(z); });
  }
}

double accumulate_batch_loss_and_grads(const DenoiserParams& params, std::span<const double> e,
                                       std::span<const double> x0, std::span<const int> t,
                                       std::span<const double> noise, const NoiseSchedule& sched,
                                       double scale, Vector* grad_params, Vector* grad_embedding,
                                       ActivationTape& tape) {
  const int n = params.arch.x_dim;
  const std::size_t total = t.size() * static_cast<std::size_t>(n);
  if (x0.size() != total || noise.size() != total)
    throw std::invalid_argument("diffusion loss: dimension mismatch");
  Vector x_t(total);
  for (std::size_t r = 0; r < t.size(); ++r) {
    const Vector row = forward_diffuse(x0.subspan(r * n, n), t[r], noise.subspan(r * n, n), sched);
    std::copy(row.begin(), row.end(), x_t.begin() + r * n);
  }
  denoiser_forward_batch(params, x_t, t, e, tape);

  double loss = 0.0;
  Vector d_out(total);
  for (std::size_t r = 0; r < t.size(); ++r) {
    double row_loss = 0.0;
    for (int i = 0; i < n; ++i) {
      const std::size_t k = r * n + i;
      const double diff = tape.output[k] - noise[k];
      row_loss += diff * diff;
      d_out[k] = 2.0 * diff / n;
    }
    loss += row_loss / n;
  }
  if (grad_params || grad_embedding)
    denoiser_backward(params, tape, d_out, scale, grad_params, grad_embedding);
  return loss;
}

double accumulate_loss_and_grads(const DenoiserParams& params, std::span<const double> e,
                                 std::span<const double> x0, int t, std::span<const double> noise,
                                 const NoiseSchedule& sched, double scale, Vector* grad_params,
                                 Vector* grad_embedding, ActivationTape& tape) {
  if (static_cast<int>(x0.size()) != params.arch.x_dim)
    throw std::invalid_argument("diffusion loss: dimension mismatch");
  if (static_cast<int>(e.size()) != params.arch.cond_dim)
    throw std::invalid_argument("diffusion loss: embedding dimension mismatch");
  const int ts[1] = {t};
  return accumulate_batch_loss_and_grads(params, e, x0, ts, noise, sched, scale, grad_params,
                                         grad_embedding, tape);
}

LossAndGrads diffusion_loss_and_grads(const DenoiserParams& params, const ConditioningEmbedding& e,
                                      std::span<const double> x0, int t,
                                      std::span<const double> noise, const NoiseSchedule& sched,
                                      GradTarget wrt) {
  LossAndGrads out;
  if (wrt != GradTarget::kEmbedding) out.grad_params.emplace(params.arch.weight_count(), 0.0);
  if (wrt != GradTarget::kParams) out.grad_embedding.emplace(params.arch.cond_dim, 0.0);
  ActivationTape tape;
  out.loss = accumulate_loss_and_grads(params, e.values, x0, t, noise, sched, 1.0,
                                       out.grad_params ? &*out.grad_params : nullptr,
                                       out.grad_embedding ? &*out.grad_embedding : nullptr, tape);
  return out;
}

}  // namespace aerial
