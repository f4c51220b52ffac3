#include "aerial/prompting.hpp"

#include <cctype>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace aerial {

PromptEmbedder::PromptEmbedder(int dim, std::uint64_t hash_seed) : dim_(dim), hash_seed_(hash_seed) {
  if (dim < 1) throw std::invalid_argument("embedding dimension must be positive");
}

std::vector<std::string> tokenize(const std::string& prompt) {
  std::string lowered(prompt);
  for (char& ch : lowered) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  std::istringstream in(lowered);
  std::vector<std::string> tokens;
  for (std::string tok; in >> tok;) tokens.push_back(tok);
  return tokens;
}

Vector PromptEmbedder::token_vector(const std::string& token) const {
  Rng rng(fnv1a64(token, hash_seed_ ^ 0xcbf29ce484222325ULL));
  Vector v = rng.gaussian_vector(dim_);
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

ConditioningEmbedding PromptEmbedder::embed(const std::string& prompt) const {
  const auto tokens = tokenize(prompt);
  if (tokens.empty()) throw std::invalid_argument("cannot embed an empty prompt");
  Vector mean(dim_, 0.0);
  for (const auto& tok : tokens) {
    const Vector v = token_vector(tok);
    for (int i = 0; i < dim_; ++i) mean[i] += v[i];
  }
  double norm = 0.0;
  for (double& x : mean) {
    x /= static_cast<double>(tokens.size());
    norm += x * x;
  }
  norm = std::sqrt(norm);
  // Token vectors that cancel exactly would collide with the null embedding.
  if (!(norm > 1e-12)) throw std::invalid_argument("prompt tokens cancel to a zero embedding");
  for (double& x : mean) x /= norm;
  return ConditioningEmbedding{std::move(mean)};
}

ConditioningEmbedding PromptEmbedder::null_embedding() const {
  return ConditioningEmbedding{Vector(dim_, 0.0)};
}

ViewPrompts compose_view_prompts(const std::string& txt) {
  if (tokenize(txt).empty()) throw std::invalid_argument("scene description must not be empty");
  return ViewPrompts{"front view of " + txt, "aerial view of " + txt};
}

ConditioningEmbedding interpolate_embedding(const ConditioningEmbedding& e_opt,
                                            const ConditioningEmbedding& e_tgt, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in [0, 1]");
  if (e_opt.dim() != e_tgt.dim()) throw std::invalid_argument("embedding dimensions differ");
  if (alpha == 0.0) return e_opt;
  if (alpha == 1.0) return e_tgt;
  ConditioningEmbedding out{Vector(e_opt.dim())};
  for (std::size_t i = 0; i < e_opt.dim(); ++i)
    out.values[i] = alpha * e_tgt.values[i] + (1.0 - alpha) * e_opt.values[i];
  return out;
}

Strategy parse_strategy(const std::string& token) {
  for (Strategy s : all_strategies())
    if (to_string(s) == token) return s;
  throw std::invalid_argument("unknown conditioning strategy '" + token + "'");
}

std::string to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::kAlternating: return "alternating";
    case Strategy::kAlternatingStartE2: return "alternating_start_e2";
    case Strategy::kLinearOnly: return "linear_only";
    case Strategy::kE1Only: return "e1_only";
    case Strategy::kFirstHalfE1: return "first_half_e1";
    case Strategy::kFirstHalfE2: return "first_half_e2";
  }
  throw std::invalid_argument("invalid strategy value");
}

const std::vector<Strategy>& all_strategies() {
  static const std::vector<Strategy> kAll = {
      Strategy::kAlternating, Strategy::kAlternatingStartE2, Strategy::kLinearOnly,
      Strategy::kE1Only,      Strategy::kFirstHalfE1,        Strategy::kFirstHalfE2,
  };
  return kAll;
}

bool uses_e1(Strategy strategy, int step, int total_steps) {
  const int half = (total_steps + 1) / 2;
  switch (strategy) {
    case Strategy::kAlternating: return step % 2 == 0;
    case Strategy::kAlternatingStartE2: return step % 2 == 1;
    case Strategy::kLinearOnly: return false;
    case Strategy::kE1Only: return true;
    case Strategy::kFirstHalfE1: return step < half;
    case Strategy::kFirstHalfE2: return step >= half;
  }
  throw std::invalid_argument("invalid strategy value");
}

ConditioningPlan build_conditioning_plan(Strategy strategy, int total_steps, double alpha,
                                         const ConditioningEmbedding& e_opt,
                                         const ConditioningEmbedding& e_tgt) {
  if (total_steps < 1) throw std::invalid_argument("conditioning plan needs T >= 1");
  const ConditioningEmbedding e2 = interpolate_embedding(e_opt, e_tgt, alpha);
  ConditioningPlan plan;
  plan.strategy = strategy;
  plan.alpha = alpha;
  plan.steps.reserve(total_steps);
  for (int i = 0; i < total_steps; ++i) plan.steps.push_back(uses_e1(strategy, i, total_steps) ? e_tgt : e2);
  return plan;
}

}  // namespace aerial
