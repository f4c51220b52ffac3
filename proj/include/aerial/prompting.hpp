#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "aerial/diffusion.hpp"

namespace aerial {

/// Deterministic stand-in for a text encoder. Each lowercase whitespace
/// token hashes to a pseudo-random unit vector; a prompt embeds to the
/// L2-normalized mean of its token vectors. The all-zero vector is reserved
/// as the null (unconditional) embedding and is never produced by a prompt.
class PromptEmbedder {
 public:
  PromptEmbedder(int dim, std::uint64_t hash_seed);

  int dim() const { return dim_; }
  std::uint64_t hash_seed() const { return hash_seed_; }

  /// Throws std::invalid_argument for a prompt without tokens.
  ConditioningEmbedding embed(const std::string& prompt) const;
  ConditioningEmbedding null_embedding() const;
  Vector token_vector(const std::string& token) const;

 private:
  int dim_;
  std::uint64_t hash_seed_;
};

std::vector<std::string> tokenize(const std::string& prompt);

struct ViewPrompts {
  std::string source;  // "front view of " + txt
  std::string target;  // "aerial view of " + txt
};

ViewPrompts compose_view_prompts(const std::string& txt);

/// alpha * e_tgt + (1 - alpha) * e_opt, without renormalization.
ConditioningEmbedding interpolate_embedding(const ConditioningEmbedding& e_opt,
                                            const ConditioningEmbedding& e_tgt, double alpha);

/// Per-step conditioning schedules. Step index 0 is the first backward step
/// (pure noise); e1 = e_tgt and e2 = interpolate(e_opt, e_tgt, alpha).
enum class Strategy {
  kAlternating,         // e1 at even steps, e2 at odd steps
  kAlternatingStartE2,  // parity swapped
  kLinearOnly,          // e2 throughout
  kE1Only,              // e1 throughout
  kFirstHalfE1,         // e1 for i < ceil(T/2), then e2
  kFirstHalfE2,         // e2 for i < ceil(T/2), then e1
};

Strategy parse_strategy(const std::string& token);
std::string to_string(Strategy strategy);
const std::vector<Strategy>& all_strategies();

struct ConditioningPlan {
  Strategy strategy = Strategy::kAlternating;
  double alpha = 0.0;
  std::vector<ConditioningEmbedding> steps;

  std::size_t size() const { return steps.size(); }
};

/// True where the plan uses e1 at step i.
bool uses_e1(Strategy strategy, int step, int total_steps);

ConditioningPlan build_conditioning_plan(Strategy strategy, int total_steps, double alpha,
                                         const ConditioningEmbedding& e_opt,
                                         const ConditioningEmbedding& e_tgt);

}  // namespace aerial
