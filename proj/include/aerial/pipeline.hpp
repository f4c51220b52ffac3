#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "aerial/config.hpp"
#include "aerial/eval.hpp"
#include "aerial/image.hpp"
#include "aerial/optimize.hpp"
#include "aerial/prompting.hpp"
#include "aerial/scene.hpp"

namespace aerial {

/// A failure tagged with the pipeline stage that raised it.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message)
      : std::runtime_error("[" + stage + "] " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// The full method and its ablations.
enum class Variant {
  kFull,               // homography, e_opt from e_src, configured strategy
  kNoHomography,       // finetune on the ground view itself
  kLinear,             // linear_only sampling
  kTargetVicinity,     // e_opt optimized from e_tgt
  kManip1,             // alternating_start_e2
  kManip2,             // e1_only
  kManip3,             // first_half_e1
  kManip4,             // first_half_e2
};

std::string to_string(Variant variant);
Variant parse_variant(const std::string& name);
const std::vector<Variant>& all_variants();

struct VariantSettings {
  bool use_homography = true;
  bool init_from_target = false;
  Strategy strategy = Strategy::kAlternating;
};
VariantSettings variant_settings(Variant variant, Strategy configured);

/// Ground-view input to a run. `spec` enables fidelity scoring.
struct RunInput {
  ImageBuffer ground;
  std::string txt;
  std::optional<SceneSpec> spec;
  std::string label;
};

RunInput scene_input(const DatasetManifest& manifest, int scene_id);

struct CellResult {
  double alpha = 0.0;
  std::uint64_t seed = 0;
  std::filesystem::path image;  // relative to the run directory
  double aerialness = 0.0;
  std::optional<FidelityReport> fidelity;

  double fidelity_score() const { return fidelity ? fidelity->score : 0.0; }
};

struct AlphaSummary {
  double alpha = 0.0;
  double mean_aerialness = 0.0;
  double mean_fidelity = 0.0;
  double mean_product = 0.0;  // mean of aerialness * fidelity per cell
};

struct RunRecord {
  std::string label;
  Variant variant = Variant::kFull;
  Strategy strategy = Strategy::kAlternating;
  std::map<std::string, std::string> config;
  /// Stage name -> checksum (hex), in execution order.
  std::vector<std::pair<std::string, std::string>> checksums;
  std::filesystem::path dir;
  std::vector<CellResult> cells;
  std::vector<AlphaSummary> summary;
  /// Harness policy: argmax over the sweep of mean aerialness * fidelity
  /// (mean aerialness when no scene spec is known).
  double best_alpha = 0.0;

  const AlphaSummary& at_alpha(double alpha) const;
  std::string to_json() const;
};

/// Stage driver. Artifacts of the dataset, base model, probe and
/// finetuning stages are cached under <workdir>/cache by content hash;
/// run outputs go to <workdir>/<config hash>/<label>/<variant>.
class Pipeline {
 public:
  explicit Pipeline(RunConfig config, std::ostream* log = nullptr);

  const RunConfig& config() const { return config_; }
  std::filesystem::path cache_dir() const;
  std::filesystem::path run_dir() const;

  /// Generates the synthetic dataset unless already cached.
  DatasetManifest dataset();
  /// Trains the base model unless already cached, and returns it.
  DenoiserParams train_base();
  /// Loads the cached base model; throws StageError when it was never trained.
  DenoiserParams load_base() const;
  std::filesystem::path base_path() const;
  /// Trains (or loads) the viewpoint probe and checks its accuracy gate.
  ViewpointProbe probe();

  PromptEmbedder embedder() const;

  /// Warp, embedding optimization, finetuning, then sampling over
  /// alphas x seeds and evaluation.
  RunRecord run(const RunInput& input, Variant variant = Variant::kFull);
  RunRecord run(const RunInput& input, Variant variant, const std::vector<double>& alphas);

  /// Runs every variant at config.ablation_alpha with shared seeds and writes
  /// ablation.tsv (variant, seed rows) and ablation_summary.tsv.
  std::vector<RunRecord> ablate(const RunInput& input);

 private:
  struct Stage2 {
    ConditioningEmbedding e_opt;
    DenoiserParams tuned;
    TrainReport embed_report;
    TrainReport finetune_report;
  };

  std::string dataset_key() const;
  std::string base_key() const;
  Stage2 stage2(const DenoiserParams& base, const ImageBuffer& target, const ConditioningEmbedding& e_init);
  void log(const std::string& message) const;

  RunConfig config_;
  std::ostream* log_;
};

}  // namespace aerial
