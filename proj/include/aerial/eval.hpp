#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aerial/image.hpp"
#include "aerial/scene.hpp"

namespace aerial {

/// Logistic regression over raw pixels separating front (0) from aerial (1)
/// renderings.
struct ViewpointProbe {
  std::vector<double> weights;  // one per pixel sample
  double bias = 0.0;
  double train_accuracy = 0.0;
  std::uint64_t seed = 0;

  static constexpr double kMinAccuracy = 0.95;
  bool accepted() const { return train_accuracy >= kMinAccuracy; }
  /// Throws ProbeRejectedError unless accepted().
  void require_accepted() const;
};

class ProbeRejectedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ProbeOptions {
  int steps = 500;
  double lr = 0.1;
};

/// Full-batch gradient descent on the logistic loss. Initial weights are
/// drawn from the seed in [-1e-3, 1e-3].
ViewpointProbe train_probe(const std::vector<ImageBuffer>& images, const std::vector<int>& labels,
                           std::uint64_t seed, const ProbeOptions& options = {});
ViewpointProbe train_probe(const DatasetManifest& manifest, std::uint64_t seed,
                           const ProbeOptions& options = {});

/// sigmoid(w . x + b); 1 means aerial.
double aerialness(const ViewpointProbe& probe, const ImageBuffer& image);

/// Probe file: "ADKP" vector layout holding [weights..., bias, train_accuracy].
void save_probe(const ViewpointProbe& probe, const std::filesystem::path& path);
ViewpointProbe load_probe(const std::filesystem::path& path);

struct FidelityReport {
  bool color_match = false;
  double centroid_error = 0.0;  // pixels
  double score = 0.0;           // [0, 1]
  bool no_object = false;
  std::optional<Color> dominant;
};

/// Classifies every pixel that is far from the floor shade and close to a
/// primary, takes the most frequent primary as the object's color and
/// compares its centroid x with spec.u * width:
///   score = color_match * max(0, 1 - centroid_error / (width / 4)).
FidelityReport fidelity(const SceneSpec& spec, const ImageBuffer& generated);

/// "image \t aerialness \t color_match \t centroid_err \t score"
std::string format_eval_line(const std::string& image, double aerial, const FidelityReport& report);

}  // namespace aerial
