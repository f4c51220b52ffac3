#include "aerial/eval.hpp"

#include <array>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "aerial/checkpoint.hpp"
#include "aerial/rng.hpp"

namespace aerial {

namespace {

constexpr char kProbeMagic[4] = {'A', 'D', 'K', 'P'};
// A pixel counts as object when it is at least this far from the floor gray...
constexpr double kFloorDistance = 0.25;
// ...and at most this far from its nearest primary.
constexpr double kPrimaryDistance = 0.6;

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double dot(const std::vector<double>& w, std::span<const double> x) {
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * x[i];
  return acc;
}

}  // namespace

void ViewpointProbe::require_accepted() const {
  if (!accepted()) {
    std::ostringstream msg;
    msg << "viewpoint probe rejected: training accuracy " << train_accuracy << " < " << kMinAccuracy;
    throw ProbeRejectedError(msg.str());
  }
}

ViewpointProbe train_probe(const std::vector<ImageBuffer>& images, const std::vector<int>& labels,
                           std::uint64_t seed, const ProbeOptions& options) {
  if (images.empty() || images.size() != labels.size())
    throw std::invalid_argument("train_probe: need one label per image");
  bool has_front = false, has_aerial = false;
  for (int l : labels) {
    if (l != 0 && l != 1) throw std::invalid_argument("train_probe: labels must be 0 or 1");
    (l == 0 ? has_front : has_aerial) = true;
  }
  if (!has_front || !has_aerial) throw std::invalid_argument("train_probe: manifest holds a single view");
  const std::size_t dim = images.front().size();
  for (const auto& img : images)
    if (img.size() != dim) throw std::invalid_argument("train_probe: images differ in shape");

  ViewpointProbe probe;
  probe.seed = seed;
  Rng rng(seed);
  probe.weights.resize(dim);
  for (double& w : probe.weights) w = (2.0 * rng.uniform() - 1.0) * 1e-3;

  const double inv_n = 1.0 / images.size();
  std::vector<double> grad(dim);
  for (int step = 0; step < options.steps; ++step) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_bias = 0.0;
    for (std::size_t k = 0; k < images.size(); ++k) {
      const auto x = images[k].data();
      const double r = logistic(dot(probe.weights, x) + probe.bias) - labels[k];
      for (std::size_t i = 0; i < dim; ++i) grad[i] += r * x[i];
      grad_bias += r;
    }
    for (std::size_t i = 0; i < dim; ++i) probe.weights[i] -= options.lr * grad[i] * inv_n;
    probe.bias -= options.lr * grad_bias * inv_n;
  }

  std::size_t correct = 0;
  for (std::size_t k = 0; k < images.size(); ++k) {
    const double p = logistic(dot(probe.weights, images[k].data()) + probe.bias);
    if ((p > 0.5 ? 1 : 0) == labels[k]) ++correct;
  }
  probe.train_accuracy = static_cast<double>(correct) / images.size();
  return probe;
}

ViewpointProbe train_probe(const DatasetManifest& manifest, std::uint64_t seed,
                           const ProbeOptions& options) {
  std::vector<ImageBuffer> images;
  std::vector<int> labels;
  for (const auto& e : manifest.entries) {
    images.push_back(read_image(e.path));
    labels.push_back(e.view == View::kAerial ? 1 : 0);
  }
  return train_probe(images, labels, seed, options);
}

double aerialness(const ViewpointProbe& probe, const ImageBuffer& image) {
  if (image.size() != probe.weights.size())
    throw std::invalid_argument("aerialness: image does not match the probe's dimension");
  return logistic(dot(probe.weights, image.data()) + probe.bias);
}

void save_probe(const ViewpointProbe& probe, const std::filesystem::path& path) {
  Vector v = probe.weights;
  v.push_back(probe.bias);
  v.push_back(probe.train_accuracy);
  write_file_bytes(path, encode_vector(v, kProbeMagic));
}

ViewpointProbe load_probe(const std::filesystem::path& path) {
  Vector v = decode_vector(read_file_bytes(path), kProbeMagic);
  if (v.size() < 3) throw CheckpointError("probe file too short");
  ViewpointProbe probe;
  probe.train_accuracy = v.back();
  v.pop_back();
  probe.bias = v.back();
  v.pop_back();
  probe.weights = std::move(v);
  return probe;
}

FidelityReport fidelity(const SceneSpec& spec, const ImageBuffer& generated) {
  if (generated.channels() != 3) throw std::invalid_argument("fidelity expects an RGB image");
  std::array<int, 4> votes{};
  std::array<double, 4> x_sum{};
  for (int i = 0; i < generated.height(); ++i) {
    for (int j = 0; j < generated.width(); ++j) {
      std::array<double, 3> p{generated.at(i, j, 0), generated.at(i, j, 1), generated.at(i, j, 2)};
      double floor_d2 = 0.0;
      for (double v : p) floor_d2 += (v - spec.floor) * (v - spec.floor);
      const double floor_d = std::sqrt(floor_d2);
      if (floor_d < kFloorDistance) continue;
      int best = -1;
      double best_d = 0.0;
      for (int k = 0; k < 4; ++k) {
        const auto c = rgb(kAllColors[k]);
        double d2 = 0.0;
        for (int ch = 0; ch < 3; ++ch) d2 += (p[ch] - c[ch]) * (p[ch] - c[ch]);
        const double d = std::sqrt(d2);
        if (best < 0 || d < best_d) best = k, best_d = d;
      }
      if (best_d > kPrimaryDistance || best_d >= floor_d) continue;
      ++votes[best];
      x_sum[best] += j + 0.5;
    }
  }

  FidelityReport report;
  int dominant = -1;
  for (int k = 0; k < 4; ++k)
    if (votes[k] > 0 && (dominant < 0 || votes[k] > votes[dominant])) dominant = k;
  if (dominant < 0) {
    report.no_object = true;
    return report;
  }
  report.dominant = kAllColors[dominant];
  report.color_match = kAllColors[dominant] == spec.color;
  const double centroid = x_sum[dominant] / votes[dominant];
  report.centroid_error = std::abs(centroid - spec.u * generated.width());
  const double position = std::max(0.0, 1.0 - report.centroid_error / (generated.width() / 4.0));
  report.score = report.color_match ? position : 0.0;
  return report;
}

std::string format_eval_line(const std::string& image, double aerial, const FidelityReport& report) {
  std::ostringstream out;
  out << std::setprecision(6) << image << '\t' << aerial << '\t' << (report.color_match ? 1 : 0) << '\t'
      << report.centroid_error << '\t' << report.score;
  return out.str();
}

}  // namespace aerial
