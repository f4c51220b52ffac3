#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "aerial/image.hpp"

namespace aerial {

enum class Shape { kCube, kCylinder, kPyramid };
enum class Color { kRed, kGreen, kBlue, kYellow };
enum class View { kFront, kAerial };

std::string to_string(Shape shape);
std::string to_string(Color color);
std::string to_string(View view);
Shape parse_shape(const std::string& name);
Color parse_color(const std::string& name);
View parse_view(const std::string& name);

std::array<double, 3> rgb(Color color);
inline constexpr std::array<Color, 4> kAllColors = {Color::kRed, Color::kGreen, Color::kBlue,
                                                    Color::kYellow};

/// One synthetic scene: a single primary-colored object on a gray floor.
/// `u` is the object's horizontal center as a fraction of the width and is
/// shared by both views.
struct SceneSpec {
  Shape shape = Shape::kCube;
  Color color = Color::kRed;
  double u = 0.5;          // [0.2, 0.8]
  double scale = 0.3;      // object extent as a fraction of the width, [0.2, 0.4]
  double floor = 0.5;      // floor gray level, [0.3, 0.7]

  void validate() const;
  /// "a <color> <shape>"
  std::string description() const;
  bool operator==(const SceneSpec&) const = default;
};

/// Analytic painter's rendering, RGB, size x size. Front: white sky above
/// the horizon at half height, floor band below, object silhouette standing
/// on the floor at 7/8 height. Aerial: floor everywhere with the object's
/// top-down footprint centered at 11/16 height. A pixel belongs to the
/// object when its center lies inside the shape.
ImageBuffer render_view(const SceneSpec& spec, View view, int size);

struct ManifestEntry {
  int scene_id = 0;
  View view = View::kFront;
  std::string prompt;
  std::filesystem::path path;  // absolute after loading
  SceneSpec spec;
};

/// Manifest file: one entry per line,
///   id \t view \t prompt \t path \t shape \t color \t u \t scale \t floor
/// with paths relative to the manifest's directory.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  int size = 0;

  std::vector<int> scene_ids() const;
  const ManifestEntry& find(int scene_id, View view) const;
};

/// Draws a SceneSpec. u is drawn on the half-pixel grid of `size` so that
/// rasterized objects have exactly centered centroids.
class Rng;
SceneSpec random_scene(Rng& rng, int size);

/// Renders n_scenes random scenes in both views as PPM files plus
/// manifest.tsv under out_dir.
DatasetManifest generate_dataset(int n_scenes, int size, std::uint64_t seed,
                                 const std::filesystem::path& out_dir);

std::string format_manifest(const DatasetManifest& manifest, const std::filesystem::path& base_dir);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace aerial
