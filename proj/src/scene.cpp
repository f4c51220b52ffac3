#include "aerial/scene.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <stdexcept>

#include "aerial/prompting.hpp"
#include "aerial/rng.hpp"

namespace aerial {

std::string to_string(Shape shape) {
  switch (shape) {
    case Shape::kCube: return "cube";
    case Shape::kCylinder: return "cylinder";
    case Shape::kPyramid: return "pyramid";
  }
  throw std::invalid_argument("invalid shape");
}

std::string to_string(Color color) {
  switch (color) {
    case Color::kRed: return "red";
    case Color::kGreen: return "green";
    case Color::kBlue: return "blue";
    case Color::kYellow: return "yellow";
  }
  throw std::invalid_argument("invalid color");
}

std::string to_string(View view) { return view == View::kFront ? "front" : "aerial"; }

Shape parse_shape(const std::string& name) {
  for (Shape s : {Shape::kCube, Shape::kCylinder, Shape::kPyramid})
    if (to_string(s) == name) return s;
  throw std::invalid_argument("unknown shape '" + name + "'");
}

Color parse_color(const std::string& name) {
  for (Color c : kAllColors)
    if (to_string(c) == name) return c;
  throw std::invalid_argument("unknown color '" + name + "'");
}

View parse_view(const std::string& name) {
  if (name == "front") return View::kFront;
  if (name == "aerial") return View::kAerial;
  throw std::invalid_argument("unknown view '" + name + "'");
}

std::array<double, 3> rgb(Color color) {
  switch (color) {
    case Color::kRed: return {1, 0, 0};
    case Color::kGreen: return {0, 1, 0};
    case Color::kBlue: return {0, 0, 1};
    case Color::kYellow: return {1, 1, 0};
  }
  throw std::invalid_argument("invalid color");
}

void SceneSpec::validate() const {
  if (!(u >= 0.2 && u <= 0.8)) throw std::invalid_argument("scene u must lie in [0.2, 0.8]");
  if (!(scale >= 0.2 && scale <= 0.4)) throw std::invalid_argument("scene scale must lie in [0.2, 0.4]");
  if (!(floor >= 0.3 && floor <= 0.7)) throw std::invalid_argument("floor shade must lie in [0.3, 0.7]");
}

std::string SceneSpec::description() const { return "a " + to_string(color) + " " + to_string(shape); }

namespace {

constexpr double kHorizon = 0.5;
constexpr double kFrontBase = 0.875;
constexpr double kAerialCenter = 0.6875;
constexpr double kCylinderHeight = 1.25;

bool inside_front(const SceneSpec& spec, double dx, double py, double size) {
  const double half = 0.5 * spec.scale * size;
  const double base = kFrontBase * size;
  double height = spec.scale * size;
  if (py > base) return false;
  switch (spec.shape) {
    case Shape::kCube:
      return std::abs(dx) <= half && py >= base - height;
    case Shape::kCylinder:
      height *= kCylinderHeight;
      return std::abs(dx) <= half && py >= base - height;
    case Shape::kPyramid: {
      const double from_apex = py - (base - height);
      return from_apex >= 0.0 && std::abs(dx) <= half * from_apex / height;
    }
  }
  return false;
}

bool inside_aerial(const SceneSpec& spec, double dx, double dy, double size) {
  const double half = 0.5 * spec.scale * size;
  if (spec.shape == Shape::kCylinder) return dx * dx + dy * dy <= half * half;
  return std::abs(dx) <= half && std::abs(dy) <= half;
}

}  // namespace

ImageBuffer render_view(const SceneSpec& spec, View view, int size) {
  if (size < 8) throw std::invalid_argument("render size must be >= 8");
  spec.validate();
  const double s = size;
  const double cx = spec.u * s;
  const double cy = kAerialCenter * s;
  const auto object = rgb(spec.color);
  ImageBuffer img(size, size, 3);
  for (int i = 0; i < size; ++i) {
    const double py = i + 0.5;
    for (int j = 0; j < size; ++j) {
      const double dx = (j + 0.5) - cx;
      bool in_object;
      double background;
      if (view == View::kFront) {
        in_object = inside_front(spec, dx, py, s);
        background = py < kHorizon * s ? 1.0 : spec.floor;
      } else {
        in_object = inside_aerial(spec, dx, py - cy, s);
        background = spec.floor;
      }
      for (int c = 0; c < 3; ++c) img.at(i, j, c) = in_object ? object[c] : background;
    }
  }
  return img;
}

std::vector<int> DatasetManifest::scene_ids() const {
  std::set<int> ids;
  for (const auto& e : entries) ids.insert(e.scene_id);
  return {ids.begin(), ids.end()};
}

const ManifestEntry& DatasetManifest::find(int scene_id, View view) const {
  for (const auto& e : entries)
    if (e.scene_id == scene_id && e.view == view) return e;
  throw std::out_of_range("scene " + std::to_string(scene_id) + " (" + to_string(view) +
                          ") not in manifest");
}

SceneSpec random_scene(Rng& rng, int size) {
  SceneSpec spec;
  spec.shape = static_cast<Shape>(rng.uniform_index(3));
  spec.color = static_cast<Color>(rng.uniform_index(4));
  const int grid = 2 * size;
  const int lo = static_cast<int>(std::ceil(0.2 * grid));
  const int hi = static_cast<int>(std::floor(0.8 * grid));
  spec.u = static_cast<double>(lo + static_cast<int>(rng.uniform_index(hi - lo + 1))) / grid;
  spec.scale = 0.2 + 0.2 * rng.uniform();
  spec.floor = 0.3 + 0.4 * rng.uniform();
  return spec;
}

DatasetManifest generate_dataset(int n_scenes, int size, std::uint64_t seed,
                                 const std::filesystem::path& out_dir) {
  if (n_scenes < 1) throw std::invalid_argument("n_scenes must be >= 1");
  std::filesystem::create_directories(out_dir);
  Rng rng(seed);
  DatasetManifest manifest;
  manifest.size = size;
  for (int id = 0; id < n_scenes; ++id) {
    const SceneSpec spec = random_scene(rng, size);
    const ViewPrompts prompts = compose_view_prompts(spec.description());
    for (View view : {View::kFront, View::kAerial}) {
      std::ostringstream name;
      name << "scene_" << std::setw(3) << std::setfill('0') << id << '_' << to_string(view) << ".ppm";
      const auto path = out_dir / name.str();
      write_image(render_view(spec, view, size), path);
      manifest.entries.push_back(
          {id, view, view == View::kFront ? prompts.source : prompts.target, path, spec});
    }
  }
  write_manifest(manifest, out_dir / "manifest.tsv");
  return manifest;
}

std::string format_manifest(const DatasetManifest& manifest, const std::filesystem::path& base_dir) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (const auto& e : manifest.entries) {
    const auto rel = std::filesystem::relative(std::filesystem::absolute(e.path), base_dir);
    out << e.scene_id << '\t' << to_string(e.view) << '\t' << e.prompt << '\t' << rel.generic_string()
        << '\t' << to_string(e.spec.shape) << '\t' << to_string(e.spec.color) << '\t' << e.spec.u
        << '\t' << e.spec.scale << '\t' << e.spec.floor << '\n';
  }
  return out.str();
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << format_manifest(manifest, std::filesystem::absolute(path).parent_path());
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path.string());
  const auto base = std::filesystem::absolute(path).parent_path();
  DatasetManifest manifest;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, '\t');) fields.push_back(f);
    if (fields.size() != 9)
      throw std::runtime_error("manifest line " + std::to_string(line_no) + ": expected 9 fields");
    ManifestEntry e;
    e.scene_id = std::stoi(fields[0]);
    e.view = parse_view(fields[1]);
    e.prompt = fields[2];
    e.path = base / fields[3];
    e.spec.shape = parse_shape(fields[4]);
    e.spec.color = parse_color(fields[5]);
    e.spec.u = std::stod(fields[6]);
    e.spec.scale = std::stod(fields[7]);
    e.spec.floor = std::stod(fields[8]);
    manifest.entries.push_back(std::move(e));
  }
  if (!manifest.entries.empty()) manifest.size = read_image(manifest.entries.front().path).height();
  return manifest;
}

}  // namespace aerial
