#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include "aerial/rng.hpp"
#include "aerial/scene.hpp"
#include "support.hpp"

using namespace aerial;

namespace {

struct Pt {
  double x, y;
};

bool is_object(const ImageBuffer& img, int i, int j, Color color) {
  const auto c = rgb(color);
  for (int ch = 0; ch < 3; ++ch)
    if (std::abs(img.at(i, j, ch) - c[ch]) > 1e-9) return false;
  return true;
}

std::vector<Pt> object_pixels(const ImageBuffer& img, Color color) {
  std::vector<Pt> pts;
  for (int i = 0; i < img.height(); ++i)
    for (int j = 0; j < img.width(); ++j)
      if (is_object(img, i, j, color)) pts.push_back({j + 0.5, i + 0.5});
  return pts;
}

double centroid_x(const std::vector<Pt>& pts) {
  double s = 0.0;
  for (const auto& p : pts) s += p.x;
  return s / pts.size();
}

double cross(const Pt& o, const Pt& a, const Pt& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Andrew's monotone chain.
std::vector<Pt> hull(std::vector<Pt> pts) {
  std::sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  std::vector<Pt> h(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i - 1]) <= 0) --k;
    h[k++] = pts[i - 1];
  }
  h.resize(k - 1);
  return h;
}

// 4*pi*A/P^2 of the convex hull through the mask's pixel centers.
double circularity(const std::vector<Pt>& mask) {
  const auto h = hull(mask);
  double area = 0.0, perim = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const Pt& a = h[i];
    const Pt& b = h[(i + 1) % h.size()];
    area += a.x * b.y - b.x * a.y;
    perim += std::hypot(b.x - a.x, b.y - a.y);
  }
  area = std::abs(area) / 2.0;
  return 4.0 * std::numbers::pi * area / (perim * perim);
}

}  // namespace

TEST_CASE("hull circularity oracle separates squares from discs") {
  std::vector<Pt> square, disc;
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 20; ++j) {
      square.push_back({j + 0.5, i + 0.5});
      if (std::hypot(j + 0.5 - 10.0, i + 0.5 - 10.0) <= 9.0) disc.push_back({j + 0.5, i + 0.5});
    }
  CHECK(circularity(square) == doctest::Approx(std::numbers::pi / 4.0));
  CHECK(circularity(disc) > 0.9);
}

TEST_CASE("rendering is deterministic and in range") {
  SceneSpec spec{Shape::kPyramid, Color::kYellow, 0.4, 0.35, 0.6};
  for (View v : {View::kFront, View::kAerial}) {
    const auto a = render_view(spec, v, 32);
    const auto b = render_view(spec, v, 32);
    CHECK(std::ranges::equal(a.data(), b.data()));
    CHECK(a.height() == 32);
    CHECK(a.width() == 32);
    CHECK(a.channels() == 3);
    for (double x : a.data()) {
      CHECK(x >= 0.0);
      CHECK(x <= 1.0);
    }
  }
}

TEST_CASE("red cube at u = 0.5 is centered in both views") {
  SceneSpec spec{Shape::kCube, Color::kRed, 0.5, 0.3, 0.5};
  for (int size : {16, 32, 64}) {
    for (View v : {View::kFront, View::kAerial}) {
      const auto pts = object_pixels(render_view(spec, v, size), Color::kRed);
      REQUIRE(!pts.empty());
      CHECK(std::abs(centroid_x(pts) - 0.5 * size) <= 1.0);
    }
  }
}

TEST_CASE("aerial cylinder footprint is circular, cube footprint is not") {
  for (double scale : {0.2, 0.3, 0.4}) {
    SceneSpec cyl{Shape::kCylinder, Color::kBlue, 0.5, scale, 0.4};
    const auto pts = object_pixels(render_view(cyl, View::kAerial, 64), Color::kBlue);
    REQUIRE(pts.size() > 20);
    CHECK(circularity(pts) > 0.8);
  }
  SceneSpec cube{Shape::kCube, Color::kBlue, 0.5, 0.3, 0.4};
  CHECK(circularity(object_pixels(render_view(cube, View::kAerial, 64), Color::kBlue)) < 0.8);
}

TEST_CASE("random scenes stay in range with u on the half-pixel grid") {
  Rng rng(99);
  for (int k = 0; k < 500; ++k) {
    const int size = 16 + 8 * (k % 4);
    const SceneSpec s = random_scene(rng, size);
    CHECK_NOTHROW(s.validate());
    CHECK(s.u >= 0.2);
    CHECK(s.u <= 0.8);
    const double grid = s.u * 2 * size;
    CHECK(grid == doctest::Approx(std::round(grid)).epsilon(1e-12));
  }
}

TEST_CASE("invalid specs are rejected") {
  SceneSpec s;
  s.u = 0.9;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = SceneSpec{};
  s.scale = 0.1;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  s = SceneSpec{};
  s.floor = 0.8;
  CHECK_THROWS_AS(s.validate(), std::invalid_argument);
  CHECK(SceneSpec{}.description() == "a red cube");
  CHECK_THROWS(parse_color("purple"));
  CHECK(parse_shape("cylinder") == Shape::kCylinder);
}

TEST_CASE("single scene dataset has two entries") {
  TempDir dir("scene1");
  const auto m = generate_dataset(1, 16, 3, dir.path);
  REQUIRE(m.entries.size() == 2);
  CHECK(m.entries[0].view != m.entries[1].view);
  CHECK(std::filesystem::exists(dir / "manifest.tsv"));
  CHECK_THROWS_AS(generate_dataset(0, 16, 3, dir.path), std::invalid_argument);
}

TEST_CASE("64 scene dataset: counts, balance, pairing") {
  TempDir dir("scene64");
  const auto m = generate_dataset(64, 16, 7, dir.path);
  REQUIRE(m.entries.size() == 128);
  int front = 0, aerial = 0;
  for (const auto& e : m.entries) (e.view == View::kFront ? front : aerial)++;
  CHECK(front == 64);
  CHECK(aerial == 64);
  CHECK(m.scene_ids().size() == 64);

  for (int id : m.scene_ids()) {
    const auto& f = m.find(id, View::kFront);
    const auto& a = m.find(id, View::kAerial);
    CHECK(f.spec == a.spec);
    CHECK(f.prompt == "front view of " + f.spec.description());
    CHECK(a.prompt == "aerial view of " + a.spec.description());

    const auto fi = render_view(f.spec, View::kFront, 16);
    const auto ai = render_view(a.spec, View::kAerial, 16);
    const auto fp = object_pixels(fi, f.spec.color);
    const auto ap = object_pixels(ai, a.spec.color);
    REQUIRE(!fp.empty());
    REQUIRE(!ap.empty());
    CHECK(std::abs(centroid_x(fp) - centroid_x(ap)) <= 1.0);
    CHECK(std::abs(centroid_x(fp) - f.spec.u * 16) <= 1.0);

    // Object against floor: some channel differs by more than 0.2.
    const auto c = rgb(f.spec.color);
    double best = 0.0;
    for (double v : c) best = std::max(best, std::abs(v - f.spec.floor));
    CHECK(best > 0.2);

    // The file on disk matches a fresh rendering up to quantization.
    const auto disk = read_image(f.path);
    REQUIRE(disk.size() == fi.size());
    for (std::size_t k = 0; k < fi.size(); ++k) CHECK(std::abs(disk.data()[k] - fi.data()[k]) <= 0.5 / 255 + 1e-12);
  }
}

TEST_CASE("dataset generation is deterministic in the seed") {
  TempDir d1("sa"), d2("sb"), d3("sc");
  const auto a = generate_dataset(8, 16, 11, d1.path);
  const auto b = generate_dataset(8, 16, 11, d2.path);
  const auto c = generate_dataset(8, 16, 12, d3.path);
  bool differs = false;
  for (std::size_t k = 0; k < a.entries.size(); ++k) {
    CHECK(a.entries[k].spec == b.entries[k].spec);
    CHECK(std::ranges::equal(read_image(a.entries[k].path).data(), read_image(b.entries[k].path).data()));
    differs |= !(a.entries[k].spec == c.entries[k].spec);
  }
  CHECK(differs);
}

TEST_CASE("manifest round trip") {
  TempDir dir("man");
  const auto m = generate_dataset(5, 16, 21, dir.path);
  const auto loaded = load_manifest(dir / "manifest.tsv");
  REQUIRE(loaded.entries.size() == m.entries.size());
  for (std::size_t k = 0; k < m.entries.size(); ++k) {
    CHECK(loaded.entries[k].scene_id == m.entries[k].scene_id);
    CHECK(loaded.entries[k].view == m.entries[k].view);
    CHECK(loaded.entries[k].prompt == m.entries[k].prompt);
    CHECK(loaded.entries[k].spec == m.entries[k].spec);
    CHECK(std::filesystem::equivalent(loaded.entries[k].path, m.entries[k].path));
  }
  CHECK(loaded.size == 16);
}
