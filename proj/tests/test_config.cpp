#include <doctest.h>

#include <fstream>

#include "aerial/config.hpp"
#include "support.hpp"

using namespace aerial;

TEST_CASE("defaults describe the 64 scene toy setup") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.n_scenes == 64);
  CHECK(c.image_size == 16);
  CHECK(c.x_dim() == 768);
  CHECK(c.train_steps == 2000);
  CHECK(c.embed_steps == 500);
  CHECK(c.finetune_steps == 1000);
  CHECK(c.strategy == Strategy::kAlternating);
  CHECK(c.arch().x_dim == 768);
  CHECK(c.arch().cond_dim == c.embed_dim);
  CHECK(c.schedule().steps == 50);
}

TEST_CASE("text form parses lists, enums and comments") {
  RunConfig c;
  c.merge_text(
      "# held setup\n"
      "n_scenes = 8\n"
      "hidden = 64, 32\n"
      "\n"
      "alphas = 0.1,0.9   # two only\n"
      "seeds = 5\n"
      "strategy = first_half_e1\n"
      "schedule_kind = linear\n");
  CHECK(c.n_scenes == 8);
  CHECK(c.hidden == std::vector<int>{64, 32});
  CHECK(c.alphas == std::vector<double>{0.1, 0.9});
  CHECK(c.seeds == std::vector<std::uint64_t>{5});
  CHECK(c.strategy == Strategy::kFirstHalfE1);
  CHECK(c.schedule_kind == ScheduleKind::kLinear);
}

TEST_CASE("overrides and files") {
  TempDir dir("cfg");
  {
    std::ofstream out(dir / "a.cfg");
    out << "train_steps = 10\nguidance_scale = 2.5\n";
  }
  RunConfig c;
  c.merge_file(dir / "a.cfg");
  c.apply_override("train_steps=20");
  CHECK(c.train_steps == 20);
  CHECK(c.guidance_scale == 2.5);
  CHECK_THROWS_AS(c.merge_file(dir / "missing.cfg"), ConfigError);
  CHECK_THROWS_AS(c.apply_override("train_steps"), ConfigError);
  CHECK_THROWS_AS(c.apply_override("bogus=1"), ConfigError);
  CHECK_THROWS_AS(c.apply_override("train_steps=ten"), ConfigError);
  CHECK_THROWS_AS(c.apply_override("train_steps=10x"), ConfigError);
  CHECK_THROWS_AS(c.apply_override("strategy=sideways"), ConfigError);
  CHECK_THROWS_AS(c.merge_text("no equals sign\n"), ConfigError);
}

TEST_CASE("validation rejects bad values") {
  auto bad = [](const std::string& kv) {
    RunConfig c;
    c.apply_override(kv);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  };
  bad("n_scenes=0");
  bad("image_size=4");
  bad("train_steps=0");
  bad("train_lr=0");
  bad("cond_dropout=1.5");
  bad("alphas=0.5,1.2");
  bad("sample_steps=7");
  bad("fill=-0.1");
  bad("time_dim=15");
  bad("beta_start=0.5");
  bad("hidden=0");
}

TEST_CASE("config hash tracks output-affecting keys only") {
  RunConfig a, b;
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
  b.workdir = "/elsewhere";
  b.threads = 7;
  CHECK(a.hash() == b.hash());
  b.apply_override("seed=1");
  CHECK(a.hash() != b.hash());
  RunConfig c;
  c.apply_override("alphas=0.1,0.3,0.5,0.7,0.9");
  CHECK(a.hash() == c.hash());

  RunConfig d;
  d.merge_text(a.canonical_text());
  CHECK(d.canonical_text() == a.canonical_text());
  CHECK(a.snapshot().count("workdir") == 0);
  CHECK(a.snapshot().count("threads") == 0);
}
