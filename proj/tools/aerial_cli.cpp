#include <cstdio>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "aerial/config.hpp"
#include "aerial/eval.hpp"
#include "aerial/homography.hpp"
#include "aerial/image.hpp"
#include "aerial/pipeline.hpp"

namespace fs = std::filesystem;
using namespace aerial;

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string workdir;
  int threads = -1;
  bool quiet = false;

  RunConfig load() const {
    RunConfig cfg;
    try {
      if (!config_file.empty()) cfg.merge_file(config_file);
      for (const auto& o : overrides) cfg.apply_override(o);
      cfg.validate();
    } catch (const ConfigError& e) {
      throw StageError("config", e.what());
    }
    if (!workdir.empty()) cfg.workdir = workdir;
    if (threads >= 0) cfg.threads = threads;
    return cfg;
  }
};

struct Input {
  int scene = -1;
  std::string image;
  std::string txt;
};

RunInput resolve_input(Pipeline& pipeline, const Input& in) {
  if (in.scene >= 0) {
    RunInput r = scene_input(pipeline.dataset(), in.scene);
    if (!in.txt.empty()) r.txt = in.txt;
    return r;
  }
  if (in.image.empty()) throw StageError("input", "either --scene or --image is required");
  if (in.txt.empty()) throw StageError("input", "--txt is required with --image");
  try {
    return RunInput{read_image(in.image), in.txt, std::nullopt, fs::path(in.image).stem().string()};
  } catch (const std::exception& e) {
    throw StageError("input", e.what());
  }
}

void print_record(const RunRecord& rec) {
  std::cout << "run directory: " << rec.dir.string() << "\n";
  for (const auto& [stage, sum] : rec.checksums) std::cout << stage << "\t" << sum << "\n";
  std::cout << "alpha\taerialness\tfidelity\tproduct\n" << std::setprecision(4);
  for (const auto& s : rec.summary)
    std::cout << s.alpha << "\t" << s.mean_aerialness << "\t" << s.mean_fidelity << "\t" << s.mean_product << "\n";
  std::cout << "best alpha: " << rec.best_alpha << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ground-to-aerial view translation with a tiny diffusion model"};
  app.require_subcommand(1);
  Common common;
  app.add_option("-c,--config", common.config_file, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("-s,--set", common.overrides, "override a config key (key=value), repeatable");
  app.add_option("-w,--workdir", common.workdir, "output root (overrides config)");
  app.add_option("-j,--threads", common.threads, "sampler threads, 0 = all cores");
  app.add_flag("-q,--quiet", common.quiet, "no progress messages");

  auto* dataset = app.add_subcommand("dataset", "render the synthetic front/aerial dataset");
  auto* train = app.add_subcommand("train-base", "train the base denoiser on the dataset");
  auto* probe = app.add_subcommand("probe", "train the viewpoint probe and report its accuracy");

  auto* warp = app.add_subcommand("warp", "write the pseudo-aerial image of a ground view");
  std::string warp_in, warp_out;
  warp->add_option("input", warp_in, "ground-view PPM/PGM")->required();
  warp->add_option("-o,--output", warp_out, "output path (default: run directory)");

  Input run_in;
  std::string variant_name = "full";
  std::vector<double> alphas;
  auto* run = app.add_subcommand("run", "warp, finetune, sample over alphas x seeds, evaluate");
  auto add_input = [&](CLI::App* cmd) {
    cmd->add_option("--scene", run_in.scene, "scene id from the dataset");
    cmd->add_option("--image", run_in.image, "ground-view image file");
    cmd->add_option("--txt", run_in.txt, "text description (default: the scene's)");
  };
  add_input(run);
  run->add_option("--variant", variant_name, "full, abl1_no_homography, abl2_linear, abl3_tgt_vicinity, manip1..manip4");
  run->add_option("--alpha", alphas, "alpha values (default: config alphas)");

  auto* ablate = app.add_subcommand("ablate", "run every variant at the ablation alpha");
  add_input(ablate);

  auto* eval = app.add_subcommand("eval", "score images for aerialness (and fidelity given a scene)");
  std::vector<std::string> eval_images;
  int eval_scene = -1;
  eval->add_option("images", eval_images, "generated images")->required();
  eval->add_option("--scene", eval_scene, "scene id whose spec scores fidelity");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig cfg = common.load();
    Pipeline pipeline(cfg, common.quiet ? nullptr : &std::cerr);

    if (dataset->parsed()) {
      const DatasetManifest m = pipeline.dataset();
      std::cout << m.entries.size() << " images, manifest "
                << (m.entries.empty() ? fs::path() : fs::path(m.entries.front().path).parent_path() / "manifest.tsv").string()
                << "\n";
    } else if (train->parsed()) {
      pipeline.train_base();
      std::cout << pipeline.base_path().string() << "\n";
    } else if (probe->parsed()) {
      const ViewpointProbe p = pipeline.probe();
      std::cout << "probe train accuracy " << p.train_accuracy << "\n";
    } else if (warp->parsed()) {
      const ImageBuffer out = [&] {
        try {
          ImageBuffer in = read_image(warp_in);
          if (in.height() != cfg.image_size || in.width() != cfg.image_size)
            in = resize_bilinear(in, cfg.image_size, cfg.image_size);
          return make_pseudo_aerial(in, 2 * cfg.image_size, cfg.fill);
        } catch (const std::exception& e) {
          throw StageError("warp", e.what());
        }
      }();
      fs::path dest = warp_out;
      if (dest.empty()) {
        fs::create_directories(pipeline.run_dir());
        dest = pipeline.run_dir() / (fs::path(warp_in).stem().string() + "_warp.ppm");
      }
      write_image(out, dest);
      std::cout << dest.string() << "\n";
    } else if (run->parsed()) {
      Variant variant;
      try {
        variant = parse_variant(variant_name);
      } catch (const std::exception& e) {
        throw StageError("config", e.what());
      }
      const RunInput input = resolve_input(pipeline, run_in);
      const RunRecord rec = alphas.empty() ? pipeline.run(input, variant) : pipeline.run(input, variant, alphas);
      print_record(rec);
    } else if (ablate->parsed()) {
      const RunInput input = resolve_input(pipeline, run_in);
      const auto records = pipeline.ablate(input);
      std::cout << "variant\taerialness\tfidelity\tproduct\n" << std::setprecision(4);
      for (const auto& r : records) {
        const AlphaSummary& s = r.summary.front();
        std::cout << to_string(r.variant) << "\t" << s.mean_aerialness << "\t" << s.mean_fidelity << "\t"
                  << s.mean_product << "\n";
      }
    } else if (eval->parsed()) {
      const ViewpointProbe p = pipeline.probe();
      std::optional<SceneSpec> spec;
      if (eval_scene >= 0) spec = pipeline.dataset().find(eval_scene, View::kAerial).spec;
      for (const auto& path : eval_images) {
        const ImageBuffer img = [&] {
          try {
            return read_image(path);
          } catch (const std::exception& e) {
            throw StageError("eval", path + ": " + e.what());
          }
        }();
        const FidelityReport f = spec ? fidelity(*spec, img) : FidelityReport{};
        std::cout << format_eval_line(path, aerialness(p, img), f) << "\n";
      }
    }
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: [internal] " << e.what() << "\n";
    return 2;
  }
  return 0;
}
