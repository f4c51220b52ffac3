#include "aerial/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "aerial/checkpoint.hpp"
#include "aerial/homography.hpp"
#include "aerial/rng.hpp"
#include "aerial/sampler.hpp"

namespace aerial {

namespace fs = std::filesystem;

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::kFull: return "full";
    case Variant::kNoHomography: return "abl1_no_homography";
    case Variant::kLinear: return "abl2_linear";
    case Variant::kTargetVicinity: return "abl3_tgt_vicinity";
    case Variant::kManip1: return "manip1";
    case Variant::kManip2: return "manip2";
    case Variant::kManip3: return "manip3";
    case Variant::kManip4: return "manip4";
  }
  throw std::invalid_argument("invalid variant");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> kAll = {
      Variant::kFull,   Variant::kNoHomography, Variant::kLinear, Variant::kTargetVicinity,
      Variant::kManip1, Variant::kManip2,       Variant::kManip3, Variant::kManip4,
  };
  return kAll;
}

Variant parse_variant(const std::string& name) {
  for (Variant v : all_variants())
    if (to_string(v) == name) return v;
  throw std::invalid_argument("unknown variant '" + name + "'");
}

VariantSettings variant_settings(Variant variant, Strategy configured) {
  VariantSettings s;
  s.strategy = configured;
  switch (variant) {
    case Variant::kFull: break;
    case Variant::kNoHomography: s.use_homography = false; break;
    case Variant::kLinear: s.strategy = Strategy::kLinearOnly; break;
    case Variant::kTargetVicinity: s.init_from_target = true; break;
    case Variant::kManip1: s.strategy = Strategy::kAlternatingStartE2; break;
    case Variant::kManip2: s.strategy = Strategy::kE1Only; break;
    case Variant::kManip3: s.strategy = Strategy::kFirstHalfE1; break;
    case Variant::kManip4: s.strategy = Strategy::kFirstHalfE2; break;
  }
  return s;
}

RunInput scene_input(const DatasetManifest& manifest, int scene_id) {
  const ManifestEntry& front = manifest.find(scene_id, View::kFront);
  std::ostringstream label;
  label << "scene_" << std::setw(3) << std::setfill('0') << scene_id;
  return RunInput{read_image(front.path), front.spec.description(), front.spec, label.str()};
}

namespace {

std::string hex(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

std::string alpha_token(double alpha) {
  std::ostringstream out;
  out << alpha;
  return out.str();
}

std::uint64_t image_checksum(const ImageBuffer& image) { return fnv1a64(encode_pnm(image)); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << text;
}

}  // namespace

const AlphaSummary& RunRecord::at_alpha(double alpha) const {
  for (const auto& s : summary)
    if (s.alpha == alpha) return s;
  throw std::out_of_range("alpha " + alpha_token(alpha) + " not in run summary");
}

std::string RunRecord::to_json() const {
  nlohmann::ordered_json j;
  j["label"] = label;
  j["variant"] = to_string(variant);
  j["strategy"] = to_string(strategy);
  j["config"] = config;
  nlohmann::ordered_json sums = nlohmann::ordered_json::array();
  for (const auto& [stage, sum] : checksums) sums.push_back({{"stage", stage}, {"checksum", sum}});
  j["checksums"] = sums;
  nlohmann::ordered_json cells_json = nlohmann::ordered_json::array();
  for (const auto& c : cells) {
    nlohmann::ordered_json cj;
    cj["alpha"] = c.alpha;
    cj["seed"] = c.seed;
    cj["image"] = c.image.generic_string();
    cj["aerialness"] = c.aerialness;
    if (c.fidelity) {
      cj["color_match"] = c.fidelity->color_match;
      cj["centroid_error"] = c.fidelity->centroid_error;
      cj["fidelity"] = c.fidelity->score;
      cj["no_object"] = c.fidelity->no_object;
    }
    cells_json.push_back(cj);
  }
  j["cells"] = cells_json;
  nlohmann::ordered_json summary_json = nlohmann::ordered_json::array();
  for (const auto& s : summary)
    summary_json.push_back({{"alpha", s.alpha},
                            {"mean_aerialness", s.mean_aerialness},
                            {"mean_fidelity", s.mean_fidelity},
                            {"mean_product", s.mean_product}});
  j["summary"] = summary_json;
  j["best_alpha"] = best_alpha;
  return j.dump(2) + "\n";
}

Pipeline::Pipeline(RunConfig config, std::ostream* log) : config_(std::move(config)), log_(log) {
  config_.validate();
}

void Pipeline::log(const std::string& message) const {
  if (log_) *log_ << message << std::endl;
}

fs::path Pipeline::cache_dir() const { return config_.workdir / "cache"; }
fs::path Pipeline::run_dir() const { return config_.workdir / config_.hash(); }

std::string Pipeline::dataset_key() const {
  std::ostringstream key;
  key << "dataset|" << config_.n_scenes << '|' << config_.image_size << '|' << config_.seed;
  return hex(fnv1a64(key.str()));
}

std::string Pipeline::base_key() const {
  const auto snap = config_.snapshot();
  std::string key = "base|" + dataset_key();
  for (const char* k : {"embed_dim", "embed_hash_seed", "schedule_steps", "beta_start", "beta_end",
                        "schedule_kind", "time_dim", "time_period", "hidden", "train_steps",
                        "train_lr", "train_batch", "cond_dropout", "seed"})
    key += std::string("|") + k + "=" + snap.at(k);
  return hex(fnv1a64(key));
}

PromptEmbedder Pipeline::embedder() const {
  return PromptEmbedder(config_.embed_dim, config_.embed_hash_seed);
}

DatasetManifest Pipeline::dataset() {
  const fs::path dir = cache_dir() / ("dataset-" + dataset_key());
  const fs::path manifest = dir / "manifest.tsv";
  try {
    if (fs::exists(manifest)) return load_manifest(manifest);
    log("dataset: rendering " + std::to_string(config_.n_scenes) + " scenes into " + dir.string());
    return generate_dataset(config_.n_scenes, config_.image_size, derive_seed(config_.seed, "dataset"), dir);
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("dataset", e.what());
  }
}

fs::path Pipeline::base_path() const { return cache_dir() / ("base-" + base_key() + ".adkf"); }

DenoiserParams Pipeline::load_base() const {
  const fs::path path = base_path();
  if (!fs::exists(path))
    throw StageError("base", "missing base checkpoint " + path.string() + " (run train-base first)");
  try {
    return load_denoiser(path);
  } catch (const std::exception& e) {
    throw StageError("base", e.what());
  }
}

DenoiserParams Pipeline::train_base() {
  if (fs::exists(base_path())) return load_base();
  const DatasetManifest manifest = dataset();
  try {
    const PromptEmbedder emb = embedder();
    std::vector<TrainingExample> examples;
    for (const auto& e : manifest.entries) {
      const ImageBuffer img = read_image(e.path);
      examples.push_back({Vector(img.data().begin(), img.data().end()), emb.embed(e.prompt)});
    }
    BaseTrainOptions opts;
    opts.steps = config_.train_steps;
    opts.lr = config_.train_lr;
    opts.batch = config_.train_batch;
    opts.cond_dropout = config_.cond_dropout;
    opts.seed = derive_seed(config_.seed, "train-base");
    log("train-base: " + std::to_string(opts.steps) + " steps on " + std::to_string(examples.size()) +
        " images");
    auto [params, report] = train_base_model(examples, config_.arch(), config_.schedule(), opts);
    fs::create_directories(cache_dir());
    const fs::path path = base_path();
    write_report(report, fs::path(path).replace_extension(".report.tsv"));
    save_denoiser(params, path);
    log("train-base: final loss " + std::to_string(report.final_loss) + ", checkpoint " + path.string());
    return params;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("train-base", e.what());
  }
}

ViewpointProbe Pipeline::probe() {
  const fs::path path = cache_dir() / ("probe-" + dataset_key() + ".adkp");
  ViewpointProbe p;
  try {
    if (fs::exists(path)) {
      p = load_probe(path);
    } else {
      const DatasetManifest manifest = dataset();
      p = train_probe(manifest, derive_seed(config_.seed, "probe"));
      fs::create_directories(cache_dir());
      save_probe(p, path);
    }
    p.require_accepted();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError("probe", e.what());
  }
  return p;
}

Pipeline::Stage2 Pipeline::stage2(const DenoiserParams& base, const ImageBuffer& target,
                                  const ConditioningEmbedding& e_init) {
  const auto snap = config_.snapshot();
  std::string key_text = "stage2|" + hex(checksum(base)) + "|" + hex(image_checksum(target)) + "|" +
                         hex(checksum(e_init));
  for (const char* k : {"embed_steps", "embed_lr", "finetune_steps", "finetune_lr", "seed"})
    key_text += std::string("|") + k + "=" + snap.at(k);
  const fs::path dir = cache_dir() / ("stage2-" + hex(fnv1a64(key_text)));
  const fs::path e_path = dir / "e_opt.adke";
  const fs::path model_path = dir / "finetuned.adkf";

  Stage2 out;
  if (fs::exists(e_path) && fs::exists(model_path)) {
    out.e_opt = load_embedding(e_path);
    out.tuned = load_denoiser(model_path);
    return out;
  }

  StageOptions embed_opts{config_.embed_steps, config_.embed_lr, derive_seed(config_.seed, "embed")};
  try {
    log("stage2: optimizing embedding for " + std::to_string(embed_opts.steps) + " steps");
    std::tie(out.e_opt, out.embed_report) =
        optimize_embedding(base, e_init, target, config_.schedule(), embed_opts);
  } catch (const std::exception& e) {
    throw StageError("optimize-embedding", e.what());
  }
  StageOptions tune_opts{config_.finetune_steps, config_.finetune_lr, derive_seed(config_.seed, "finetune")};
  try {
    log("stage2: finetuning denoiser for " + std::to_string(tune_opts.steps) + " steps");
    std::tie(out.tuned, out.finetune_report) =
        finetune_model(base, out.e_opt, target, config_.schedule(), tune_opts);
  } catch (const std::exception& e) {
    throw StageError("finetune", e.what());
  }
  fs::create_directories(dir);
  save_embedding(out.e_opt, e_path);
  save_denoiser(out.tuned, model_path);
  write_report(out.embed_report, dir / "embed_report.tsv");
  write_report(out.finetune_report, dir / "finetune_report.tsv");
  return out;
}

RunRecord Pipeline::run(const RunInput& input, Variant variant) {
  return run(input, variant, config_.alphas);
}

RunRecord Pipeline::run(const RunInput& input, Variant variant, const std::vector<double>& alphas) {
  const VariantSettings settings = variant_settings(variant, config_.strategy);
  const DenoiserParams base = load_base();
  const ViewpointProbe viewpoint = probe();

  RunRecord record;
  record.label = input.label.empty() ? "input" : input.label;
  record.variant = variant;
  record.strategy = settings.strategy;
  record.config = config_.snapshot();
  record.dir = run_dir() / record.label / to_string(variant);
  fs::create_directories(record.dir);
  record.checksums.emplace_back("base", hex(checksum(base)));

  // pseudo-aerial target
  ImageBuffer target = input.ground;
  try {
    if (input.ground.height() != config_.image_size || input.ground.width() != config_.image_size)
      target = resize_bilinear(input.ground, config_.image_size, config_.image_size);
    if (input.ground.channels() != 3) throw std::invalid_argument("ground image must be RGB");
    if (settings.use_homography) target = make_pseudo_aerial(target, config_.image_size, config_.fill);
  } catch (const std::exception& e) {
    throw StageError("warp", e.what());
  }
  write_image(target, record.dir / "target.ppm");
  record.checksums.emplace_back("target", hex(image_checksum(target)));

  // prompts, embedding optimization, finetuning
  const PromptEmbedder emb = embedder();
  ViewPrompts prompts;
  ConditioningEmbedding e_src, e_tgt;
  try {
    prompts = compose_view_prompts(input.txt);
    e_src = emb.embed(prompts.source);
    e_tgt = emb.embed(prompts.target);
  } catch (const std::exception& e) {
    throw StageError("prompt", e.what());
  }
  const Stage2 tuned = stage2(base, target, settings.init_from_target ? e_tgt : e_src);
  save_embedding(tuned.e_opt, record.dir / "e_opt.adke");
  record.checksums.emplace_back("e_opt", hex(checksum(tuned.e_opt)));
  record.checksums.emplace_back("finetuned", hex(checksum(tuned.tuned)));

  // sampling grid
  SamplerConfig scfg;
  scfg.steps = config_.sample_steps;
  scfg.guidance_scale = config_.guidance_scale;
  scfg.eta = config_.eta;
  scfg.height = scfg.width = config_.image_size;
  scfg.channels = 3;
  std::vector<GridCell> grid;
  try {
    grid = sample_grid(tuned.tuned, config_.schedule(), tuned.e_opt, e_tgt, alphas, settings.strategy,
                       scfg, config_.seeds, config_.threads);
  } catch (const std::exception& e) {
    throw StageError("sample", e.what());
  }

  std::string eval_text;
  for (auto& cell : grid) {
    CellResult r;
    r.alpha = cell.alpha;
    r.seed = cell.seed;
    r.image = "sample_a" + alpha_token(cell.alpha) + "_s" + std::to_string(cell.seed) + ".ppm";
    write_image(cell.image, record.dir / r.image);
    r.aerialness = aerialness(viewpoint, cell.image);
    if (input.spec) r.fidelity = fidelity(*input.spec, cell.image);
    eval_text += format_eval_line(r.image.generic_string(), r.aerialness,
                                  r.fidelity.value_or(FidelityReport{})) + "\n";
    record.cells.push_back(std::move(r));
  }
  write_text(record.dir / "eval.tsv", eval_text);

  double best = -1.0;
  for (double alpha : alphas) {
    AlphaSummary s{alpha, 0, 0, 0};
    int n = 0;
    for (const auto& c : record.cells) {
      if (c.alpha != alpha) continue;
      s.mean_aerialness += c.aerialness;
      s.mean_fidelity += c.fidelity_score();
      s.mean_product += c.aerialness * c.fidelity_score();
      ++n;
    }
    s.mean_aerialness /= n;
    s.mean_fidelity /= n;
    s.mean_product /= n;
    const double objective = input.spec ? s.mean_product : s.mean_aerialness;
    if (objective > best) best = objective, record.best_alpha = alpha;
    record.summary.push_back(s);
  }

  // A previous record in the same directory must agree stage by stage.
  const fs::path record_path = record.dir / "record.json";
  if (fs::exists(record_path)) {
    std::ifstream in(record_path);
    const auto previous = nlohmann::json::parse(in, nullptr, false);
    if (!previous.is_discarded() && previous.contains("checksums")) {
      for (const auto& entry : previous["checksums"]) {
        for (const auto& [stage, sum] : record.checksums) {
          if (entry.value("stage", "") == stage && entry.value("checksum", "") != sum)
            throw StageError("record", "stage '" + stage + "' checksum changed from " +
                                           entry.value("checksum", "") + " to " + sum);
        }
      }
    }
  }
  write_text(record_path, record.to_json());
  return record;
}

std::vector<RunRecord> Pipeline::ablate(const RunInput& input) {
  std::vector<RunRecord> records;
  std::ostringstream rows, summary;
  rows << std::setprecision(6);
  summary << std::setprecision(6);
  for (Variant v : all_variants()) {
    log("ablate: " + to_string(v));
    RunRecord rec = run(input, v, {config_.ablation_alpha});
    for (const auto& c : rec.cells)
      rows << to_string(v) << '\t' << c.seed << '\t' << c.aerialness << '\t' << c.fidelity_score() << '\n';
    const AlphaSummary& s = rec.summary.front();
    summary << to_string(v) << '\t' << s.mean_aerialness << '\t' << s.mean_fidelity << '\t'
            << s.mean_product << '\n';
    records.push_back(std::move(rec));
  }
  const fs::path dir = run_dir() / (input.label.empty() ? "input" : input.label);
  write_text(dir / "ablation.tsv", rows.str());
  write_text(dir / "ablation_summary.tsv", summary.str());
  return records;
}

}  // namespace aerial
