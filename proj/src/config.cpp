#include "aerial/config.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

#include "aerial/rng.hpp"

namespace aerial {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream in(value);
  T out{};
  in >> out;
  if (in.fail() || !in.eof()) throw ConfigError("config key '" + key + "': cannot parse '" + value + "'");
  return out;
}

std::string format_double(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

template <typename T, typename F>
std::string join(const std::vector<T>& values, F fmt) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + fmt(values[i]);
  return out;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  auto as_int = [&] { return parse_number<int>(key, value); };
  auto as_u64 = [&] { return parse_number<std::uint64_t>(key, value); };
  auto as_double = [&] { return parse_number<double>(key, value); };

  if (key == "image_size") image_size = as_int();
  else if (key == "n_scenes") n_scenes = as_int();
  else if (key == "embed_dim") embed_dim = as_int();
  else if (key == "embed_hash_seed") embed_hash_seed = as_u64();
  else if (key == "schedule_steps") schedule_steps = as_int();
  else if (key == "beta_start") beta_start = as_double();
  else if (key == "beta_end") beta_end = as_double();
  else if (key == "schedule_kind") {
    try {
      schedule_kind = parse_schedule_kind(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "time_dim") time_dim = as_int();
  else if (key == "time_period") time_period = as_double();
  else if (key == "hidden") {
    hidden.clear();
    for (const auto& item : split_list(value)) hidden.push_back(parse_number<int>(key, item));
  } else if (key == "skip_output") {
    if (value == "true" || value == "1") skip_output = true;
    else if (value == "false" || value == "0") skip_output = false;
    else throw ConfigError("config key 'skip_output': cannot parse '" + value + "'");
  } else if (key == "train_steps") train_steps = as_int();
  else if (key == "train_lr") train_lr = as_double();
  else if (key == "train_batch") train_batch = as_int();
  else if (key == "cond_dropout") cond_dropout = as_double();
  else if (key == "embed_steps") embed_steps = as_int();
  else if (key == "embed_lr") embed_lr = as_double();
  else if (key == "finetune_steps") finetune_steps = as_int();
  else if (key == "finetune_lr") finetune_lr = as_double();
  else if (key == "fill") fill = as_double();
  else if (key == "sample_steps") sample_steps = as_int();
  else if (key == "guidance_scale") guidance_scale = as_double();
  else if (key == "eta") eta = as_double();
  else if (key == "alphas") {
    alphas.clear();
    for (const auto& item : split_list(value)) alphas.push_back(parse_number<double>(key, item));
  } else if (key == "seeds") {
    seeds.clear();
    for (const auto& item : split_list(value)) seeds.push_back(parse_number<std::uint64_t>(key, item));
  } else if (key == "strategy") {
    try {
      strategy = parse_strategy(value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "ablation_alpha") ablation_alpha = as_double();
  else if (key == "seed") seed = as_u64();
  else if (key == "workdir") workdir = value;
  else if (key == "threads") threads = as_int();
  else throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::merge_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

void RunConfig::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  merge_text(ss.str());
}

void RunConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError("invalid config: " + what);
  };
  require(image_size >= 8, "image_size must be >= 8");
  require(n_scenes >= 1, "n_scenes must be >= 1");
  require(embed_dim >= 1, "embed_dim must be >= 1");
  require(schedule_steps >= 1, "schedule_steps must be >= 1");
  require(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0,
          "need 0 < beta_start <= beta_end < 1");
  require(time_dim >= 2 && time_dim % 2 == 0, "time_dim must be even and >= 2");
  require(time_period > 1.0, "time_period must exceed 1");
  require(!hidden.empty(), "hidden must list at least one width");
  for (int w : hidden) require(w >= 1, "hidden widths must be >= 1");
  require(train_steps >= 1 && embed_steps >= 1 && finetune_steps >= 1 && sample_steps >= 1,
          "all step counts must be >= 1");
  require(train_lr > 0.0 && embed_lr > 0.0 && finetune_lr > 0.0, "all learning rates must be > 0");
  require(train_batch >= 1, "train_batch must be >= 1");
  require(cond_dropout >= 0.0 && cond_dropout <= 1.0, "cond_dropout must lie in [0, 1]");
  require(fill >= 0.0 && fill <= 1.0, "fill must lie in [0, 1]");
  require(schedule_steps % sample_steps == 0, "sample_steps must divide schedule_steps");
  require(guidance_scale >= 0.0, "guidance_scale must be >= 0");
  require(eta >= 0.0 && eta <= 1.0, "eta must lie in [0, 1]");
  require(!alphas.empty(), "alphas must not be empty");
  for (double a : alphas) require(a >= 0.0 && a <= 1.0, "alpha values must lie in [0, 1]");
  require(ablation_alpha >= 0.0 && ablation_alpha <= 1.0, "ablation_alpha must lie in [0, 1]");
  require(!seeds.empty(), "seeds must not be empty");
}

std::map<std::string, std::string> RunConfig::snapshot() const {
  auto u64 = [](std::uint64_t v) { return std::to_string(v); };
  auto i32 = [](int v) { return std::to_string(v); };
  return {
      {"image_size", i32(image_size)},
      {"n_scenes", i32(n_scenes)},
      {"embed_dim", i32(embed_dim)},
      {"embed_hash_seed", u64(embed_hash_seed)},
      {"schedule_steps", i32(schedule_steps)},
      {"beta_start", format_double(beta_start)},
      {"beta_end", format_double(beta_end)},
      {"schedule_kind", to_string(schedule_kind)},
      {"time_dim", i32(time_dim)},
      {"time_period", format_double(time_period)},
      {"hidden", join(hidden, i32)},
      {"skip_output", skip_output ? "true" : "false"},
      {"train_steps", i32(train_steps)},
      {"train_lr", format_double(train_lr)},
      {"train_batch", i32(train_batch)},
      {"cond_dropout", format_double(cond_dropout)},
      {"embed_steps", i32(embed_steps)},
      {"embed_lr", format_double(embed_lr)},
      {"finetune_steps", i32(finetune_steps)},
      {"finetune_lr", format_double(finetune_lr)},
      {"fill", format_double(fill)},
      {"sample_steps", i32(sample_steps)},
      {"guidance_scale", format_double(guidance_scale)},
      {"eta", format_double(eta)},
      {"alphas", join(alphas, format_double)},
      {"seeds", join(seeds, u64)},
      {"strategy", to_string(strategy)},
      {"ablation_alpha", format_double(ablation_alpha)},
      {"seed", u64(seed)},
  };
}

std::string RunConfig::canonical_text() const {
  std::string out;
  for (const auto& [k, v] : snapshot()) out += k + " = " + v + "\n";
  return out;
}

std::string RunConfig::hash() const {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(canonical_text());
  return out.str();
}

DenoiserArch RunConfig::arch() const {
  DenoiserArch a;
  a.x_dim = x_dim();
  a.cond_dim = embed_dim;
  a.time_dim = time_dim;
  a.time_period = time_period;
  a.hidden = hidden;
  if (skip_output) a.skip_alpha_bar = schedule().alpha_bar;
  return a;
}

NoiseSchedule RunConfig::schedule() const {
  return make_schedule(schedule_steps, beta_start, beta_end, schedule_kind);
}

}  // namespace aerial
