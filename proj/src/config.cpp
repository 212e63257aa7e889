#include "gkcl/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace gkcl {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

RunConfig profile_config(const std::string& name) {
  RunConfig cfg;
  cfg.profile = name;
  if (name == "paper") {
    cfg.tasks = 20;
    cfg.seeds = {1, 2, 3, 4, 5};
    cfg.subset_train = 0;
    cfg.subset_test = 0;
    cfg.train.vae.hidden1 = 2000;
    cfg.train.vae.hidden2 = 2000;
    cfg.train.vae.latent_dim = 100;
    cfg.train.vae_iters = 2000;
    cfg.train.vae_batch = 512;
    cfg.train.replay_size = 512;
    cfg.train.knet_batch = 10;
    cfg.train.lambda_con = 1.0;
  } else if (name == "desk") {
    cfg.tasks = 5;
    cfg.seeds = {1, 2, 3};
    cfg.subset_train = 10000;
    cfg.subset_test = 2000;
    cfg.train.vae.hidden1 = 400;
    cfg.train.vae.hidden2 = 400;
    cfg.train.vae.latent_dim = 64;
    cfg.train.vae_iters = 500;
    cfg.train.vae_batch = 128;
    cfg.train.replay_size = 128;
    cfg.train.knet_batch = 50;
    cfg.train.lambda_con = 0.05;
  } else {
    throw ConfigError("unknown profile: " + name);
  }
  return cfg;
}

namespace {

int parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const int r = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad integer value '" + v + "'");
  }
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': bad real value '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': bad boolean value '" + v + "'");
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& key, const std::string& v, F item) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) out.push_back(item(key, tok));
  if (out.empty()) throw ConfigError("config key '" + key + "': empty list");
  return out;
}

std::string join_u64(const std::vector<std::uint64_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string join_int(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string transform_name(SyntheticSpec::Transform t) {
  switch (t) {
    case SyntheticSpec::Transform::none: return "none";
    case SyntheticSpec::Transform::rotate: return "rotate";
    case SyntheticSpec::Transform::conflict: return "conflict";
  }
  return "?";
}

}  // namespace

void apply_config_line(RunConfig& c, const std::string& key, const std::string& v) {
  TrainConfig& t = c.train;
  if (key == "benchmark") {
    if (v != "permuted" && v != "rotated" && v != "split" && v != "synthetic")
      throw ConfigError("config key 'benchmark': unknown benchmark '" + v + "'");
    c.benchmark = v;
  } else if (key == "tasks") c.tasks = parse_int(key, v);
  else if (key == "seeds")
    c.seeds = parse_list<std::uint64_t>(key, v, [](const std::string& k, const std::string& s) {
      return std::uint64_t(parse_int(k, s));
    });
  else if (key == "subset_train") c.subset_train = parse_int(key, v);
  else if (key == "subset_test") c.subset_test = parse_int(key, v);
  else if (key == "classes_per_task") c.classes_per_task = parse_int(key, v);
  else if (key == "identity_first_task") c.identity_first_task = parse_bool(key, v);
  else if (key == "data_root") c.data_root = v;
  else if (key == "out_dir") c.out_dir = v;
  else if (key == "ablate_sizes")
    c.ablate_sizes = parse_list<int>(key, v, parse_int);
  else if (key == "ablate_infer_sizes")
    c.ablate_infer_sizes = parse_list<int>(key, v, parse_int);
  else if (key == "hidden1") t.vae.hidden1 = parse_int(key, v);
  else if (key == "hidden2") t.vae.hidden2 = parse_int(key, v);
  else if (key == "latent_dim") t.vae.latent_dim = parse_int(key, v);
  else if (key == "gate_fraction") t.vae.gate_active_fraction = parse_double(key, v);
  else if (key == "binary_replay") t.vae.binary_replay_pixels = parse_bool(key, v);
  else if (key == "vae_lr") t.vae_lr = parse_double(key, v);
  else if (key == "vae_batch") t.vae_batch = parse_int(key, v);
  else if (key == "replay_size") t.replay_size = parse_int(key, v);
  else if (key == "vae_iters") t.vae_iters = parse_int(key, v);
  else if (key == "lambda_con") t.lambda_con = parse_double(key, v);
  else if (key == "temperature") t.temperature = parse_double(key, v);
  else if (key == "proj_dim") t.proj_dim = parse_int(key, v);
  else if (key == "coreset_train") t.coreset_train = parse_int(key, v);
  else if (key == "coreset_infer") t.coreset_infer = parse_int(key, v);
  else if (key == "uniform_coreset") t.uniform_coreset = parse_bool(key, v);
  else if (key == "use_kernel_network") t.use_kernel_network = parse_bool(key, v);
  else if (key == "knet_width") t.knet_width = parse_int(key, v);
  else if (key == "knet_lr") t.knet_lr = parse_double(key, v);
  else if (key == "knet_lr_decay") t.knet_lr_decay = parse_double(key, v);
  else if (key == "knet_momentum") t.knet_momentum = parse_double(key, v);
  else if (key == "knet_dropout") t.knet_dropout = parse_double(key, v);
  else if (key == "knet_batch") t.knet_batch = parse_int(key, v);
  else if (key == "kernel") t.kernel.kind = kernel_kind_from_string(v);
  else if (key == "poly_degree") t.kernel.degree = parse_int(key, v);
  else if (key == "poly_offset") t.kernel.offset = parse_double(key, v);
  else if (key == "rbf_bandwidth") t.kernel.bandwidth = parse_double(key, v);
  else if (key == "ridge_lambda") t.ridge.lambda = parse_double(key, v);
  else if (key == "ridge_jitter") t.ridge.jitter_allowed = parse_bool(key, v);
  else if (key == "baseline_lr") t.baseline_lr = parse_double(key, v);
  else if (key == "baseline_momentum") t.baseline_momentum = parse_double(key, v);
  else if (key == "synth_dim") c.synth.dim = parse_int(key, v);
  else if (key == "synth_classes") c.synth.classes = parse_int(key, v);
  else if (key == "synth_train_per_class") c.synth.train_per_class = parse_int(key, v);
  else if (key == "synth_test_per_class") c.synth.test_per_class = parse_int(key, v);
  else if (key == "synth_separation") c.synth.separation = parse_double(key, v);
  else if (key == "synth_sigma") c.synth.sigma = parse_double(key, v);
  else if (key == "synth_transform") {
    if (v == "none") c.synth.transform = SyntheticSpec::Transform::none;
    else if (v == "rotate") c.synth.transform = SyntheticSpec::Transform::rotate;
    else if (v == "conflict") c.synth.transform = SyntheticSpec::Transform::conflict;
    else throw ConfigError("config key 'synth_transform': unknown value '" + v + "'");
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
    apply_config_line(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

std::string config_snapshot(const RunConfig& c) {
  const TrainConfig& t = c.train;
  std::map<std::string, std::string> kv;
  kv["profile"] = c.profile;
  kv["benchmark"] = c.benchmark;
  kv["tasks"] = std::to_string(c.tasks);
  kv["seeds"] = join_u64(c.seeds);
  kv["subset_train"] = std::to_string(c.subset_train);
  kv["subset_test"] = std::to_string(c.subset_test);
  kv["classes_per_task"] = std::to_string(c.classes_per_task);
  kv["identity_first_task"] = c.identity_first_task ? "true" : "false";
  kv["data_root"] = c.data_root;
  kv["out_dir"] = c.out_dir;
  kv["ablate_sizes"] = join_int(c.ablate_sizes);
  kv["ablate_infer_sizes"] = join_int(c.ablate_infer_sizes);
  kv["hidden1"] = std::to_string(t.vae.hidden1);
  kv["hidden2"] = std::to_string(t.vae.hidden2);
  kv["latent_dim"] = std::to_string(t.vae.latent_dim);
  kv["gate_fraction"] = format_double(t.vae.gate_active_fraction);
  kv["binary_replay"] = t.vae.binary_replay_pixels ? "true" : "false";
  kv["vae_lr"] = format_double(t.vae_lr);
  kv["vae_batch"] = std::to_string(t.vae_batch);
  kv["replay_size"] = std::to_string(t.replay_size);
  kv["vae_iters"] = std::to_string(t.vae_iters);
  kv["lambda_con"] = format_double(t.lambda_con);
  kv["temperature"] = format_double(t.temperature);
  kv["proj_dim"] = std::to_string(t.proj_dim);
  kv["coreset_train"] = std::to_string(t.coreset_train);
  kv["coreset_infer"] = std::to_string(t.coreset_infer);
  kv["uniform_coreset"] = t.uniform_coreset ? "true" : "false";
  kv["use_kernel_network"] = t.use_kernel_network ? "true" : "false";
  kv["knet_width"] = std::to_string(t.knet_width);
  kv["knet_lr"] = format_double(t.knet_lr);
  kv["knet_lr_decay"] = format_double(t.knet_lr_decay);
  kv["knet_momentum"] = format_double(t.knet_momentum);
  kv["knet_dropout"] = format_double(t.knet_dropout);
  kv["knet_batch"] = std::to_string(t.knet_batch);
  kv["kernel"] = to_string(t.kernel.kind);
  kv["poly_degree"] = std::to_string(t.kernel.degree);
  kv["poly_offset"] = format_double(t.kernel.offset);
  kv["rbf_bandwidth"] = format_double(t.kernel.bandwidth);
  kv["ridge_lambda"] = format_double(t.ridge.lambda);
  kv["ridge_jitter"] = t.ridge.jitter_allowed ? "true" : "false";
  kv["baseline_lr"] = format_double(t.baseline_lr);
  kv["baseline_momentum"] = format_double(t.baseline_momentum);
  kv["synth_dim"] = std::to_string(c.synth.dim);
  kv["synth_classes"] = std::to_string(c.synth.classes);
  kv["synth_train_per_class"] = std::to_string(c.synth.train_per_class);
  kv["synth_test_per_class"] = std::to_string(c.synth.test_per_class);
  kv["synth_separation"] = format_double(c.synth.separation);
  kv["synth_sigma"] = format_double(c.synth.sigma);
  kv["synth_transform"] = transform_name(c.synth.transform);

  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

}  // namespace gkcl
