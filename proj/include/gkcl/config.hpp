#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gkcl/cltrain.hpp"
#include "gkcl/data.hpp"

namespace gkcl {

// Full description of one experiment. Construct from a profile, then layer a
// config file and CLI flags on top. The snapshot is a canonical sorted
// key=value rendering that reproduces the run exactly.
struct RunConfig {
  std::string profile = "desk";
  std::string benchmark = "permuted";  // permuted | rotated | split | synthetic
  int tasks = 5;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  int subset_train = 10000;  // 0 keeps the full base set
  int subset_test = 2000;
  int classes_per_task = 5;  // split benchmark
  bool identity_first_task = false;
  std::string data_root;  // defaults to $GKCL_DATA_ROOT
  std::string out_dir = "runs/out";
  std::vector<int> ablate_sizes = {1, 2, 5, 20};        // coreset ablation (train sizes)
  std::vector<int> ablate_infer_sizes = {1, 2, 5, 20};  // inference-size sweep
  SyntheticSpec synth;
  TrainConfig train;
};

RunConfig profile_config(const std::string& name);  // "paper" or "desk"

// key=value lines; '#' comments; unknown keys rejected by name.
void apply_config_line(RunConfig& cfg, const std::string& key, const std::string& value);
void apply_config_file(RunConfig& cfg, const std::string& path);

std::string config_snapshot(const RunConfig& cfg);

// Canonical shortest-round-trip decimal rendering used in all CSV output.
std::string format_double(double v);

}  // namespace gkcl
