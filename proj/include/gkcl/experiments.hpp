#pragma once

#include <string>

#include "gkcl/config.hpp"
#include "gkcl/runrecord.hpp"

namespace gkcl {

// Builds the task stream one run sees: the configured benchmark with the
// configured per-task subsampling, all derived from (config, seed).
TaskStream build_stream(const RunConfig& cfg, std::uint64_t seed);

// Copies stream geometry (input width, label-space size) into the VAE config.
void fit_config_to_stream(RunConfig& cfg, const TaskStream& stream);

SeedResult run_method_seed(const RunConfig& cfg, std::uint64_t seed);

void cmd_run(RunConfig cfg);
void cmd_baseline(RunConfig cfg);
void cmd_ablate_contrastive(RunConfig cfg);
void cmd_ablate_coreset(RunConfig cfg);
void cmd_ablate_kernel(RunConfig cfg);
void cmd_dump_embeddings(RunConfig cfg);
void cmd_report(const std::string& dir);
void cmd_make_dataset(const std::string& dir, int n_train, int n_test, std::uint64_t seed);

}  // namespace gkcl
