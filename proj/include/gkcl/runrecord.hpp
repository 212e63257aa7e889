#pragma once

#include <string>
#include <vector>

#include "gkcl/cltrain.hpp"
#include "gkcl/metrics.hpp"

namespace gkcl {

struct SeedResult {
  std::uint64_t seed = 0;
  AccuracyMatrix matrix;
  std::vector<TaskResult> task_results;  // empty for arms without task logs
};

// Writes config.snapshot, metrics.csv (seed,t,A_t rows plus one F row per
// seed when T >= 2), matrix_seed<k>.csv, timings.csv and summary.csv.
// metrics.csv content is a pure function of the results, so identical runs
// produce byte-identical files.
void write_run_record(const std::string& dir, const std::string& snapshot,
                      const std::vector<SeedResult>& results);

struct MetricsRow {
  std::uint64_t seed = 0;
  std::string t;  // task index or "F"
  double value = 0.0;
};
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

double mean_of(const std::vector<double>& v);
double sample_std(const std::vector<double>& v);

// Final average accuracy (and forgetting when defined) per seed.
std::vector<double> final_accuracies(const std::vector<SeedResult>& results);
std::vector<double> forgettings(const std::vector<SeedResult>& results);

}  // namespace gkcl
