#include "gkcl/runrecord.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gkcl/config.hpp"

namespace gkcl {

namespace {

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot write: " + path);
  f << content;
}

}  // namespace

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / double(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / double(v.size() - 1));
}

std::vector<double> final_accuracies(const std::vector<SeedResult>& results) {
  std::vector<double> out;
  for (const auto& r : results) out.push_back(average_accuracy(r.matrix, r.matrix.tasks()));
  return out;
}

std::vector<double> forgettings(const std::vector<SeedResult>& results) {
  std::vector<double> out;
  for (const auto& r : results)
    if (r.matrix.tasks() >= 2) out.push_back(average_forgetting(r.matrix));
  return out;
}

void write_run_record(const std::string& dir, const std::string& snapshot,
                      const std::vector<SeedResult>& results) {
  std::filesystem::create_directories(dir);
  write_file(dir + "/config.snapshot", snapshot);

  std::string metrics = "seed,t,A_t\n";
  for (const auto& r : results) {
    for (int t = 1; t <= r.matrix.tasks(); ++t)
      metrics += std::to_string(r.seed) + "," + std::to_string(t) + "," +
                 format_double(average_accuracy(r.matrix, t)) + "\n";
    if (r.matrix.tasks() >= 2)
      metrics += std::to_string(r.seed) + ",F," +
                 format_double(average_forgetting(r.matrix)) + "\n";
  }
  write_file(dir + "/metrics.csv", metrics);

  for (const auto& r : results) {
    std::string m;
    for (const auto& row : r.matrix.rows()) {
      for (std::size_t i = 0; i < row.size(); ++i) m += (i ? "," : "") + format_double(row[i]);
      m += "\n";
    }
    write_file(dir + "/matrix_seed" + std::to_string(r.seed) + ".csv", m);
  }

  bool any_timings = false;
  std::string timings = "seed,task,seconds_generative,seconds_classifier\n";
  for (const auto& r : results)
    for (const auto& tr : r.task_results) {
      any_timings = true;
      timings += std::to_string(r.seed) + "," + std::to_string(tr.task_id) + "," +
                 format_double(tr.seconds_generative) + "," +
                 format_double(tr.seconds_classifier) + "\n";
    }
  if (any_timings) write_file(dir + "/timings.csv", timings);

  const auto accs = final_accuracies(results);
  const auto fs = forgettings(results);
  std::string summary = "metric,mean,std\n";
  summary += "A_T," + format_double(mean_of(accs)) + "," + format_double(sample_std(accs)) + "\n";
  if (!fs.empty())
    summary += "F," + format_double(mean_of(fs)) + "," + format_double(sample_std(fs)) + "\n";
  write_file(dir + "/summary.csv", summary);
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open metrics file: " + path);
  std::string line;
  if (!std::getline(f, line) || line != "seed,t,A_t")
    throw ParseError("bad metrics header in " + path);
  std::vector<MetricsRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string seed, t, value;
    if (!std::getline(ss, seed, ',') || !std::getline(ss, t, ',') || !std::getline(ss, value))
      throw ParseError("bad metrics row: " + line);
    rows.push_back({std::stoull(seed), t, std::stod(value)});
  }
  return rows;
}

}  // namespace gkcl
