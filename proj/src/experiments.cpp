#include "gkcl/experiments.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace gkcl {

namespace {

constexpr std::uint64_t kSubsampleLabel = 0xDA7A;

std::string find_idx_file(const std::string& root, const std::string& base) {
  for (const std::string& candidate : {root + "/" + base, root + "/" + base + ".gz"})
    if (std::filesystem::exists(candidate)) return candidate;
  throw ParseError("dataset file not found under '" + root + "': " + base + "[.gz]");
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot write: " + path);
  f << content;
}

}  // namespace

TaskStream build_stream(const RunConfig& cfg, std::uint64_t seed) {
  if (cfg.benchmark == "synthetic") return synthetic_stream(cfg.synth, cfg.tasks, seed);

  std::string root = cfg.data_root;
  if (root.empty()) {
    const char* env = std::getenv("GKCL_DATA_ROOT");
    if (env) root = env;
  }
  if (root.empty())
    throw ConfigError("dataset root not set: pass data_root or set GKCL_DATA_ROOT");

  ImageDataset train = load_idx(find_idx_file(root, "train-images-idx3-ubyte"),
                                find_idx_file(root, "train-labels-idx1-ubyte"));
  ImageDataset test = load_idx(find_idx_file(root, "t10k-images-idx3-ubyte"),
                               find_idx_file(root, "t10k-labels-idx1-ubyte"));
  RngState sub = RngState(seed).split(kSubsampleLabel);
  if (cfg.subset_train > 0) {
    RngState r = sub.split(1);
    train = subsample(train, cfg.subset_train, r);
  }
  if (cfg.subset_test > 0) {
    RngState r = sub.split(2);
    test = subsample(test, cfg.subset_test, r);
  }

  if (cfg.benchmark == "permuted")
    return permuted_stream(train, test, cfg.tasks, seed, cfg.identity_first_task);
  if (cfg.benchmark == "rotated") return rotated_stream(train, test, cfg.tasks, seed);
  if (cfg.benchmark == "split") {
    TaskStream s = split_stream(train, test, cfg.classes_per_task, seed);
    if (int(s.tasks.size()) > cfg.tasks) s.tasks.resize(cfg.tasks);
    return s;
  }
  throw ConfigError("unknown benchmark: " + cfg.benchmark);
}

void fit_config_to_stream(RunConfig& cfg, const TaskStream& stream) {
  cfg.train.vae.input_dim = stream.input_dim;
  cfg.train.vae.num_classes = stream.num_global_classes;
}

SeedResult run_method_seed(const RunConfig& cfg, std::uint64_t seed) {
  TaskStream stream = build_stream(cfg, seed);
  RunConfig fitted = cfg;
  fit_config_to_stream(fitted, stream);
  ContinualLearner learner(fitted.train, stream.scenario, seed);
  SeedResult result;
  result.seed = seed;
  result.matrix = learner.run_sequence(stream, &result.task_results);
  return result;
}

void cmd_run(RunConfig cfg) {
  std::vector<SeedResult> results;
  for (std::uint64_t seed : cfg.seeds) {
    std::printf("[run] seed %llu\n", (unsigned long long)seed);
    results.push_back(run_method_seed(cfg, seed));
  }
  write_run_record(cfg.out_dir, config_snapshot(cfg), results);
  cmd_report(cfg.out_dir);
}

void cmd_baseline(RunConfig cfg) {
  std::vector<SeedResult> results;
  for (std::uint64_t seed : cfg.seeds) {
    std::printf("[baseline] seed %llu\n", (unsigned long long)seed);
    TaskStream stream = build_stream(cfg, seed);
    RunConfig fitted = cfg;
    fit_config_to_stream(fitted, stream);
    SeedResult r;
    r.seed = seed;
    r.matrix = run_naive_baseline(stream, fitted.train, seed);
    results.push_back(std::move(r));
  }
  write_run_record(cfg.out_dir, config_snapshot(cfg), results);
  cmd_report(cfg.out_dir);
}

void cmd_ablate_contrastive(RunConfig cfg) {
  if (!(cfg.train.lambda_con > 0.0))
    throw ConfigError("ablate-contrastive needs lambda_con > 0 for the 'with' arm");
  RunConfig with = cfg, without = cfg;
  with.out_dir = cfg.out_dir + "/with";
  without.out_dir = cfg.out_dir + "/without";
  without.train.lambda_con = 0.0;

  std::vector<SeedResult> rw, rwo;
  for (std::uint64_t seed : cfg.seeds) {
    std::printf("[ablate-contrastive] seed %llu with regularizer\n", (unsigned long long)seed);
    rw.push_back(run_method_seed(with, seed));
    std::printf("[ablate-contrastive] seed %llu without regularizer\n",
                (unsigned long long)seed);
    rwo.push_back(run_method_seed(without, seed));
  }
  write_run_record(with.out_dir, config_snapshot(with), rw);
  write_run_record(without.out_dir, config_snapshot(without), rwo);

  std::filesystem::create_directories(cfg.out_dir);
  const auto aw = final_accuracies(rw), awo = final_accuracies(rwo);
  std::string summary = "arm,metric,mean,std\n";
  summary += "with,A_T," + format_double(mean_of(aw)) + "," + format_double(sample_std(aw)) + "\n";
  summary +=
      "without,A_T," + format_double(mean_of(awo)) + "," + format_double(sample_std(awo)) + "\n";
  write_file(cfg.out_dir + "/ablation_summary.csv", summary);
  std::printf("contrastive ablation: with A_T=%.4f  without A_T=%.4f\n", mean_of(aw),
              mean_of(awo));
}

void cmd_ablate_kernel(RunConfig cfg) {
  std::string summary = "kernel,metric,mean,std\n";
  for (KernelKind kind : {KernelKind::linear, KernelKind::polynomial, KernelKind::rbf}) {
    RunConfig arm = cfg;
    arm.train.kernel.kind = kind;
    if (kind == KernelKind::rbf) arm.train.kernel.bandwidth = cfg.train.kernel.bandwidth;
    arm.out_dir = cfg.out_dir + "/" + to_string(kind);
    std::vector<SeedResult> results;
    for (std::uint64_t seed : cfg.seeds) {
      std::printf("[ablate-kernel] %s seed %llu\n", to_string(kind).c_str(),
                  (unsigned long long)seed);
      results.push_back(run_method_seed(arm, seed));
    }
    write_run_record(arm.out_dir, config_snapshot(arm), results);
    const auto accs = final_accuracies(results);
    summary += to_string(kind) + ",A_T," + format_double(mean_of(accs)) + "," +
               format_double(sample_std(accs)) + "\n";
  }
  std::filesystem::create_directories(cfg.out_dir);
  write_file(cfg.out_dir + "/ablation_summary.csv", summary);
}

void cmd_ablate_coreset(RunConfig cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  std::string arm_summary = "arm,coreset_size,metric,mean,std\n";
  std::string sweep = "train_size,infer_size,seed,A_T\n";

  for (int size : cfg.ablate_sizes) {
    // generative arm, plus an inference-size sweep on its final model
    RunConfig arm = cfg;
    arm.train.coreset_train = size;
    arm.train.coreset_infer = size;
    arm.out_dir = cfg.out_dir + "/generative_" + std::to_string(size);
    std::vector<SeedResult> results;
    for (std::uint64_t seed : cfg.seeds) {
      std::printf("[ablate-coreset] generative size %d seed %llu\n", size,
                  (unsigned long long)seed);
      TaskStream stream = build_stream(arm, seed);
      RunConfig fitted = arm;
      fit_config_to_stream(fitted, stream);
      ContinualLearner learner(fitted.train, stream.scenario, seed);
      SeedResult r;
      r.seed = seed;
      r.matrix = learner.run_sequence(stream, &r.task_results);
      const int T = int(stream.tasks.size());
      for (int infer : cfg.ablate_infer_sizes) {
        double acc_sum = 0.0;
        for (int i = 1; i <= T; ++i)
          acc_sum += learner.evaluate(i, stream.tasks[i - 1].test, infer,
                                      learner.eval_rng(T, i), fitted.train.use_kernel_network);
        sweep += std::to_string(size) + "," + std::to_string(infer) + "," +
                 std::to_string(seed) + "," + format_double(acc_sum / T) + "\n";
      }
      results.push_back(std::move(r));
    }
    write_run_record(arm.out_dir, config_snapshot(arm), results);
    const auto accs = final_accuracies(results);
    arm_summary += "generative," + std::to_string(size) + ",A_T," +
                   format_double(mean_of(accs)) + "," + format_double(sample_std(accs)) + "\n";

    // uniform (memory) arm at the same size
    RunConfig uni = arm;
    uni.train.uniform_coreset = true;
    uni.out_dir = cfg.out_dir + "/uniform_" + std::to_string(size);
    std::vector<SeedResult> uresults;
    for (std::uint64_t seed : cfg.seeds) {
      std::printf("[ablate-coreset] uniform size %d seed %llu\n", size,
                  (unsigned long long)seed);
      uresults.push_back(run_method_seed(uni, seed));
    }
    write_run_record(uni.out_dir, config_snapshot(uni), uresults);
    const auto uaccs = final_accuracies(uresults);
    arm_summary += "uniform," + std::to_string(size) + ",A_T," + format_double(mean_of(uaccs)) +
                   "," + format_double(sample_std(uaccs)) + "\n";
  }
  write_file(cfg.out_dir + "/ablation_summary.csv", arm_summary);
  write_file(cfg.out_dir + "/inference_size_sweep.csv", sweep);
}

void cmd_dump_embeddings(RunConfig cfg) {
  const std::uint64_t seed = cfg.seeds.at(0);
  TaskStream stream = build_stream(cfg, seed);
  fit_config_to_stream(cfg, stream);
  ContinualLearner learner(cfg.train, stream.scenario, seed);
  learner.run_sequence(stream);

  std::filesystem::create_directories(cfg.out_dir);
  std::ofstream f(cfg.out_dir + "/embeddings.csv", std::ios::binary);
  if (!f) throw ParseError("cannot write embeddings.csv");
  f << "task,source,label";
  for (int d = 0; d < cfg.train.vae.hidden2; ++d) f << ",h" << d;
  f << "\n";
  auto dump = [&](int task_id, const char* source, const Matrix& x,
                  const std::vector<int>& labels) {
    Matrix hidden = learner.generative().hidden_eval(x);
    for (int r = 0; r < hidden.rows; ++r) {
      f << task_id << "," << source << "," << labels[r];
      for (int d = 0; d < hidden.cols; ++d) f << "," << format_double(hidden.at(r, d));
      f << "\n";
    }
  };
  const int T = int(stream.tasks.size());
  for (const TaskData& task : stream.tasks) {
    RngState coreset_rng = learner.eval_rng(T, task.task_id);
    GenBatch coreset = learner.generative().generate_coreset(
        task.task_id, task.classes, cfg.train.coreset_infer, coreset_rng);
    dump(task.task_id, "coreset", coreset.x, coreset.labels);
    const int n = std::min(500, task.test.size());
    Matrix sub(n, task.test.images.cols);
    std::vector<int> sub_labels(task.test.labels.begin(), task.test.labels.begin() + n);
    for (int r = 0; r < n; ++r)
      std::copy(task.test.images.row_ptr(r), task.test.images.row_ptr(r) + task.test.images.cols,
                sub.row_ptr(r));
    dump(task.task_id, "test", sub, sub_labels);
  }
  write_file(cfg.out_dir + "/config.snapshot", config_snapshot(cfg));
}

void cmd_report(const std::string& dir) {
  const auto rows = read_metrics_csv(dir + "/metrics.csv");
  std::map<std::uint64_t, double> final_acc;
  std::map<std::uint64_t, int> max_t;
  std::vector<double> f_values;
  for (const auto& r : rows) {
    if (r.t == "F") {
      f_values.push_back(r.value);
    } else {
      const int t = std::stoi(r.t);
      if (t >= max_t[r.seed]) {
        max_t[r.seed] = t;
        final_acc[r.seed] = r.value;
      }
    }
  }
  std::vector<double> accs;
  for (const auto& [seed, acc] : final_acc) accs.push_back(acc);
  std::printf("report for %s over %zu seed(s)\n", dir.c_str(), accs.size());
  std::printf("  A_T: %.4f +/- %.4f\n", mean_of(accs), sample_std(accs));
  if (!f_values.empty())
    std::printf("  F:   %.4f +/- %.4f\n", mean_of(f_values), sample_std(f_values));
}

void cmd_make_dataset(const std::string& dir, int n_train, int n_test, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  ImageDataset train = render_digit_dataset(n_train, RngState(seed).split(1).seed());
  ImageDataset test = render_digit_dataset(n_test, RngState(seed).split(2).seed());
  save_idx(train, dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
  save_idx(test, dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
  std::printf("wrote %d train and %d test rendered digit images to %s\n", n_train, n_test,
              dir.c_str());
}

}  // namespace gkcl
