#include <CLI11.hpp>
#include <cstdio>
#include <exception>

#include "gkcl/experiments.hpp"

namespace {

struct CliOverrides {
  std::string config_path;
  std::string profile = "desk";
  std::vector<std::string> sets;  // raw key=value overrides
  long long seed = -1;
  std::string seeds;
  int tasks = -1;
  int coreset_train = -1;
  int coreset_infer = -1;
  std::string kernel;
  bool no_contrastive = false;
  std::string out;
  std::string benchmark;
  std::string data_root;
};

void add_common(CLI::App* cmd, CliOverrides& o) {
  cmd->add_option("--config", o.config_path, "key=value config file");
  cmd->add_option("--profile", o.profile, "base profile: paper or desk")
      ->check(CLI::IsMember({"paper", "desk"}));
  cmd->add_option("--seed", o.seed, "single seed (overrides the seed list)");
  cmd->add_option("--seeds", o.seeds, "comma-separated seed list");
  cmd->add_option("--tasks", o.tasks, "number of tasks");
  cmd->add_option("--coreset-train", o.coreset_train, "generated samples per class (training)");
  cmd->add_option("--coreset-infer", o.coreset_infer, "generated samples per class (inference)");
  cmd->add_option("--kernel", o.kernel, "kernel type")
      ->check(CLI::IsMember({"linear", "poly", "rbf"}));
  cmd->add_flag("--no-contrastive", o.no_contrastive, "disable the contrastive regularizer");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--benchmark", o.benchmark,
                  "permuted | rotated | split | synthetic");
  cmd->add_option("--data-root", o.data_root, "IDX dataset directory (or $GKCL_DATA_ROOT)");
  cmd->add_option("--set", o.sets, "extra config overrides as key=value")->take_all();
}

gkcl::RunConfig build_config(const CliOverrides& o) {
  gkcl::RunConfig cfg = gkcl::profile_config(o.profile);
  if (!o.config_path.empty()) gkcl::apply_config_file(cfg, o.config_path);
  if (!o.seeds.empty()) gkcl::apply_config_line(cfg, "seeds", o.seeds);
  if (o.seed >= 0) cfg.seeds = {std::uint64_t(o.seed)};
  if (o.tasks > 0) cfg.tasks = o.tasks;
  if (o.coreset_train > 0) cfg.train.coreset_train = o.coreset_train;
  if (o.coreset_infer > 0) cfg.train.coreset_infer = o.coreset_infer;
  if (!o.kernel.empty()) cfg.train.kernel.kind = gkcl::kernel_kind_from_string(o.kernel);
  if (o.no_contrastive) cfg.train.lambda_con = 0.0;
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (!o.benchmark.empty()) gkcl::apply_config_line(cfg, "benchmark", o.benchmark);
  if (!o.data_root.empty()) cfg.data_root = o.data_root;
  for (const std::string& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw gkcl::ConfigError("--set expects key=value: " + kv);
    gkcl::apply_config_line(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"generative kernel continual learning experiments"};
  app.require_subcommand(1);

  CliOverrides run_o, base_o, abc_o, abcon_o, abk_o, dump_o;
  CLI::App* c_run = app.add_subcommand("run", "train and evaluate the method");
  add_common(c_run, run_o);
  CLI::App* c_base = app.add_subcommand("baseline", "naive sequentially-trained classifier");
  add_common(c_base, base_o);
  CLI::App* c_abc = app.add_subcommand("ablate-coreset",
                                       "generative vs uniform coresets and inference sizes");
  add_common(c_abc, abc_o);
  CLI::App* c_abcon =
      app.add_subcommand("ablate-contrastive", "with/without the contrastive regularizer");
  add_common(c_abcon, abcon_o);
  CLI::App* c_abk = app.add_subcommand("ablate-kernel", "linear vs polynomial vs rbf kernels");
  add_common(c_abk, abk_o);
  CLI::App* c_dump = app.add_subcommand("dump-embeddings", "write encoder representations to CSV");
  add_common(c_dump, dump_o);

  std::string report_dir;
  CLI::App* c_report = app.add_subcommand("report", "summarize a finished run directory");
  c_report->add_option("dir", report_dir, "run directory containing metrics.csv")->required();

  std::string md_dir = "data/rendered";
  int md_train = 12000, md_test = 2000;
  long long md_seed = 1;
  CLI::App* c_md = app.add_subcommand("make-dataset",
                                      "write a rendered 10-class digit corpus as IDX files");
  c_md->add_option("--out", md_dir, "output directory");
  c_md->add_option("--train-n", md_train, "training images");
  c_md->add_option("--test-n", md_test, "test images");
  c_md->add_option("--seed", md_seed, "generator seed");

  CLI11_PARSE(app, argc, argv);
  try {
    if (c_run->parsed()) gkcl::cmd_run(build_config(run_o));
    else if (c_base->parsed()) gkcl::cmd_baseline(build_config(base_o));
    else if (c_abc->parsed()) gkcl::cmd_ablate_coreset(build_config(abc_o));
    else if (c_abcon->parsed()) gkcl::cmd_ablate_contrastive(build_config(abcon_o));
    else if (c_abk->parsed()) gkcl::cmd_ablate_kernel(build_config(abk_o));
    else if (c_dump->parsed()) gkcl::cmd_dump_embeddings(build_config(dump_o));
    else if (c_report->parsed()) gkcl::cmd_report(report_dir);
    else if (c_md->parsed())
      gkcl::cmd_make_dataset(md_dir, md_train, md_test, std::uint64_t(md_seed));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
