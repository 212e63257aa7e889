#pragma once

#include <functional>
#include <map>

#include "gkcl/contrastive.hpp"
#include "gkcl/data.hpp"
#include "gkcl/genmodel.hpp"
#include "gkcl/kernels.hpp"
#include "gkcl/metrics.hpp"
#include "gkcl/optim.hpp"

namespace gkcl {

// Shared kernel network f applied to the (gradient-decoupled) encoder hidden
// representation: two ReLU layers of equal width, then dropout.
struct KernelNetwork {
  Param w1, b1, w2, b2;

  KernelNetwork() = default;
  KernelNetwork(int in_dim, int width, std::uint64_t seed);

  struct Tape {
    Var w1, b1, w2, b2;
  };
  Tape bind(bool trainable);
  Var forward(const Tape& t, const Var& h, double dropout_rate, RngState& rng,
              bool training) const;
  Matrix forward_eval(const Matrix& h) const;
  std::vector<Param*> params() { return {&w1, &b1, &w2, &b2}; }
};

struct TrainConfig {
  VaeConfig vae;
  // generative step
  double vae_lr = 1e-3;
  int vae_batch = 512;
  int replay_size = 512;
  int vae_iters = 2000;
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
  // contrastive regularizer
  double lambda_con = 1.0;
  double temperature = 0.08;
  int proj_dim = 196;
  // coreset + kernel classifier
  int coreset_train = 20;  // generated samples per class for classifier training
  int coreset_infer = 20;  // generated samples per class at evaluation
  // Memory-based comparison arm: coresets drawn uniformly from the task's
  // real data at training time and stored, instead of being generated.
  bool uniform_coreset = false;
  bool use_kernel_network = true;
  int knet_width = 512;
  double knet_lr = 0.1;
  double knet_lr_decay = 0.8;  // multiplies the lr at each task boundary
  double knet_momentum = 0.8;
  double knet_dropout = 0.1;
  int knet_batch = 10;
  KernelSpec kernel;  // rbf bandwidth <= 0 selects the median heuristic
  RidgeConfig ridge;
  // naive baseline arm
  double baseline_lr = 0.05;
  double baseline_momentum = 0.8;
};

struct TaskResult {
  int task_id = 0;
  double initial_gen_loss = 0.0;
  double final_gen_loss = 0.0;
  double classifier_train_accuracy = -1.0;
  double seconds_generative = 0.0;
  double seconds_classifier = 0.0;
};

// Mean cross-entropy of row_softmax(logits) against integer labels.
Var softmax_xent_rows(const Var& logits, const std::vector<int>& labels);

// Orchestrates per-task training: (1) generative training with replay and
// the contrastive regularizer, (2) coreset generation, (3) one epoch of
// kernel-network training through the ridge classifier. Evaluation rebuilds
// the coreset from the current decoder, so nothing is stored per task beyond
// priors, gates and the class registry.
class ContinualLearner {
 public:
  ContinualLearner(const TrainConfig& cfg, Scenario scenario, std::uint64_t seed);

  TaskResult train_task(const TaskData& task);
  // Decomposed phases: a generative pass (step 1) and a classifier pass
  // (steps 2+3); train_task runs both.
  TaskResult train_generative(const TaskData& task);
  double train_classifier(const TaskData& task);  // returns epoch train accuracy

  double evaluate(int task_id, const ImageDataset& test, int coreset_per_class, RngState rng,
                  bool use_kernel_network = true) const;
  RngState eval_rng(int after_task, int task_id) const;

  AccuracyMatrix run_sequence(const TaskStream& stream,
                              std::vector<TaskResult>* results = nullptr,
                              const std::function<void(int)>& after_task = {});

  Matrix features_eval(const Matrix& x, bool use_kernel_network) const;

  const TrainConfig& config() const { return cfg_; }
  Scenario scenario() const { return scenario_; }
  std::uint64_t seed() const { return seed_; }
  GenerativeModel& generative() { return gen_; }
  const GenerativeModel& generative() const { return gen_; }
  void set_generative(GenerativeModel g) { gen_ = std::move(g); }
  Projection& projection() { return proj_; }
  const Projection& projection() const { return proj_; }
  KernelNetwork& kernel_network() { return knet_; }
  const KernelNetwork& kernel_network() const { return knet_; }
  const std::map<int, std::vector<int>>& registry() const { return registry_; }
  void restore_registry(std::map<int, std::vector<int>> reg) { registry_ = std::move(reg); }
  int tasks_completed() const { return tasks_completed_; }
  void set_tasks_completed(int n) { tasks_completed_ = n; }

 private:
  KernelSpec resolved_kernel(const Matrix& coreset_features_cols) const;
  void register_task_contexts(const TaskData& task);
  GenBatch coreset_for(int task_id, const std::vector<int>& classes, int per_class,
                       RngState& rng) const;
  GenBatch draw_uniform_coreset(const TaskData& task, int per_class, RngState& rng) const;

  TrainConfig cfg_;
  Scenario scenario_;
  std::uint64_t seed_;
  GenerativeModel gen_;
  Projection proj_;
  KernelNetwork knet_;
  AdamOptimizer vae_opt_;
  SgdMomentum knet_opt_;
  int tasks_completed_ = 0;                 // drives the per-task lr decay
  std::map<int, std::vector<int>> registry_;  // task id -> global class list
  std::map<int, GenBatch> stored_coresets_;   // uniform-coreset arm only
};

// Plain classifier head on the same encoder architecture, trained
// sequentially with cross-entropy: no replay, no gates, no kernel. The
// trend-comparison arm.
AccuracyMatrix run_naive_baseline(const TaskStream& stream, const TrainConfig& cfg,
                                  std::uint64_t seed);

}  // namespace gkcl
