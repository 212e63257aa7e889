#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "gkcl/autodiff.hpp"
#include "gkcl/matrix.hpp"
#include "gkcl/optim.hpp"
#include "gkcl/rng.hpp"

namespace gkcl {

enum class Scenario { domain_incremental, task_incremental };

struct VaeConfig {
  int input_dim = 784;
  int hidden1 = 2000;
  int hidden2 = 2000;
  int latent_dim = 100;
  int num_classes = 10;  // width of the decoder's label one-hot
  double gate_active_fraction = 0.5;
  bool binary_replay_pixels = false;  // sample Bernoulli pixels instead of means
};

// A labeled batch of flattened images with task ids attached.
struct GenBatch {
  Matrix x;  // N x D, pixels in [0,1]
  std::vector<int> labels;
  std::vector<int> tasks;

  int size() const { return x.rows; }
  bool empty() const { return x.rows == 0; }
};

void validate_batch(const GenBatch& b, int input_dim);

// Per-step view of the model parameters as tape nodes. Ops called with the
// same tape share nodes, so gradients from several loss terms accumulate on
// one set of leaves.
struct VaeTape {
  Var enc_w1, enc_b1, enc_w2, enc_b2, enc_wh, enc_bh;
  Var dec_w1, dec_b1, dec_w2, dec_b2, dec_w3, dec_b3;
  Var prior_mu;        // rows follow class registration order
  Var prior_logsigma;  // one log-scale scalar per class
};

struct EncodeOut {
  Var mu, logsigma, hidden;
};

struct ElboParts {
  Var hidden, mu, logsigma, z, logits, loss;
};

// Conditional variational auto-encoder with a trainable per-class Gaussian
// prior and fixed random binary gates on the decoder's hidden layers. Gate
// contexts are classes in task-incremental mode and tasks (domains) in
// domain-incremental mode.
class GenerativeModel {
 public:
  GenerativeModel(const VaeConfig& cfg, Scenario scenario, std::uint64_t init_seed);

  const VaeConfig& config() const { return cfg_; }
  Scenario scenario() const { return scenario_; }
  std::uint64_t init_seed() const { return init_seed_; }

  // Prior row for class_id plus, in task-incremental mode, its gate masks.
  // Registration is idempotent and deterministic in (init_seed, id) only.
  void register_class(int class_id);
  void register_task_gate(int task_id);  // domain-incremental gates
  bool has_class(int class_id) const { return class_rows_.count(class_id) != 0; }
  bool has_gate(int context_id) const { return gates_.count(context_id) != 0; }
  int prior_row(int class_id) const;
  int gate_context_of(int label, int task) const;
  const std::vector<Matrix>& gate_masks(int context_id) const;
  std::vector<int> registered_classes() const;

  VaeTape bind(bool trainable);

  EncodeOut encode(const VaeTape& t, const Var& x) const;
  Var reparameterize(const Var& mu, const Var& logsigma, RngState& rng) const;
  Var decode(const VaeTape& t, const Var& z, const std::vector<int>& labels,
             const std::vector<int>& tasks) const;

  ElboParts elbo_parts(const VaeTape& t, const GenBatch& batch, RngState& rng) const;
  Var elbo_loss(const VaeTape& t, const GenBatch& batch, RngState& rng) const;
  // Current-task term plus replayed-data term; both terms draw noise from
  // identical copies of rng, and an empty replay contributes zero.
  Var combined_generative_loss(const VaeTape& t, const GenBatch& current,
                               const GenBatch& replay, RngState& rng) const;

  struct ReplayContext {
    int task_id;
    int class_id;
  };
  // Draws (task, class) pairs uniformly, samples the class prior and decodes
  // under the pair's gate context; pixels are the decoded Bernoulli means
  // unless binary_replay_pixels is set.
  GenBatch sample_replay(const std::vector<ReplayContext>& prev, int n, RngState& rng) const;
  // n_per_class generated samples for each listed class (ascending order).
  GenBatch generate_coreset(int task_id, std::vector<int> classes, int n_per_class,
                            RngState& rng) const;

  // Gradient-free forward passes.
  void encode_eval(const Matrix& x, Matrix* mu, Matrix* logsigma, Matrix* hidden) const;
  Matrix hidden_eval(const Matrix& x) const;
  Matrix decode_eval(const Matrix& z, const std::vector<int>& labels,
                     const std::vector<int>& tasks) const;  // logits

  std::vector<Param*> params();
  std::vector<const Param*> params() const;

  // Checkpoint support: raw access to the registries.
  const std::map<int, int>& class_rows() const { return class_rows_; }
  const std::map<int, std::vector<Matrix>>& gate_table() const { return gates_; }
  void restore_registries(std::map<int, int> class_rows,
                          std::map<int, std::vector<Matrix>> gates);

 private:
  void register_context_gate_(int context_id);
  Matrix onehot_labels(const std::vector<int>& labels) const;
  Matrix gate_batch(const std::vector<int>& labels, const std::vector<int>& tasks,
                    int layer) const;
  GenBatch decode_prior_samples(const std::vector<int>& labels, const std::vector<int>& tasks,
                                RngState& rng) const;

  VaeConfig cfg_;
  Scenario scenario_;
  std::uint64_t init_seed_;

  Param enc_w1_, enc_b1_, enc_w2_, enc_b2_, enc_wh_, enc_bh_;
  Param dec_w1_, dec_b1_, dec_w2_, dec_b2_, dec_w3_, dec_b3_;
  Param prior_mu_, prior_logsigma_;

  std::map<int, int> class_rows_;                 // class id -> prior row
  std::map<int, std::vector<Matrix>> gates_;      // context id -> per-layer masks
};

}  // namespace gkcl
