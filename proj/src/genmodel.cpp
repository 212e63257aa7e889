#include "gkcl/genmodel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gkcl {

namespace {

// Child-stream labels for the model's internal rng derivations.
constexpr std::uint64_t kWeightsLabel = 0x11;
constexpr std::uint64_t kPriorLabel = 0x22;
constexpr std::uint64_t kGateLabel = 0x33;

Matrix he_init(int fan_in, int fan_out, RngState& rng) {
  Matrix w = sample_gaussian(fan_in, fan_out, rng);
  const double s = std::sqrt(2.0 / double(fan_in));
  for (auto& v : w.data) v *= s;
  return w;
}

}  // namespace

void validate_batch(const GenBatch& b, int input_dim) {
  if (b.x.cols != input_dim && !b.empty())
    throw DimensionError("batch: input width does not match configured input_dim");
  if (int(b.labels.size()) != b.size() || int(b.tasks.size()) != b.size())
    throw DimensionError("batch: labels/tasks length mismatch");
  for (double v : b.x.data)
    if (!(v >= 0.0 && v <= 1.0)) throw ParameterError("batch: pixel outside [0,1]");
}

GenerativeModel::GenerativeModel(const VaeConfig& cfg, Scenario scenario,
                                 std::uint64_t init_seed)
    : cfg_(cfg), scenario_(scenario), init_seed_(init_seed) {
  if (cfg.input_dim <= 0 || cfg.hidden1 <= 0 || cfg.hidden2 <= 0 || cfg.latent_dim <= 0 ||
      cfg.num_classes <= 0)
    throw ParameterError("VaeConfig: dimensions must be positive");
  if (!(cfg.gate_active_fraction > 0.0 && cfg.gate_active_fraction <= 1.0))
    throw ParameterError("VaeConfig: gate_active_fraction must be in (0,1]");

  RngState wrng = RngState(init_seed_).split(kWeightsLabel);
  const int m = cfg.latent_dim;
  const int dec_in = m + cfg.num_classes;

  enc_w1_ = {"enc.w1", he_init(cfg.input_dim, cfg.hidden1, wrng)};
  enc_b1_ = {"enc.b1", Matrix(1, cfg.hidden1)};
  enc_w2_ = {"enc.w2", he_init(cfg.hidden1, cfg.hidden2, wrng)};
  enc_b2_ = {"enc.b2", Matrix(1, cfg.hidden2)};
  enc_wh_ = {"enc.wh", he_init(cfg.hidden2, 2 * m, wrng)};
  enc_bh_ = {"enc.bh", Matrix(1, 2 * m)};
  dec_w1_ = {"dec.w1", he_init(dec_in, cfg.hidden2, wrng)};
  dec_b1_ = {"dec.b1", Matrix(1, cfg.hidden2)};
  dec_w2_ = {"dec.w2", he_init(cfg.hidden2, cfg.hidden1, wrng)};
  dec_b2_ = {"dec.b2", Matrix(1, cfg.hidden1)};
  dec_w3_ = {"dec.w3", he_init(cfg.hidden1, cfg.input_dim, wrng)};
  dec_b3_ = {"dec.b3", Matrix(1, cfg.input_dim)};
  prior_mu_ = {"prior.mu", Matrix(0, m)};
  prior_logsigma_ = {"prior.logsigma", Matrix(0, 1)};
}

void GenerativeModel::register_class(int class_id) {
  if (!class_rows_.count(class_id)) {
    // mu_y ~ N(0, 0.1^2) from a per-class stream; sigma_y starts at 1.
    RngState prng = RngState(init_seed_).split(kPriorLabel).split(std::uint64_t(class_id));
    Matrix mu = sample_gaussian(1, cfg_.latent_dim, prng);
    for (auto& v : mu.data) v *= 0.1;

    const int row = prior_mu_.value.rows;
    Matrix grown(row + 1, cfg_.latent_dim);
    std::copy(prior_mu_.value.data.begin(), prior_mu_.value.data.end(), grown.data.begin());
    std::copy(mu.data.begin(), mu.data.end(), grown.row_ptr(row));
    prior_mu_.value = std::move(grown);

    Matrix grown_ls(row + 1, 1);
    std::copy(prior_logsigma_.value.data.begin(), prior_logsigma_.value.data.end(),
              grown_ls.data.begin());
    grown_ls.data[row] = 0.0;
    prior_logsigma_.value = std::move(grown_ls);

    class_rows_[class_id] = row;
  }
  if (scenario_ == Scenario::task_incremental && !gates_.count(class_id))
    register_context_gate_(class_id);
}

void GenerativeModel::register_context_gate_(int context_id) {
  // Binary masks with exactly round(active_fraction * width) ones, fixed for
  // the lifetime of the model. The draw depends only on (init_seed, context,
  // layer), never on registration order.
  std::vector<Matrix> masks;
  const int widths[2] = {cfg_.hidden2, cfg_.hidden1};
  for (int layer = 0; layer < 2; ++layer) {
    RngState grng = RngState(init_seed_)
                        .split(kGateLabel)
                        .split(std::uint64_t(context_id))
                        .split(std::uint64_t(layer));
    const int width = widths[layer];
    const int ones = int(std::lround(cfg_.gate_active_fraction * width));
    std::vector<int> perm = sample_permutation(width, grng);
    Matrix mask(1, width);
    for (int i = 0; i < ones; ++i) mask.data[perm[i]] = 1.0;
    masks.push_back(std::move(mask));
  }
  gates_[context_id] = std::move(masks);
}

void GenerativeModel::register_task_gate(int task_id) {
  if (scenario_ != Scenario::domain_incremental)
    throw ProtocolError("register_task_gate: only valid in domain-incremental mode");
  if (!gates_.count(task_id)) register_context_gate_(task_id);
}

int GenerativeModel::prior_row(int class_id) const {
  auto it = class_rows_.find(class_id);
  if (it == class_rows_.end())
    throw ContextError("no prior registered for class " + std::to_string(class_id));
  return it->second;
}

int GenerativeModel::gate_context_of(int label, int task) const {
  return scenario_ == Scenario::task_incremental ? label : task;
}

const std::vector<Matrix>& GenerativeModel::gate_masks(int context_id) const {
  auto it = gates_.find(context_id);
  if (it == gates_.end())
    throw ContextError("no gate registered for context " + std::to_string(context_id));
  return it->second;
}

std::vector<int> GenerativeModel::registered_classes() const {
  std::vector<int> out;
  out.reserve(class_rows_.size());
  for (const auto& [id, _] : class_rows_) out.push_back(id);
  return out;
}

VaeTape GenerativeModel::bind(bool trainable) {
  auto wrap = [&](Param& p) {
    return trainable ? Var::param(p.value) : Var::constant(p.value);
  };
  VaeTape t;
  t.enc_w1 = wrap(enc_w1_);
  t.enc_b1 = wrap(enc_b1_);
  t.enc_w2 = wrap(enc_w2_);
  t.enc_b2 = wrap(enc_b2_);
  t.enc_wh = wrap(enc_wh_);
  t.enc_bh = wrap(enc_bh_);
  t.dec_w1 = wrap(dec_w1_);
  t.dec_b1 = wrap(dec_b1_);
  t.dec_w2 = wrap(dec_w2_);
  t.dec_b2 = wrap(dec_b2_);
  t.dec_w3 = wrap(dec_w3_);
  t.dec_b3 = wrap(dec_b3_);
  t.prior_mu = wrap(prior_mu_);
  t.prior_logsigma = wrap(prior_logsigma_);
  return t;
}

EncodeOut GenerativeModel::encode(const VaeTape& t, const Var& x) const {
  if (x.value().cols != cfg_.input_dim) throw DimensionError("encode: input width mismatch");
  Var h1 = relu(add_rowvec(matmul(x, t.enc_w1), t.enc_b1));
  Var h2 = relu(add_rowvec(matmul(h1, t.enc_w2), t.enc_b2));
  Var head = add_rowvec(matmul(h2, t.enc_wh), t.enc_bh);
  const int m = cfg_.latent_dim;
  return {slice_cols(head, 0, m), slice_cols(head, m, 2 * m), h2};
}

Var GenerativeModel::reparameterize(const Var& mu, const Var& logsigma, RngState& rng) const {
  if (!mu.value().same_shape(logsigma.value()))
    throw DimensionError("reparameterize: shape mismatch");
  Matrix eps = sample_gaussian(mu.value().rows, mu.value().cols, rng);
  return add(mu, hadamard(vexp(logsigma), Var::constant(std::move(eps))));
}

Matrix GenerativeModel::onehot_labels(const std::vector<int>& labels) const {
  Matrix y(int(labels.size()), cfg_.num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= cfg_.num_classes)
      throw ContextError("label outside configured num_classes: " + std::to_string(labels[i]));
    y.at(int(i), labels[i]) = 1.0;
  }
  return y;
}

Matrix GenerativeModel::gate_batch(const std::vector<int>& labels,
                                   const std::vector<int>& tasks, int layer) const {
  const int width = layer == 0 ? cfg_.hidden2 : cfg_.hidden1;
  Matrix m(int(labels.size()), width);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& masks = gate_masks(gate_context_of(labels[i], tasks[i]));
    std::copy(masks[layer].data.begin(), masks[layer].data.end(), m.row_ptr(int(i)));
  }
  return m;
}

Var GenerativeModel::decode(const VaeTape& t, const Var& z, const std::vector<int>& labels,
                            const std::vector<int>& tasks) const {
  if (z.value().rows != int(labels.size()) || labels.size() != tasks.size())
    throw DimensionError("decode: z/labels/tasks size mismatch");
  Var input = concat_cols(z, Var::constant(onehot_labels(labels)));
  Var d1 = relu(add_rowvec(matmul(input, t.dec_w1), t.dec_b1));
  d1 = hadamard(d1, Var::constant(gate_batch(labels, tasks, 0)));
  Var d2 = relu(add_rowvec(matmul(d1, t.dec_w2), t.dec_b2));
  d2 = hadamard(d2, Var::constant(gate_batch(labels, tasks, 1)));
  return add_rowvec(matmul(d2, t.dec_w3), t.dec_b3);
}

ElboParts GenerativeModel::elbo_parts(const VaeTape& t, const GenBatch& batch,
                                      RngState& rng) const {
  validate_batch(batch, cfg_.input_dim);
  ElboParts parts;
  EncodeOut enc = encode(t, Var::constant(batch.x));
  parts.hidden = enc.hidden;
  parts.mu = enc.mu;
  parts.logsigma = enc.logsigma;
  parts.z = reparameterize(enc.mu, enc.logsigma, rng);
  parts.logits = decode(t, parts.z, batch.labels, batch.tasks);

  Var recon = row_sums(bernoulli_xent_logits(parts.logits, batch.x));

  // Closed-form KL between N(mu, diag sigma^2) and the class prior
  // N(mu_y, sigma_y^2 I), summed over latent dimensions:
  //   log(sigma_y) - logsigma + (sigma^2 + (mu - mu_y)^2) / (2 sigma_y^2) - 1/2
  std::vector<int> rows(batch.labels.size());
  for (std::size_t i = 0; i < batch.labels.size(); ++i) rows[i] = prior_row(batch.labels[i]);
  Var pmu = gather_rows(t.prior_mu, rows);             // N x m
  Var plogsig = gather_rows(t.prior_logsigma, rows);   // N x 1

  Var term_log = add_colvec(scale(parts.logsigma, -1.0), plogsig);
  Var sigma2 = vexp(scale(parts.logsigma, 2.0));
  Var diff = sub(parts.mu, pmu);
  Var quad = add(sigma2, hadamard(diff, diff));
  Var inv_2psig2 = scale(vexp(scale(plogsig, -2.0)), 0.5);  // N x 1
  Var kl = add_scalar(add(term_log, mul_colvec(quad, inv_2psig2)), -0.5);

  parts.loss = reduce_mean(add(recon, row_sums(kl)));
  return parts;
}

Var GenerativeModel::elbo_loss(const VaeTape& t, const GenBatch& batch, RngState& rng) const {
  return elbo_parts(t, batch, rng).loss;
}

Var GenerativeModel::combined_generative_loss(const VaeTape& t, const GenBatch& current,
                                              const GenBatch& replay, RngState& rng) const {
  RngState rng_current = rng;
  Var loss = elbo_loss(t, current, rng_current);
  if (!replay.empty()) {
    RngState rng_replay = rng;
    loss = add(loss, elbo_loss(t, replay, rng_replay));
  }
  return loss;
}

GenBatch GenerativeModel::decode_prior_samples(const std::vector<int>& labels,
                                               const std::vector<int>& tasks,
                                               RngState& rng) const {
  const int n = int(labels.size());
  const int m = cfg_.latent_dim;
  Matrix eps = sample_gaussian(n, m, rng);
  Matrix z(n, m);
  for (int i = 0; i < n; ++i) {
    const int row = prior_row(labels[i]);
    const double sigma = std::exp(prior_logsigma_.value.data[row]);
    const double* mu = prior_mu_.value.row_ptr(row);
    for (int d = 0; d < m; ++d) z.at(i, d) = mu[d] + sigma * eps.at(i, d);
  }
  Matrix means = sigmoid_elem(decode_eval(z, labels, tasks));
  GenBatch out;
  if (cfg_.binary_replay_pixels) {
    Matrix pix(means.rows, means.cols);
    for (std::int64_t i = 0; i < means.size(); ++i)
      pix.data[i] = rng.next_double() < means.data[i] ? 1.0 : 0.0;
    out.x = std::move(pix);
  } else {
    out.x = std::move(means);
  }
  out.labels = labels;
  out.tasks = tasks;
  return out;
}

GenBatch GenerativeModel::sample_replay(const std::vector<ReplayContext>& prev, int n,
                                        RngState& rng) const {
  if (prev.empty()) throw ParameterError("sample_replay: empty context set");
  std::vector<int> labels(n), tasks(n);
  for (int i = 0; i < n; ++i) {
    const auto& ctx = prev[rng.next_below(prev.size())];
    labels[i] = ctx.class_id;
    tasks[i] = ctx.task_id;
  }
  if (n == 0) {
    GenBatch out;
    out.x = Matrix(0, cfg_.input_dim);
    return out;
  }
  return decode_prior_samples(labels, tasks, rng);
}

GenBatch GenerativeModel::generate_coreset(int task_id, std::vector<int> classes,
                                           int n_per_class, RngState& rng) const {
  if (classes.empty()) throw ParameterError("generate_coreset: empty class set");
  std::sort(classes.begin(), classes.end());
  std::vector<int> labels, tasks;
  labels.reserve(classes.size() * n_per_class);
  for (int c : classes) {
    prior_row(c);  // context check up front
    for (int i = 0; i < n_per_class; ++i) {
      labels.push_back(c);
      tasks.push_back(task_id);
    }
  }
  if (labels.empty()) {
    GenBatch out;
    out.x = Matrix(0, cfg_.input_dim);
    return out;
  }
  return decode_prior_samples(labels, tasks, rng);
}

void GenerativeModel::encode_eval(const Matrix& x, Matrix* mu, Matrix* logsigma,
                                  Matrix* hidden) const {
  if (x.cols != cfg_.input_dim) throw DimensionError("encode_eval: input width mismatch");
  Matrix h1 = relu(add_rowvec(matmul(x, enc_w1_.value), enc_b1_.value));
  Matrix h2 = relu(add_rowvec(matmul(h1, enc_w2_.value), enc_b2_.value));
  if (hidden) *hidden = h2;
  if (mu || logsigma) {
    Matrix head = add_rowvec(matmul(h2, enc_wh_.value), enc_bh_.value);
    const int m = cfg_.latent_dim;
    if (mu) {
      Matrix out(head.rows, m);
      for (int r = 0; r < head.rows; ++r)
        std::copy(head.row_ptr(r), head.row_ptr(r) + m, out.row_ptr(r));
      *mu = std::move(out);
    }
    if (logsigma) {
      Matrix out(head.rows, m);
      for (int r = 0; r < head.rows; ++r)
        std::copy(head.row_ptr(r) + m, head.row_ptr(r) + 2 * m, out.row_ptr(r));
      *logsigma = std::move(out);
    }
  }
}

Matrix GenerativeModel::hidden_eval(const Matrix& x) const {
  Matrix hidden;
  encode_eval(x, nullptr, nullptr, &hidden);
  return hidden;
}

Matrix GenerativeModel::decode_eval(const Matrix& z, const std::vector<int>& labels,
                                    const std::vector<int>& tasks) const {
  if (z.rows != int(labels.size()) || labels.size() != tasks.size())
    throw DimensionError("decode_eval: z/labels/tasks size mismatch");
  Matrix input(z.rows, z.cols + cfg_.num_classes);
  Matrix onehot = onehot_labels(labels);
  for (int r = 0; r < z.rows; ++r) {
    std::copy(z.row_ptr(r), z.row_ptr(r) + z.cols, input.row_ptr(r));
    std::copy(onehot.row_ptr(r), onehot.row_ptr(r) + cfg_.num_classes,
              input.row_ptr(r) + z.cols);
  }
  Matrix d1 = relu(add_rowvec(matmul(input, dec_w1_.value), dec_b1_.value));
  d1 = hadamard(d1, gate_batch(labels, tasks, 0));
  Matrix d2 = relu(add_rowvec(matmul(d1, dec_w2_.value), dec_b2_.value));
  d2 = hadamard(d2, gate_batch(labels, tasks, 1));
  return add_rowvec(matmul(d2, dec_w3_.value), dec_b3_.value);
}

std::vector<Param*> GenerativeModel::params() {
  return {&enc_w1_, &enc_b1_, &enc_w2_, &enc_b2_, &enc_wh_, &enc_bh_,
          &dec_w1_, &dec_b1_, &dec_w2_, &dec_b2_, &dec_w3_, &dec_b3_,
          &prior_mu_, &prior_logsigma_};
}

std::vector<const Param*> GenerativeModel::params() const {
  auto mutable_params = const_cast<GenerativeModel*>(this)->params();
  return {mutable_params.begin(), mutable_params.end()};
}

void GenerativeModel::restore_registries(std::map<int, int> class_rows,
                                         std::map<int, std::vector<Matrix>> gates) {
  class_rows_ = std::move(class_rows);
  gates_ = std::move(gates);
}

}  // namespace gkcl
