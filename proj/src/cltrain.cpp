#include "gkcl/cltrain.hpp"

#include <chrono>
#include <cmath>
#include <string>

namespace gkcl {

namespace {

// Child-stream labels per run phase; every phase owns an isolated stream so
// that classifier-side configuration can never shift the generative
// trajectory for a given seed.
constexpr std::uint64_t kInitGen = 1, kInitProj = 2, kInitKnet = 3, kInitBaseline = 4;
constexpr std::uint64_t kStep1 = 0x1000, kStep2 = 0x2000, kStep3 = 0x3000, kEval = 0x40000;

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

GenBatch make_batch(const TaskData& task, const std::vector<int>& rows) {
  GenBatch b;
  b.x = Matrix(int(rows.size()), task.train.images.cols);
  b.labels.resize(rows.size());
  b.tasks.assign(rows.size(), task.task_id);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(task.train.images.row_ptr(rows[i]),
              task.train.images.row_ptr(rows[i]) + task.train.images.cols,
              b.x.row_ptr(int(i)));
    b.labels[i] = task.classes.at(task.train.labels[rows[i]]);
  }
  return b;
}

Matrix grad_or_zero(const Var& v) {
  if (v.grad().rows != 0) return v.grad();
  return Matrix(v.value().rows, v.value().cols);
}

int argmax_col(const Matrix& m, int col) {
  int best = 0;
  for (int r = 1; r < m.rows; ++r)
    if (m.at(r, col) > m.at(best, col)) best = r;
  return best;
}

}  // namespace

KernelNetwork::KernelNetwork(int in_dim, int width, std::uint64_t seed) {
  RngState rng(seed);
  auto init = [&](int fin, int fout) {
    Matrix w = sample_gaussian(fin, fout, rng);
    const double s = std::sqrt(2.0 / double(fin));
    for (auto& v : w.data) v *= s;
    return w;
  };
  w1 = {"knet.w1", init(in_dim, width)};
  b1 = {"knet.b1", Matrix(1, width)};
  w2 = {"knet.w2", init(width, width)};
  b2 = {"knet.b2", Matrix(1, width)};
}

KernelNetwork::Tape KernelNetwork::bind(bool trainable) {
  auto wrap = [&](Param& p) { return trainable ? Var::param(p.value) : Var::constant(p.value); };
  return {wrap(w1), wrap(b1), wrap(w2), wrap(b2)};
}

Var KernelNetwork::forward(const Tape& t, const Var& h, double dropout_rate, RngState& rng,
                           bool training) const {
  Var h1 = relu(add_rowvec(matmul(h, t.w1), t.b1));
  Var h2 = relu(add_rowvec(matmul(h1, t.w2), t.b2));
  return dropout(h2, dropout_rate, rng, training);
}

Matrix KernelNetwork::forward_eval(const Matrix& h) const {
  Matrix h1 = relu(add_rowvec(matmul(h, w1.value), b1.value));
  return relu(add_rowvec(matmul(h1, w2.value), b2.value));
}

Var softmax_xent_rows(const Var& logits, const std::vector<int>& labels) {
  const int n = logits.value().rows, c = logits.value().cols;
  if (int(labels.size()) != n) throw DimensionError("softmax_xent_rows: label count mismatch");
  Matrix ones = Matrix::filled(n, c, 1.0);
  Matrix onehot(n, c);
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= c)
      throw ParameterError("softmax_xent_rows: label out of range");
    onehot.at(i, labels[i]) = 1.0;
  }
  Var lse = row_logsumexp_masked(logits, ones);
  Var picked = row_sums(hadamard(logits, Var::constant(std::move(onehot))));
  return reduce_mean(sub(lse, picked));
}

ContinualLearner::ContinualLearner(const TrainConfig& cfg, Scenario scenario,
                                   std::uint64_t seed)
    : cfg_(cfg),
      scenario_(scenario),
      seed_(seed),
      gen_(cfg.vae, scenario, RngState(seed).split(kInitGen).seed()),
      proj_(cfg.vae.hidden2, cfg.proj_dim, RngState(seed).split(kInitProj).seed()),
      knet_(cfg.vae.hidden2, cfg.knet_width, RngState(seed).split(kInitKnet).seed()),
      vae_opt_(cfg.vae_lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps),
      knet_opt_(cfg.knet_lr, cfg.knet_momentum) {}

void ContinualLearner::register_task_contexts(const TaskData& task) {
  for (int c : task.classes) gen_.register_class(c);
  if (scenario_ == Scenario::domain_incremental) gen_.register_task_gate(task.task_id);
}

TaskResult ContinualLearner::train_generative(const TaskData& task) {
  if (registry_.count(task.task_id))
    throw ProtocolError("task " + std::to_string(task.task_id) + " already trained");
  if (task.train.size() == 0) throw ParameterError("train_generative: empty task data");

  // Replay covers everything registered before this task.
  std::vector<GenerativeModel::ReplayContext> prev;
  for (const auto& [tid, classes] : registry_)
    for (int c : classes) prev.push_back({tid, c});

  register_task_contexts(task);
  registry_[task.task_id] = task.classes;

  TaskResult result;
  result.task_id = task.task_id;
  const double t_start = now_seconds();
  RngState step1 = RngState(seed_).split(kStep1 + std::uint64_t(task.task_id));
  const int n_train = task.train.size();

  for (int iter = 0; iter < cfg_.vae_iters; ++iter) {
    RngState iter_rng = step1.split(std::uint64_t(iter));
    RngState idx_rng = iter_rng.split(1);
    RngState replay_rng = iter_rng.split(2);
    RngState noise_rng = iter_rng.split(3);

    std::vector<int> rows(cfg_.vae_batch);
    for (auto& r : rows) r = int(idx_rng.next_below(std::uint64_t(n_train)));
    GenBatch current = make_batch(task, rows);
    GenBatch replay;
    replay.x = Matrix(0, cfg_.vae.input_dim);
    if (!prev.empty()) replay = gen_.sample_replay(prev, cfg_.replay_size, replay_rng);

    VaeTape tape = gen_.bind(true);
    Var loss;
    Projection::Tape ptape;
    if (cfg_.lambda_con > 0.0) {
      RngState noise_cur = noise_rng;
      ElboParts cur = gen_.elbo_parts(tape, current, noise_cur);
      Var gen_loss = cur.loss;
      ElboParts rep;
      if (!replay.empty()) {
        RngState noise_rep = noise_rng;
        rep = gen_.elbo_parts(tape, replay, noise_rep);
        gen_loss = add(gen_loss, rep.loss);
      }
      // The paper's augmentation is one auto-encoding pass; the single-sample
      // reconstruction already on the tape is exactly that pass.
      ptape = proj_.bind(true);
      Var s_x = embed_from_hidden(ptape, cur.hidden);
      Var s_hat = embed_from_hidden(ptape, gen_.encode(tape, sigmoid(cur.logits)).hidden);
      std::vector<int> con_labels = current.labels;
      if (!replay.empty()) {
        s_x = concat_rows(s_x, embed_from_hidden(ptape, rep.hidden));
        s_hat = concat_rows(s_hat,
                            embed_from_hidden(ptape, gen_.encode(tape, sigmoid(rep.logits)).hidden));
        con_labels.insert(con_labels.end(), replay.labels.begin(), replay.labels.end());
      }
      std::vector<int> labels2n = con_labels;
      labels2n.insert(labels2n.end(), con_labels.begin(), con_labels.end());
      Var sc = supcon_loss(concat_rows(s_x, s_hat), labels2n, cfg_.temperature);
      loss = add(gen_loss, scale(sc, cfg_.lambda_con));
    } else {
      loss = gen_.combined_generative_loss(tape, current, replay, noise_rng);
    }

    if (iter == 0) result.initial_gen_loss = loss.value().data[0];
    if (iter == cfg_.vae_iters - 1) result.final_gen_loss = loss.value().data[0];
    backward(loss);

    auto gen_params = gen_.params();
    const Var* tape_vars[] = {&tape.enc_w1, &tape.enc_b1, &tape.enc_w2, &tape.enc_b2,
                              &tape.enc_wh, &tape.enc_bh, &tape.dec_w1, &tape.dec_b1,
                              &tape.dec_w2, &tape.dec_b2, &tape.dec_w3, &tape.dec_b3,
                              &tape.prior_mu, &tape.prior_logsigma};
    for (std::size_t i = 0; i < gen_params.size(); ++i)
      vae_opt_.step(*gen_params[i], grad_or_zero(*tape_vars[i]));
    if (cfg_.lambda_con > 0.0) {
      vae_opt_.step(proj_.w, grad_or_zero(ptape.w));
      vae_opt_.step(proj_.b, grad_or_zero(ptape.b));
    }
  }
  result.seconds_generative = now_seconds() - t_start;
  return result;
}

KernelSpec ContinualLearner::resolved_kernel(const Matrix& coreset_features_cols) const {
  KernelSpec spec = cfg_.kernel;
  if (spec.kind == KernelKind::rbf && !(spec.bandwidth > 0.0))
    spec.bandwidth = std::max(median_pairwise_distance(coreset_features_cols), 1e-8);
  return spec;
}

double ContinualLearner::train_classifier(const TaskData& task) {
  if (!registry_.count(task.task_id)) registry_[task.task_id] = task.classes;
  const double lr = cfg_.knet_lr * std::pow(cfg_.knet_lr_decay, double(tasks_completed_));
  ++tasks_completed_;
  if (!cfg_.use_kernel_network) return -1.0;
  knet_opt_.set_lr(lr);

  RngState step2 = RngState(seed_).split(kStep2 + std::uint64_t(task.task_id));
  GenBatch coreset;
  if (cfg_.uniform_coreset) {
    coreset = draw_uniform_coreset(task, cfg_.coreset_train, step2);
    stored_coresets_[task.task_id] = coreset;
  } else {
    coreset = gen_.generate_coreset(task.task_id, task.classes, cfg_.coreset_train, step2);
  }

  std::map<int, int> local_of;
  for (std::size_t i = 0; i < task.classes.size(); ++i) local_of[task.classes[i]] = int(i);
  std::vector<int> coreset_local(coreset.labels.size());
  for (std::size_t i = 0; i < coreset.labels.size(); ++i)
    coreset_local[i] = local_of.at(coreset.labels[i]);
  Matrix y_onehot = one_hot_columns(coreset_local, int(task.classes.size()));

  // Encoder is frozen in this step, so hidden activations are constants.
  Matrix coreset_hidden = gen_.hidden_eval(coreset.x);
  Matrix train_hidden = gen_.hidden_eval(task.train.images);

  RngState step3 = RngState(seed_).split(kStep3 + std::uint64_t(task.task_id));
  RngState shuffle_rng = step3.split(1);
  std::vector<int> order = sample_permutation(task.train.size(), shuffle_rng);

  long correct = 0, seen = 0;
  const int n = task.train.size();
  int step_index = 0;
  for (int start = 0; start < n; start += cfg_.knet_batch, ++step_index) {
    const int end = std::min(start + cfg_.knet_batch, n);
    Matrix qh(end - start, train_hidden.cols);
    std::vector<int> qlabels(end - start);
    for (int i = start; i < end; ++i) {
      std::copy(train_hidden.row_ptr(order[i]), train_hidden.row_ptr(order[i]) + train_hidden.cols,
                qh.row_ptr(i - start));
      qlabels[i - start] = task.train.labels[order[i]];
    }

    RngState drop_rng = step3.split(1000 + std::uint64_t(step_index));
    KernelNetwork::Tape ktape = knet_.bind(true);
    Var f_c = knet_.forward(ktape, Var::constant(coreset_hidden), cfg_.knet_dropout, drop_rng, true);
    Var f_q = knet_.forward(ktape, Var::constant(qh), cfg_.knet_dropout, drop_rng, true);
    Var fc_cols = transpose(f_c);
    Var fq_cols = transpose(f_q);
    KernelSpec spec = resolved_kernel(fc_cols.value());
    Var logits = krr_logits(fc_cols, y_onehot, fq_cols, cfg_.ridge, spec);

    const Matrix& lv = logits.value();
    for (int q = 0; q < lv.cols; ++q) {
      if (argmax_col(lv, q) == qlabels[q]) ++correct;
      ++seen;
    }

    Var loss = softmax_xent_rows(transpose(logits), qlabels);
    backward(loss);
    knet_opt_.step(knet_.w1, grad_or_zero(ktape.w1));
    knet_opt_.step(knet_.b1, grad_or_zero(ktape.b1));
    knet_opt_.step(knet_.w2, grad_or_zero(ktape.w2));
    knet_opt_.step(knet_.b2, grad_or_zero(ktape.b2));
  }
  return seen ? double(correct) / double(seen) : -1.0;
}

TaskResult ContinualLearner::train_task(const TaskData& task) {
  TaskResult result = train_generative(task);
  const double t0 = now_seconds();
  result.classifier_train_accuracy = train_classifier(task);
  result.seconds_classifier = now_seconds() - t0;
  return result;
}

Matrix ContinualLearner::features_eval(const Matrix& x, bool use_kernel_network) const {
  // Chunked so large evaluation sets never materialize huge activations.
  constexpr int kChunk = 2048;
  Matrix out;
  for (int start = 0; start < x.rows; start += kChunk) {
    const int end = std::min(start + kChunk, x.rows);
    Matrix part(end - start, x.cols);
    for (int r = start; r < end; ++r)
      std::copy(x.row_ptr(r), x.row_ptr(r) + x.cols, part.row_ptr(r - start));
    Matrix hidden = gen_.hidden_eval(part);
    Matrix feats = use_kernel_network ? knet_.forward_eval(hidden) : std::move(hidden);
    if (out.rows == 0) {
      out = Matrix(x.rows, feats.cols);
    }
    for (int r = 0; r < feats.rows; ++r)
      std::copy(feats.row_ptr(r), feats.row_ptr(r) + feats.cols, out.row_ptr(start + r));
  }
  return out;
}

GenBatch ContinualLearner::draw_uniform_coreset(const TaskData& task, int per_class,
                                                RngState& rng) const {
  const int C = int(task.classes.size());
  std::vector<int> chosen;
  for (int local = 0; local < C; ++local) {
    std::vector<int> rows;
    for (int r = 0; r < task.train.size(); ++r)
      if (task.train.labels[r] == local) rows.push_back(r);
    if (rows.empty()) throw ParameterError("uniform coreset: class with no samples");
    std::vector<int> perm = sample_permutation(int(rows.size()), rng);
    for (int i = 0; i < std::min<int>(per_class, int(rows.size())); ++i)
      chosen.push_back(rows[perm[i]]);
  }
  return make_batch(task, chosen);
}

GenBatch ContinualLearner::coreset_for(int task_id, const std::vector<int>& classes,
                                       int per_class, RngState& rng) const {
  if (!cfg_.uniform_coreset) return gen_.generate_coreset(task_id, classes, per_class, rng);
  auto it = stored_coresets_.find(task_id);
  if (it == stored_coresets_.end())
    throw ProtocolError("uniform coreset for task " + std::to_string(task_id) + " not stored");
  // Stored memory cannot grow at inference; truncate per class if asked for less.
  const GenBatch& full = it->second;
  std::map<int, int> taken;
  std::vector<int> keep;
  for (int r = 0; r < full.size(); ++r)
    if (taken[full.labels[r]]++ < per_class) keep.push_back(r);
  GenBatch out;
  out.x = Matrix(int(keep.size()), full.x.cols);
  out.labels.resize(keep.size());
  out.tasks.resize(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    std::copy(full.x.row_ptr(keep[i]), full.x.row_ptr(keep[i]) + full.x.cols,
              out.x.row_ptr(int(i)));
    out.labels[i] = full.labels[keep[i]];
    out.tasks[i] = full.tasks[keep[i]];
  }
  return out;
}

double ContinualLearner::evaluate(int task_id, const ImageDataset& test, int coreset_per_class,
                                  RngState rng, bool use_kernel_network) const {
  auto it = registry_.find(task_id);
  if (it == registry_.end())
    throw ProtocolError("evaluate: unknown task " + std::to_string(task_id));
  const std::vector<int>& classes = it->second;
  if (test.size() == 0) throw ParameterError("evaluate: empty test set");

  GenBatch coreset = coreset_for(task_id, classes, coreset_per_class, rng);
  std::map<int, int> local_of;
  for (std::size_t i = 0; i < classes.size(); ++i) local_of[classes[i]] = int(i);
  std::vector<int> coreset_local(coreset.labels.size());
  for (std::size_t i = 0; i < coreset.labels.size(); ++i)
    coreset_local[i] = local_of.at(coreset.labels[i]);

  Matrix fc = transpose(features_eval(coreset.x, use_kernel_network));
  Matrix fq = transpose(features_eval(test.images, use_kernel_network));
  Matrix y_onehot = one_hot_columns(coreset_local, int(classes.size()));
  KernelSpec spec = resolved_kernel(fc);
  Matrix probs = krr_predict(fc, y_onehot, fq, cfg_.ridge, spec);

  long correct = 0;
  for (int q = 0; q < probs.cols; ++q)
    if (argmax_col(probs, q) == test.labels[q]) ++correct;
  return double(correct) / double(test.size());
}

RngState ContinualLearner::eval_rng(int after_task, int task_id) const {
  return RngState(seed_).split(kEval + std::uint64_t(after_task) * 1024 +
                               std::uint64_t(task_id));
}

AccuracyMatrix ContinualLearner::run_sequence(const TaskStream& stream,
                                              std::vector<TaskResult>* results,
                                              const std::function<void(int)>& after_task) {
  if (stream.tasks.empty()) throw ParameterError("run_sequence: empty stream");
  AccuracyMatrix matrix;
  for (const TaskData& task : stream.tasks) {
    TaskResult r = train_task(task);
    if (results) results->push_back(r);
    if (after_task) after_task(task.task_id);
    std::vector<double> row;
    for (int i = 1; i <= task.task_id; ++i)
      row.push_back(evaluate(i, stream.tasks[i - 1].test, cfg_.coreset_infer,
                             eval_rng(task.task_id, i), cfg_.use_kernel_network));
    matrix.append_row(std::move(row));
  }
  return matrix;
}

AccuracyMatrix run_naive_baseline(const TaskStream& stream, const TrainConfig& cfg,
                                  std::uint64_t seed) {
  if (stream.tasks.empty()) throw ParameterError("run_naive_baseline: empty stream");
  const VaeConfig& v = cfg.vae;
  RngState init = RngState(seed).split(kInitBaseline);
  auto he = [&](int fin, int fout) {
    Matrix w = sample_gaussian(fin, fout, init);
    const double s = std::sqrt(2.0 / double(fin));
    for (auto& x : w.data) x *= s;
    return w;
  };
  Param w1{"base.w1", he(v.input_dim, v.hidden1)}, b1{"base.b1", Matrix(1, v.hidden1)};
  Param w2{"base.w2", he(v.hidden1, v.hidden2)}, b2{"base.b2", Matrix(1, v.hidden2)};
  Param w3{"base.w3", he(v.hidden2, v.num_classes)}, b3{"base.b3", Matrix(1, v.num_classes)};
  SgdMomentum opt(cfg.baseline_lr, cfg.baseline_momentum);

  auto forward_eval = [&](const Matrix& x) {
    Matrix h1 = relu(add_rowvec(matmul(x, w1.value), b1.value));
    Matrix h2 = relu(add_rowvec(matmul(h1, w2.value), b2.value));
    return add_rowvec(matmul(h2, w3.value), b3.value);
  };

  AccuracyMatrix matrix;
  for (const TaskData& task : stream.tasks) {
    RngState step = RngState(seed).split(kStep1 + std::uint64_t(task.task_id));
    const int n = task.train.size();
    for (int iter = 0; iter < cfg.vae_iters; ++iter) {
      RngState idx_rng = step.split(std::uint64_t(iter));
      std::vector<int> rows(cfg.vae_batch);
      for (auto& r : rows) r = int(idx_rng.next_below(std::uint64_t(n)));
      GenBatch batch = make_batch(task, rows);

      Var vw1 = Var::param(w1.value), vb1 = Var::param(b1.value);
      Var vw2 = Var::param(w2.value), vb2 = Var::param(b2.value);
      Var vw3 = Var::param(w3.value), vb3 = Var::param(b3.value);
      Var h1 = relu(add_rowvec(matmul(Var::constant(batch.x), vw1), vb1));
      Var h2 = relu(add_rowvec(matmul(h1, vw2), vb2));
      Var logits = add_rowvec(matmul(h2, vw3), vb3);
      Var loss = softmax_xent_rows(logits, batch.labels);
      backward(loss);
      opt.step(w1, grad_or_zero(vw1));
      opt.step(b1, grad_or_zero(vb1));
      opt.step(w2, grad_or_zero(vw2));
      opt.step(b2, grad_or_zero(vb2));
      opt.step(w3, grad_or_zero(vw3));
      opt.step(b3, grad_or_zero(vb3));
    }

    std::vector<double> row;
    for (int i = 1; i <= task.task_id; ++i) {
      const TaskData& prev = stream.tasks[i - 1];
      Matrix logits = forward_eval(prev.test.images);
      long correct = 0;
      for (int r = 0; r < logits.rows; ++r) {
        // restrict the decision to the evaluated task's classes
        int best_local = 0;
        for (std::size_t c = 1; c < prev.classes.size(); ++c)
          if (logits.at(r, prev.classes[c]) > logits.at(r, prev.classes[best_local]))
            best_local = int(c);
        if (best_local == prev.test.labels[r]) ++correct;
      }
      row.push_back(double(correct) / double(prev.test.size()));
    }
    matrix.append_row(std::move(row));
  }
  return matrix;
}

}  // namespace gkcl
