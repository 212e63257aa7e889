#include "gkcl/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace gkcl {

namespace {

constexpr char kMagic[4] = {'G', 'K', 'C', 'L'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& o, std::uint32_t v) { o.write(reinterpret_cast<char*>(&v), 4); }
void put_u64(std::ostream& o, std::uint64_t v) { o.write(reinterpret_cast<char*>(&v), 8); }
void put_i32(std::ostream& o, std::int32_t v) { o.write(reinterpret_cast<char*>(&v), 4); }
void put_f64(std::ostream& o, double v) { o.write(reinterpret_cast<char*>(&v), 8); }

void put_string(std::ostream& o, const std::string& s) {
  put_u32(o, std::uint32_t(s.size()));
  o.write(s.data(), std::streamsize(s.size()));
}

void put_matrix(std::ostream& o, const Matrix& m) {
  put_i32(o, m.rows);
  put_i32(o, m.cols);
  o.write(reinterpret_cast<const char*>(m.data.data()),
          std::streamsize(m.data.size() * sizeof(double)));
}

struct Reader {
  std::ifstream f;
  std::string path;

  void read(char* dst, std::streamsize n) {
    f.read(dst, n);
    if (!f) throw ParseError("truncated checkpoint: " + path);
  }
  std::uint32_t u32() { std::uint32_t v; read(reinterpret_cast<char*>(&v), 4); return v; }
  std::uint64_t u64() { std::uint64_t v; read(reinterpret_cast<char*>(&v), 8); return v; }
  std::int32_t i32() { std::int32_t v; read(reinterpret_cast<char*>(&v), 4); return v; }
  double f64() { double v; read(reinterpret_cast<char*>(&v), 8); return v; }
  std::string str() {
    std::string s(u32(), '\0');
    read(s.data(), std::streamsize(s.size()));
    return s;
  }
  Matrix matrix() {
    const int rows = i32(), cols = i32();
    Matrix m(rows, cols);
    read(reinterpret_cast<char*>(m.data.data()),
         std::streamsize(m.data.size() * sizeof(double)));
    return m;
  }
};

void put_train_config(std::ostream& o, const TrainConfig& c) {
  put_i32(o, c.vae.input_dim);
  put_i32(o, c.vae.hidden1);
  put_i32(o, c.vae.hidden2);
  put_i32(o, c.vae.latent_dim);
  put_i32(o, c.vae.num_classes);
  put_f64(o, c.vae.gate_active_fraction);
  put_i32(o, c.vae.binary_replay_pixels ? 1 : 0);
  put_f64(o, c.vae_lr);
  put_i32(o, c.vae_batch);
  put_i32(o, c.replay_size);
  put_i32(o, c.vae_iters);
  put_f64(o, c.adam_beta1);
  put_f64(o, c.adam_beta2);
  put_f64(o, c.adam_eps);
  put_f64(o, c.lambda_con);
  put_f64(o, c.temperature);
  put_i32(o, c.proj_dim);
  put_i32(o, c.coreset_train);
  put_i32(o, c.coreset_infer);
  put_i32(o, c.uniform_coreset ? 1 : 0);
  put_i32(o, c.use_kernel_network ? 1 : 0);
  put_i32(o, c.knet_width);
  put_f64(o, c.knet_lr);
  put_f64(o, c.knet_lr_decay);
  put_f64(o, c.knet_momentum);
  put_f64(o, c.knet_dropout);
  put_i32(o, c.knet_batch);
  put_i32(o, int(c.kernel.kind));
  put_i32(o, c.kernel.degree);
  put_f64(o, c.kernel.offset);
  put_f64(o, c.kernel.bandwidth);
  put_f64(o, c.ridge.lambda);
  put_i32(o, c.ridge.jitter_allowed ? 1 : 0);
  put_f64(o, c.baseline_lr);
  put_f64(o, c.baseline_momentum);
}

TrainConfig read_train_config(Reader& r) {
  TrainConfig c;
  c.vae.input_dim = r.i32();
  c.vae.hidden1 = r.i32();
  c.vae.hidden2 = r.i32();
  c.vae.latent_dim = r.i32();
  c.vae.num_classes = r.i32();
  c.vae.gate_active_fraction = r.f64();
  c.vae.binary_replay_pixels = r.i32() != 0;
  c.vae_lr = r.f64();
  c.vae_batch = r.i32();
  c.replay_size = r.i32();
  c.vae_iters = r.i32();
  c.adam_beta1 = r.f64();
  c.adam_beta2 = r.f64();
  c.adam_eps = r.f64();
  c.lambda_con = r.f64();
  c.temperature = r.f64();
  c.proj_dim = r.i32();
  c.coreset_train = r.i32();
  c.coreset_infer = r.i32();
  c.uniform_coreset = r.i32() != 0;
  c.use_kernel_network = r.i32() != 0;
  c.knet_width = r.i32();
  c.knet_lr = r.f64();
  c.knet_lr_decay = r.f64();
  c.knet_momentum = r.f64();
  c.knet_dropout = r.f64();
  c.knet_batch = r.i32();
  c.kernel.kind = KernelKind(r.i32());
  c.kernel.degree = r.i32();
  c.kernel.offset = r.f64();
  c.kernel.bandwidth = r.f64();
  c.ridge.lambda = r.f64();
  c.ridge.jitter_allowed = r.i32() != 0;
  c.baseline_lr = r.f64();
  c.baseline_momentum = r.f64();
  return c;
}

}  // namespace

void save_checkpoint(const ContinualLearner& learner, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot write checkpoint: " + path);
  f.write(kMagic, 4);
  put_u32(f, kVersion);
  put_u64(f, learner.seed());
  put_i32(f, learner.scenario() == Scenario::task_incremental ? 1 : 0);
  put_i32(f, learner.tasks_completed());
  put_train_config(f, learner.config());

  const auto gen_params = learner.generative().params();
  std::vector<const Param*> all(gen_params.begin(), gen_params.end());
  const Projection& proj = learner.projection();
  all.push_back(&proj.w);
  all.push_back(&proj.b);
  const KernelNetwork& knet = learner.kernel_network();
  all.push_back(&knet.w1);
  all.push_back(&knet.b1);
  all.push_back(&knet.w2);
  all.push_back(&knet.b2);
  put_u32(f, std::uint32_t(all.size()));
  for (const Param* p : all) {
    put_string(f, p->name);
    put_matrix(f, p->value);
  }

  const auto& class_rows = learner.generative().class_rows();
  put_u32(f, std::uint32_t(class_rows.size()));
  for (const auto& [cls, row] : class_rows) {
    put_i32(f, cls);
    put_i32(f, row);
  }
  const auto& gates = learner.generative().gate_table();
  put_u32(f, std::uint32_t(gates.size()));
  for (const auto& [ctx, masks] : gates) {
    put_i32(f, ctx);
    put_u32(f, std::uint32_t(masks.size()));
    for (const Matrix& m : masks) put_matrix(f, m);
  }
  const auto& registry = learner.registry();
  put_u32(f, std::uint32_t(registry.size()));
  for (const auto& [task, classes] : registry) {
    put_i32(f, task);
    put_u32(f, std::uint32_t(classes.size()));
    for (int c : classes) put_i32(f, c);
  }
}

ContinualLearner load_checkpoint(const std::string& path) {
  Reader r;
  r.path = path;
  r.f.open(path, std::ios::binary);
  if (!r.f) throw ParseError("cannot open checkpoint: " + path);
  char magic[4];
  r.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw ParseError("bad checkpoint magic: " + path);
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  const std::uint64_t seed = r.u64();
  const Scenario scenario = r.i32() != 0 ? Scenario::task_incremental
                                         : Scenario::domain_incremental;
  const int tasks_completed = r.i32();
  const TrainConfig cfg = read_train_config(r);

  ContinualLearner learner(cfg, scenario, seed);
  learner.set_tasks_completed(tasks_completed);

  auto gen_params = learner.generative().params();
  std::vector<Param*> all(gen_params.begin(), gen_params.end());
  Projection& proj = learner.projection();
  all.push_back(&proj.w);
  all.push_back(&proj.b);
  KernelNetwork& knet = learner.kernel_network();
  all.push_back(&knet.w1);
  all.push_back(&knet.b1);
  all.push_back(&knet.w2);
  all.push_back(&knet.b2);
  const std::uint32_t n_params = r.u32();
  if (n_params != all.size()) throw ParseError("checkpoint parameter count mismatch");
  for (Param* p : all) {
    const std::string name = r.str();
    if (name != p->name) throw ParseError("checkpoint parameter order mismatch: " + name);
    p->value = r.matrix();
  }

  std::map<int, int> class_rows;
  const std::uint32_t n_classes = r.u32();
  for (std::uint32_t i = 0; i < n_classes; ++i) {
    const int cls = r.i32();
    class_rows[cls] = r.i32();
  }
  std::map<int, std::vector<Matrix>> gates;
  const std::uint32_t n_gates = r.u32();
  for (std::uint32_t i = 0; i < n_gates; ++i) {
    const int ctx = r.i32();
    const std::uint32_t n_layers = r.u32();
    std::vector<Matrix> masks;
    for (std::uint32_t l = 0; l < n_layers; ++l) masks.push_back(r.matrix());
    gates[ctx] = std::move(masks);
  }
  learner.generative().restore_registries(std::move(class_rows), std::move(gates));

  std::map<int, std::vector<int>> registry;
  const std::uint32_t n_tasks = r.u32();
  for (std::uint32_t i = 0; i < n_tasks; ++i) {
    const int task = r.i32();
    const std::uint32_t n = r.u32();
    std::vector<int> classes(n);
    for (auto& c : classes) c = r.i32();
    registry[task] = std::move(classes);
  }
  learner.restore_registry(std::move(registry));
  return learner;
}

}  // namespace gkcl
