#include "gkcl/data.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace gkcl {

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ParseError("cannot open file: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in, const std::string& path) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK)
    throw ParseError("gzip init failed: " + path);
  std::vector<std::uint8_t> out;
  out.reserve(in.size() * 4);
  std::uint8_t buf[1 << 16];
  zs.next_in = const_cast<std::uint8_t*>(in.data());
  zs.avail_in = uInt(in.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = buf;
    zs.avail_out = sizeof(buf);
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw ParseError("gzip decompression failed: " + path);
    }
    out.insert(out.end(), buf, buf + (sizeof(buf) - zs.avail_out));
  }
  inflateEnd(&zs);
  return out;
}

std::vector<std::uint8_t> read_maybe_gzipped(const std::string& path) {
  auto bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) return gunzip(bytes, path);
  return bytes;
}

std::uint32_t read_u32be(const std::vector<std::uint8_t>& b, std::size_t off,
                         const std::string& path) {
  if (off + 4 > b.size()) throw ParseError("truncated IDX header: " + path);
  return (std::uint32_t(b[off]) << 24) | (std::uint32_t(b[off + 1]) << 16) |
         (std::uint32_t(b[off + 2]) << 8) | std::uint32_t(b[off + 3]);
}

}  // namespace

ImageDataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = read_maybe_gzipped(images_path);
  const auto lab = read_maybe_gzipped(labels_path);

  if (read_u32be(img, 0, images_path) != 0x00000803u)
    throw ParseError("bad image magic (expected 0x00000803): " + images_path);
  if (read_u32be(lab, 0, labels_path) != 0x00000801u)
    throw ParseError("bad label magic (expected 0x00000801): " + labels_path);

  const std::uint32_t n_img = read_u32be(img, 4, images_path);
  const std::uint32_t rows = read_u32be(img, 8, images_path);
  const std::uint32_t cols = read_u32be(img, 12, images_path);
  const std::uint32_t n_lab = read_u32be(lab, 4, labels_path);
  if (n_img != n_lab)
    throw ParseError("image/label count mismatch: " + std::to_string(n_img) + " vs " +
                     std::to_string(n_lab));
  const std::size_t pixels = std::size_t(n_img) * rows * cols;
  if (img.size() != 16 + pixels) throw ParseError("truncated image payload: " + images_path);
  if (lab.size() != 8 + n_lab) throw ParseError("truncated label payload: " + labels_path);

  ImageDataset ds;
  ds.img_rows = int(rows);
  ds.img_cols = int(cols);
  ds.images = Matrix(int(n_img), int(rows * cols));
  for (std::size_t i = 0; i < pixels; ++i) ds.images.data[i] = double(img[16 + i]) / 255.0;
  ds.labels.resize(n_lab);
  int max_label = 0;
  for (std::uint32_t i = 0; i < n_lab; ++i) {
    ds.labels[i] = int(lab[8 + i]);
    max_label = std::max(max_label, ds.labels[i]);
  }
  ds.num_classes = max_label + 1;
  return ds;
}

void save_idx(const ImageDataset& ds, const std::string& images_path,
              const std::string& labels_path) {
  auto write_u32be = [](std::ofstream& f, std::uint32_t v) {
    const std::uint8_t b[4] = {std::uint8_t(v >> 24), std::uint8_t(v >> 16),
                               std::uint8_t(v >> 8), std::uint8_t(v)};
    f.write(reinterpret_cast<const char*>(b), 4);
  };
  std::ofstream fi(images_path, std::ios::binary);
  if (!fi) throw ParseError("cannot write: " + images_path);
  write_u32be(fi, 0x00000803u);
  write_u32be(fi, std::uint32_t(ds.size()));
  write_u32be(fi, std::uint32_t(ds.img_rows));
  write_u32be(fi, std::uint32_t(ds.img_cols));
  for (double v : ds.images.data)
    fi.put(char(std::uint8_t(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));

  std::ofstream fl(labels_path, std::ios::binary);
  if (!fl) throw ParseError("cannot write: " + labels_path);
  write_u32be(fl, 0x00000801u);
  write_u32be(fl, std::uint32_t(ds.labels.size()));
  for (int l : ds.labels) fl.put(char(std::uint8_t(l)));
}

ImageDataset subsample(const ImageDataset& ds, int n, RngState& rng) {
  if (n >= ds.size()) return ds;
  std::vector<int> perm = sample_permutation(ds.size(), rng);
  ImageDataset out;
  out.num_classes = ds.num_classes;
  out.img_rows = ds.img_rows;
  out.img_cols = ds.img_cols;
  out.images = Matrix(n, ds.images.cols);
  out.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    std::copy(ds.images.row_ptr(perm[i]), ds.images.row_ptr(perm[i]) + ds.images.cols,
              out.images.row_ptr(i));
    out.labels[i] = ds.labels[perm[i]];
  }
  return out;
}

Matrix apply_pixel_permutation(const Matrix& images, const std::vector<int>& perm) {
  if (int(perm.size()) != images.cols)
    throw DimensionError("apply_pixel_permutation: permutation length mismatch");
  Matrix out(images.rows, images.cols);
  for (int r = 0; r < images.rows; ++r) {
    const double* in = images.row_ptr(r);
    double* o = out.row_ptr(r);
    for (int c = 0; c < images.cols; ++c) o[c] = in[perm[c]];
  }
  return out;
}

Matrix rotate_images(const Matrix& images, int img_rows, int img_cols, double degrees) {
  if (img_rows * img_cols != images.cols)
    throw DimensionError("rotate_images: image shape mismatch");
  if (degrees == 0.0) return images;
  const double theta = degrees * std::numbers::pi / 180.0;
  const double ct = std::cos(theta), st = std::sin(theta);
  const double cy = (img_rows - 1) / 2.0, cx = (img_cols - 1) / 2.0;
  Matrix out(images.rows, images.cols);
#pragma omp parallel for schedule(static)
  for (int n = 0; n < images.rows; ++n) {
    const double* in = images.row_ptr(n);
    double* o = out.row_ptr(n);
    for (int r = 0; r < img_rows; ++r) {
      for (int c = 0; c < img_cols; ++c) {
        const double v = in[r * img_cols + c];
        if (v == 0.0) continue;
        const double x = c - cx, y = r - cy;
        const double xr = ct * x - st * y + cx;
        const double yr = st * x + ct * y + cy;
        const int c0 = int(std::floor(xr)), r0 = int(std::floor(yr));
        const double fx = xr - c0, fy = yr - r0;
        auto put = [&](int rr, int cc, double w) {
          if (rr >= 0 && rr < img_rows && cc >= 0 && cc < img_cols)
            o[rr * img_cols + cc] += v * w;
        };
        put(r0, c0, (1 - fx) * (1 - fy));
        put(r0, c0 + 1, fx * (1 - fy));
        put(r0 + 1, c0, (1 - fx) * fy);
        put(r0 + 1, c0 + 1, fx * fy);
      }
    }
  }
  for (auto& v : out.data) v = std::clamp(v, 0.0, 1.0);
  return out;
}

namespace {

std::vector<int> identity_classes(int n) {
  std::vector<int> c(n);
  for (int i = 0; i < n; ++i) c[i] = i;
  return c;
}

}  // namespace

TaskStream permuted_stream(const ImageDataset& train, const ImageDataset& test, int T,
                           std::uint64_t seed, bool identity_first) {
  if (T < 1) throw ParameterError("permuted_stream: T must be >= 1");
  TaskStream stream;
  stream.scenario = Scenario::domain_incremental;
  stream.input_dim = train.images.cols;
  stream.num_global_classes = train.num_classes;
  RngState root(seed);
  for (int t = 1; t <= T; ++t) {
    TaskData task;
    task.task_id = t;
    task.classes = identity_classes(train.num_classes);
    if (identity_first && t == 1) {
      task.train = train;
      task.test = test;
      task.transform = "permutation identity";
    } else {
      RngState trng = root.split(std::uint64_t(t));
      std::vector<int> perm = sample_permutation(train.images.cols, trng);
      task.train = train;
      task.test = test;
      task.train.images = apply_pixel_permutation(train.images, perm);
      task.test.images = apply_pixel_permutation(test.images, perm);
      task.transform = "permutation seed=" + std::to_string(trng.seed());
    }
    stream.tasks.push_back(std::move(task));
  }
  return stream;
}

TaskStream rotated_stream(const ImageDataset& train, const ImageDataset& test, int T,
                          std::uint64_t seed) {
  if (T < 1) throw ParameterError("rotated_stream: T must be >= 1");
  TaskStream stream;
  stream.scenario = Scenario::domain_incremental;
  stream.input_dim = train.images.cols;
  stream.num_global_classes = train.num_classes;
  RngState root(seed);
  for (int t = 1; t <= T; ++t) {
    RngState trng = root.split(std::uint64_t(t));
    const double degrees = trng.next_double() * 180.0;
    TaskData task;
    task.task_id = t;
    task.classes = identity_classes(train.num_classes);
    task.train = train;
    task.test = test;
    task.train.images = rotate_images(train.images, train.img_rows, train.img_cols, degrees);
    task.test.images = rotate_images(test.images, test.img_rows, test.img_cols, degrees);
    task.transform = "rotation degrees=" + std::to_string(degrees);
    stream.tasks.push_back(std::move(task));
  }
  return stream;
}

TaskStream split_stream(const ImageDataset& train, const ImageDataset& test,
                        int classes_per_task, std::uint64_t seed) {
  const int C = train.num_classes;
  if (classes_per_task < 1 || classes_per_task > C)
    throw ParameterError("split_stream: classes_per_task must be in [1, num_classes]");
  RngState rng(seed);
  std::vector<int> order = sample_permutation(C, rng);

  TaskStream stream;
  stream.scenario = Scenario::task_incremental;
  stream.input_dim = train.images.cols;
  stream.num_global_classes = C;

  auto select = [](const ImageDataset& ds, const std::vector<int>& classes) {
    std::vector<int> local_of(ds.num_classes, -1);
    for (std::size_t i = 0; i < classes.size(); ++i) local_of[classes[i]] = int(i);
    std::vector<int> rows;
    for (int r = 0; r < ds.size(); ++r)
      if (local_of[ds.labels[r]] >= 0) rows.push_back(r);
    ImageDataset out;
    out.num_classes = int(classes.size());
    out.img_rows = ds.img_rows;
    out.img_cols = ds.img_cols;
    out.images = Matrix(int(rows.size()), ds.images.cols);
    out.labels.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::copy(ds.images.row_ptr(rows[i]), ds.images.row_ptr(rows[i]) + ds.images.cols,
                out.images.row_ptr(int(i)));
      out.labels[i] = local_of[ds.labels[rows[i]]];
    }
    return out;
  };

  int t = 1;
  for (int start = 0; start < C; start += classes_per_task, ++t) {
    const int end = std::min(start + classes_per_task, C);
    TaskData task;
    task.task_id = t;
    task.classes.assign(order.begin() + start, order.begin() + end);
    task.train = select(train, task.classes);
    task.test = select(test, task.classes);
    std::string desc = "classes";
    for (int c : task.classes) desc += " " + std::to_string(c);
    task.transform = desc;
    stream.tasks.push_back(std::move(task));
  }
  return stream;
}

double gaussian_blob_bayes_accuracy(int classes, double separation, double sigma) {
  if (classes < 2) return 1.0;
  if (!(sigma > 0.0)) return separation > 0.0 ? 1.0 : 1.0 / classes;
  // Correct classification probability for equidistant isotropic Gaussians:
  // E_u[ Phi(u + d/(sqrt(2) sigma))^(C-1) ],  d = separation.
  const double shift = separation / (std::numbers::sqrt2 * sigma);
  auto phi = [](double u) { return std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi); };
  auto Phi = [](double u) { return 0.5 * std::erfc(-u / std::numbers::sqrt2); };
  const int n = 4800;  // Simpson panels over [-12, 12]
  const double a = -12.0, b = 12.0, h = (b - a) / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double u = a + i * h;
    const double f = phi(u) * std::pow(Phi(u + shift), classes - 1);
    s += f * (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0));
  }
  return std::min(1.0, s * h / 3.0);
}

namespace {

// Orthonormal pattern directions for one task's class means.
std::vector<std::vector<double>> pattern_directions(const SyntheticSpec& spec, int task,
                                                    RngState& rng) {
  const int C = spec.classes, D = spec.dim;
  if (C > D) throw ParameterError("synthetic_stream: classes must not exceed dim");
  std::vector<std::vector<double>> u(C, std::vector<double>(D, 0.0));
  switch (spec.transform) {
    case SyntheticSpec::Transform::none:
      for (int c = 0; c < C; ++c) u[c][c] = 1.0;
      break;
    case SyntheticSpec::Transform::conflict:
      for (int c = 0; c < C; ++c) u[c][(c + task - 1) % C] = 1.0;
      break;
    case SyntheticSpec::Transform::rotate: {
      // Gram-Schmidt on Gaussian draws.
      for (int c = 0; c < C; ++c) {
        for (int d = 0; d < D; ++d) u[c][d] = rng.next_gaussian();
        for (int p = 0; p < c; ++p) {
          double dot = 0.0;
          for (int d = 0; d < D; ++d) dot += u[c][d] * u[p][d];
          for (int d = 0; d < D; ++d) u[c][d] -= dot * u[p][d];
        }
        double norm = 0.0;
        for (int d = 0; d < D; ++d) norm += u[c][d] * u[c][d];
        norm = std::sqrt(norm);
        if (norm < 1e-9) throw NumericError("synthetic_stream: degenerate pattern draw");
        for (int d = 0; d < D; ++d) u[c][d] /= norm;
      }
      break;
    }
  }
  return u;
}

ImageDataset blob_samples(const SyntheticSpec& spec,
                          const std::vector<std::vector<double>>& u, int per_class,
                          RngState& rng) {
  const int C = spec.classes, D = spec.dim;
  const double amp = spec.separation / std::numbers::sqrt2;
  ImageDataset ds;
  ds.num_classes = C;
  ds.img_rows = 1;
  ds.img_cols = D;
  ds.images = Matrix(C * per_class, D);
  ds.labels.resize(C * per_class);
  int row = 0;
  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < per_class; ++i, ++row) {
      double* p = ds.images.row_ptr(row);
      for (int d = 0; d < D; ++d) {
        const double mean = 0.5 + amp * u[c][d];
        p[d] = std::clamp(mean + spec.sigma * rng.next_gaussian(), 0.0, 1.0);
      }
      ds.labels[row] = c;
    }
  }
  return ds;
}

}  // namespace

TaskStream synthetic_stream(const SyntheticSpec& spec, int T, std::uint64_t seed) {
  if (T < 1) throw ParameterError("synthetic_stream: T must be >= 1");
  TaskStream stream;
  stream.scenario = Scenario::domain_incremental;
  stream.input_dim = spec.dim;
  stream.num_global_classes = spec.classes;
  const double bayes = gaussian_blob_bayes_accuracy(spec.classes, spec.separation, spec.sigma);
  RngState root(seed);
  for (int t = 1; t <= T; ++t) {
    RngState trng = root.split(std::uint64_t(t));
    RngState pattern_rng = trng.split(1), train_rng = trng.split(2), test_rng = trng.split(3);
    auto u = pattern_directions(spec, t, pattern_rng);
    TaskData task;
    task.task_id = t;
    task.classes = identity_classes(spec.classes);
    task.train = blob_samples(spec, u, spec.train_per_class, train_rng);
    task.test = blob_samples(spec, u, spec.test_per_class, test_rng);
    task.transform = "blobs task=" + std::to_string(t);
    task.bayes_accuracy = bayes;
    stream.tasks.push_back(std::move(task));
  }
  return stream;
}

}  // namespace gkcl
