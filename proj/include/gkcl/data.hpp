#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gkcl/genmodel.hpp"
#include "gkcl/matrix.hpp"
#include "gkcl/rng.hpp"

namespace gkcl {

struct ImageDataset {
  Matrix images;  // N x (img_rows*img_cols), values in [0,1]
  std::vector<int> labels;
  int num_classes = 0;
  int img_rows = 0;
  int img_cols = 0;

  int size() const { return images.rows; }
};

// One task of a continual stream. Dataset labels are local (within-task)
// indices; classes maps a local index back to the global class id.
struct TaskData {
  int task_id = 0;  // 1-based, consecutive
  ImageDataset train, test;
  std::vector<int> classes;
  std::string transform;
  double bayes_accuracy = -1.0;  // synthetic streams record the analytic value
};

struct TaskStream {
  Scenario scenario = Scenario::domain_incremental;
  int input_dim = 0;
  int num_global_classes = 0;
  std::vector<TaskData> tasks;
};

// IDX files, raw or gzipped (detected from the leading bytes). Image and
// label counts are cross-checked.
ImageDataset load_idx(const std::string& images_path, const std::string& labels_path);
void save_idx(const ImageDataset& ds, const std::string& images_path,
              const std::string& labels_path);

ImageDataset subsample(const ImageDataset& ds, int n, RngState& rng);

// out column j takes input column perm[j] of each image row.
Matrix apply_pixel_permutation(const Matrix& images, const std::vector<int>& perm);
// Mass-preserving rotation about the image center: each source pixel's value
// is distributed over its four rotated neighbors with bilinear weights, so
// total intensity never grows; output clamped to [0,1].
Matrix rotate_images(const Matrix& images, int img_rows, int img_cols, double degrees);

TaskStream permuted_stream(const ImageDataset& train, const ImageDataset& test, int T,
                           std::uint64_t seed, bool identity_first = false);
TaskStream rotated_stream(const ImageDataset& train, const ImageDataset& test, int T,
                          std::uint64_t seed);
TaskStream split_stream(const ImageDataset& train, const ImageDataset& test,
                        int classes_per_task, std::uint64_t seed);

// Per-class isotropic Gaussian blobs in [0,1]^dim with a known Bayes-optimal
// accuracy; the oracle stream for fast end-to-end tests.
struct SyntheticSpec {
  int dim = 16;
  int classes = 2;
  int train_per_class = 200;
  int test_per_class = 200;
  double separation = 0.4;  // Euclidean distance between class means
  double sigma = 0.05;
  enum class Transform {
    none,     // identical blob layout in every task
    rotate,   // per-task random orthonormal pattern directions
    conflict  // class->pattern assignment shifts by one each task
  };
  Transform transform = Transform::rotate;
};

TaskStream synthetic_stream(const SyntheticSpec& spec, int T, std::uint64_t seed);

// Exact accuracy of the Bayes rule for `classes` equidistant isotropic
// Gaussians at the given mean separation (1-D quadrature).
double gaussian_blob_bayes_accuracy(int classes, double separation, double sigma);

// Procedurally rendered 10-class digit glyph corpus in the MNIST shape
// (28x28 grayscale, anti-aliased strokes under random affine jitter). Stands
// in for the real digits when no IDX files are available.
ImageDataset render_digit_dataset(int n_images, std::uint64_t seed);

}  // namespace gkcl
