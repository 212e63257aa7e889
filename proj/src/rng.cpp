#include "gkcl/rng.hpp"

#include <cmath>

namespace gkcl {

namespace {

constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

RngState::RngState(std::uint64_t seed) : seed_(seed), state_(seed) {}

std::uint64_t RngState::next_u64() {
  state_ += kGamma;
  return mix64(state_);
}

std::uint64_t RngState::next_below(std::uint64_t n) {
  if (n == 0) throw ParameterError("next_below: n must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return r % n;
}

double RngState::next_double() {
  return double(next_u64() >> 11) * 0x1.0p-53;
}

double RngState::next_gaussian() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * next_double() - 1.0;
    v = 2.0 * next_double() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

RngState RngState::split(std::uint64_t child_label) const {
  return RngState(mix64(seed_ ^ mix64(child_label + kGamma)));
}

Matrix sample_gaussian(int rows, int cols, RngState& rng) {
  Matrix m(rows, cols);
  for (auto& v : m.data) v = rng.next_gaussian();
  return m;
}

Matrix sample_uniform(int rows, int cols, RngState& rng) {
  Matrix m(rows, cols);
  for (auto& v : m.data) v = rng.next_double();
  return m;
}

std::vector<int> sample_permutation(int n, RngState& rng) {
  std::vector<int> p(n);
  for (int i = 0; i < n; ++i) p[i] = i;
  for (int i = n - 1; i > 0; --i) {
    const int j = int(rng.next_below(std::uint64_t(i) + 1));
    std::swap(p[i], p[j]);
  }
  return p;
}

}  // namespace gkcl
