#pragma once

#include <cstdint>
#include <vector>

#include "gkcl/matrix.hpp"

namespace gkcl {

// Deterministic stream RNG. The generator is SplitMix64: the 64-bit state
// advances by the golden-gamma constant and each output is the mixed state.
// Streams are identified by their seed; split(label) derives a child seed by
// double-mixing (seed, label), so a child stream depends only on the parent
// seed and the label, never on how much the parent has already drawn.
class RngState {
 public:
  explicit RngState(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64();
  std::uint64_t next_below(std::uint64_t n);  // unbiased, rejection sampled
  double next_double();                       // [0,1), 53-bit resolution
  double next_gaussian();                     // standard normal, polar method

  RngState split(std::uint64_t child_label) const;

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

Matrix sample_gaussian(int rows, int cols, RngState& rng);
Matrix sample_uniform(int rows, int cols, RngState& rng);
// Uniformly random bijection on {0..n-1}, Fisher-Yates.
std::vector<int> sample_permutation(int n, RngState& rng);

}  // namespace gkcl
