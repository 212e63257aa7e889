#pragma once

#include "gkcl/genmodel.hpp"

namespace gkcl {

// One fully-connected projection layer mapping the normalized encoder hidden
// representation onto the contrastive embedding space. Used only while
// training; the classifier path never sees it.
struct Projection {
  Param w, b;

  Projection() = default;
  Projection(int hidden_dim, int proj_dim, std::uint64_t seed);

  struct Tape {
    Var w, b;
  };
  Tape bind(bool trainable);

  std::vector<Param*> params() { return {&w, &b}; }
};

struct ConLossConfig {
  double temperature = 0.08;
  double weight = 1.0;  // multiplier on the regularizer in the total objective
};

// Random augmentation by one pass through the auto-encoder:
// sigmoid(decode(reparameterize(encode(x)))). Gradients flow through the
// whole pipeline.
Var augment(const GenerativeModel& model, const VaeTape& t, const GenBatch& batch,
            RngState& rng);

// normalize(f_p(normalize(hidden))) for an already-computed hidden activation.
Var embed_from_hidden(const Projection::Tape& pt, const Var& hidden);

// Full embedding pipeline for raw inputs.
Var embed(const GenerativeModel& model, const VaeTape& t, const Projection::Tape& pt,
          const Var& x);

// Supervised contrastive loss over unit-norm embeddings s (rows) with one
// label per row. Anchors whose positive set is empty contribute zero.
Var supcon_loss(const Var& s, const std::vector<int>& labels, double tau);

}  // namespace gkcl
