#include "gkcl/contrastive.hpp"

#include <cmath>

namespace gkcl {

Projection::Projection(int hidden_dim, int proj_dim, std::uint64_t seed) {
  RngState rng(seed);
  Matrix wm = sample_gaussian(hidden_dim, proj_dim, rng);
  const double s = std::sqrt(2.0 / double(hidden_dim));
  for (auto& v : wm.data) v *= s;
  w = {"proj.w", std::move(wm)};
  b = {"proj.b", Matrix(1, proj_dim)};
}

Projection::Tape Projection::bind(bool trainable) {
  auto wrap = [&](Param& p) { return trainable ? Var::param(p.value) : Var::constant(p.value); };
  return {wrap(w), wrap(b)};
}

Var augment(const GenerativeModel& model, const VaeTape& t, const GenBatch& batch,
            RngState& rng) {
  EncodeOut enc = model.encode(t, Var::constant(batch.x));
  Var z = model.reparameterize(enc.mu, enc.logsigma, rng);
  return sigmoid(model.decode(t, z, batch.labels, batch.tasks));
}

Var embed_from_hidden(const Projection::Tape& pt, const Var& hidden) {
  Var r = l2_normalize_rows(hidden);
  Var s = add_rowvec(matmul(r, pt.w), pt.b);
  return l2_normalize_rows(s);
}

Var embed(const GenerativeModel& model, const VaeTape& t, const Projection::Tape& pt,
          const Var& x) {
  return embed_from_hidden(pt, model.encode(t, x).hidden);
}

Var supcon_loss(const Var& s, const std::vector<int>& labels, double tau) {
  if (!(tau > 0.0)) throw ParameterError("supcon_loss: temperature must be > 0");
  const int n = s.value().rows;
  if (n < 2) throw ParameterError("supcon_loss: need at least two embeddings");
  if (int(labels.size()) != n) throw DimensionError("supcon_loss: label count mismatch");

  Var sim = scale(matmul(s, transpose(s)), 1.0 / tau);

  // A(i) excludes the anchor itself; P(i) additionally requires equal labels.
  Matrix all_mask(n, n);
  Matrix pos_weight(n, n);  // 1/|P(i)| on positives, 0 elsewhere
  Matrix anchor(n, 1);      // 1 for anchors with at least one positive
  for (int i = 0; i < n; ++i) {
    int pcount = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      all_mask.at(i, j) = 1.0;
      if (labels[j] == labels[i]) ++pcount;
    }
    if (pcount == 0) continue;
    anchor.data[i] = 1.0;
    for (int j = 0; j < n; ++j)
      if (j != i && labels[j] == labels[i]) pos_weight.at(i, j) = 1.0 / double(pcount);
  }

  Var lse = row_logsumexp_masked(sim, all_mask);                 // n x 1
  Var mean_pos = row_sums(hadamard(sim, Var::constant(pos_weight)));  // n x 1
  return reduce_sum(mul_colvec(sub(lse, mean_pos), Var::constant(anchor)));
}

}  // namespace gkcl
