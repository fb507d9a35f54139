#include "rgib/mi.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rgib/rng.hpp"

namespace rgib {

CorruptedView sample_negatives(const AttributedGraph& g, NegativeMode mode,
                               std::uint64_t seed) {
  if (mode != NegativeMode::RowShuffle)
    throw std::invalid_argument("sample_negatives: unsupported mode");
  CorruptedView view;
  view.perm.resize(g.n);
  std::iota(view.perm.begin(), view.perm.end(), 0);
  auto rng = make_rng(seed, Stream::Negatives);
  if (g.n > 1) {
    auto is_identity = [&] {
      for (int i = 0; i < g.n; ++i)
        if (view.perm[i] != i) return false;
      return true;
    };
    do {
      std::shuffle(view.perm.begin(), view.perm.end(), rng);
    } while (is_identity());
  }
  view.features.resize(g.features.rows(), g.features.cols());
  for (int i = 0; i < g.n; ++i)
    view.features.row(i) = g.features.row(view.perm[i]);
  return view;
}

Vector smi_summary(const Matrix& theta_eff, const NormalizedAdjacency& a,
                   const Matrix& x, int node, int k) {
  if (node < 0 || node >= a.n)
    throw std::out_of_range("smi_summary: node out of range");
  Matrix s = sgc_forward(theta_eff, a, x, k);
  return s.row(node).transpose();
}

Vector readout_summary(const Matrix& z) {
  if (z.rows() == 0) throw std::invalid_argument("readout_summary: empty input");
  Vector mean = z.colwise().mean().transpose();
  return mean.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

double discriminate(const Matrix& bilinear, const Vector& z, const Vector& summary) {
  double score = z.transpose() * bilinear * summary;
  return 1.0 / (1.0 + std::exp(-score));
}

Tape::Id jsd_mi_tape(Tape& t, Tape::Id z, Tape::Id summary_pos,
                     Tape::Id summary_neg, Tape::Id bilinear,
                     const PairBatch& batch) {
  if (batch.positives.empty() || batch.negatives.empty())
    throw std::invalid_argument("jsd_mi: no pairs");
  Tape::Id z_pos = t.row_select(z, batch.positives);
  Tape::Id s_pos = t.row_select(summary_pos, batch.positives);
  Tape::Id z_neg = t.row_select(z, batch.negatives);
  Tape::Id s_neg = t.row_select(summary_neg, batch.negatives);

  Tape::Id d_pos = t.clamp(t.sigmoid(t.bilinear_rows(z_pos, bilinear, s_pos)),
                           kScoreClamp, 1.0 - kScoreClamp);
  Tape::Id d_neg = t.clamp(t.sigmoid(t.bilinear_rows(z_neg, bilinear, s_neg)),
                           kScoreClamp, 1.0 - kScoreClamp);
  Tape::Id pos_term = t.mean(t.log(d_pos));
  Tape::Id neg_term = t.mean(t.log(t.add_scalar(t.scale(d_neg, -1.0), 1.0)));
  return t.add(pos_term, neg_term);
}

Tape::Id kl_gauss_diag_tape(Tape& t, Tape::Id mu_a, Tape::Id logvar_a,
                            Tape::Id mu_b, Tape::Id logvar_b) {
  const Matrix& ma = t.value(mu_a);
  const auto n = ma.rows();
  // 0.5 * (lvb - lva + exp(lva - lvb) + (mua - mub)^2 exp(-lvb) - 1), summed
  // over dims, averaged over nodes.
  Tape::Id dlv = t.sub(logvar_b, logvar_a);
  Tape::Id ratio = t.exp(t.scale(dlv, -1.0));  // exp(lva - lvb)
  Tape::Id dmu = t.sub(mu_a, mu_b);
  Tape::Id sq = t.hadamard(dmu, dmu);
  Tape::Id scaled_sq = t.hadamard(sq, t.exp(t.scale(logvar_b, -1.0)));
  Tape::Id per_entry =
      t.add_scalar(t.add(dlv, t.add(ratio, scaled_sq)), -1.0);
  return t.scale(t.sum(per_entry), 0.5 / static_cast<double>(n));
}

double kl_gauss_diag(const Matrix& mu_a, const Matrix& logvar_a,
                     const Matrix& mu_b, const Matrix& logvar_b) {
  Tape t;
  Tape::Id kl = kl_gauss_diag_tape(t, t.constant(mu_a), t.constant(logvar_a),
                                   t.constant(mu_b), t.constant(logvar_b));
  return t.scalar(kl);
}

}  // namespace rgib
