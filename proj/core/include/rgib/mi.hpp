#pragma once

#include <cstdint>
#include <vector>

#include "rgib/encoder.hpp"
#include "rgib/graph.hpp"
#include "rgib/tape.hpp"

namespace rgib {

// Discriminator scores are clamped away from {0,1} before the logs.
inline constexpr double kScoreClamp = 1e-7;

enum class EstimatorKind { Smi, Readout };
enum class NegativeMode { RowShuffle };

// Sample pairs consumed by the JSD estimator. Positive pairs match z_i with
// the summary of node i from the summary graph; negative pairs match z_i
// with the summary of node i from the corrupted view.
struct PairBatch {
  std::vector<int> positives;
  std::vector<int> negatives;

  static PairBatch all_nodes(int n) {
    PairBatch b;
    b.positives.resize(n);
    b.negatives.resize(n);
    for (int i = 0; i < n; ++i) b.positives[i] = b.negatives[i] = i;
    return b;
  }
};

// Corrupted view for negative sampling: feature rows permuted, structure
// unchanged. The permutation is never the identity when n > 1.
struct CorruptedView {
  std::vector<int> perm;  // row i of the view = row perm[i] of the original
  Matrix features;
};

CorruptedView sample_negatives(const AttributedGraph& g, NegativeMode mode,
                               std::uint64_t seed);

// Row `node` of A^k X Theta_eff: the node's receptive-field summary. The
// K-hop linear aggregation makes extracting the subgraph explicitly
// unnecessary.
Vector smi_summary(const Matrix& theta_eff, const NormalizedAdjacency& a,
                   const Matrix& x, int node, int k);

// Column-wise mean of Z pushed through a sigmoid (DGI-style readout).
Vector readout_summary(const Matrix& z);

// sigmoid(z^T B s)
double discriminate(const Matrix& bilinear, const Vector& z, const Vector& summary);

// JSD lower-bound estimate from per-node summary matrices:
// mean_i log D(z_i, pos_i) + mean_j log(1 - D(z_j, neg_j)).
Tape::Id jsd_mi_tape(Tape& t, Tape::Id z, Tape::Id summary_pos,
                     Tape::Id summary_neg, Tape::Id bilinear,
                     const PairBatch& batch);

// Closed-form diagonal-Gaussian KL, summed over dimensions and averaged over
// nodes. Surrogate for the adversarial term: a <- adversarial head,
// b <- benign head.
Tape::Id kl_gauss_diag_tape(Tape& t, Tape::Id mu_a, Tape::Id logvar_a,
                            Tape::Id mu_b, Tape::Id logvar_b);

double kl_gauss_diag(const Matrix& mu_a, const Matrix& logvar_a,
                     const Matrix& mu_b, const Matrix& logvar_b);

}  // namespace rgib
