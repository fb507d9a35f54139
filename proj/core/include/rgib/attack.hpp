#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "rgib/encoder.hpp"
#include "rgib/graph.hpp"
#include "rgib/tape.hpp"

namespace rgib {

struct PerturbationSpec {
  double epsilon = 1e-3;    // feature l2,inf radius
  int pgd_iters = 5;
  double pgd_step = 0.0;    // <= 0 selects 2.5 * epsilon / pgd_iters
  int edge_budget = 0;      // evaluation / rgib-s structure attack
  int structure_iters = 20;

  void validate() const;
  double feature_step() const {
    return pgd_step > 0.0 ? pgd_step : 2.5 * epsilon / static_cast<double>(pgd_iters);
  }
};

// Dense per-row feature perturbation; every row stays inside the epsilon ball.
struct FeaturePerturbation {
  Matrix delta;  // n x d
  double max_row_norm() const;
};

// Edge flips (add when absent, remove when present), canonical pairs.
struct StructurePerturbation {
  std::vector<std::pair<int, int>> flips;
};

// Row-wise projection onto the l2,inf ball of radius epsilon.
Matrix project_l2inf(Matrix delta, double epsilon);

struct FeatureAttackEval {
  double value = 0.0;
  Matrix grad;  // d value / d delta
};
using FeatureLossFn = std::function<FeatureAttackEval(const Matrix& delta)>;

struct FeatureAttackResult {
  FeaturePerturbation perturbation;
  double loss_at_start = 0.0;
  double loss_at_best = 0.0;
};

// Projected gradient descent on the given objective (the attacker minimizes
// it). Starts from zero, or from `start` projected into the ball; keeps the
// best iterate, so loss_at_best <= the loss at the starting point, and when
// starting from zero also <= the unperturbed loss.
FeatureAttackResult pgd_feature_attack(const FeatureLossFn& loss, int n, int d,
                                       const PerturbationSpec& spec,
                                       const Matrix* start = nullptr);

struct StructureAttackCallbacks {
  // Scalar attack objective built from a dense normalized adjacency node.
  std::function<Tape::Id(Tape&, Tape::Id a_hat)> relaxed_loss;
  // Exact objective once a candidate flip set is applied.
  std::function<double(const StructurePerturbation&)> discrete_loss;
};

struct StructureAttackResult {
  StructurePerturbation perturbation;
  double loss_at_zero = 0.0;
  double loss_at_best = 0.0;
};

// Continuous relaxation over candidate pair flips, projected gradient steps
// on p in {[0,1]^k : sum p <= budget}, then randomized rounding (best of 20
// seeded samples plus the deterministic top-budget set and the empty set).
StructureAttackResult pgd_structure_attack(const AttributedGraph& g,
                                           const StructureAttackCallbacks& cb,
                                           const PerturbationSpec& spec,
                                           std::uint64_t seed);

// Candidate flip pairs: all pairs for small graphs, otherwise the existing
// edges plus an equal-size seeded sample of non-edges.
std::vector<std::pair<int, int>> structure_attack_candidates(
    const AttributedGraph& g, std::uint64_t seed);

// Projection onto {p in [0,1]^k, sum p <= budget} by bisection on the shift.
void project_budget_box(std::vector<double>& p, double budget);

// Apply flips to a graph (toggle membership of each listed pair).
AttributedGraph apply_structure_perturbation(const AttributedGraph& g,
                                             const StructurePerturbation& pert);

// Dense symmetric normalization on the tape: given A~ = A + I + dA (entries
// nonnegative, diagonal >= 1), returns D~^{-1/2} A~ D~^{-1/2}.
Tape::Id normalize_adjacency_tape(Tape& t, Tape::Id a_tilde);

struct EquivalentPerturbation {
  Matrix delta;      // n x d
  double residual;   // || A^k (X + delta) - A'^k X ||_F
};

// Feature perturbation replicating a structure perturbation on a K-layer
// SGC: delta = (A^+)^K (A'^K X) - X via repeated least-squares solves.
// Exact when A is nonsingular; otherwise the residual reports the gap.
EquivalentPerturbation equivalent_feature_perturbation(
    const NormalizedAdjacency& a, const NormalizedAdjacency& a_prime,
    const Matrix& x, int k);

using GnnForwardFn =
    std::function<Tape::Id(Tape&, const AdjacencyOp&, Tape::Id x)>;

struct SurrogateFit {
  Matrix delta;
  double mse_before = 0.0;
  double mse_after = 0.0;
};

// Gradient descent on MSE(g(A', X) - g(A, X + delta)) from delta = 0.
SurrogateFit fit_feature_surrogate(const GnnForwardFn& forward,
                                   const NormalizedAdjacency& a,
                                   const NormalizedAdjacency& a_prime,
                                   const Matrix& x, int iters, double lr);

}  // namespace rgib
