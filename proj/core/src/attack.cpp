#include "rgib/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include "rgib/linalg.hpp"
#include "rgib/rng.hpp"

namespace rgib {

void PerturbationSpec::validate() const {
  if (epsilon < 0) throw std::invalid_argument("spec: epsilon must be >= 0");
  if (pgd_iters < 1) throw std::invalid_argument("spec: pgd_iters must be >= 1");
  if (edge_budget < 0) throw std::invalid_argument("spec: edge_budget must be >= 0");
  if (structure_iters < 1)
    throw std::invalid_argument("spec: structure_iters must be >= 1");
}

double FeaturePerturbation::max_row_norm() const {
  double m = 0.0;
  for (Eigen::Index i = 0; i < delta.rows(); ++i)
    m = std::max(m, delta.row(i).norm());
  return m;
}

Matrix project_l2inf(Matrix delta, double epsilon) {
  if (epsilon < 0) throw std::invalid_argument("project_l2inf: epsilon < 0");
  for (Eigen::Index i = 0; i < delta.rows(); ++i) {
    double nrm = delta.row(i).norm();
    if (nrm > epsilon) delta.row(i) *= (epsilon / nrm);
  }
  return delta;
}

FeatureAttackResult pgd_feature_attack(const FeatureLossFn& loss, int n, int d,
                                       const PerturbationSpec& spec,
                                       const Matrix* start) {
  spec.validate();
  Matrix delta = start ? project_l2inf(*start, spec.epsilon)
                       : Matrix::Zero(n, d);
  FeatureAttackResult res;
  FeatureAttackEval ev = loss(delta);
  res.loss_at_start = ev.value;
  res.loss_at_best = ev.value;
  res.perturbation.delta = delta;
  if (spec.epsilon == 0.0) {
    res.perturbation.delta = Matrix::Zero(n, d);
    return res;
  }
  const double step = spec.feature_step();
  for (int it = 0; it < spec.pgd_iters; ++it) {
    delta = project_l2inf(delta - step * ev.grad, spec.epsilon);
    ev = loss(delta);
    if (ev.value < res.loss_at_best) {
      res.loss_at_best = ev.value;
      res.perturbation.delta = delta;
    }
  }
  return res;
}

std::vector<std::pair<int, int>> structure_attack_candidates(
    const AttributedGraph& g, std::uint64_t seed) {
  std::vector<std::pair<int, int>> cands;
  if (g.n <= 3000) {
    cands.reserve(static_cast<std::size_t>(g.n) * (g.n - 1) / 2);
    for (int u = 0; u < g.n; ++u)
      for (int v = u + 1; v < g.n; ++v) cands.emplace_back(u, v);
    return cands;
  }
  // Large graphs: existing edges plus an equal-size sample of non-edges.
  std::set<std::pair<int, int>> edge_set(g.edges.begin(), g.edges.end());
  cands.assign(g.edges.begin(), g.edges.end());
  auto rng = make_rng(seed, Stream::StructureAttack, 0);
  std::uniform_int_distribution<int> pick(0, g.n - 1);
  std::set<std::pair<int, int>> sampled;
  while (sampled.size() < g.edges.size()) {
    int u = pick(rng), v = pick(rng);
    if (u == v) continue;
    if (u > v) std::swap(u, v);
    if (edge_set.count({u, v}) || sampled.count({u, v})) continue;
    sampled.insert({u, v});
    cands.emplace_back(u, v);
  }
  std::sort(cands.begin(), cands.end());
  return cands;
}

void project_budget_box(std::vector<double>& p, double budget) {
  auto clip_sum = [&](double shift) {
    double s = 0.0;
    for (double v : p) s += std::clamp(v - shift, 0.0, 1.0);
    return s;
  };
  for (double& v : p) v = std::clamp(v, 0.0, 1.0);
  if (clip_sum(0.0) <= budget) return;
  double lo = 0.0, hi = *std::max_element(p.begin(), p.end());
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    if (clip_sum(mid) > budget)
      lo = mid;
    else
      hi = mid;
  }
  for (double& v : p) v = std::clamp(v - hi, 0.0, 1.0);
}

Tape::Id normalize_adjacency_tape(Tape& t, Tape::Id a_tilde) {
  const auto n = t.value(a_tilde).rows();
  Tape::Id deg = t.row_sum(a_tilde);                       // n x 1
  Tape::Id dinv = t.exp(t.scale(t.log(deg), -0.5));        // d^{-1/2}
  Tape::Id rows = t.matmul(dinv, t.constant(Matrix::Ones(1, n)));
  Tape::Id cols = t.matmul(t.constant(Matrix::Ones(n, 1)), t.transpose(dinv));
  return t.hadamard(t.hadamard(rows, a_tilde), cols);
}

AttributedGraph apply_structure_perturbation(const AttributedGraph& g,
                                             const StructurePerturbation& pert) {
  std::set<std::pair<int, int>> edges(g.edges.begin(), g.edges.end());
  for (auto [u, v] : pert.flips) {
    if (u > v) std::swap(u, v);
    if (u == v || u < 0 || v >= g.n)
      throw std::invalid_argument("apply_structure_perturbation: bad flip");
    auto it = edges.find({u, v});
    if (it != edges.end())
      edges.erase(it);
    else
      edges.insert({u, v});
  }
  AttributedGraph out = g;
  out.edges.assign(edges.begin(), edges.end());
  return out;
}

namespace {

// Round a relaxed solution to at most `budget` flips: keep entries drawn by
// the sampler, truncating to the largest-p ones when over budget.
StructurePerturbation round_candidate(
    const std::vector<std::pair<int, int>>& cands, const std::vector<double>& p,
    const std::vector<std::size_t>& chosen, int budget) {
  StructurePerturbation pert;
  if (static_cast<int>(chosen.size()) <= budget) {
    for (auto i : chosen) pert.flips.push_back(cands[i]);
    return pert;
  }
  std::vector<std::size_t> sorted = chosen;
  std::stable_sort(sorted.begin(), sorted.end(),
                   [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  sorted.resize(static_cast<std::size_t>(budget));
  std::sort(sorted.begin(), sorted.end());
  for (auto i : sorted) pert.flips.push_back(cands[i]);
  return pert;
}

}  // namespace

StructureAttackResult pgd_structure_attack(const AttributedGraph& g,
                                           const StructureAttackCallbacks& cb,
                                           const PerturbationSpec& spec,
                                           std::uint64_t seed) {
  spec.validate();
  StructureAttackResult res;
  res.loss_at_zero = cb.discrete_loss(StructurePerturbation{});
  res.loss_at_best = res.loss_at_zero;
  if (spec.edge_budget == 0) return res;

  const auto cands = structure_attack_candidates(g, seed);
  if (spec.edge_budget > static_cast<int>(cands.size()))
    throw std::invalid_argument("pgd_structure_attack: budget exceeds candidates");

  const int n = g.n;
  Matrix base = Matrix::Zero(n, n);  // A + I
  for (int i = 0; i < n; ++i) base(i, i) = 1.0;
  for (auto [u, v] : g.edges) base(u, v) = base(v, u) = 1.0;
  // Flip direction: +1 where the edge is absent, -1 where present.
  Matrix direction = Matrix::Zero(n, n);
  for (auto [u, v] : cands) {
    double c = base(u, v) > 0 ? -1.0 : 1.0;
    direction(u, v) = direction(v, u) = c;
  }

  std::vector<double> p(cands.size(), 0.0);
  const double budget = static_cast<double>(spec.edge_budget);
  for (int it = 0; it < spec.structure_iters; ++it) {
    Matrix dense_p = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < cands.size(); ++i) {
      auto [u, v] = cands[i];
      dense_p(u, v) = dense_p(v, u) = p[i];
    }
    Tape t;
    Tape::Id p_id = t.input(dense_p);
    Tape::Id a_tilde =
        t.add(t.constant(base), t.hadamard(t.constant(direction), p_id));
    Tape::Id a_hat = normalize_adjacency_tape(t, a_tilde);
    Tape::Id loss = cb.relaxed_loss(t, a_hat);
    Matrix grad_dense = t.gradients(loss, {p_id})[0];

    double gmax = 0.0;
    std::vector<double> grad(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i) {
      auto [u, v] = cands[i];
      grad[i] = grad_dense(u, v) + grad_dense(v, u);
      gmax = std::max(gmax, std::abs(grad[i]));
    }
    if (gmax == 0.0) break;
    double step = (spec.pgd_step > 0 ? spec.pgd_step : 0.5) /
                  std::sqrt(static_cast<double>(it + 1));
    for (std::size_t i = 0; i < cands.size(); ++i)
      p[i] -= step * grad[i] / gmax;
    project_budget_box(p, budget);
  }

  // Randomized rounding: 20 seeded Bernoulli draws, the deterministic
  // top-budget set, and the empty set; keep the best by exact objective.
  auto rng = make_rng(seed, Stream::StructureAttack, 1);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto consider = [&](const StructurePerturbation& pert) {
    double v = cb.discrete_loss(pert);
    if (v < res.loss_at_best) {
      res.loss_at_best = v;
      res.perturbation = pert;
    }
  };
  for (int draw = 0; draw < 20; ++draw) {
    std::vector<std::size_t> chosen;
    for (std::size_t i = 0; i < cands.size(); ++i)
      if (unif(rng) < p[i]) chosen.push_back(i);
    consider(round_candidate(cands, p, chosen, spec.edge_budget));
  }
  std::vector<std::size_t> all_idx(cands.size());
  std::iota(all_idx.begin(), all_idx.end(), 0);
  std::stable_sort(all_idx.begin(), all_idx.end(),
                   [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  std::vector<std::size_t> top;
  for (std::size_t i = 0; i < all_idx.size() &&
                          static_cast<int>(top.size()) < spec.edge_budget; ++i)
    if (p[all_idx[i]] > 0) top.push_back(all_idx[i]);
  std::sort(top.begin(), top.end());
  consider(round_candidate(cands, p, top, spec.edge_budget));
  return res;
}

EquivalentPerturbation equivalent_feature_perturbation(
    const NormalizedAdjacency& a, const NormalizedAdjacency& a_prime,
    const Matrix& x, int k) {
  if (a.n != a_prime.n) throw std::invalid_argument("size mismatch");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  Matrix target = x;
  for (int i = 0; i < k; ++i) target = a_prime.multiply(target);  // A'^k X
  Matrix a_dense = a.dense();
  Matrix sol = target;
  for (int i = 0; i < k; ++i) sol = least_squares_solve(a_dense, sol).x;
  EquivalentPerturbation out;
  out.delta = sol - x;
  Matrix lhs = sol;  // X + delta
  for (int i = 0; i < k; ++i) lhs = a.multiply(lhs);
  out.residual = (lhs - target).norm();
  return out;
}

SurrogateFit fit_feature_surrogate(const GnnForwardFn& forward,
                                   const NormalizedAdjacency& a,
                                   const NormalizedAdjacency& a_prime,
                                   const Matrix& x, int iters, double lr) {
  Matrix target;
  {
    Tape t;
    Tape::Id out = forward(t, AdjacencyOp::from_sparse(&a_prime), t.constant(x));
    target = t.value(out);
  }
  auto mse_and_grad = [&](const Matrix& delta, Matrix* grad) {
    Tape t;
    Tape::Id d_id = t.input(delta);
    Tape::Id xp = t.add(t.constant(x), d_id);
    Tape::Id out = forward(t, AdjacencyOp::from_sparse(&a), xp);
    Tape::Id diff = t.sub(out, t.constant(target));
    Tape::Id mse = t.mean(t.hadamard(diff, diff));
    if (grad) *grad = t.gradients(mse, {d_id})[0];
    return t.scalar(mse);
  };

  SurrogateFit fit;
  fit.delta = Matrix::Zero(x.rows(), x.cols());
  fit.mse_before = mse_and_grad(fit.delta, nullptr);
  fit.mse_after = fit.mse_before;
  Matrix best = fit.delta;
  for (int it = 0; it < iters; ++it) {
    Matrix grad;
    mse_and_grad(fit.delta, &grad);
    fit.delta -= lr * grad;
    double v = mse_and_grad(fit.delta, nullptr);
    if (v < fit.mse_after) {
      fit.mse_after = v;
      best = fit.delta;
    }
  }
  fit.delta = best;
  return fit;
}

}  // namespace rgib
