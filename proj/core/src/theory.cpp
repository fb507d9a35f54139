#include "rgib/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rgib/rng.hpp"

namespace rgib {

std::size_t DiscreteJoint::cells() const {
  std::size_t c = 1;
  for (int s : sizes) c *= static_cast<std::size_t>(s);
  return c;
}

std::size_t DiscreteJoint::offset(const std::vector<int>& idx) const {
  std::size_t off = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i)
    off = off * static_cast<std::size_t>(sizes[i]) +
          static_cast<std::size_t>(idx[i]);
  return off;
}

void DiscreteJoint::validate() const {
  if (sizes.empty() || p.size() != cells())
    throw std::invalid_argument("joint: table size mismatch");
  double total = 0.0;
  for (double v : p) {
    if (v < 0.0 || !std::isfinite(v))
      throw std::invalid_argument("joint: entries must be >= 0");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("joint: probabilities must sum to 1");
}

namespace {

// Iterate all index tuples of the joint, calling f(idx, p).
template <typename F>
void for_each_cell(const DiscreteJoint& joint, F&& f) {
  std::vector<int> idx(joint.sizes.size(), 0);
  for (std::size_t cell = 0; cell < joint.cells(); ++cell) {
    f(idx, joint.p[cell]);
    for (int i = static_cast<int>(idx.size()) - 1; i >= 0; --i) {
      if (++idx[static_cast<std::size_t>(i)] <
          joint.sizes[static_cast<std::size_t>(i)])
        break;
      idx[static_cast<std::size_t>(i)] = 0;
    }
  }
}

std::size_t group_key(const std::vector<int>& idx, const std::vector<int>& vars,
                      const std::vector<int>& sizes) {
  std::size_t key = 0;
  for (int v : vars)
    key = key * static_cast<std::size_t>(sizes[static_cast<std::size_t>(v)]) +
          static_cast<std::size_t>(idx[static_cast<std::size_t>(v)]);
  return key;
}

std::size_t group_cells(const std::vector<int>& vars,
                        const std::vector<int>& sizes) {
  std::size_t c = 1;
  for (int v : vars) c *= static_cast<std::size_t>(sizes[static_cast<std::size_t>(v)]);
  return c;
}

std::vector<int> concat(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

}  // namespace

double brute_force_mi(const DiscreteJoint& joint, const std::vector<int>& vars_a,
                      const std::vector<int>& vars_b) {
  joint.validate();
  const auto& sizes = joint.sizes;
  std::vector<double> pa(group_cells(vars_a, sizes), 0.0);
  std::vector<double> pb(group_cells(vars_b, sizes), 0.0);
  std::vector<int> ab = concat(vars_a, vars_b);
  std::vector<double> pab(group_cells(ab, sizes), 0.0);
  for_each_cell(joint, [&](const std::vector<int>& idx, double p) {
    pa[group_key(idx, vars_a, sizes)] += p;
    pb[group_key(idx, vars_b, sizes)] += p;
    pab[group_key(idx, ab, sizes)] += p;
  });
  double mi = 0.0;
  std::size_t nb = pb.size();
  for (std::size_t ka = 0; ka < pa.size(); ++ka)
    for (std::size_t kb = 0; kb < nb; ++kb) {
      double pj = pab[ka * nb + kb];
      if (pj > 0.0) mi += pj * std::log(pj / (pa[ka] * pb[kb]));
    }
  return mi;
}

double brute_force_cmi(const DiscreteJoint& joint, const std::vector<int>& vars_a,
                       const std::vector<int>& vars_b,
                       const std::vector<int>& cond) {
  joint.validate();
  const auto& sizes = joint.sizes;
  std::vector<int> ac = concat(vars_a, cond);
  std::vector<int> bc = concat(vars_b, cond);
  std::vector<int> abc = concat(concat(vars_a, vars_b), cond);
  std::vector<double> pc(group_cells(cond, sizes), 0.0);
  std::vector<double> pac(group_cells(ac, sizes), 0.0);
  std::vector<double> pbc(group_cells(bc, sizes), 0.0);
  std::vector<double> pabc(group_cells(abc, sizes), 0.0);
  for_each_cell(joint, [&](const std::vector<int>& idx, double p) {
    pc[group_key(idx, cond, sizes)] += p;
    pac[group_key(idx, ac, sizes)] += p;
    pbc[group_key(idx, bc, sizes)] += p;
    pabc[group_key(idx, abc, sizes)] += p;
  });
  // I(A;B|C) = sum p(a,b,c) log[ p(a,b,c) p(c) / (p(a,c) p(b,c)) ]
  double cmi = 0.0;
  std::size_t na = group_cells(vars_a, sizes);
  std::size_t nb = group_cells(vars_b, sizes);
  std::size_t nc = pc.size();
  for (std::size_t ka = 0; ka < na; ++ka)
    for (std::size_t kb = 0; kb < nb; ++kb)
      for (std::size_t kc = 0; kc < nc; ++kc) {
        double pj = pabc[(ka * nb + kb) * nc + kc];
        if (pj > 0.0)
          cmi += pj * std::log(pj * pc[kc] /
                               (pac[ka * nc + kc] * pbc[kb * nc + kc]));
      }
  return cmi;
}

namespace {

std::vector<double> dirichlet_row(std::size_t k, std::mt19937_64& rng) {
  std::exponential_distribution<double> ex(1.0);
  std::vector<double> row(k);
  double total = 0.0;
  for (double& v : row) {
    v = ex(rng);
    total += v;
  }
  for (double& v : row) v /= total;
  return row;
}

}  // namespace

DiscreteJoint random_joint(const std::vector<int>& sizes, std::uint64_t seed) {
  DiscreteJoint j;
  j.sizes = sizes;
  auto rng = make_rng(seed, Stream::Test, 0);
  j.p = dirichlet_row(j.cells(), rng);
  // Renormalize exactly to keep validate() happy at 1e-12.
  double total = std::accumulate(j.p.begin(), j.p.end(), 0.0);
  for (double& v : j.p) v /= total;
  return j;
}

DiscreteJoint random_markov_chain_joint(const std::vector<int>& sizes,
                                        std::uint64_t seed) {
  if (sizes.size() < 2)
    throw std::invalid_argument("markov joint needs >= 2 variables");
  auto rng = make_rng(seed, Stream::Test, 1);
  DiscreteJoint j;
  j.sizes = sizes;
  std::vector<double> marginal =
      dirichlet_row(static_cast<std::size_t>(sizes[0]), rng);
  // One transition table per link of the chain.
  std::vector<std::vector<std::vector<double>>> trans;
  for (std::size_t v = 1; v < sizes.size(); ++v) {
    std::vector<std::vector<double>> rows;
    for (int s = 0; s < sizes[v - 1]; ++s)
      rows.push_back(dirichlet_row(static_cast<std::size_t>(sizes[v]), rng));
    trans.push_back(std::move(rows));
  }
  j.p.assign(j.cells(), 0.0);
  std::vector<int> idx(sizes.size(), 0);
  for (std::size_t cell = 0; cell < j.cells(); ++cell) {
    double p = marginal[static_cast<std::size_t>(idx[0])];
    for (std::size_t v = 1; v < sizes.size(); ++v)
      p *= trans[v - 1][static_cast<std::size_t>(idx[v - 1])]
                [static_cast<std::size_t>(idx[v])];
    j.p[j.offset(idx)] = p;
    for (int i = static_cast<int>(idx.size()) - 1; i >= 0; --i) {
      if (++idx[static_cast<std::size_t>(i)] < sizes[static_cast<std::size_t>(i)]) break;
      idx[static_cast<std::size_t>(i)] = 0;
    }
  }
  double total = std::accumulate(j.p.begin(), j.p.end(), 0.0);
  for (double& v : j.p) v /= total;
  return j;
}

double check_decomposition(const DiscreteJoint& joint) {
  if (joint.sizes.size() != 3)
    throw std::invalid_argument("check_decomposition: expects (S, S', Z')");
  // Markov S - S' - Z' means I(S;Z'|S') = 0.
  double markov_defect = brute_force_cmi(joint, {0}, {2}, {1});
  if (markov_defect > 1e-10)
    throw std::invalid_argument("check_decomposition: joint is not Markov");
  double lhs = brute_force_mi(joint, {1}, {2});
  double adv = brute_force_cmi(joint, {1}, {2}, {0});
  double info = brute_force_mi(joint, {0}, {2});
  return std::abs(lhs - adv - info);
}

double fano_bound(double mi_nats, int alphabet_size) {
  if (alphabet_size < 2)
    throw std::invalid_argument("fano_bound: alphabet must be >= 2");
  double bound = 1.0 - (mi_nats + std::log(2.0)) /
                           std::log(static_cast<double>(alphabet_size));
  return std::max(0.0, bound);
}

double check_fano(const DiscreteJoint& joint) {
  if (joint.sizes.size() != 2 || joint.sizes[0] != joint.sizes[1])
    throw std::invalid_argument("check_fano: expects square (Y, Yhat)");
  const int k = joint.sizes[0];
  // Reject non-uniform Y.
  for (int y = 0; y < k; ++y) {
    double py = 0.0;
    for (int h = 0; h < k; ++h) py += joint.p[joint.offset({y, h})];
    if (std::abs(py - 1.0 / k) > 1e-9)
      throw std::invalid_argument("check_fano: Y marginal must be uniform");
  }
  double correct = 0.0;
  for (int y = 0; y < k; ++y) correct += joint.p[joint.offset({y, y})];
  double error = 1.0 - correct;
  return error - fano_bound(brute_force_mi(joint, {0}, {1}), k);
}

DataProcessingMargins check_data_processing(const DiscreteJoint& joint) {
  if (joint.sizes.size() != 3)
    throw std::invalid_argument("check_data_processing: expects (X, Y, Z)");
  double ixy = brute_force_mi(joint, {0}, {1});
  double iyz = brute_force_mi(joint, {1}, {2});
  double ixz = brute_force_mi(joint, {0}, {2});
  return {ixy - ixz, iyz - ixz};
}

AdvRiskResult empirical_adv_risk(const LogRegModel& clf,
                                 const EncoderParams& encoder,
                                 const AttributedGraph& g,
                                 const std::vector<int>& labels,
                                 const std::vector<int>& eval_nodes,
                                 std::vector<double> epsilons,
                                 const PerturbationSpec& spec, int n_seeds,
                                 std::uint64_t seed) {
  if (!std::is_sorted(epsilons.begin(), epsilons.end()))
    throw std::invalid_argument("empirical_adv_risk: epsilons must ascend");
  NormalizedAdjacency a = normalize_adjacency(g);

  std::vector<bool> flipped(eval_nodes.size(), false);
  auto mark_flips = [&](const Matrix& delta) {
    EmbeddingSet es = gcn_forward(encoder, a, g.features + delta);
    Matrix z(static_cast<Eigen::Index>(eval_nodes.size()), es.mu.cols());
    for (std::size_t i = 0; i < eval_nodes.size(); ++i)
      z.row(static_cast<Eigen::Index>(i)) = es.mu.row(eval_nodes[i]);
    std::vector<int> pred = clf.predict(z);
    for (std::size_t i = 0; i < eval_nodes.size(); ++i)
      if (pred[i] != labels[static_cast<std::size_t>(eval_nodes[i])])
        flipped[i] = true;
  };
  auto risk_now = [&] {
    double hits = 0.0;
    for (bool f : flipped) hits += f ? 1.0 : 0.0;
    return hits / static_cast<double>(flipped.size());
  };

  AdvRiskResult res;
  mark_flips(Matrix::Zero(g.n, g.dim()));
  res.clean_error = risk_now();

  FeatureLossFn loss = make_classification_attack_loss(encoder, a, g.features,
                                                       clf, labels, eval_nodes);
  Matrix warm = Matrix::Zero(g.n, g.dim());
  for (double eps : epsilons) {
    if (eps > 0.0) {
      PerturbationSpec s = spec;
      s.epsilon = eps;
      const double step = s.feature_step();
      for (int restart = 0; restart < std::max(1, n_seeds); ++restart) {
        Matrix delta;
        if (restart == 0) {
          delta = project_l2inf(warm, eps);
        } else {
          // Random feasible start.
          auto rng = make_rng(seed, Stream::EvalAttack,
                              static_cast<std::uint64_t>(restart) * 1000003 +
                                  static_cast<std::uint64_t>(eps * 1e9));
          std::normal_distribution<double> normal(0.0, 1.0);
          delta.resize(g.n, g.dim());
          for (int r = 0; r < g.n; ++r)
            for (int c = 0; c < g.dim(); ++c) delta(r, c) = normal(rng);
          delta = project_l2inf(delta, eps);
        }
        mark_flips(delta);
        double best = loss(delta).value;
        Matrix best_delta = delta;
        for (int it = 0; it < s.pgd_iters; ++it) {
          FeatureAttackEval ev = loss(delta);
          delta = project_l2inf(delta - step * ev.grad, eps);
          mark_flips(delta);
          double v = loss(delta).value;
          if (v < best) {
            best = v;
            best_delta = delta;
          }
        }
        if (restart == 0) warm = best_delta;
      }
    }
    res.risk.push_back(risk_now());
  }
  return res;
}

std::vector<VerifyCheck> run_theory_checks(std::uint64_t seed) {
  std::vector<VerifyCheck> checks;
  auto rng = make_rng(seed, Stream::Test, 99);
  std::uniform_int_distribution<int> alpha_size(2, 5);

  {
    VerifyCheck c;
    c.name = "theorem1-decomposition";
    c.worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      std::vector<int> sizes = {alpha_size(rng), alpha_size(rng), alpha_size(rng)};
      DiscreteJoint j = random_markov_chain_joint(
          sizes, derive_seed(seed, Stream::Test, 10000 + i));
      c.worst = std::max(c.worst, check_decomposition(j));
    }
    c.pass = c.worst < 1e-10;
    c.detail = "max residual " + std::to_string(c.worst) + " over 1000 Markov joints";
    checks.push_back(c);
  }
  {
    VerifyCheck c;
    c.name = "fano-inequality";
    double worst = 1e9;
    for (int i = 0; i < 1000; ++i) {
      int k = alpha_size(rng);
      auto jr = make_rng(seed, Stream::Test, 20000 + i);
      DiscreteJoint j;
      j.sizes = {k, k};
      j.p.assign(j.cells(), 0.0);
      for (int y = 0; y < k; ++y) {
        auto row = dirichlet_row(static_cast<std::size_t>(k), jr);
        for (int h = 0; h < k; ++h) j.p[j.offset({y, h})] = row[h] / k;
      }
      double total = std::accumulate(j.p.begin(), j.p.end(), 0.0);
      for (double& v : j.p) v /= total;
      worst = std::min(worst, check_fano(j));
    }
    c.worst = worst;
    c.pass = worst >= -1e-9;
    c.detail = "min margin " + std::to_string(worst) + " over 1000 channels";
    checks.push_back(c);
  }
  {
    VerifyCheck c;
    c.name = "data-processing-inequality";
    double worst = 1e9;
    for (int i = 0; i < 1000; ++i) {
      std::vector<int> sizes = {alpha_size(rng), alpha_size(rng), alpha_size(rng)};
      DiscreteJoint j = random_markov_chain_joint(
          sizes, derive_seed(seed, Stream::Test, 30000 + i));
      DataProcessingMargins m = check_data_processing(j);
      worst = std::min({worst, m.x_side, m.z_side});
    }
    c.worst = worst;
    c.pass = worst >= -1e-10;
    c.detail = "min margin " + std::to_string(worst) + " over 1000 Markov joints";
    checks.push_back(c);
  }
  {
    VerifyCheck c;
    c.name = "conditional-mi-nonnegative";
    double worst = 1e9;
    for (int i = 0; i < 1000; ++i) {
      std::vector<int> sizes = {alpha_size(rng), alpha_size(rng), alpha_size(rng)};
      DiscreteJoint j =
          random_joint(sizes, derive_seed(seed, Stream::Test, 40000 + i));
      worst = std::min(worst, brute_force_cmi(j, {0}, {1}, {2}));
    }
    c.worst = worst;
    c.pass = worst >= -1e-12;
    c.detail = "min CMI " + std::to_string(worst) + " over 1000 joints";
    checks.push_back(c);
  }
  {
    // End-to-end discrete surrogate of the risk bound: a Markov chain
    // Y - S - S' - Z' - Yhat with uniform Y; the empirical error must
    // dominate 1 - (I(S;Z') + log 2)/log|Y|, and I(S';Z') >= I(S;Z').
    VerifyCheck c;
    c.name = "adversarial-risk-bound-chain";
    double worst = 1e9;
    for (int i = 0; i < 200; ++i) {
      auto jr = make_rng(seed, Stream::Test, 50000 + i);
      std::uniform_int_distribution<int> ksize(2, 4);
      int ky = ksize(jr), ks = ksize(jr), ksp = ksize(jr), kz = ksize(jr);
      std::vector<int> sizes = {ky, ks, ksp, kz, ky};
      std::vector<std::vector<double>> s_given_y, sp_given_s, z_given_sp;
      for (int y = 0; y < ky; ++y)
        s_given_y.push_back(dirichlet_row(static_cast<std::size_t>(ks), jr));
      for (int s = 0; s < ks; ++s)
        sp_given_s.push_back(dirichlet_row(static_cast<std::size_t>(ksp), jr));
      for (int sp = 0; sp < ksp; ++sp)
        z_given_sp.push_back(dirichlet_row(static_cast<std::size_t>(kz), jr));
      std::uniform_int_distribution<int> ylab(0, ky - 1);
      std::vector<int> f(static_cast<std::size_t>(kz));
      for (int z = 0; z < kz; ++z) f[static_cast<std::size_t>(z)] = ylab(jr);

      DiscreteJoint j;
      j.sizes = sizes;
      j.p.assign(j.cells(), 0.0);
      for (int y = 0; y < ky; ++y)
        for (int s = 0; s < ks; ++s)
          for (int sp = 0; sp < ksp; ++sp)
            for (int z = 0; z < kz; ++z) {
              double p = (1.0 / ky) * s_given_y[y][s] * sp_given_s[s][sp] *
                         z_given_sp[sp][z];
              j.p[j.offset({y, s, sp, z, f[static_cast<std::size_t>(z)]})] += p;
            }
      double total = std::accumulate(j.p.begin(), j.p.end(), 0.0);
      for (double& v : j.p) v /= total;

      double err = 0.0;
      for_each_cell(j, [&](const std::vector<int>& idx, double p) {
        if (idx[0] != idx[4]) err += p;
      });
      double bound = 1.0 - (brute_force_mi(j, {1}, {3}) + std::log(2.0)) /
                               std::log(static_cast<double>(ky));
      worst = std::min(worst, err - bound);
      double gap = brute_force_mi(j, {2}, {3}) - brute_force_mi(j, {1}, {3});
      worst = std::min(worst, gap);
    }
    c.worst = worst;
    c.pass = worst >= -1e-9;
    c.detail = "min margin " + std::to_string(worst) + " over 200 chains";
    checks.push_back(c);
  }
  return checks;
}

}  // namespace rgib
