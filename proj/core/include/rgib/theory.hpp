#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rgib/attack.hpp"
#include "rgib/encoder.hpp"
#include "rgib/eval.hpp"
#include "rgib/graph.hpp"

namespace rgib {

// Explicit joint probability table over small finite alphabets. Variable i
// has alphabet size sizes[i]; the table is dense, row-major with the last
// variable fastest. All information quantities are in nats.
struct DiscreteJoint {
  std::vector<std::string> names;
  std::vector<int> sizes;
  std::vector<double> p;

  std::size_t cells() const;
  std::size_t offset(const std::vector<int>& idx) const;
  void validate() const;  // entries >= 0, sum within 1e-12 of 1
};

// Exact discrete mutual information I(A;B) between two groups of variables.
double brute_force_mi(const DiscreteJoint& joint, const std::vector<int>& vars_a,
                      const std::vector<int>& vars_b);

// Exact conditional mutual information I(A;B|C).
double brute_force_cmi(const DiscreteJoint& joint, const std::vector<int>& vars_a,
                       const std::vector<int>& vars_b,
                       const std::vector<int>& cond);

// Random joints, seeded: Dirichlet(1) cells, or a Markov chain
// p(v0) p(v1|v0) p(v2|v1) built factor by factor.
DiscreteJoint random_joint(const std::vector<int>& sizes, std::uint64_t seed);
DiscreteJoint random_markov_chain_joint(const std::vector<int>& sizes,
                                        std::uint64_t seed);

// |I(S';Z') - I(S';Z'|S) - I(S;Z')| for a joint over (S, S', Z') that is
// Markov S - S' - Z'. Non-Markov joints (I(S;Z'|S') > 1e-10) are rejected.
double check_decomposition(const DiscreteJoint& joint);

// max(0, 1 - (mi + log 2) / log alphabet_size)
double fano_bound(double mi_nats, int alphabet_size);

// Pr(Y != Yhat) - fano_bound(I(Y;Yhat), |Y|) for a joint over (Y, Yhat)
// with uniform Y (non-uniform marginals are rejected).
double check_fano(const DiscreteJoint& joint);

struct DataProcessingMargins {
  double x_side;  // I(X;Y) - I(X;Z)
  double z_side;  // I(Y;Z) - I(X;Z)
};
DataProcessingMargins check_data_processing(const DiscreteJoint& joint);

struct AdvRiskResult {
  std::vector<double> risk;  // one entry per epsilon, non-decreasing
  double clean_error = 0.0;
};

// Empirical adversarial risk of classifier-on-encoder under the feature PGD
// attack: the fraction of eval nodes some feasible perturbation misclassifies.
// Epsilons must be ascending; each level warm-starts from the previous best
// perturbation and accumulates witnesses, which makes the estimate monotone
// and keeps it a lower bound on the true risk (PGD is not exhaustive).
AdvRiskResult empirical_adv_risk(const LogRegModel& clf,
                                 const EncoderParams& encoder,
                                 const AttributedGraph& g,
                                 const std::vector<int>& labels,
                                 const std::vector<int>& eval_nodes,
                                 std::vector<double> epsilons,
                                 const PerturbationSpec& spec, int n_seeds,
                                 std::uint64_t seed);

struct VerifyCheck {
  std::string name;
  bool pass = false;
  double worst = 0.0;  // worst residual/margin observed
  std::string detail;
};

// The sweeps behind the `verify` subcommand. Seeded and deterministic.
std::vector<VerifyCheck> run_theory_checks(std::uint64_t seed);

}  // namespace rgib
