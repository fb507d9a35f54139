#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rgib/attack.hpp"
#include "rgib/encoder.hpp"
#include "rgib/graph.hpp"
#include "rgib/mi.hpp"

namespace rgib {

enum class TrainMode { Rgib, RgibS, InfomaxOnly };

struct TrainConfig {
  double alpha = 0.5;        // weight between adversarial and benign MI terms
  double beta = 0.1;         // weight of the KL compression term
  double epsilon = 1e-3;     // training feature budget (l2,inf)
  int pgd_iters = 5;
  double pgd_step = 0.0;     // <= 0 selects 2.5 * epsilon / pgd_iters
  int epochs = 500;
  int hidden_dim = 512;
  int embed_dim = 512;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  EstimatorKind estimator = EstimatorKind::Smi;
  int sgc_k = 2;
  TrainMode mode = TrainMode::Rgib;
  int edge_budget = 0;       // structure flips per epoch, rgib-s only
  int structure_iters = 20;

  void validate() const;
  PerturbationSpec attack_spec() const;
};

struct EpochRecord {
  int epoch = 0;
  double mi_adv = 0.0;
  double mi_benign = 0.0;
  double kl = 0.0;
  double objective = 0.0;
  double attack_drop = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> records;
};

// Term values of one objective evaluation. Terms skipped by the
// configuration (beta = 0, alpha at an endpoint, infomax-only) are reported
// absent rather than zero so tests can assert they were never built.
struct ObjectiveParts {
  double total = 0.0;
  double mi_adv = 0.0;
  double mi_benign = 0.0;
  double kl = 0.0;
  bool has_adv = false;
  bool has_benign = false;
  bool has_kl = false;
};

// Tape-level objective: ids of the total and of each present term.
struct ObjectiveBuild {
  Tape::Id total;
  Tape::Id mi_adv, mi_benign, kl;
  ObjectiveParts parts(const Tape& t) const;
};

// alpha * I(S;Z') + (1-alpha) * I(S;Z) - beta * KL(adv head || benign head).
// Z comes from the benign pass, Z' from the adversarial pass; both JSD terms
// pair representations with *benign-graph* summaries. With infomax-only the
// adversarial pass is never constructed and the objective is I(S;Z) alone.
// x_adv may be invalid for infomax-only.
ObjectiveBuild build_rgib_objective(Tape& t, const EncoderTapeIds& params,
                                    const NormalizedAdjacency& a_benign,
                                    const Matrix& x_benign,
                                    const AdjacencyOp& a_adv, Tape::Id x_adv,
                                    const TrainConfig& cfg, const Matrix& eta,
                                    const CorruptedView& neg);

// Value-level evaluation with the exact per-epoch random streams used by
// train(): noise and negatives derive from (cfg.seed, epoch).
ObjectiveParts rgib_objective(const AttributedGraph& g,
                              const Matrix& perturbed_features,
                              const EncoderParams& params,
                              const TrainConfig& cfg, int epoch,
                              const StructurePerturbation* flips = nullptr);

struct TrainResult {
  EncoderParams params;
  TrainHistory history;
  Matrix last_delta;                 // zero-size until a simulation step ran
  StructurePerturbation last_flips;  // rgib-s only
};

// Alternates the simulation step (PGD minimizing the objective over
// perturbations) with one Adam ascent step on the parameters. Deterministic
// given cfg.seed. History records term values re-evaluated at the updated
// parameters, so the last record matches rgib_objective at the final params.
TrainResult train(const AttributedGraph& g, const TrainConfig& cfg);

// JSON checkpoint: tensor name -> shape + row-major float64 values.
// Round-trips bit-exactly (shortest-round-trip decimal serialization).
void save_checkpoint(const EncoderParams& params, const std::string& path);
EncoderParams load_checkpoint(const std::string& path);

const char* to_string(TrainMode mode);
const char* to_string(EstimatorKind kind);
TrainMode train_mode_from_string(const std::string& s);
EstimatorKind estimator_from_string(const std::string& s);

}  // namespace rgib
