#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rgib/attack.hpp"
#include "rgib/errors.hpp"
#include "rgib/eval.hpp"
#include "rgib/graph.hpp"
#include "rgib/trainer.hpp"

namespace rgib {

// Line-oriented graph text format:
//   line 1:        N M D C        (C = 0 when unlabeled)
//   next M lines:  u v            (0-indexed)
//   next N lines:  label k i1:v1 ... ik:vk
// label is -1 when the node is unlabeled; feature tokens are sparse with
// strictly increasing indices. Parse errors carry the offending line number.
AttributedGraph load_graph_file(const std::string& path);
AttributedGraph parse_graph_text(const std::string& text,
                                 const std::string& origin);
void save_graph_file(const AttributedGraph& g, const std::string& path);

enum class EvalAttackKind { None, Feature, Structure, Both };
EvalAttackKind eval_attack_kind_from_string(const std::string& s);
const char* to_string(EvalAttackKind kind);

// One flat JSON object drives a whole experiment; unknown keys are rejected.
struct ExperimentManifest {
  std::string dataset;  // graph file path; empty selects the synthetic spec
  int sbm_blocks = 3;
  int sbm_nodes_per_block = 100;
  double sbm_p_in = 0.1;
  double sbm_p_out = 0.02;
  int sbm_dim = 32;
  double sbm_feature_shift = 1.0;
  std::uint64_t sbm_seed = 7;

  TrainConfig train;

  EvalAttackKind eval_attack = EvalAttackKind::Feature;
  double eval_epsilon = 1e-3;
  int eval_pgd_iters = 40;
  double eval_pgd_step = 0.0;
  double eval_edge_budget_frac = 0.2;  // of |E|
  int eval_structure_iters = 20;

  std::vector<std::string> tasks = {"classification", "link", "community"};
  std::vector<std::uint64_t> seeds = {0};
  std::string out_dir;
  double train_frac = 0.1;
  bool retrain_classifier_on_adv = false;
  bool normalize_features = true;
  int bench_epochs = 3;

  PerturbationSpec eval_spec(int num_edges) const;
};

ExperimentManifest manifest_from_json_text(const std::string& text,
                                           const std::string& origin);
ExperimentManifest load_manifest_file(const std::string& path);

// Loads the dataset (or synthesizes it) and applies feature normalization.
AttributedGraph materialize_graph(const ExperimentManifest& m);

// Evaluation-time attack: structure flips first (when requested), then
// feature PGD on the flipped graph, both targeting the classification loss
// of a classifier fit on benign embeddings.
struct EvalAttackOutcome {
  AttributedGraph graph;     // flipped structure, benign features
  Matrix features;           // attacked features (graph.features + delta)
  StructurePerturbation flips;
  Matrix delta;
  std::string attack_json;   // spec snapshot for reporting
};
EvalAttackOutcome run_eval_attack(const AttributedGraph& g,
                                  const EncoderParams& params,
                                  const LogRegModel& clf,
                                  const std::vector<int>& target_nodes,
                                  const ExperimentManifest& m,
                                  std::uint64_t seed);

// Full pipeline: train over all seeds, evaluate every task benign and
// adversarial, write per-seed artifacts plus aggregated metrics.csv and
// summary.json under out_dir. Metrics files contain no timing columns and
// are byte-identical across reruns of the same manifest.
void run_experiment(const ExperimentManifest& m);

struct BenchReport {
  double seconds_per_epoch_rgib = 0.0;
  double seconds_per_epoch_rgib_s = 0.0;
  double ratio = 0.0;  // rgib-s / rgib
  int epochs = 0;
};
BenchReport run_bench(const ExperimentManifest& m);

// Serialization helpers shared by the CLI.
void write_history_csv(const TrainHistory& history, const std::string& path);
void write_metrics_csv(const std::vector<EvalReport>& rows,
                       const std::string& path);
std::string perturbation_to_json(const Matrix& delta,
                                 const StructurePerturbation& flips);
void parse_perturbation_json(const std::string& text, int n, int d,
                             Matrix* delta, StructurePerturbation* flips);

// Shortest-round-trip decimal formatting used by every text artifact.
std::string format_double(double v);

}  // namespace rgib
