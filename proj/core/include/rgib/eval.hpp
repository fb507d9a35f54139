#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rgib/attack.hpp"
#include "rgib/encoder.hpp"
#include "rgib/graph.hpp"

namespace rgib {

struct EvalReport {
  std::string task;    // classification | link | community
  std::string metric;  // accuracy | auc | nmi
  double value = 0.0;
  double std_dev = 0.0;
  int n_seeds = 1;
  std::string condition;    // benign | adversarial
  std::string attack_json;  // snapshot of the attack spec, "{}" when benign
};

struct LogRegModel {
  Matrix w;  // m x C
  Vector b;  // C
  Matrix logits(const Matrix& z) const;
  Matrix predict_proba(const Matrix& z) const;
  std::vector<int> predict(const Matrix& z) const;
};

struct LogRegOptions {
  double l2_reg = 1e-4;
  int iters = 1000;
  double lr = 0.1;
};

// Multinomial logistic regression by full-batch gradient descent from zero
// init. Throws on a single-class training set.
LogRegModel logreg_fit(const Matrix& z, const std::vector<int>& y,
                       int n_classes, const LogRegOptions& opt = {});

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth);

double logreg_classify(const Matrix& z_train, const std::vector<int>& y_train,
                       const Matrix& z_test, const std::vector<int>& y_test,
                       const LogRegOptions& opt = {});

// Mann-Whitney AUC; ties count half.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Hold out test_frac of the edges as positives plus an equal number of
// sampled non-edges; edge feature is the Hadamard product of endpoint
// embeddings; logistic regression on the remaining edges and fresh negatives.
double link_prediction(const Matrix& z, const AttributedGraph& g,
                       double test_frac, std::uint64_t seed);

// k-means (k-means++ seeding, best of `restarts` by inertia), scored by NMI
// with arithmetic-mean normalization.
double kmeans_nmi(const Matrix& z, const std::vector<int>& labels, int k,
                  int restarts, std::uint64_t seed);

std::vector<int> kmeans_assign(const Matrix& z, int k, int restarts,
                               std::uint64_t seed);
double nmi(const std::vector<int>& a, const std::vector<int>& b);

// Train/test node split: uses the labels to stratify nothing, purely random.
struct NodeSplit {
  std::vector<int> train, test;
};
NodeSplit split_nodes(int n, double train_frac, std::uint64_t seed);

// Attack objective for evaluation: negative cross-entropy of a fixed
// classifier on the listed nodes, differentiated through the encoder. The
// PGD driver minimizes it, so the attacker maximizes the classification loss.
FeatureLossFn make_classification_attack_loss(const EncoderParams& params,
                                              const NormalizedAdjacency& a,
                                              const Matrix& x,
                                              const LogRegModel& clf,
                                              const std::vector<int>& labels,
                                              const std::vector<int>& nodes);

// Same objective as a function of a dense normalized adjacency (structure
// attack), at fixed features.
StructureAttackCallbacks make_classification_structure_callbacks(
    const EncoderParams& params, const AttributedGraph& g,
    const LogRegModel& clf, const std::vector<int>& nodes);

// Cross-entropy of clf on the given nodes, built on the tape from an
// encoder forward pass. Exposed for the attack builders above.
Tape::Id classification_ce_tape(Tape& t, const EncoderTapeIds& params,
                                const AdjacencyOp& a, Tape::Id x,
                                const LogRegModel& clf,
                                const std::vector<int>& labels,
                                const std::vector<int>& nodes);

}  // namespace rgib
