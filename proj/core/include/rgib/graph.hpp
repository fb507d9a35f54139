#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "rgib/types.hpp"

namespace rgib {

// Sparse undirected attributed graph. Edges are canonical (u < v), unique,
// without self-loops; features are dense row-major, one row per node.
struct AttributedGraph {
  int n = 0;
  std::vector<std::pair<int, int>> edges;
  Matrix features;           // n x d
  std::vector<int> labels;   // empty when unlabeled, else one label per node

  int dim() const { return static_cast<int>(features.cols()); }
  int num_edges() const { return static_cast<int>(edges.size()); }
  int num_classes() const;
  bool has_labels() const { return !labels.empty(); }

  // Throws std::invalid_argument when an invariant is broken.
  void validate() const;
};

// Symmetric normalized adjacency with self-loops, D^{-1/2} (A+I) D^{-1/2},
// stored compressed-row. Diagonal entries are strictly positive.
struct NormalizedAdjacency {
  int n = 0;
  std::vector<int> row_ptr;   // size n+1
  std::vector<int> col_idx;
  std::vector<double> values;

  Matrix multiply(const Matrix& x) const;            // A * x
  Matrix multiply_transpose(const Matrix& g) const;  // A^T * g
  Matrix dense() const;
};

struct Subgraph {
  int center = 0;                          // id in the parent graph
  std::vector<int> nodes;                  // parent ids, BFS order from center
  std::vector<std::pair<int, int>> edges;  // local indices, canonical
  Matrix features;                         // induced rows

  int local_center() const { return 0; }   // center is always first
  AttributedGraph to_graph() const;
};

NormalizedAdjacency normalize_adjacency(const AttributedGraph& g);

// Rows with nonzero norm are scaled to unit l2 norm; zero rows are kept.
Matrix row_l2_normalize(const Matrix& features);

Subgraph k_hop_subgraph(const AttributedGraph& g, int node, int k);

// Stochastic block model with per-block Gaussian features. Block b's feature
// mean is feature_shift times a seeded random unit vector; labels are block
// ids. Fully deterministic given the seed.
AttributedGraph generate_sbm(int n_per_block, int blocks, double p_in,
                             double p_out, int d, double feature_shift,
                             std::uint64_t seed);

// Canonicalize + dedupe an edge list in place (u<v, sorted, self-loops dropped).
void canonicalize_edges(std::vector<std::pair<int, int>>& edges);

}  // namespace rgib
