#include "rgib/graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <stdexcept>

#include "rgib/rng.hpp"

namespace rgib {

int AttributedGraph::num_classes() const {
  int c = 0;
  for (int y : labels) c = std::max(c, y + 1);
  return c;
}

void AttributedGraph::validate() const {
  if (n < 0) throw std::invalid_argument("graph: negative node count");
  if (features.rows() != n)
    throw std::invalid_argument("graph: feature matrix must have n rows");
  if (!labels.empty() && static_cast<int>(labels.size()) != n)
    throw std::invalid_argument("graph: labels must be empty or size n");
  std::set<std::pair<int, int>> seen;
  for (auto [u, v] : edges) {
    if (u < 0 || v < 0 || u >= n || v >= n)
      throw std::invalid_argument("graph: edge endpoint out of range");
    if (u == v) throw std::invalid_argument("graph: self-loop stored");
    if (u > v) throw std::invalid_argument("graph: edge not canonical (u<v)");
    if (!seen.insert({u, v}).second)
      throw std::invalid_argument("graph: duplicate edge");
  }
}

void canonicalize_edges(std::vector<std::pair<int, int>>& edges) {
  for (auto& e : edges)
    if (e.first > e.second) std::swap(e.first, e.second);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  edges.erase(std::remove_if(edges.begin(), edges.end(),
                             [](auto& e) { return e.first == e.second; }),
              edges.end());
}

Matrix NormalizedAdjacency::multiply(const Matrix& x) const {
  if (x.rows() != n) throw std::invalid_argument("spmm: row mismatch");
  Matrix out = Matrix::Zero(n, x.cols());
  for (int i = 0; i < n; ++i)
    for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
      out.row(i) += values[k] * x.row(col_idx[k]);
  return out;
}

Matrix NormalizedAdjacency::multiply_transpose(const Matrix& g) const {
  if (g.rows() != n) throw std::invalid_argument("spmm^T: row mismatch");
  Matrix out = Matrix::Zero(n, g.cols());
  for (int i = 0; i < n; ++i)
    for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
      out.row(col_idx[k]) += values[k] * g.row(i);
  return out;
}

Matrix NormalizedAdjacency::dense() const {
  Matrix out = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
      out(i, col_idx[k]) = values[k];
  return out;
}

NormalizedAdjacency normalize_adjacency(const AttributedGraph& g) {
  g.validate();
  const int n = g.n;
  // Adjacency structure incl. the implicit self-loop per node.
  std::vector<std::vector<int>> adj(n);
  for (int i = 0; i < n; ++i) adj[i].push_back(i);
  for (auto [u, v] : g.edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  std::vector<double> dinv_sqrt(n);
  for (int i = 0; i < n; ++i) {
    std::sort(adj[i].begin(), adj[i].end());
    dinv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(adj[i].size()));
  }
  NormalizedAdjacency a;
  a.n = n;
  a.row_ptr.assign(n + 1, 0);
  for (int i = 0; i < n; ++i) a.row_ptr[i + 1] = a.row_ptr[i] + static_cast<int>(adj[i].size());
  a.col_idx.reserve(a.row_ptr[n]);
  a.values.reserve(a.row_ptr[n]);
  for (int i = 0; i < n; ++i)
    for (int j : adj[i]) {
      a.col_idx.push_back(j);
      a.values.push_back(dinv_sqrt[i] * dinv_sqrt[j]);
    }
  return a;
}

Matrix row_l2_normalize(const Matrix& features) {
  Matrix out = features;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    double nrm = out.row(i).norm();
    if (nrm > 0.0) out.row(i) /= nrm;
  }
  return out;
}

Subgraph k_hop_subgraph(const AttributedGraph& g, int node, int k) {
  if (node < 0 || node >= g.n)
    throw std::out_of_range("k_hop_subgraph: node out of range");
  if (k < 0) throw std::invalid_argument("k_hop_subgraph: k must be >= 0");

  std::vector<std::vector<int>> adj(g.n);
  for (auto [u, v] : g.edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  std::vector<int> dist(g.n, -1);
  std::queue<int> q;
  dist[node] = 0;
  q.push(node);
  Subgraph s;
  s.center = node;
  s.nodes.push_back(node);
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    if (dist[u] == k) continue;
    for (int v : adj[u])
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        s.nodes.push_back(v);
        q.push(v);
      }
  }
  std::vector<int> local(g.n, -1);
  for (int i = 0; i < static_cast<int>(s.nodes.size()); ++i) local[s.nodes[i]] = i;
  for (auto [u, v] : g.edges)
    if (local[u] >= 0 && local[v] >= 0) {
      int a = local[u], b = local[v];
      s.edges.emplace_back(std::min(a, b), std::max(a, b));
    }
  std::sort(s.edges.begin(), s.edges.end());
  s.features.resize(static_cast<Eigen::Index>(s.nodes.size()), g.features.cols());
  for (int i = 0; i < static_cast<int>(s.nodes.size()); ++i)
    s.features.row(i) = g.features.row(s.nodes[i]);
  return s;
}

AttributedGraph Subgraph::to_graph() const {
  AttributedGraph g;
  g.n = static_cast<int>(nodes.size());
  g.edges = edges;
  g.features = features;
  return g;
}

AttributedGraph generate_sbm(int n_per_block, int blocks, double p_in,
                             double p_out, int d, double feature_shift,
                             std::uint64_t seed) {
  if (n_per_block <= 0 || blocks <= 0 || d <= 0)
    throw std::invalid_argument("generate_sbm: degenerate sizes");
  if (p_in < 0 || p_in > 1 || p_out < 0 || p_out > 1)
    throw std::invalid_argument("generate_sbm: probabilities must be in [0,1]");

  const int n = n_per_block * blocks;
  AttributedGraph g;
  g.n = n;
  g.labels.resize(n);
  for (int i = 0; i < n; ++i) g.labels[i] = i / n_per_block;

  auto edge_rng = make_rng(seed, Stream::Sbm, 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v) {
      double p = (g.labels[u] == g.labels[v]) ? p_in : p_out;
      if (unif(edge_rng) < p) g.edges.emplace_back(u, v);
    }

  // Block means: feature_shift * (seeded random unit vector per block).
  auto feat_rng = make_rng(seed, Stream::Sbm, 1);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix means(blocks, d);
  for (int b = 0; b < blocks; ++b) {
    for (int j = 0; j < d; ++j) means(b, j) = normal(feat_rng);
    double nrm = means.row(b).norm();
    if (nrm > 0) means.row(b) *= feature_shift / nrm;
  }
  g.features.resize(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      g.features(i, j) = means(g.labels[i], j) + normal(feat_rng);
  return g;
}

}  // namespace rgib
