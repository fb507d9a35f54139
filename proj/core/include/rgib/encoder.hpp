#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rgib/graph.hpp"
#include "rgib/tape.hpp"
#include "rgib/types.hpp"

namespace rgib {

// Weights of the stochastic two-layer graph-convolution encoder, its Gaussian
// head, and the bilinear discriminator.
struct EncoderParams {
  Matrix w1;           // d x h
  Matrix w2;           // h x m
  Matrix slope1;       // 1x1 PReLU slope, layer 1
  Matrix slope2;       // 1x1 PReLU slope, layer 2
  Matrix head_mu;      // m x m
  Matrix head_logvar;  // m x m
  Matrix bilinear;     // m x m

  std::vector<Matrix*> tensors();
  std::vector<const Matrix*> tensors() const;
  static const std::vector<std::string>& tensor_names();
};

// Glorot-uniform weights, PReLU slopes at 0.25. Deterministic given the seed.
EncoderParams init_encoder_params(int in_dim, int hidden_dim, int embed_dim,
                                  std::uint64_t seed);

enum class SourceTag { Benign, Adversarial };

struct EmbeddingSet {
  Matrix mu;      // n x m
  Matrix logvar;  // n x m
  Matrix z;       // n x m; equals mu until sampled
  SourceTag source = SourceTag::Benign;
};

inline constexpr double kLogvarClamp = 10.0;

// Either a fixed sparse normalized adjacency or a dense tape node (used by
// the structure attack's continuous relaxation).
struct AdjacencyOp {
  const NormalizedAdjacency* sparse = nullptr;
  Tape::Id dense;

  static AdjacencyOp from_sparse(const NormalizedAdjacency* a) {
    AdjacencyOp op;
    op.sparse = a;
    return op;
  }
  static AdjacencyOp from_dense(Tape::Id a) {
    AdjacencyOp op;
    op.dense = a;
    return op;
  }
  Tape::Id apply(Tape& t, Tape::Id x) const {
    return sparse ? t.spmm(sparse, x) : t.matmul(dense, x);
  }
};

// Encoder parameters registered as differentiable tape inputs.
struct EncoderTapeIds {
  Tape::Id w1, w2, slope1, slope2, head_mu, head_logvar, bilinear;
  std::vector<Tape::Id> all() const {
    return {w1, w2, slope1, slope2, head_mu, head_logvar, bilinear};
  }
};

EncoderTapeIds put_encoder_params(Tape& t, const EncoderParams& p);

struct GcnForwardIds {
  Tape::Id h1, h2, mu, logvar;
};

// mu = PReLU(A PReLU(A X W1) W2) head_mu, logvar analogous and clamped.
GcnForwardIds gcn_forward_tape(Tape& t, const EncoderTapeIds& p,
                               const AdjacencyOp& a, Tape::Id x);

// Reparameterized z = mu + exp(logvar/2) .* eta with eta a fixed draw.
Tape::Id sample_z_tape(Tape& t, Tape::Id mu, Tape::Id logvar, const Matrix& eta);

// A^k X Theta without materializing A^k.
Tape::Id sgc_forward_tape(Tape& t, Tape::Id theta_eff, const AdjacencyOp& a,
                          Tape::Id x, int k);

// Standard-normal noise matrix for the reparameterization trick.
Matrix sample_noise(int rows, int cols, std::uint64_t seed);

// Plain-value conveniences (no gradients).
EmbeddingSet gcn_forward(const EncoderParams& p, const NormalizedAdjacency& a,
                         const Matrix& x);
EmbeddingSet sample_z(EmbeddingSet es, std::uint64_t seed);
Matrix sgc_forward(const Matrix& theta_eff, const NormalizedAdjacency& a,
                   const Matrix& x, int k);

}  // namespace rgib
