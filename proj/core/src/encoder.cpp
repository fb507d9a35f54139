#include "rgib/encoder.hpp"

#include <cmath>
#include <stdexcept>

#include "rgib/rng.hpp"

namespace rgib {

std::vector<Matrix*> EncoderParams::tensors() {
  return {&w1, &w2, &slope1, &slope2, &head_mu, &head_logvar, &bilinear};
}

std::vector<const Matrix*> EncoderParams::tensors() const {
  return {&w1, &w2, &slope1, &slope2, &head_mu, &head_logvar, &bilinear};
}

const std::vector<std::string>& EncoderParams::tensor_names() {
  static const std::vector<std::string> names = {
      "w1", "w2", "slope1", "slope2", "head_mu", "head_logvar", "bilinear"};
  return names;
}

namespace {
Matrix glorot(int rows, int cols, std::mt19937_64& rng) {
  double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> unif(-limit, limit);
  Matrix w(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) w(i, j) = unif(rng);
  return w;
}
}  // namespace

EncoderParams init_encoder_params(int in_dim, int hidden_dim, int embed_dim,
                                  std::uint64_t seed) {
  if (in_dim <= 0 || hidden_dim <= 0 || embed_dim <= 0)
    throw std::invalid_argument("init_encoder_params: dims must be positive");
  auto rng = make_rng(seed, Stream::ParamInit);
  EncoderParams p;
  p.w1 = glorot(in_dim, hidden_dim, rng);
  p.w2 = glorot(hidden_dim, embed_dim, rng);
  p.slope1 = Matrix::Constant(1, 1, 0.25);
  p.slope2 = Matrix::Constant(1, 1, 0.25);
  p.head_mu = glorot(embed_dim, embed_dim, rng);
  p.head_logvar = glorot(embed_dim, embed_dim, rng);
  p.bilinear = glorot(embed_dim, embed_dim, rng);
  return p;
}

EncoderTapeIds put_encoder_params(Tape& t, const EncoderParams& p) {
  EncoderTapeIds ids;
  ids.w1 = t.input(p.w1);
  ids.w2 = t.input(p.w2);
  ids.slope1 = t.input(p.slope1);
  ids.slope2 = t.input(p.slope2);
  ids.head_mu = t.input(p.head_mu);
  ids.head_logvar = t.input(p.head_logvar);
  ids.bilinear = t.input(p.bilinear);
  return ids;
}

GcnForwardIds gcn_forward_tape(Tape& t, const EncoderTapeIds& p,
                               const AdjacencyOp& a, Tape::Id x) {
  GcnForwardIds out;
  out.h1 = t.prelu(t.matmul(a.apply(t, x), p.w1), p.slope1);
  out.h2 = t.prelu(t.matmul(a.apply(t, out.h1), p.w2), p.slope2);
  out.mu = t.matmul(out.h2, p.head_mu);
  out.logvar = t.clamp(t.matmul(out.h2, p.head_logvar), -kLogvarClamp, kLogvarClamp);
  return out;
}

Tape::Id sample_z_tape(Tape& t, Tape::Id mu, Tape::Id logvar, const Matrix& eta) {
  Tape::Id sigma = t.exp(t.scale(logvar, 0.5));
  return t.add(mu, t.hadamard(sigma, t.constant(eta)));
}

Tape::Id sgc_forward_tape(Tape& t, Tape::Id theta_eff, const AdjacencyOp& a,
                          Tape::Id x, int k) {
  if (k < 1) throw std::invalid_argument("sgc_forward: k must be >= 1");
  Tape::Id h = x;
  for (int i = 0; i < k; ++i) h = a.apply(t, h);
  return t.matmul(h, theta_eff);
}

Matrix sample_noise(int rows, int cols, std::uint64_t seed) {
  auto rng = make_rng(seed, Stream::SampleNoise);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix eta(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) eta(i, j) = normal(rng);
  return eta;
}

EmbeddingSet gcn_forward(const EncoderParams& p, const NormalizedAdjacency& a,
                         const Matrix& x) {
  Tape t;
  EncoderTapeIds ids = put_encoder_params(t, p);
  auto fwd = gcn_forward_tape(t, ids, AdjacencyOp::from_sparse(&a), t.constant(x));
  EmbeddingSet es;
  es.mu = t.value(fwd.mu);
  es.logvar = t.value(fwd.logvar);
  es.z = es.mu;
  return es;
}

EmbeddingSet sample_z(EmbeddingSet es, std::uint64_t seed) {
  Matrix eta = sample_noise(static_cast<int>(es.mu.rows()),
                            static_cast<int>(es.mu.cols()), seed);
  es.z = es.mu + (es.logvar.array() / 2.0).exp().matrix().cwiseProduct(eta);
  return es;
}

Matrix sgc_forward(const Matrix& theta_eff, const NormalizedAdjacency& a,
                   const Matrix& x, int k) {
  if (k < 1) throw std::invalid_argument("sgc_forward: k must be >= 1");
  Matrix h = x;
  for (int i = 0; i < k; ++i) h = a.multiply(h);
  return h * theta_eff;
}

}  // namespace rgib
