// Microbenchmarks for the kernels on the training hot path.

#include <benchmark/benchmark.h>

#include "rgib/attack.hpp"
#include "rgib/graph.hpp"
#include "rgib/mi.hpp"
#include "rgib/trainer.hpp"

namespace {

using namespace rgib;

AttributedGraph bench_graph(int n_per_block) {
  AttributedGraph g = generate_sbm(n_per_block, 3, 0.1, 0.02, 32, 1.0, 7);
  g.features = row_l2_normalize(g.features);
  return g;
}

void BM_Spmm(benchmark::State& state) {
  AttributedGraph g = bench_graph(static_cast<int>(state.range(0)));
  NormalizedAdjacency a = normalize_adjacency(g);
  Matrix x = Matrix::Random(g.n, 64);
  for (auto _ : state) benchmark::DoNotOptimize(a.multiply(x));
}
BENCHMARK(BM_Spmm)->Arg(100)->Arg(300);

void BM_GcnForwardBackward(benchmark::State& state) {
  AttributedGraph g = bench_graph(static_cast<int>(state.range(0)));
  NormalizedAdjacency a = normalize_adjacency(g);
  EncoderParams p = init_encoder_params(g.dim(), 64, 64, 1);
  for (auto _ : state) {
    Tape t;
    EncoderTapeIds ids = put_encoder_params(t, p);
    GcnForwardIds fwd = gcn_forward_tape(t, ids, AdjacencyOp::from_sparse(&a),
                                         t.constant(g.features));
    Tape::Id loss = t.mean(fwd.mu);
    benchmark::DoNotOptimize(t.gradients(loss, ids.all()));
  }
}
BENCHMARK(BM_GcnForwardBackward)->Arg(100)->Arg(300);

void BM_RgibEpoch(benchmark::State& state) {
  AttributedGraph g = bench_graph(100);
  TrainConfig cfg;
  cfg.hidden_dim = 64;
  cfg.embed_dim = 64;
  cfg.epochs = 1;
  cfg.mode = state.range(0) == 0 ? TrainMode::Rgib : TrainMode::RgibS;
  cfg.edge_budget = cfg.mode == TrainMode::RgibS
                        ? std::max(1, g.num_edges() / 5)
                        : 0;
  for (auto _ : state) benchmark::DoNotOptimize(train(g, cfg));
}
BENCHMARK(BM_RgibEpoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
