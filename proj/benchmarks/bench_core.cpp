// Microbenchmarks for the hot paths: per-pair loss evaluation, gradient
// combination, model log-probability gradients, a full training step, and the
// token-level cosine heatmap.
#include <benchmark/benchmark.h>

#include <vector>

#include "polab/datasets.hpp"
#include "polab/diagnostics.hpp"
#include "polab/losses.hpp"
#include "polab/models.hpp"
#include "polab/rng.hpp"
#include "polab/training.hpp"

namespace {

using namespace polab;

// Loss value plus both gradient coefficients for one algorithm at a
// representative off-reference point.
void BM_loss_and_coeffs(benchmark::State& state) {
  Algo a = catalog()[static_cast<size_t>(state.range(0))];
  LossSpec spec = make_loss_spec(a);
  LossContext ctx;
  ctx.ref_logp_w = -4.0;
  ctx.ref_logp_l = -5.0;
  ctx.len_w = 6.0;
  ctx.len_l = 6.0;
  double w = -3.5, l = -5.5;
  for (auto _ : state) {
    double v = loss_value(spec, ctx, w, l);
    DwDl d = dw_dl(spec, ctx, w, l);
    benchmark::DoNotOptimize(v);
    benchmark::DoNotOptimize(d);
  }
  state.SetLabel(algo_name(a));
}
BENCHMARK(BM_loss_and_coeffs)->DenseRange(0, 9);

// Combining two parameter-space gradients into one update direction.
void BM_unified_gradient(benchmark::State& state) {
  const size_t n = static_cast<size_t>(state.range(0));
  Rng rng(derive_seed(42, 1));
  std::vector<double> gw(n), gl(n);
  for (size_t i = 0; i < n; ++i) {
    gw[i] = rng.normal();
    gl[i] = rng.normal();
  }
  LossSpec spec = make_loss_spec(Algo::dpo);
  LossContext ctx;
  for (auto _ : state) {
    auto g = unified_gradient(spec, ctx, -3.0, -4.0, gw, gl);
    benchmark::DoNotOptimize(g.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(n));
}
BENCHMARK(BM_unified_gradient)->Arg(512)->Arg(4096);

// Analytic parameter gradient of one response log-probability.
void BM_grad_logprob(benchmark::State& state) {
  LinearHeadLM model(16, 32, HiddenProvider(7, 16));
  auto data = build_sentiment_dataset(PairStyle::long_suffix, 1, 4, 32, 11);
  Encoded e = model.encode(data[0].prompt, data[0].y_w);
  for (auto _ : state) {
    auto g = model.grad_logprob(e);
    benchmark::DoNotOptimize(g.data());
  }
}
BENCHMARK(BM_grad_logprob);

// One full optimization step over a four-pair batch, including the
// per-step diagnostic trace row.
void BM_train_step(benchmark::State& state) {
  LinearHeadLM model(16, 32, HiddenProvider(7, 16));
  auto data = build_sentiment_dataset(PairStyle::long_suffix, 4, 4, 32, 11);
  TrainConfig cfg;
  cfg.spec = make_loss_spec(Algo::dpo);
  cfg.eta = 0.1;
  cfg.steps = 1;
  for (auto _ : state) {
    TrainResult r = train(model, data, cfg);
    benchmark::DoNotOptimize(r.trace.data());
  }
}
BENCHMARK(BM_train_step);

// Position-by-position gradient cosine matrix for one preference pair.
void BM_token_heatmap(benchmark::State& state) {
  LinearHeadLM model(16, 32, HiddenProvider(7, 16));
  auto data = build_sentiment_dataset(PairStyle::prefix_suffix, 1, 4, 32, 11);
  for (auto _ : state) {
    TokenHeatmap h = token_heatmap(model, data[0].prompt, data[0].y_w,
                                   data[0].y_l);
    benchmark::DoNotOptimize(h.v.data());
  }
}
BENCHMARK(BM_token_heatmap);

}  // namespace

BENCHMARK_MAIN();
