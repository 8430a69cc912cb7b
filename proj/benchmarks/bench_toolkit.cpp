// Microbenchmarks for the hot paths: kernel evaluation, end-to-end model
// execution, test carving, and op-wise validation.

#include <benchmark/benchmark.h>

#include "tapml/carver.hpp"
#include "tapml/executor.hpp"
#include "tapml/kernels.hpp"
#include "tapml/models.hpp"
#include "tapml/offloader.hpp"

using namespace tapml;

namespace {

Tensor random_f32(const Shape& shape, uint64_t seed) {
  Tensor t(DType::F32, shape);
  uint64_t s = seed * 2654435761u + 1;
  for (size_t i = 0; i < t.numel(); ++i) {
    s = s * 6364136223846793005ull + 1442695040888963407ull;
    t.set(i, static_cast<double>((s >> 11) % 2000001) / 1000000.0 - 1.0);
  }
  return t;
}

void bm_matmul(benchmark::State& state) {
  const int64_t n = state.range(0);
  auto backend = make_sim_native_backend();
  const Tensor a = random_f32({n, n}, 1);
  const Tensor b = random_f32({n, n}, 2);
  KernelHandle h =
      backend->compile(OpKind::MatMul, {}, {{DType::F32, {n, n}}, {DType::F32, {n, n}}});
  for (auto _ : state) benchmark::DoNotOptimize(backend->run(h, {a, b}));
  state.SetItemsProcessed(state.iterations() * n * n * n);
}
BENCHMARK(bm_matmul)->Arg(16)->Arg(32)->Arg(64);

void bm_softmax(benchmark::State& state) {
  const int64_t n = state.range(0);
  auto backend = make_sim_native_backend();
  const Tensor x = random_f32({n, n}, 3);
  KernelHandle h = backend->compile(OpKind::Softmax, {}, {{DType::F32, {n, n}}});
  for (auto _ : state) benchmark::DoNotOptimize(backend->run(h, {x}));
  state.SetItemsProcessed(state.iterations() * n * n);
}
BENCHMARK(bm_softmax)->Arg(32)->Arg(128);

void bm_run_graph(benchmark::State& state) {
  const ModelRecipe recipe = builtin_recipe("tiny-llama-block");
  const ModelBundle bundle = build_model(recipe);
  auto backend = make_sim_native_backend();
  const NamedInputs inputs = realistic_inputs(recipe, "motto-1", 1)[0];
  for (auto _ : state) benchmark::DoNotOptimize(run_graph(bundle, inputs, *backend));
}
BENCHMARK(bm_run_graph);

void bm_carve(benchmark::State& state) {
  const ModelRecipe recipe = builtin_recipe("tiny-mlp");
  const ModelBundle bundle = build_model(recipe);
  auto golden = make_golden_backend();
  const auto inputs = realistic_inputs(recipe, "motto-1", 1);
  for (auto _ : state)
    benchmark::DoNotOptimize(carve_run(bundle, *golden, inputs, "motto-1"));
}
BENCHMARK(bm_carve);

void bm_op_wise_validation(benchmark::State& state) {
  const ModelRecipe recipe = builtin_recipe("tiny-mlp");
  const ModelBundle bundle = build_model(recipe);
  auto golden = make_golden_backend();
  auto native = make_sim_native_backend();
  const TestCorpus corpus =
      carve_run(bundle, *golden, realistic_inputs(recipe, "motto-1", 2), "motto-1");
  const auto tests = corpus.tests_for_kind(OpKind::MatMul);
  for (auto _ : state)
    benchmark::DoNotOptimize(op_wise_validation(tests, *native, {}, true));
}
BENCHMARK(bm_op_wise_validation);

}  // namespace

BENCHMARK_MAIN();
