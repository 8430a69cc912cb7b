#include "doctest.h"
#include "tapml/executor.hpp"
#include "tapml/kernels.hpp"
#include "tapml/models.hpp"

using namespace tapml;

namespace {

/// x -> Add(x, w) -> Relu, one input, one weight.
ModelBundle two_op_bundle() {
  ModelBundle b;
  b.name = "unit";
  auto add_node = [&](OpKind kind, std::vector<int64_t> inputs, std::string name,
                      Attrs attrs = {}) {
    Node n;
    n.id = static_cast<int64_t>(b.graph.nodes.size());
    n.kind = kind;
    n.inputs = std::move(inputs);
    n.name = std::move(name);
    n.attrs = std::move(attrs);
    b.graph.nodes.push_back(n);
    return n.id;
  };
  Attrs sig = {{"dtype", std::string("f32")}, {"shape", std::vector<int64_t>{3}}};
  const int64_t x = add_node(OpKind::Constant, {}, "x", sig);
  b.graph.input_ids = {x};
  const int64_t w = add_node(OpKind::Constant, {}, "w", sig);
  b.graph.weight_ids = {w};
  Tensor wt(DType::F32, {3});
  wt.set(0, -5.0);
  wt.set(1, 1.0);
  wt.set(2, 0.0);
  b.weights.emplace(w, wt);
  const int64_t sum = add_node(OpKind::Add, {x, w}, "sum");
  const int64_t act = add_node(OpKind::Relu, {sum}, "act");
  b.graph.output_ids = {act};
  return b;
}

NamedInputs inputs_123() {
  Tensor x(DType::F32, {3});
  x.set(0, 1.0);
  x.set(1, 2.0);
  x.set(2, 3.0);
  return {{"x", x}};
}

}  // namespace

TEST_CASE("run_graph executes in topological order and returns declared outputs") {
  auto golden = make_golden_backend();
  const ModelBundle bundle = two_op_bundle();
  const ExecResult result = run_graph(bundle, inputs_123(), *golden);
  REQUIRE(result.outputs.size() == 1);
  CHECK(result.outputs[0].get(0) == 0.0);  // relu(1 - 5)
  CHECK(result.outputs[0].get(1) == 3.0);
  CHECK(result.outputs[0].get(2) == 3.0);
  CHECK(result.transfer_bytes == 0);  // single placement
}

TEST_CASE("missing or mis-shaped runtime inputs fail with context") {
  auto golden = make_golden_backend();
  const ModelBundle bundle = two_op_bundle();
  CHECK_THROWS_AS(run_graph(bundle, {}, *golden), Error);
  Tensor wrong(DType::F32, {4});
  CHECK_THROWS_AS(run_graph(bundle, {{"x", wrong}}, *golden), Error);
}

TEST_CASE("the observer sees every node with its runtime operands") {
  auto golden = make_golden_backend();
  const ModelBundle bundle = two_op_bundle();
  std::vector<std::pair<OpKind, size_t>> seen;
  run_graph(bundle, inputs_123(), *golden,
            [&](const Node& node, const std::vector<Tensor>& ins,
                const std::vector<Tensor>& outs) {
              seen.emplace_back(node.kind, ins.size());
              CHECK(outs.size() == 1);
            });
  REQUIRE(seen.size() == 4);
  CHECK(seen[0].first == OpKind::Constant);
  CHECK(seen[0].second == 1);  // the bound payload is observable
  CHECK(seen[2].first == OpKind::Add);
  CHECK(seen[2].second == 2);
  CHECK(seen[3].first == OpKind::Relu);
}

TEST_CASE("hybrid placement copies tensors across the backend boundary") {
  auto golden = make_golden_backend();
  auto native = make_sim_native_backend();
  const ModelBundle bundle = two_op_bundle();

  // only Relu migrated: its single 12-byte input crosses the boundary
  ExecResult hybrid = run_hybrid(bundle, inputs_123(), *golden, *native, {OpKind::Relu});
  CHECK(hybrid.transfer_bytes == 12);
  CHECK(hybrid.outputs[0].get(1) == 3.0);

  // nothing migrated == pure source, bit-exact, zero transfers
  ExecResult none = run_hybrid(bundle, inputs_123(), *golden, *native, {});
  ExecResult pure = run_graph(bundle, inputs_123(), *golden);
  CHECK(none.transfer_bytes == 0);
  CHECK(none.outputs[0] == pure.outputs[0]);

  // everything migrated == pure target
  const std::vector<OpKind> kinds = all_op_kinds();
  std::set<OpKind> all(kinds.begin(), kinds.end());
  ExecResult full = run_hybrid(bundle, inputs_123(), *golden, *native, all);
  ExecResult tgt = run_graph(bundle, inputs_123(), *native);
  CHECK(full.outputs[0] == tgt.outputs[0]);
}

TEST_CASE("input_signatures reads declared graph-input signatures") {
  const ModelBundle bundle = two_op_bundle();
  auto sigs = input_signatures(bundle);
  REQUIRE(sigs.size() == 1);
  CHECK(sigs.begin()->second == TensorSig{DType::F32, {3}});
}

TEST_CASE("builtin models execute end-to-end on both interpreters") {
  auto golden = make_golden_backend();
  auto native = make_sim_native_backend();
  for (const std::string& name : builtin_recipes()) {
    const ModelRecipe recipe = builtin_recipe(name);
    const ModelBundle bundle = build_model(recipe);
    const NamedInputs in = realistic_inputs(recipe, "motto-1", 1)[0];
    CHECK_NOTHROW(run_graph(bundle, in, *golden));
    CHECK_NOTHROW(run_graph(bundle, in, *native));
  }
}
