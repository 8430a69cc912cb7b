#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "tapml/carver.hpp"
#include "tapml/kernels.hpp"
#include "tapml/models.hpp"

using namespace tapml;
namespace fs = std::filesystem;

namespace {

TestCorpus carve_builtin(const std::string& recipe_name, const std::string& corpus_id,
                         size_t passes, bool dedup = false) {
  const ModelRecipe recipe = builtin_recipe(recipe_name);
  const ModelBundle bundle = build_model(recipe);
  auto golden = make_golden_backend();
  return carve_run(bundle, *golden, realistic_inputs(recipe, corpus_id, passes), corpus_id,
                   dedup);
}

}  // namespace

TEST_CASE("carving yields one test per (node, pass) with golden oracles") {
  const ModelBundle bundle = build_model(builtin_recipe("tiny-mlp"));
  const TestCorpus corpus = carve_builtin("tiny-mlp", "motto-1", 2);
  CHECK(corpus.tests.size() == bundle.graph.nodes.size() * 2);
  CHECK(corpus.passes.size() == 2);
  CHECK(corpus.backend == "golden-f64");
  CHECK(corpus.provenance == "motto-1");
  CHECK(corpus.carve_secs >= 0.0);
  for (const CarvedTest& t : corpus.tests) {
    CHECK(!t.oracle.empty());
    CHECK(bundle.graph.find(t.node_id) != nullptr);
    CHECK(bundle.graph.find(t.node_id)->kind == t.kind);
  }
}

TEST_CASE("carving is observation-only: recorded outputs equal an uninstrumented run") {
  const ModelRecipe recipe = builtin_recipe("tiny-llama-block");
  const ModelBundle bundle = build_model(recipe);
  auto golden = make_golden_backend();
  const auto inputs = realistic_inputs(recipe, "motto-2", 2);
  const TestCorpus corpus = carve_run(bundle, *golden, inputs, "motto-2");
  REQUIRE(corpus.passes.size() == 2);
  for (size_t p = 0; p < 2; ++p) {
    const ExecResult plain = run_graph(bundle, inputs[p], *golden);
    REQUIRE(corpus.passes[p].outputs.size() == plain.outputs.size());
    for (size_t i = 0; i < plain.outputs.size(); ++i)
      CHECK(corpus.passes[p].outputs[i] == plain.outputs[i]);  // bit-exact
  }
}

TEST_CASE("per-kind and per-node retrieval slice the corpus") {
  const ModelBundle bundle = build_model(builtin_recipe("tiny-mlp"));
  const TestCorpus corpus = carve_builtin("tiny-mlp", "motto-1", 3);
  CHECK(corpus.tests_for_kind(OpKind::MatMul).size() == 6);  // two matmul nodes x 3 passes
  CHECK(corpus.tests_for_kind(OpKind::Softmax).size() == 3);
  CHECK(corpus.tests_for_kind(OpKind::Silu).empty());
  const int64_t softmax_id = bundle.graph.output_ids[0];
  CHECK(corpus.tests_for_node(softmax_id).size() == 3);
}

TEST_CASE("dedup collapses byte-identical tests per node") {
  // identical inputs on every pass => every duplicate collapses
  const ModelRecipe recipe = builtin_recipe("tiny-mlp");
  const ModelBundle bundle = build_model(recipe);
  auto golden = make_golden_backend();
  const NamedInputs one = realistic_inputs(recipe, "motto-1", 1)[0];
  const std::vector<NamedInputs> same = {one, one, one};
  const TestCorpus full = carve_run(bundle, *golden, same, "motto-1", false);
  const TestCorpus deduped = carve_run(bundle, *golden, same, "motto-1", true);
  CHECK(full.tests.size() == bundle.graph.nodes.size() * 3);
  CHECK(deduped.tests.size() == bundle.graph.nodes.size());
}

TEST_CASE("corpus save/load round-trips bit-exactly") {
  const TestCorpus corpus = carve_builtin("sub-chain", "motto-1", 2);
  const fs::path dir = fs::temp_directory_path() / "tapml-test-corpus";
  fs::remove_all(dir);
  save_corpus(corpus, dir);
  const TestCorpus loaded = load_corpus(dir);

  CHECK(loaded.model_sha256 == corpus.model_sha256);
  CHECK(loaded.backend == corpus.backend);
  CHECK(loaded.provenance == corpus.provenance);
  REQUIRE(loaded.tests.size() == corpus.tests.size());
  for (size_t i = 0; i < corpus.tests.size(); ++i) {
    CHECK(loaded.tests[i].node_id == corpus.tests[i].node_id);
    CHECK(loaded.tests[i].kind == corpus.tests[i].kind);
    CHECK(loaded.tests[i].attrs == corpus.tests[i].attrs);
    REQUIRE(loaded.tests[i].inputs.size() == corpus.tests[i].inputs.size());
    for (size_t j = 0; j < corpus.tests[i].inputs.size(); ++j)
      CHECK(loaded.tests[i].inputs[j] == corpus.tests[i].inputs[j]);
    for (size_t j = 0; j < corpus.tests[i].oracle.size(); ++j)
      CHECK(loaded.tests[i].oracle[j] == corpus.tests[i].oracle[j]);
  }
  REQUIRE(loaded.passes.size() == corpus.passes.size());
  for (size_t p = 0; p < corpus.passes.size(); ++p) {
    CHECK(loaded.passes[p].inputs == corpus.passes[p].inputs);
    for (size_t i = 0; i < corpus.passes[p].outputs.size(); ++i)
      CHECK(loaded.passes[p].outputs[i] == corpus.passes[p].outputs[i]);
  }
  fs::remove_all(dir);
}

TEST_CASE("blob corruption is caught on load") {
  const TestCorpus corpus = carve_builtin("tiny-mlp", "motto-1", 1);
  const fs::path dir = fs::temp_directory_path() / "tapml-test-corpus-corrupt";
  fs::remove_all(dir);
  save_corpus(corpus, dir);

  // flip one byte in the largest blob
  fs::path victim;
  uintmax_t best = 0;
  for (const auto& entry : fs::directory_iterator(dir / "blobs"))
    if (entry.file_size() > best) {
      best = entry.file_size();
      victim = entry.path();
    }
  REQUIRE(!victim.empty());
  std::fstream f(victim, std::ios::in | std::ios::out | std::ios::binary);
  char c = static_cast<char>(f.get());
  f.seekp(0);
  f.put(static_cast<char>(c ^ 0x1));
  f.close();

  CHECK_THROWS_WITH_AS(load_corpus(dir), doctest::Contains("ChecksumMismatch"), Error);
  fs::remove_all(dir);
}

TEST_CASE("loading a missing corpus directory is a parse error") {
  CHECK_THROWS_WITH_AS(load_corpus(fs::temp_directory_path() / "tapml-no-such-corpus"),
                       doctest::Contains("ParseError"), Error);
}
