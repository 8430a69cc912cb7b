#pragma once

#include "tapml/carver.hpp"

namespace tapml {

/// Deterministic builder parameters for a builtin model. Building twice with
/// identical parameters yields byte-identical bundles.
struct ModelRecipe {
  std::string name;
  int64_t hidden = 32;
  int64_t vocab = 256;
  int64_t seq = 16;
  DType dtype = DType::F32;
  uint64_t seed = 7;
};

std::vector<std::string> builtin_recipes();
ModelRecipe builtin_recipe(const std::string& name);

ModelBundle build_model(const ModelRecipe& recipe);

/// Checked-in text snippets that drive "realistic" token inputs.
std::vector<std::string> builtin_corpora();
const std::string& corpus_text(const std::string& corpus_id);

/// Deterministic model-wise inputs for `n_passes` forward passes: token ids
/// via the byte-level tokenizer for token models, seeded Gaussian features
/// otherwise.
std::vector<NamedInputs> realistic_inputs(const ModelRecipe& recipe,
                                          const std::string& corpus_id,
                                          size_t n_passes = 1);

/// Byte-level toy tokenizer: one token per UTF-8 byte, wrapped to `count`.
Tensor tokenize(const std::string& text, int64_t count, int64_t vocab,
                size_t offset = 0);

/// Synthetic operator-level tests with uniform[-1,1] inputs and golden
/// oracles (the bottom-up-style tests that can miss input-conditional bugs).
std::vector<CarvedTest> synthesize_uniform_tests(OpKind kind, const Attrs& attrs,
                                                 const std::vector<TensorSig>& input_sig,
                                                 size_t count, uint64_t seed,
                                                 Backend& golden);

}  // namespace tapml
