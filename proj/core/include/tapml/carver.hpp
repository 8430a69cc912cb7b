#pragma once

#include <filesystem>

#include "tapml/executor.hpp"

namespace tapml {

/// One carved unit test: operator signature, recorded inputs, and the
/// golden-backend outputs captured as the oracle.
struct CarvedTest {
  int64_t node_id = 0;
  int64_t step = 0;  // forward-pass index
  OpKind kind = OpKind::Constant;
  std::string name;
  Attrs attrs;
  std::vector<Tensor> inputs;
  std::vector<Tensor> oracle;
};

/// Model-wise inputs and recorded end-to-end outputs for one forward pass.
struct RecordedPass {
  NamedInputs inputs;
  std::vector<Tensor> outputs;
};

struct TestCorpus {
  std::string model_sha256;
  std::string backend;        // source backend the oracle came from
  std::string provenance;     // which input corpus drove the passes
  double carve_secs = 0.0;
  std::vector<RecordedPass> passes;
  std::vector<CarvedTest> tests;  // ordered by (pass, node)

  std::vector<const CarvedTest*> tests_for_kind(OpKind kind) const;
  std::vector<const CarvedTest*> tests_for_node(int64_t node_id) const;
};

/// Instruments an end-to-end run on the source backend and extracts one test
/// per (node, pass). Observation-only: recorded model outputs equal an
/// uninstrumented run bit-exactly.
TestCorpus carve_run(const ModelBundle& bundle, Backend& source,
                     const std::vector<NamedInputs>& pass_inputs,
                     const std::string& provenance = "",
                     bool dedup = false);

/// Corpus directory: `corpus.json` manifest + `blobs/<sha256>.bin` raw
/// little-endian tensors, checksum-verified on load.
void save_corpus(const TestCorpus& corpus, const std::filesystem::path& dir);
TestCorpus load_corpus(const std::filesystem::path& dir);

}  // namespace tapml
