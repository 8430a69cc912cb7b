#pragma once

#include <functional>

#include "tapml/backend.hpp"

namespace tapml {

/// Values keyed by graph-input node name.
using NamedInputs = std::map<std::string, Tensor>;

struct ExecResult {
  std::vector<Tensor> outputs;       // one per graph output id, in order
  uint64_t transfer_bytes = 0;       // simulated host<->device copies across placements
};

/// Per-node observation hook: (node, inputs, outputs) after the node runs.
using NodeObserver = std::function<void(const Node&, const std::vector<Tensor>&,
                                        const std::vector<Tensor>&)>;

/// Executes the whole graph on one backend in node-list (topological) order.
ExecResult run_graph(const ModelBundle& bundle, const NamedInputs& inputs,
                     Backend& backend, const NodeObserver& observer = nullptr);

/// Hybrid execution: a node runs on `target` iff its kind is migrated, else
/// on `source`. Tensors crossing the placement boundary are copied
/// byte-preserving and counted in transfer_bytes.
ExecResult run_hybrid(const ModelBundle& bundle, const NamedInputs& inputs,
                      Backend& source, Backend& target,
                      const std::set<OpKind>& migrated);

/// Signatures of the bundle's graph inputs, derived from their Constant attrs.
std::map<int64_t, TensorSig> input_signatures(const ModelBundle& bundle);

}  // namespace tapml
