#include "tapml/executor.hpp"

#include <algorithm>

namespace tapml {

namespace {

struct BoundInput {
  const Tensor* tensor;
};

/// Shared core of single-backend and hybrid execution. `placement` returns
/// the backend a node runs on.
ExecResult execute(const ModelBundle& bundle, const NamedInputs& inputs,
                   const std::function<Backend&(const Node&)>& placement,
                   const NodeObserver& observer) {
  auto violations = validate_bundle(bundle);
  if (!violations.empty())
    throw Error(errc::shape_mismatch, "invalid bundle: node " +
                                          std::to_string(violations[0].node_id) + ": " +
                                          violations[0].message);

  const ComputeGraph& graph = bundle.graph;
  std::map<int64_t, Tensor> values;
  std::map<int64_t, Backend*> produced_on;
  ExecResult result;

  for (const Node& node : graph.nodes) {
    Backend& backend = placement(node);

    // Bind the Constant payload: runtime input for graph inputs, weight
    // store otherwise.
    std::vector<Tensor> node_inputs;
    if (node.kind == OpKind::Constant) {
      const bool is_input = std::find(graph.input_ids.begin(), graph.input_ids.end(),
                                      node.id) != graph.input_ids.end();
      if (is_input) {
        auto it = inputs.find(node.name);
        if (it == inputs.end())
          throw Error(errc::shape_mismatch,
                      "no runtime value bound for graph input '" + node.name + "'");
        node_inputs.push_back(it->second);
      } else {
        auto it = bundle.weights.find(node.id);
        if (it == bundle.weights.end())
          throw Error(errc::shape_mismatch,
                      "Constant node " + std::to_string(node.id) + " has no payload");
        node_inputs.push_back(it->second);
      }
      const TensorSig declared{dtype_from_name(attr_string(node.attrs, "dtype")),
                               attr_int_list(node.attrs, "shape")};
      if (node_inputs[0].dtype() != declared.dtype ||
          node_inputs[0].shape() != declared.shape)
        throw Error(errc::shape_mismatch, "value bound to Constant node " +
                                              std::to_string(node.id) +
                                              " does not match declared signature");
    } else {
      for (int64_t ref : node.inputs) {
        node_inputs.push_back(values.at(ref));
        if (produced_on.at(ref) != &backend)
          result.transfer_bytes += node_inputs.back().byte_size();
      }
    }

    std::vector<TensorSig> in_sigs;
    for (const Tensor& t : node_inputs) in_sigs.push_back({t.dtype(), t.shape()});
    std::vector<Tensor> outputs;
    try {
      KernelHandle handle = backend.compile(node.kind, node.attrs, in_sigs);
      outputs = backend.run(handle, node_inputs);
    } catch (const Error& e) {
      throw Error(e.code(), std::string(e.what()) + " [node " + std::to_string(node.id) +
                                " '" + node.name + "' on " + backend.name() + "]");
    }
    if (observer) observer(node, node_inputs, outputs);
    values[node.id] = outputs.at(0);
    produced_on[node.id] = &backend;
  }

  for (int64_t id : graph.output_ids) result.outputs.push_back(values.at(id));
  return result;
}

}  // namespace

ExecResult run_graph(const ModelBundle& bundle, const NamedInputs& inputs,
                     Backend& backend, const NodeObserver& observer) {
  return execute(bundle, inputs, [&](const Node&) -> Backend& { return backend; },
                 observer);
}

ExecResult run_hybrid(const ModelBundle& bundle, const NamedInputs& inputs,
                      Backend& source, Backend& target,
                      const std::set<OpKind>& migrated) {
  return execute(
      bundle, inputs,
      [&](const Node& node) -> Backend& {
        return migrated.count(node.kind) ? target : source;
      },
      nullptr);
}

std::map<int64_t, TensorSig> input_signatures(const ModelBundle& bundle) {
  std::map<int64_t, TensorSig> sigs;
  for (int64_t id : bundle.graph.input_ids) {
    const Node* n = bundle.graph.find(id);
    if (!n) throw Error(errc::shape_mismatch, "input id does not exist");
    sigs[id] = TensorSig{dtype_from_name(attr_string(n->attrs, "dtype")),
                         attr_int_list(n->attrs, "shape")};
  }
  return sigs;
}

}  // namespace tapml
