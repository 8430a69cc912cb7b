#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "tapml/tensor.hpp"

namespace tapml {

enum class OpKind {
  Constant,
  Add,
  Sub,
  Mul,
  MatMul,
  Relu,
  Silu,
  GeluTanh,
  Softmax,
  RmsNorm,
  Embedding,
  Transpose2D,
  Reshape,
  DequantizeU8,
};

const char* op_kind_name(OpKind kind);
OpKind op_kind_from_name(const std::string& name);
std::vector<OpKind> all_op_kinds();

using AttrValue = std::variant<int64_t, double, std::vector<int64_t>, std::string>;
using Attrs = std::map<std::string, AttrValue>;

int64_t attr_int(const Attrs& attrs, const std::string& key);
double attr_real(const Attrs& attrs, const std::string& key);
const std::vector<int64_t>& attr_int_list(const Attrs& attrs, const std::string& key);
const std::string& attr_string(const Attrs& attrs, const std::string& key);

/// One operator node. Inputs refer to earlier nodes only, so the node list is
/// a topological order by construction.
struct Node {
  int64_t id = 0;
  OpKind kind = OpKind::Constant;
  Attrs attrs;
  std::vector<int64_t> inputs;
  std::string name;
};

struct ComputeGraph {
  std::vector<Node> nodes;
  std::vector<int64_t> input_ids;
  std::vector<int64_t> output_ids;
  std::vector<int64_t> weight_ids;

  const Node* find(int64_t id) const;
};

struct Violation {
  int64_t node_id;
  std::string message;
};

/// Shape-and-dtype signature of one tensor value.
struct TensorSig {
  DType dtype = DType::F32;
  Shape shape;

  bool operator==(const TensorSig&) const = default;
};

std::vector<Violation> validate_graph(const ComputeGraph& graph);

/// Required-attr table check for one operator; nullopt when well-formed.
std::optional<std::string> check_op_attrs(OpKind kind, const Attrs& attrs);

/// Per-node output signatures. Throws ShapeMismatch / AttrViolation on
/// incompatible operands. `input_shapes` covers graph inputs; Constant nodes
/// derive their signature from attrs.
std::map<int64_t, TensorSig> infer_shapes(const ComputeGraph& graph,
                                          const std::map<int64_t, TensorSig>& input_sigs);

/// Shape/dtype rule for a single operator given its input signatures.
std::vector<TensorSig> infer_op(OpKind kind, const Attrs& attrs,
                                const std::vector<TensorSig>& inputs);

struct ModelBundle {
  ComputeGraph graph;
  std::map<int64_t, Tensor> weights;
  std::string name;
  std::string version = "1";
};

/// Bundle-level validation: graph invariants plus weight coverage.
std::vector<Violation> validate_bundle(const ModelBundle& bundle);

/// Signatures for every node of a bundle, taking graph-input signatures from
/// `input_sigs` (keyed by node id).
std::map<int64_t, TensorSig> bundle_sigs(const ModelBundle& bundle,
                                         const std::map<int64_t, TensorSig>& input_sigs);

}  // namespace tapml
