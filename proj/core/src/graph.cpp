#include "tapml/graph.hpp"

#include <algorithm>
#include <array>
#include <set>

namespace tapml {

namespace {

constexpr std::array<const char*, 14> kKindNames = {
    "Constant", "Add",     "Sub",       "Mul",         "MatMul",
    "Relu",     "Silu",    "GeluTanh",  "Softmax",     "RmsNorm",
    "Embedding", "Transpose2D", "Reshape", "DequantizeU8"};

}  // namespace

const char* op_kind_name(OpKind kind) { return kKindNames[static_cast<size_t>(kind)]; }

OpKind op_kind_from_name(const std::string& name) {
  for (size_t i = 0; i < kKindNames.size(); ++i)
    if (name == kKindNames[i]) return static_cast<OpKind>(i);
  throw Error(errc::parse_error, "unknown OpKind '" + name + "'");
}

std::vector<OpKind> all_op_kinds() {
  std::vector<OpKind> kinds;
  for (size_t i = 0; i < kKindNames.size(); ++i) kinds.push_back(static_cast<OpKind>(i));
  return kinds;
}

namespace {

const AttrValue& attr_at(const Attrs& attrs, const std::string& key) {
  auto it = attrs.find(key);
  if (it == attrs.end()) throw Error(errc::attr_violation, "missing attr '" + key + "'");
  return it->second;
}

}  // namespace

int64_t attr_int(const Attrs& attrs, const std::string& key) {
  const AttrValue& v = attr_at(attrs, key);
  if (const int64_t* p = std::get_if<int64_t>(&v)) return *p;
  throw Error(errc::attr_violation, "attr '" + key + "' is not an integer");
}

double attr_real(const Attrs& attrs, const std::string& key) {
  const AttrValue& v = attr_at(attrs, key);
  if (const double* p = std::get_if<double>(&v)) return *p;
  if (const int64_t* p = std::get_if<int64_t>(&v)) return static_cast<double>(*p);
  throw Error(errc::attr_violation, "attr '" + key + "' is not a real");
}

const std::vector<int64_t>& attr_int_list(const Attrs& attrs, const std::string& key) {
  const AttrValue& v = attr_at(attrs, key);
  if (const auto* p = std::get_if<std::vector<int64_t>>(&v)) return *p;
  throw Error(errc::attr_violation, "attr '" + key + "' is not an integer list");
}

const std::string& attr_string(const Attrs& attrs, const std::string& key) {
  const AttrValue& v = attr_at(attrs, key);
  if (const auto* p = std::get_if<std::string>(&v)) return *p;
  throw Error(errc::attr_violation, "attr '" + key + "' is not a string");
}

const Node* ComputeGraph::find(int64_t id) const {
  for (const Node& n : nodes)
    if (n.id == id) return &n;
  return nullptr;
}

std::optional<std::string> check_op_attrs(OpKind kind, const Attrs& attrs) {
  try {
    switch (kind) {
      case OpKind::Constant: {
        dtype_from_name(attr_string(attrs, "dtype"));
        const auto& shape = attr_int_list(attrs, "shape");
        if (shape.size() > kMaxRank) return "Constant shape exceeds rank cap";
        for (int64_t d : shape)
          if (d < 0) return "Constant shape has negative extent";
        break;
      }
      case OpKind::RmsNorm: {
        if (attr_real(attrs, "eps") <= 0) return "RmsNorm.eps must be > 0";
        break;
      }
      case OpKind::Reshape: {
        attr_int_list(attrs, "target_shape");
        break;
      }
      case OpKind::DequantizeU8: {
        if (attr_real(attrs, "scale") <= 0) return "DequantizeU8.scale must be > 0";
        int64_t zp = attr_int(attrs, "zero_point");
        if (zp < 0 || zp > 255) return "DequantizeU8.zero_point must be in [0,255]";
        if (attr_int(attrs, "group") <= 0) return "DequantizeU8.group must be positive";
        if (attrs.count("out_dtype")) {
          DType out = dtype_from_name(attr_string(attrs, "out_dtype"));
          if (!dtype_is_float(out)) return "DequantizeU8.out_dtype must be a float dtype";
        }
        break;
      }
      default:
        break;
    }
  } catch (const Error& e) {
    return e.what();
  }
  return std::nullopt;
}

namespace {

size_t expected_arity(OpKind kind) {
  switch (kind) {
    case OpKind::Constant: return 0;
    case OpKind::Add:
    case OpKind::Sub:
    case OpKind::Mul:
    case OpKind::MatMul:
    case OpKind::RmsNorm:
    case OpKind::Embedding: return 2;
    default: return 1;
  }
}

}  // namespace

std::vector<Violation> validate_graph(const ComputeGraph& graph) {
  std::vector<Violation> out;
  std::set<int64_t> seen;
  for (size_t i = 0; i < graph.nodes.size(); ++i) {
    const Node& n = graph.nodes[i];
    if (n.id < 0) out.push_back({n.id, "negative node id"});
    if (!seen.insert(n.id).second) out.push_back({n.id, "duplicate node id"});
    for (int64_t ref : n.inputs)
      if (!seen.count(ref))
        out.push_back({n.id, "forward reference at node " + std::to_string(n.id) +
                                 " to id " + std::to_string(ref)});
    if (n.inputs.size() != expected_arity(n.kind))
      out.push_back({n.id, std::string(op_kind_name(n.kind)) + " expects " +
                               std::to_string(expected_arity(n.kind)) + " inputs, has " +
                               std::to_string(n.inputs.size())});
    if (auto msg = check_op_attrs(n.kind, n.attrs)) out.push_back({n.id, *msg});
  }
  for (int64_t id : graph.input_ids) {
    if (!seen.count(id)) out.push_back({id, "input id does not exist"});
    const Node* n = graph.find(id);
    if (n && n->kind != OpKind::Constant)
      out.push_back({id, "graph input must be a Constant node"});
  }
  if (graph.output_ids.empty()) out.push_back({-1, "output_ids is empty"});
  for (int64_t id : graph.output_ids)
    if (!seen.count(id)) out.push_back({id, "output id does not exist"});
  for (int64_t id : graph.weight_ids) {
    if (!seen.count(id)) {
      out.push_back({id, "weight id does not exist"});
      continue;
    }
    const Node* n = graph.find(id);
    if (n && n->kind != OpKind::Constant)
      out.push_back({id, "weight node must be a Constant"});
    if (std::find(graph.input_ids.begin(), graph.input_ids.end(), id) !=
        graph.input_ids.end())
      out.push_back({id, "node is both input and weight"});
  }
  return out;
}

std::vector<TensorSig> infer_op(OpKind kind, const Attrs& attrs,
                                const std::vector<TensorSig>& in) {
  auto fail = [&](const std::string& msg) -> std::vector<TensorSig> {
    throw Error(errc::shape_mismatch, std::string(op_kind_name(kind)) + ": " + msg);
  };
  // Constant admits one extra signature entry: the payload bound at
  // execution time (graph-level arity remains zero).
  if (kind == OpKind::Constant ? in.size() > 1 : in.size() != expected_arity(kind))
    fail("wrong input arity");
  switch (kind) {
    case OpKind::Constant: {
      return {TensorSig{dtype_from_name(attr_string(attrs, "dtype")),
                        attr_int_list(attrs, "shape")}};
    }
    case OpKind::Add:
    case OpKind::Sub:
    case OpKind::Mul: {
      if (in[0].dtype != in[1].dtype) fail("operand dtypes differ");
      const bool s0 = Tensor::shape_numel(in[0].shape) == 1;
      const bool s1 = Tensor::shape_numel(in[1].shape) == 1;
      if (in[0].shape == in[1].shape) return {in[0]};
      if (s1) return {in[0]};
      if (s0) return {in[1]};
      return fail("shapes " + shape_str(in[0].shape) + " and " + shape_str(in[1].shape) +
                  " are neither equal nor scalar-with-tensor");
    }
    case OpKind::MatMul: {
      if (in[0].dtype != in[1].dtype) fail("operand dtypes differ");
      if (in[0].shape.size() != 2 || in[1].shape.size() != 2) fail("operands must be rank 2");
      if (in[0].shape[1] != in[1].shape[0])
        fail("inner dims disagree: " + shape_str(in[0].shape) + " x " + shape_str(in[1].shape));
      return {TensorSig{in[0].dtype, {in[0].shape[0], in[1].shape[1]}}};
    }
    case OpKind::Relu:
    case OpKind::Silu:
    case OpKind::GeluTanh: {
      if (!dtype_is_float(in[0].dtype)) fail("input must be a float dtype");
      return {in[0]};
    }
    case OpKind::Softmax: {
      if (!dtype_is_float(in[0].dtype)) fail("input must be a float dtype");
      if (in[0].shape.empty()) fail("input must have rank >= 1");
      return {in[0]};
    }
    case OpKind::RmsNorm: {
      if (!dtype_is_float(in[0].dtype)) fail("input must be a float dtype");
      if (in[0].shape.empty()) fail("input must have rank >= 1");
      if (in[1].shape.size() != 1 || in[1].shape[0] != in[0].shape.back())
        fail("gamma shape " + shape_str(in[1].shape) + " does not match last axis");
      if (in[1].dtype != in[0].dtype) fail("gamma dtype differs");
      return {in[0]};
    }
    case OpKind::Embedding: {
      if (in[0].shape.size() != 2) fail("table must be rank 2");
      if (!dtype_is_float(in[0].dtype)) fail("table must be a float dtype");
      if (in[1].dtype != DType::I32 || in[1].shape.size() != 1)
        fail("ids must be a rank-1 i32 tensor");
      return {TensorSig{in[0].dtype, {in[1].shape[0], in[0].shape[1]}}};
    }
    case OpKind::Transpose2D: {
      if (in[0].shape.size() != 2) fail("input must be rank 2");
      return {TensorSig{in[0].dtype, {in[0].shape[1], in[0].shape[0]}}};
    }
    case OpKind::Reshape: {
      Shape target = attr_int_list(attrs, "target_shape");
      if (target.size() > kMaxRank) fail("target rank exceeds cap");
      if (Tensor::shape_numel(target) != Tensor::shape_numel(in[0].shape))
        fail("element count changes: " + shape_str(in[0].shape) + " -> " + shape_str(target));
      return {TensorSig{in[0].dtype, target}};
    }
    case OpKind::DequantizeU8: {
      if (in[0].dtype != DType::U8) fail("input must be u8");
      if (in[0].shape.empty()) fail("input must have rank >= 1");
      int64_t group = attr_int(attrs, "group");
      if (in[0].shape.back() % group != 0)
        fail("group " + std::to_string(group) + " does not divide last axis");
      DType out = attrs.count("out_dtype")
                      ? dtype_from_name(attr_string(attrs, "out_dtype"))
                      : DType::F32;
      return {TensorSig{out, in[0].shape}};
    }
  }
  return fail("unreachable");
}

std::map<int64_t, TensorSig> infer_shapes(const ComputeGraph& graph,
                                          const std::map<int64_t, TensorSig>& input_sigs) {
  std::map<int64_t, TensorSig> sigs;
  for (const Node& n : graph.nodes) {
    std::vector<TensorSig> in;
    in.reserve(n.inputs.size());
    for (int64_t ref : n.inputs) in.push_back(sigs.at(ref));
    TensorSig sig;
    try {
      sig = infer_op(n.kind, n.attrs, in)[0];
    } catch (const Error& e) {
      throw Error(e.code(), "node " + std::to_string(n.id) + " (" + n.name + "): " +
                                std::string(e.what()));
    }
    if (auto it = input_sigs.find(n.id); it != input_sigs.end() && !(it->second == sig))
      throw Error(errc::shape_mismatch,
                  "declared input signature for node " + std::to_string(n.id) +
                      " disagrees with attrs");
    sigs[n.id] = sig;
  }
  return sigs;
}

std::vector<Violation> validate_bundle(const ModelBundle& bundle) {
  std::vector<Violation> out = validate_graph(bundle.graph);
  std::set<int64_t> wids(bundle.graph.weight_ids.begin(), bundle.graph.weight_ids.end());
  for (const auto& [id, w] : bundle.weights)
    if (!wids.count(id)) out.push_back({id, "weight payload for non-weight node"});
  for (int64_t id : bundle.graph.weight_ids) {
    auto it = bundle.weights.find(id);
    if (it == bundle.weights.end()) {
      out.push_back({id, "missing weight payload"});
      continue;
    }
    const Node* n = bundle.graph.find(id);
    if (!n || n->kind != OpKind::Constant) continue;
    try {
      TensorSig sig{dtype_from_name(attr_string(n->attrs, "dtype")),
                    attr_int_list(n->attrs, "shape")};
      if (it->second.dtype() != sig.dtype || it->second.shape() != sig.shape)
        out.push_back({id, "weight tensor does not match declared signature"});
    } catch (const Error&) {
      // attr violation already reported by validate_graph
    }
  }
  return out;
}

std::map<int64_t, TensorSig> bundle_sigs(const ModelBundle& bundle,
                                         const std::map<int64_t, TensorSig>& input_sigs) {
  return infer_shapes(bundle.graph, input_sigs);
}

}  // namespace tapml
