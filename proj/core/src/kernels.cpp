#include "tapml/kernels.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

#include "json.hpp"
#include "tapml/float16.hpp"
#include "tapml/sha256.hpp"

namespace tapml {

DeviceProfile device_profile(const std::string& name) {
  if (name == "pc") return {"pc", 1024, 1ull << 30};
  if (name == "mobile") return {"mobile", 256, 128ull << 20};
  throw Error(errc::parse_error, "unknown device profile '" + name + "'");
}

uint64_t launch_width(const std::vector<TensorSig>& output_sig) {
  uint64_t width = 1;
  for (const TensorSig& sig : output_sig)
    width = std::max<uint64_t>(width, Tensor::shape_numel(sig.shape));
  return width;
}

std::string attrs_digest(const Attrs& attrs) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, value] : attrs)
    std::visit([&, k = key](const auto& v) { j[k] = v; }, value);
  return sha256_hex(j.dump());
}

namespace {

/// Rounds one arithmetic intermediate per the backend's policy. The golden
/// policy keeps full F64; the native policy narrows to F32, or to binary16
/// when the node's dtype is F16.
inline double step(double v, DType node_dtype, const NumericPolicy& policy) {
  if (policy.accumulate_dtype == DType::F64) return v;
  if (node_dtype == DType::F16) return fp16::round_f64(v);
  return static_cast<double>(static_cast<float>(v));
}

double gelu_tanh(double x, double cubic_coeff) {
  const double inner = std::sqrt(2.0 / std::numbers::pi) * (x + cubic_coeff * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(inner));
}

}  // namespace

std::vector<Tensor> eval_kernel(OpKind kind, const Attrs& attrs,
                                const std::vector<Tensor>& inputs,
                                const NumericPolicy& policy) {
  std::vector<TensorSig> in_sigs;
  in_sigs.reserve(inputs.size());
  for (const Tensor& t : inputs) in_sigs.push_back({t.dtype(), t.shape()});
  const TensorSig out_sig = infer_op(kind, attrs, in_sigs)[0];
  const DType od = out_sig.dtype;
  Tensor out(od, out_sig.shape);
  const size_t n = out.numel();

  switch (kind) {
    case OpKind::Constant:
      // resolved from the weight store (or runtime input) at graph-bind time
      return {inputs.empty() ? out : inputs[0]};

    case OpKind::Add:
    case OpKind::Sub:
    case OpKind::Mul: {
      const bool s0 = inputs[0].numel() == 1;
      const bool s1 = inputs[1].numel() == 1;
      for (size_t i = 0; i < n; ++i) {
        const double a = inputs[0].get(s0 ? 0 : i);
        const double b = inputs[1].get(s1 ? 0 : i);
        double v = kind == OpKind::Add ? a + b : kind == OpKind::Sub ? a - b : a * b;
        out.set(i, v);
      }
      break;
    }

    case OpKind::MatMul: {
      const int64_t m = inputs[0].shape()[0];
      const int64_t k = inputs[0].shape()[1];
      const int64_t p = inputs[1].shape()[1];
      for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < p; ++j) {
          double acc = 0.0;
          for (int64_t kk = 0; kk < k; ++kk) {  // sequential ascending-k
            const double prod = step(
                inputs[0].get(i * k + kk) * inputs[1].get(kk * p + j), od, policy);
            acc = step(acc + prod, od, policy);
          }
          out.set(static_cast<size_t>(i * p + j), acc);
        }
      }
      break;
    }

    case OpKind::Relu:
      for (size_t i = 0; i < n; ++i) {
        const double x = inputs[0].get(i);
        out.set(i, x > 0.0 ? x : 0.0);
      }
      break;

    case OpKind::Silu:
      for (size_t i = 0; i < n; ++i) {
        const double x = inputs[0].get(i);
        out.set(i, x / (1.0 + std::exp(-x)));
      }
      break;

    case OpKind::GeluTanh:
      for (size_t i = 0; i < n; ++i) out.set(i, gelu_tanh(inputs[0].get(i), 0.044715));
      break;

    case OpKind::Softmax: {
      const int64_t width = out_sig.shape.empty() ? 1 : out_sig.shape.back();
      const size_t rows = n / static_cast<size_t>(width);
      for (size_t r = 0; r < rows; ++r) {
        const size_t base = r * static_cast<size_t>(width);
        double row_max = -std::numeric_limits<double>::infinity();
        for (int64_t c = 0; c < width; ++c)
          row_max = std::max(row_max, inputs[0].get(base + c));
        std::vector<double> exps(static_cast<size_t>(width));
        double sum = 0.0;
        for (int64_t c = 0; c < width; ++c) {
          exps[c] = step(std::exp(inputs[0].get(base + c) - row_max), od, policy);
          sum = step(sum + exps[c], od, policy);
        }
        for (int64_t c = 0; c < width; ++c) out.set(base + c, exps[c] / sum);
      }
      break;
    }

    case OpKind::RmsNorm: {
      const double eps = attr_real(attrs, "eps");
      const int64_t width = out_sig.shape.back();
      const size_t rows = n / static_cast<size_t>(width);
      for (size_t r = 0; r < rows; ++r) {
        const size_t base = r * static_cast<size_t>(width);
        double sq = 0.0;
        for (int64_t c = 0; c < width; ++c) {
          const double x = inputs[0].get(base + c);
          sq = step(sq + step(x * x, od, policy), od, policy);
        }
        const double denom = std::sqrt(sq / static_cast<double>(width) + eps);
        for (int64_t c = 0; c < width; ++c)
          out.set(base + c, inputs[0].get(base + c) / denom * inputs[1].get(c));
      }
      break;
    }

    case OpKind::Embedding: {
      const int64_t rows = inputs[0].shape()[0];
      const int64_t dim = inputs[0].shape()[1];
      const size_t row_bytes = static_cast<size_t>(dim) * dtype_width(inputs[0].dtype());
      const int64_t count = inputs[1].shape()[0];
      for (int64_t i = 0; i < count; ++i) {
        const int64_t id = inputs[1].get_int(static_cast<size_t>(i));
        if (id < 0 || id >= rows)
          throw Error(errc::shape_mismatch,
                      "Embedding: id " + std::to_string(id) + " out of table range");
        std::memcpy(out.bytes().data() + static_cast<size_t>(i) * row_bytes,
                    inputs[0].bytes().data() + static_cast<size_t>(id) * row_bytes,
                    row_bytes);
      }
      break;
    }

    case OpKind::Transpose2D: {
      const int64_t r = inputs[0].shape()[0];
      const int64_t c = inputs[0].shape()[1];
      const size_t w = dtype_width(od);
      for (int64_t i = 0; i < r; ++i)
        for (int64_t j = 0; j < c; ++j)
          std::memcpy(out.bytes().data() + static_cast<size_t>(j * r + i) * w,
                      inputs[0].bytes().data() + static_cast<size_t>(i * c + j) * w, w);
      break;
    }

    case OpKind::Reshape:
      out.bytes() = inputs[0].bytes();  // bit-preserving
      break;

    case OpKind::DequantizeU8: {
      const double scale = attr_real(attrs, "scale");
      const double zero_point = static_cast<double>(attr_int(attrs, "zero_point"));
      for (size_t i = 0; i < n; ++i)
        out.set(i, (inputs[0].get(i) - zero_point) * scale);
      break;
    }
  }
  return {out};
}

namespace {

class InterpreterBackend final : public Backend {
 public:
  InterpreterBackend(std::string name, NumericPolicy policy, DeviceProfile profile,
                     std::set<OpKind> supported)
      : name_(std::move(name)),
        policy_(policy),
        profile_(std::move(profile)),
        supported_(std::move(supported)) {}

  std::string name() const override { return name_; }
  DeviceProfile profile() const override { return profile_; }

  KernelHandle compile(OpKind kind, const Attrs& attrs,
                       const std::vector<TensorSig>& input_sig) override {
    if (!supported_.empty() && !supported_.count(kind))
      throw Error(errc::unsupported_op, std::string(op_kind_name(kind)) +
                                            " has no codegen on backend " + name_);
    if (auto msg = check_op_attrs(kind, attrs))
      throw Error(errc::attr_violation, std::string(op_kind_name(kind)) + ": " + *msg);
    KernelHandle handle;
    handle.backend = name_;
    handle.kind = kind;
    handle.attrs = attrs;
    handle.attrs_digest = attrs_digest(attrs);
    handle.input_sig = input_sig;
    handle.output_sig = infer_op(kind, attrs, input_sig);
    return handle;
  }

  std::vector<Tensor> run(const KernelHandle& handle,
                          const std::vector<Tensor>& inputs) override {
    if (handle.backend != name_)
      throw Error(errc::unknown_kind, "handle was compiled by backend " + handle.backend);
    if (inputs.size() != handle.input_sig.size())
      throw Error(errc::shape_mismatch, "input arity mismatch");
    for (size_t i = 0; i < inputs.size(); ++i)
      if (inputs[i].dtype() != handle.input_sig[i].dtype ||
          inputs[i].shape() != handle.input_sig[i].shape)
        throw Error(errc::shape_mismatch,
                    "input " + std::to_string(i) + " does not match compiled signature");
    const uint64_t width = launch_width(handle.output_sig);
    if (width > profile_.max_threads_per_launch * 65535ull)
      throw Error(errc::launch_exceeds_profile,
                  "launch width " + std::to_string(width) + " exceeds profile " +
                      profile_.name);
    return eval_kernel(handle.kind, handle.attrs, inputs, policy_);
  }

 private:
  std::string name_;
  NumericPolicy policy_;
  DeviceProfile profile_;
  std::set<OpKind> supported_;  // empty = full op table
};

}  // namespace

std::unique_ptr<Backend> make_golden_backend(const DeviceProfile& profile) {
  return std::make_unique<InterpreterBackend>(
      "golden-f64", NumericPolicy{DType::F64, true}, profile, std::set<OpKind>{});
}

std::unique_ptr<Backend> make_sim_native_backend(const DeviceProfile& profile,
                                                 std::set<OpKind> supported) {
  return std::make_unique<InterpreterBackend>(
      "sim-native", NumericPolicy{DType::F32, true}, profile, std::move(supported));
}

std::unique_ptr<Backend> make_local_backend(const std::string& name,
                                            const DeviceProfile& profile) {
  if (name == "golden-f64") return make_golden_backend(profile);
  if (name == "sim-native") return make_sim_native_backend(profile);
  throw Error(errc::unknown_kind, "no local backend named '" + name + "'");
}

}  // namespace tapml
