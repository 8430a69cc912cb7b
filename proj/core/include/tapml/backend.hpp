#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "tapml/graph.hpp"

namespace tapml {

/// Simulated platform limits. Enforced, not advisory: the local interpreter
/// rejects oversized launches and the RPC server rejects oversized buffers
/// and launch widths.
struct DeviceProfile {
  std::string name;
  uint64_t max_threads_per_launch = 0;
  uint64_t max_buffer_bytes = 0;
};

DeviceProfile device_profile(const std::string& name);  // "pc" | "mobile"

/// Accumulation/rounding discipline. The golden backend accumulates in F64
/// and rounds once on write; the native backend accumulates in F32 and, for
/// F16 nodes, rounds every stored intermediate to binary16.
struct NumericPolicy {
  DType accumulate_dtype = DType::F64;
  bool round_outputs = true;
};

struct KernelHandle {
  std::string backend;
  OpKind kind = OpKind::Constant;
  Attrs attrs;
  std::string attrs_digest;
  std::vector<TensorSig> input_sig;
  std::vector<TensorSig> output_sig;
  /// Backend-private token (the RPC client stores the remote module id here).
  uint64_t opaque = 0;
};

class Backend {
 public:
  virtual ~Backend() = default;

  virtual std::string name() const = 0;
  virtual DeviceProfile profile() const = 0;
  virtual KernelHandle compile(OpKind kind, const Attrs& attrs,
                               const std::vector<TensorSig>& input_sig) = 0;
  /// Deterministic, never mutates inputs. Throws Error on launch-limit or
  /// signature violations; NaN propagates as data, not failure.
  virtual std::vector<Tensor> run(const KernelHandle& handle,
                                  const std::vector<Tensor>& inputs) = 0;
};

/// Launch-width convention: element count of the kernel's largest output.
uint64_t launch_width(const std::vector<TensorSig>& output_sig);

std::string attrs_digest(const Attrs& attrs);

}  // namespace tapml
