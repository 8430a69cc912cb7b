#pragma once

#include "tapml/backend.hpp"

namespace tapml {

/// Reference kernel semantics shared by both interpreters; the policy is the
/// only difference between them.
std::vector<Tensor> eval_kernel(OpKind kind, const Attrs& attrs,
                                const std::vector<Tensor>& inputs,
                                const NumericPolicy& policy);

/// The source-platform oracle: F64 accumulation, one rounding on write.
std::unique_ptr<Backend> make_golden_backend(const DeviceProfile& profile = device_profile("pc"));

/// The target-platform stand-in: native F32/F16 precision. `supported` can
/// drop kinds to simulate missing codegen (compile -> UnsupportedOp).
std::unique_ptr<Backend> make_sim_native_backend(
    const DeviceProfile& profile = device_profile("pc"),
    std::set<OpKind> supported = {});

/// Resolves "golden-f64" or "sim-native"; remote specs are handled by the
/// RPC client, not here.
std::unique_ptr<Backend> make_local_backend(const std::string& name,
                                            const DeviceProfile& profile = device_profile("pc"));

}  // namespace tapml
