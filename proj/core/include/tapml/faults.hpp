#pragma once

#include <filesystem>

#include "tapml/backend.hpp"

namespace tapml {

/// Deterministic symptom-level corruptions mirroring bugs observed on real
/// target platforms. Each mode is a pure transformation of one kernel.
enum class FaultMode {
  ResultPlusOne,
  FastMathTanhNaN,
  PackedU32Dequant,
  WrongGeluConstant,
  Fp16Accumulate,
  UnalignedGatherOffByOne,
  DropLastColumn,
};

const char* fault_mode_name(FaultMode mode);
FaultMode fault_mode_from_name(const std::string& name);

struct FaultSpec {
  std::string id;
  OpKind target_kind = OpKind::Constant;
  FaultMode mode = FaultMode::ResultPlusOne;
  double param = 0.0;  // threshold for FastMathTanhNaN, constant for WrongGeluConstant
  bool enabled = true;
};

struct FaultSet {
  std::vector<FaultSpec> faults;
  std::string provenance;

  std::set<OpKind> enabled_kinds() const;
  bool empty() const;
};

/// `faults.json`: array of {id, kind, mode, params, enabled}, optionally
/// wrapped in {provenance, faults:[...]}.
FaultSet load_faults(const std::filesystem::path& path);
void save_faults(const FaultSet& set, const std::filesystem::path& path);

/// Wraps a backend so that kernels of the faulted kinds misbehave; all other
/// kinds pass through byte-identically. The inner backend must outlive the
/// wrapper.
std::unique_ptr<Backend> wrap_with_faults(Backend& inner, const FaultSet& set);

}  // namespace tapml
