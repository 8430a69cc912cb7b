#pragma once

#include <filesystem>
#include <optional>

#include "tapml/carver.hpp"

namespace tapml {

/// Elementwise pass predicate: |a - b| <= atol + rtol*|b| with b = oracle.
/// NaN vs NaN passes when nan_equal; NaN vs non-NaN always fails; infinities
/// are equal iff signs match.
struct Tolerance {
  double rtol = 0.0;
  double atol = 0.0;
  bool nan_equal = true;

  static Tolerance for_dtype(DType dtype);
};

/// Run-level tolerance configuration: per-dtype defaults, optionally
/// overridden for the whole run.
struct ToleranceConfig {
  std::optional<double> rtol;
  std::optional<double> atol;
  bool nan_equal = true;

  Tolerance resolve(DType dtype) const;
};

struct CompareResult {
  bool pass = true;
  size_t first_bad = 0;
  double actual = 0.0;
  double oracle = 0.0;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
};

CompareResult compare_tensors(const Tensor& actual, const Tensor& oracle,
                              const Tolerance& tol);

enum class Verdict { Pass, Fail, Crash };
const char* verdict_name(Verdict v);

struct OpWiseResult {
  Verdict verdict = Verdict::Pass;
  size_t n_tests = 0;
  size_t failing_test = 0;     // index into the validated list on Fail/Crash
  size_t failing_index = 0;    // flat element index on Fail
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  std::string detail;          // error code/message on Crash
};

/// Algorithm-style operator validation over carved tests: short-circuits on
/// the first failing test unless `exhaustive`. Backend compile/run errors
/// surface as Crash, not a tolerance failure.
OpWiseResult op_wise_validation(const std::vector<const CarvedTest*>& tests,
                                Backend& target, const ToleranceConfig& tol,
                                bool exhaustive = false);

enum class Policy { Halt, Scan };
enum class OracleMode { TensorTol, Argmax };

struct StepRecord {
  OpKind kind = OpKind::Constant;
  Verdict op_verdict = Verdict::Pass;
  Verdict model_verdict = Verdict::Pass;
  bool integration_fault = false;  // model-wise failed after op-wise passed
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  size_t n_tests = 0;
  double secs = 0.0;
};

struct OverheadBreakdown {
  double carve_secs = 0.0;
  double opwise_secs = 0.0;
  double modelwise_secs = 0.0;
  uint64_t transfer_bytes = 0;
};

struct MigrationReport {
  std::string status;                 // "complete" | "halted-at <kind>"
  std::vector<StepRecord> steps;
  std::vector<OpKind> migrated;
  std::vector<OpKind> buggy;
  std::optional<size_t> fp;
  std::optional<size_t> fn;
  std::vector<OpKind> fp_kinds;
  std::vector<OpKind> fn_kinds;
  OverheadBreakdown overhead;
  std::string config_json;            // resolved run config, echoed for reproducibility

  bool complete() const { return status == "complete"; }
};

/// Gradual target offloading over op kinds in first-occurrence topological
/// order: op-wise validation on carved tests, then model-wise validation of
/// the hybrid graph against the recorded pure-source outputs.
MigrationReport gradual_offload(const ModelBundle& bundle, Backend& source,
                                Backend& target, const TestCorpus& corpus,
                                const ToleranceConfig& tol, Policy policy,
                                OracleMode oracle_mode = OracleMode::TensorTol);

/// Scan-policy offload projected to the buggy-kind set; FP/FN against ground
/// truth when supplied.
MigrationReport localize(const ModelBundle& bundle, Backend& source, Backend& target,
                         const TestCorpus& corpus, const ToleranceConfig& tol,
                         const std::optional<std::set<OpKind>>& truth = std::nullopt,
                         OracleMode oracle_mode = OracleMode::TensorTol);

/// Kind migration order: first occurrence over the topologically ordered
/// node list.
std::vector<OpKind> migration_order(const ComputeGraph& graph);

std::string report_to_json(const MigrationReport& report);
void write_report(const MigrationReport& report, const std::filesystem::path& path);

}  // namespace tapml
