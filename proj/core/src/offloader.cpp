#include "tapml/offloader.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "tapml/bundle_io.hpp"

namespace tapml {

using nlohmann::json;

Tolerance Tolerance::for_dtype(DType dtype) {
  switch (dtype) {
    case DType::F64: return {1e-7, 1e-9, true};
    case DType::F32: return {1e-4, 1e-6, true};
    case DType::F16: return {1e-2, 1e-3, true};
    default: return {0.0, 0.0, true};  // integers and bool compare exactly
  }
}

Tolerance ToleranceConfig::resolve(DType dtype) const {
  Tolerance t = Tolerance::for_dtype(dtype);
  if (dtype_is_float(dtype)) {
    if (rtol) t.rtol = *rtol;
    if (atol) t.atol = *atol;
  }
  t.nan_equal = nan_equal;
  return t;
}

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "pass";
    case Verdict::Fail: return "fail";
    case Verdict::Crash: return "crash";
  }
  return "?";
}

CompareResult compare_tensors(const Tensor& actual, const Tensor& oracle,
                              const Tolerance& tol) {
  if (!actual.same_signature(oracle))
    throw Error(errc::shape_mismatch, "comparing tensors of different signatures");
  CompareResult result;
  const size_t n = actual.numel();
  for (size_t i = 0; i < n; ++i) {
    const double a = actual.get(i);
    const double b = oracle.get(i);
    bool ok;
    if (std::isnan(a) || std::isnan(b)) {
      ok = std::isnan(a) && std::isnan(b) && tol.nan_equal;
    } else if (std::isinf(a) || std::isinf(b)) {
      ok = a == b;  // equal iff both infinite with matching sign
    } else {
      const double abs_err = std::fabs(a - b);
      ok = abs_err <= tol.atol + tol.rtol * std::fabs(b);
      result.max_abs_err = std::max(result.max_abs_err, abs_err);
      if (b != 0.0)
        result.max_rel_err = std::max(result.max_rel_err, abs_err / std::fabs(b));
      else if (abs_err > 0.0)
        result.max_rel_err = std::numeric_limits<double>::infinity();
    }
    if (!ok && result.pass) {
      result.pass = false;
      result.first_bad = i;
      result.actual = a;
      result.oracle = b;
    }
    if (!ok && (std::isnan(a) || std::isnan(b) || std::isinf(a) || std::isinf(b)))
      result.max_rel_err = std::numeric_limits<double>::infinity();
  }
  return result;
}

OpWiseResult op_wise_validation(const std::vector<const CarvedTest*>& tests,
                                Backend& target, const ToleranceConfig& tol,
                                bool exhaustive) {
  OpWiseResult result;
  result.n_tests = tests.size();
  for (size_t ti = 0; ti < tests.size(); ++ti) {
    const CarvedTest& t = *tests[ti];
    std::vector<Tensor> outputs;
    try {
      std::vector<TensorSig> in_sigs;
      for (const Tensor& x : t.inputs) in_sigs.push_back({x.dtype(), x.shape()});
      KernelHandle handle = target.compile(t.kind, t.attrs, in_sigs);
      outputs = target.run(handle, t.inputs);
    } catch (const Error& e) {
      result.verdict = Verdict::Crash;
      result.failing_test = ti;
      result.detail = e.what();
      return result;
    }
    if (outputs.size() != t.oracle.size()) {
      result.verdict = Verdict::Crash;
      result.failing_test = ti;
      result.detail = "output arity mismatch";
      return result;
    }
    for (size_t oi = 0; oi < outputs.size(); ++oi) {
      CompareResult cmp = compare_tensors(outputs[oi], t.oracle[oi],
                                          tol.resolve(t.oracle[oi].dtype()));
      result.max_abs_err = std::max(result.max_abs_err, cmp.max_abs_err);
      result.max_rel_err = std::max(result.max_rel_err, cmp.max_rel_err);
      if (!cmp.pass && result.verdict == Verdict::Pass) {
        result.verdict = Verdict::Fail;
        result.failing_test = ti;
        result.failing_index = cmp.first_bad;
        if (!exhaustive) return result;  // Algorithm-1 short circuit
      }
    }
    if (result.verdict == Verdict::Fail && !exhaustive) return result;
  }
  return result;
}

std::vector<OpKind> migration_order(const ComputeGraph& graph) {
  std::vector<OpKind> order;
  for (const Node& n : graph.nodes)
    if (std::find(order.begin(), order.end(), n.kind) == order.end())
      order.push_back(n.kind);
  return order;
}

namespace {

struct ModelWiseOutcome {
  Verdict verdict = Verdict::Pass;
  double max_abs_err = 0.0;
  double max_rel_err = 0.0;
  uint64_t transfer_bytes = 0;
  std::string detail;
};

size_t last_axis_argmax_mismatch(const Tensor& actual, const Tensor& oracle) {
  const int64_t width = actual.shape().empty() ? 1 : actual.shape().back();
  const size_t rows = actual.numel() / static_cast<size_t>(width);
  size_t mismatches = 0;
  for (size_t r = 0; r < rows; ++r) {
    size_t arg_a = 0, arg_b = 0;
    for (int64_t c = 1; c < width; ++c) {
      const size_t i = r * width + c;
      if (actual.get(i) > actual.get(r * width + arg_a)) arg_a = c;
      if (oracle.get(i) > oracle.get(r * width + arg_b)) arg_b = c;
    }
    if (arg_a != arg_b) ++mismatches;
  }
  return mismatches;
}

ModelWiseOutcome model_wise_validation(const ModelBundle& bundle, Backend& source,
                                       Backend& target, const std::set<OpKind>& migrated,
                                       const TestCorpus& corpus,
                                       const ToleranceConfig& tol,
                                       OracleMode oracle_mode) {
  ModelWiseOutcome outcome;
  for (const RecordedPass& pass : corpus.passes) {
    ExecResult hybrid;
    try {
      hybrid = run_hybrid(bundle, pass.inputs, source, target, migrated);
    } catch (const Error& e) {
      outcome.verdict = Verdict::Crash;
      outcome.detail = e.what();
      return outcome;
    }
    outcome.transfer_bytes += hybrid.transfer_bytes;
    for (size_t i = 0; i < pass.outputs.size(); ++i) {
      if (oracle_mode == OracleMode::Argmax && i == 0) {
        // the designated logits output: token choice must agree
        if (last_axis_argmax_mismatch(hybrid.outputs[i], pass.outputs[i]) > 0)
          outcome.verdict = Verdict::Fail;
        continue;
      }
      CompareResult cmp = compare_tensors(hybrid.outputs[i], pass.outputs[i],
                                          tol.resolve(pass.outputs[i].dtype()));
      outcome.max_abs_err = std::max(outcome.max_abs_err, cmp.max_abs_err);
      outcome.max_rel_err = std::max(outcome.max_rel_err, cmp.max_rel_err);
      if (!cmp.pass) outcome.verdict = Verdict::Fail;
    }
  }
  return outcome;
}

}  // namespace

MigrationReport gradual_offload(const ModelBundle& bundle, Backend& source,
                                Backend& target, const TestCorpus& corpus,
                                const ToleranceConfig& tol, Policy policy,
                                OracleMode oracle_mode) {
  if (model_digest(bundle) != corpus.model_sha256)
    throw Error(errc::digest_mismatch,
                "corpus was carved from a different model (digest mismatch)");

  MigrationReport report;
  report.overhead.carve_secs = corpus.carve_secs;
  std::set<OpKind> migrated;

  for (OpKind kind : migration_order(bundle.graph)) {
    StepRecord step;
    step.kind = kind;
    const auto step_start = std::chrono::steady_clock::now();

    std::vector<const CarvedTest*> tests = corpus.tests_for_kind(kind);
    step.n_tests = tests.size();

    const auto opwise_start = std::chrono::steady_clock::now();
    OpWiseResult op = op_wise_validation(tests, target, tol);
    report.overhead.opwise_secs +=
        std::chrono::duration<double>(std::chrono::steady_clock::now() - opwise_start)
            .count();
    step.op_verdict = op.verdict;
    step.max_abs_err = op.max_abs_err;
    step.max_rel_err = op.max_rel_err;

    bool kind_ok = op.verdict == Verdict::Pass;
    if (kind_ok) {
      std::set<OpKind> candidate = migrated;
      candidate.insert(kind);
      const auto mw_start = std::chrono::steady_clock::now();
      ModelWiseOutcome mw = model_wise_validation(bundle, source, target, candidate,
                                                  corpus, tol, oracle_mode);
      report.overhead.modelwise_secs +=
          std::chrono::duration<double>(std::chrono::steady_clock::now() - mw_start)
              .count();
      report.overhead.transfer_bytes += mw.transfer_bytes;
      step.model_verdict = mw.verdict;
      step.max_abs_err = std::max(step.max_abs_err, mw.max_abs_err);
      step.max_rel_err = std::max(step.max_rel_err, mw.max_rel_err);
      if (mw.verdict != Verdict::Pass) {
        step.integration_fault = true;  // compound-error case
        kind_ok = false;
      }
    }

    step.secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - step_start)
            .count();
    report.steps.push_back(step);

    if (kind_ok) {
      migrated.insert(kind);
    } else if (policy == Policy::Halt) {
      report.status = std::string("halted-at ") + op_kind_name(kind);
      report.migrated.assign(migrated.begin(), migrated.end());
      return report;
    } else {
      report.buggy.push_back(kind);
    }
  }

  report.migrated.assign(migrated.begin(), migrated.end());
  report.status = report.buggy.empty() ? "complete" : "completed-with-buggy";
  return report;
}

MigrationReport localize(const ModelBundle& bundle, Backend& source, Backend& target,
                         const TestCorpus& corpus, const ToleranceConfig& tol,
                         const std::optional<std::set<OpKind>>& truth,
                         OracleMode oracle_mode) {
  MigrationReport report =
      gradual_offload(bundle, source, target, corpus, tol, Policy::Scan, oracle_mode);
  if (truth) {
    std::set<OpKind> reported(report.buggy.begin(), report.buggy.end());
    for (OpKind k : reported)
      if (!truth->count(k)) report.fp_kinds.push_back(k);
    for (OpKind k : *truth)
      if (!reported.count(k)) report.fn_kinds.push_back(k);
    report.fp = report.fp_kinds.size();
    report.fn = report.fn_kinds.size();
  }
  return report;
}

std::string report_to_json(const MigrationReport& report) {
  json steps = json::array();
  for (const StepRecord& s : report.steps)
    steps.push_back({{"kind", op_kind_name(s.kind)},
                     {"op_verdict", verdict_name(s.op_verdict)},
                     {"model_verdict", verdict_name(s.model_verdict)},
                     {"integration_fault", s.integration_fault},
                     {"max_abs_err", s.max_abs_err},
                     {"max_rel_err", std::isfinite(s.max_rel_err)
                                         ? json(s.max_rel_err)
                                         : json("inf")},
                     {"n_tests", s.n_tests},
                     {"secs", s.secs}});
  auto kinds_json = [](const std::vector<OpKind>& kinds) {
    json arr = json::array();
    for (OpKind k : kinds) arr.push_back(op_kind_name(k));
    return arr;
  };
  json j = {{"status", report.status},
            {"steps", steps},
            {"migrated", kinds_json(report.migrated)},
            {"buggy", kinds_json(report.buggy)},
            {"overhead",
             {{"carve_secs", report.overhead.carve_secs},
              {"opwise_secs", report.overhead.opwise_secs},
              {"modelwise_secs", report.overhead.modelwise_secs},
              {"transfer_bytes", report.overhead.transfer_bytes}}}};
  if (report.fp) {
    j["fp"] = *report.fp;
    j["fn"] = *report.fn;
    j["fp_kinds"] = kinds_json(report.fp_kinds);
    j["fn_kinds"] = kinds_json(report.fn_kinds);
  }
  if (!report.config_json.empty()) j["config"] = json::parse(report.config_json);
  return j.dump(2) + "\n";
}

void write_report(const MigrationReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(errc::parse_error, "cannot write " + path.string());
  out << report_to_json(report);
}

}  // namespace tapml
