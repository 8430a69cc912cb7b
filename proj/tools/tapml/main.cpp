// tapml: carve operator tests from a model run, migrate the model to a
// target backend kind-by-kind with differential validation, localize buggy
// operator kinds, execute models locally or against a served device, and
// host that device over the wire protocol.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tapml/bundle_io.hpp"
#include "tapml/carver.hpp"
#include "tapml/executor.hpp"
#include "tapml/faults.hpp"
#include "tapml/kernels.hpp"
#include "tapml/models.hpp"
#include "tapml/offloader.hpp"
#include "tapml/rpc.hpp"
#include "tapml/sha256.hpp"

using nlohmann::json;
using namespace tapml;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;  // migration halted / buggy kinds / FP-FN
constexpr int kExitUsage = 2;       // bad flags, bad config, digest mismatch
constexpr int kExitRuntime = 3;     // transport or device runtime failure

int exit_code_for(const Error& e) {
  if (dynamic_cast<const RemoteError*>(&e) != nullptr) return kExitRuntime;
  const std::string& c = e.code();
  if (c == errc::connection_lost || c == errc::protocol || c == errc::buffer_limit ||
      c == errc::launch_limit || c == errc::launch_exceeds_profile)
    return kExitRuntime;
  return kExitUsage;
}

/// `tapml.json` (working directory, overridable via --config) may pre-fill
/// any long flag; explicit flags win.
json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) return json::object();
  json cfg;
  try {
    in >> cfg;
  } catch (const json::exception& e) {
    throw Error(errc::parse_error, path + ": " + e.what());
  }
  if (!cfg.is_object()) throw Error(errc::parse_error, path + ": expected a JSON object");
  return cfg;
}

template <typename T>
void prefill(const json& cfg, const std::string& key, T& value) {
  if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

struct BackendBox {
  std::unique_ptr<Backend> base;
  std::unique_ptr<Backend> faulty;  // wraps base when a faults file is given

  Backend& get() { return faulty ? *faulty : *base; }
};

BackendBox make_backend(const std::string& spec, const std::string& profile_name,
                        const std::string& faults_path) {
  BackendBox box;
  if (auto remote = rpc::parse_remote_spec(spec)) {
    box.base = std::make_unique<rpc::RemoteBackend>(remote->first, remote->second);
  } else {
    box.base = make_local_backend(spec, device_profile(profile_name));
  }
  if (!faults_path.empty())
    box.faulty = wrap_with_faults(*box.base, load_faults(faults_path));
  return box;
}

std::vector<NamedInputs> corpus_inputs(const ModelBundle& bundle,
                                       const std::string& corpus_id, size_t passes) {
  return realistic_inputs(builtin_recipe(bundle.name), corpus_id, passes);
}

void print_report_summary(const MigrationReport& report) {
  std::printf("status: %s\n", report.status.c_str());
  for (const StepRecord& step : report.steps)
    std::printf("  %-12s op-wise %-5s model-wise %-5s tests %-4zu max_abs %.3e%s\n",
                op_kind_name(step.kind), verdict_name(step.op_verdict),
                verdict_name(step.model_verdict), step.n_tests, step.max_abs_err,
                step.integration_fault ? "  [integration fault]" : "");
  std::string buggy;
  for (OpKind k : report.buggy) buggy += std::string(buggy.empty() ? "" : ", ") + op_kind_name(k);
  std::printf("migrated: %zu kinds, buggy: [%s]\n", report.migrated.size(), buggy.c_str());
  std::printf("overhead: carve %.3fs opwise %.3fs modelwise %.3fs transfer %llu bytes\n",
              report.overhead.carve_secs, report.overhead.opwise_secs,
              report.overhead.modelwise_secs,
              static_cast<unsigned long long>(report.overhead.transfer_bytes));
}

json resolved_config(std::initializer_list<std::pair<std::string, json>> fields) {
  json out = json::object();
  for (const auto& [key, value] : fields) out[key] = value;
  return out;
}

int cmd_model_build(const std::string& recipe_name, const std::string& out_dir) {
  const ModelBundle bundle = build_model(builtin_recipe(recipe_name));
  save_model(bundle, out_dir);
  std::printf("built %s: %zu nodes, digest %s\n", bundle.name.c_str(),
              bundle.graph.nodes.size(), model_digest(bundle).c_str());
  return kExitOk;
}

int cmd_model_list() {
  for (const std::string& name : builtin_recipes()) std::printf("%s\n", name.c_str());
  return kExitOk;
}

int cmd_carve(const std::string& model_dir, const std::string& corpus_id, size_t passes,
              const std::string& out_dir, const std::string& backend_spec,
              const std::string& profile_name, bool dedup) {
  const ModelBundle bundle = load_model(model_dir);
  BackendBox source = make_backend(backend_spec, profile_name, "");
  TestCorpus corpus = carve_run(bundle, source.get(),
                                corpus_inputs(bundle, corpus_id, passes), corpus_id, dedup);
  save_corpus(corpus, out_dir);
  std::printf("carved %zu tests over %zu passes in %.3f s\n", corpus.tests.size(),
              corpus.passes.size(), corpus.carve_secs);
  return kExitOk;
}

int cmd_migrate(const std::string& model_dir, const std::string& corpus_dir,
                const std::string& target_spec, const std::string& policy_name,
                const std::string& oracle_name, const ToleranceConfig& tol,
                const std::string& faults_path, const std::string& profile_name,
                const std::string& report_path) {
  const ModelBundle bundle = load_model(model_dir);
  const TestCorpus corpus = load_corpus(corpus_dir);
  BackendBox source = make_backend(corpus.backend, profile_name, "");
  BackendBox target = make_backend(target_spec, profile_name, faults_path);

  const Policy policy = policy_name == "scan" ? Policy::Scan : Policy::Halt;
  const OracleMode oracle = oracle_name == "argmax" ? OracleMode::Argmax : OracleMode::TensorTol;

  MigrationReport report =
      gradual_offload(bundle, source.get(), target.get(), corpus, tol, policy, oracle);
  report.config_json =
      resolved_config({{"command", "migrate"},
                       {"model", model_dir},
                       {"corpus", corpus_dir},
                       {"source", corpus.backend},
                       {"target", target_spec},
                       {"policy", policy_name},
                       {"oracle", oracle_name},
                       {"rtol", tol.rtol ? json(*tol.rtol) : json()},
                       {"atol", tol.atol ? json(*tol.atol) : json()},
                       {"faults", faults_path},
                       {"profile", profile_name},
                       {"report", report_path}})
          .dump();
  if (!report_path.empty()) write_report(report, report_path);
  print_report_summary(report);
  return report.complete() && report.buggy.empty() ? kExitOk : kExitValidation;
}

int cmd_localize(const std::string& model_dir, const std::string& corpus_dir,
                 const std::string& target_spec, const std::string& oracle_name,
                 const ToleranceConfig& tol, const std::string& faults_path,
                 const std::string& truth_path, const std::string& profile_name,
                 const std::string& report_path) {
  const ModelBundle bundle = load_model(model_dir);
  const TestCorpus corpus = load_corpus(corpus_dir);
  BackendBox source = make_backend(corpus.backend, profile_name, "");
  BackendBox target = make_backend(target_spec, profile_name, faults_path);

  std::optional<std::set<OpKind>> truth;
  if (!truth_path.empty()) truth = load_faults(truth_path).enabled_kinds();
  const OracleMode oracle = oracle_name == "argmax" ? OracleMode::Argmax : OracleMode::TensorTol;

  MigrationReport report =
      localize(bundle, source.get(), target.get(), corpus, tol, truth, oracle);
  report.config_json =
      resolved_config({{"command", "localize"},
                       {"model", model_dir},
                       {"corpus", corpus_dir},
                       {"source", corpus.backend},
                       {"target", target_spec},
                       {"oracle", oracle_name},
                       {"rtol", tol.rtol ? json(*tol.rtol) : json()},
                       {"atol", tol.atol ? json(*tol.atol) : json()},
                       {"faults", faults_path},
                       {"truth", truth_path},
                       {"profile", profile_name},
                       {"report", report_path}})
          .dump();
  if (!report_path.empty()) write_report(report, report_path);
  print_report_summary(report);
  if (truth) {
    std::printf("FP: %zu FN: %zu\n", *report.fp, *report.fn);
    return (*report.fp == 0 && *report.fn == 0) ? kExitOk : kExitValidation;
  }
  return report.buggy.empty() ? kExitOk : kExitValidation;
}

int cmd_run(const std::string& model_dir, const std::string& corpus_id, size_t passes,
            const std::string& backend_spec, const std::string& profile_name,
            const std::string& faults_path) {
  const ModelBundle bundle = load_model(model_dir);
  BackendBox backend = make_backend(backend_spec, profile_name, faults_path);
  const std::vector<NamedInputs> inputs = corpus_inputs(bundle, corpus_id, passes);

  const auto started = std::chrono::steady_clock::now();
  for (size_t p = 0; p < inputs.size(); ++p) {
    const ExecResult result = run_graph(bundle, inputs[p], backend.get());
    for (size_t i = 0; i < result.outputs.size(); ++i)
      std::printf("pass %zu output %zu digest %s\n", p, i,
                  sha256_hex(result.outputs[i].bytes()).c_str());
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  std::printf("ran %zu passes in %.3f s on %s\n", inputs.size(), secs,
              backend.get().name().c_str());
  return kExitOk;
}

int cmd_serve(const std::string& listen, const std::string& backend_name,
              const std::string& profile_name, const std::string& faults_path) {
  const size_t colon = listen.rfind(':');
  if (colon == std::string::npos)
    throw Error(errc::usage, "--listen expects HOST:PORT, got '" + listen + "'");
  const std::string host = listen.substr(0, colon);
  const int port = std::stoi(listen.substr(colon + 1));
  if (port < 0 || port > 65535)
    throw Error(errc::usage, "port out of range in '" + listen + "'");

  FaultSet faults;
  if (!faults_path.empty()) faults = load_faults(faults_path);

  rpc::Server server(host, static_cast<uint16_t>(port), backend_name, profile_name, faults);
  std::printf("listening on %s:%u\n", host.c_str(), server.port());
  std::fflush(stdout);
  server.serve_forever();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compute-graph migration toolkit"};
  app.require_subcommand(1);

  std::string config_path = "tapml.json";
  app.add_option("--config", config_path, "JSON config pre-filling any flag");

  // Two-phase setup: peek at --config first so option defaults can come from
  // the file, then define subcommands against those defaults.
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") config_path = argv[i + 1];

  json cfg;
  try {
    cfg = load_config(config_path);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }

  std::string model_dir, corpus_dir, out_dir, recipe, corpus_id = "motto-1";
  std::string backend_spec = "golden-f64", target_spec, listen = "0.0.0.0:9090";
  std::string policy = "halt", oracle = "tensor", profile = "pc";
  std::string faults_path, truth_path, report_path;
  size_t passes = 1;
  bool dedup = false;
  double rtol = -1.0, atol = -1.0;
  prefill(cfg, "model", model_dir);
  prefill(cfg, "corpus", corpus_dir);
  prefill(cfg, "inputs", corpus_id);
  prefill(cfg, "backend", backend_spec);
  prefill(cfg, "target", target_spec);
  prefill(cfg, "policy", policy);
  prefill(cfg, "oracle", oracle);
  prefill(cfg, "profile", profile);
  prefill(cfg, "faults", faults_path);
  prefill(cfg, "truth", truth_path);
  prefill(cfg, "report", report_path);
  prefill(cfg, "passes", passes);
  prefill(cfg, "rtol", rtol);
  prefill(cfg, "atol", atol);

  auto require_unless_prefilled = [](CLI::Option* opt, const std::string& value) {
    if (value.empty()) opt->required();
  };

  CLI::App* model_cmd = app.add_subcommand("model", "builtin model zoo");
  CLI::App* model_build = model_cmd->add_subcommand("build", "materialize a builtin recipe");
  model_build->add_option("--recipe", recipe, "recipe name")->required();
  model_build->add_option("--out", out_dir, "output bundle directory")->required();
  CLI::App* model_list = model_cmd->add_subcommand("list", "list builtin recipes");

  CLI::App* carve = app.add_subcommand("carve", "carve per-operator tests from a model run");
  require_unless_prefilled(carve->add_option("--model", model_dir, "model bundle dir"), model_dir);
  carve->add_option("--inputs", corpus_id, "input corpus id");
  carve->add_option("--passes", passes, "forward passes to record");
  carve->add_option("--out", out_dir, "corpus output dir")->required();
  carve->add_option("--backend", backend_spec, "source backend");
  carve->add_option("--profile", profile, "device profile for local backends");
  carve->add_flag("--dedup", dedup, "collapse byte-identical tests per node");

  auto add_validation_flags = [&](CLI::App* cmd, bool with_policy) {
    require_unless_prefilled(cmd->add_option("--model", model_dir, "model bundle dir"), model_dir);
    require_unless_prefilled(cmd->add_option("--corpus", corpus_dir, "carved corpus dir"),
                             corpus_dir);
    require_unless_prefilled(cmd->add_option("--target", target_spec, "target backend spec"),
                             target_spec);
    if (with_policy)
      cmd->add_option("--policy", policy, "halt|scan")
          ->check(CLI::IsMember({"halt", "scan"}));
    cmd->add_option("--oracle", oracle, "tensor|argmax")
        ->check(CLI::IsMember({"tensor", "argmax"}));
    cmd->add_option("--rtol", rtol, "relative tolerance override");
    cmd->add_option("--atol", atol, "absolute tolerance override");
    cmd->add_option("--faults", faults_path, "fault set wrapping the target");
    cmd->add_option("--profile", profile, "device profile for local backends");
    cmd->add_option("--report", report_path, "structured report path");
  };

  CLI::App* migrate = app.add_subcommand("migrate", "gradual target offloading");
  add_validation_flags(migrate, true);

  CLI::App* localize_cmd = app.add_subcommand("localize", "scan all kinds for buggy operators");
  add_validation_flags(localize_cmd, false);
  localize_cmd->add_option("--truth", truth_path, "ground-truth fault set for FP/FN");

  CLI::App* run = app.add_subcommand("run", "end-to-end model execution");
  require_unless_prefilled(run->add_option("--model", model_dir, "model bundle dir"), model_dir);
  run->add_option("--inputs", corpus_id, "input corpus id");
  run->add_option("--passes", passes, "forward passes");
  run->add_option("--backend", backend_spec, "backend spec");
  run->add_option("--profile", profile, "device profile for local backends");
  run->add_option("--faults", faults_path, "fault set wrapping the backend");

  CLI::App* device = app.add_subcommand("device", "simulated device host");
  CLI::App* serve = device->add_subcommand("serve", "serve a backend over the wire protocol");
  serve->add_option("--listen", listen, "HOST:PORT (port 0 picks a free port)");
  serve->add_option("--backend", backend_spec, "hosted backend name");
  serve->add_option("--profile", profile, "pc|mobile")
      ->check(CLI::IsMember({"pc", "mobile"}));
  serve->add_option("--faults", faults_path, "fault set wrapping the hosted backend");
  prefill(cfg, "listen", listen);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  ToleranceConfig tol;
  if (rtol >= 0.0) tol.rtol = rtol;
  if (atol >= 0.0) tol.atol = atol;

  try {
    if (model_build->parsed()) return cmd_model_build(recipe, out_dir);
    if (model_list->parsed()) return cmd_model_list();
    if (carve->parsed())
      return cmd_carve(model_dir, corpus_id, passes, out_dir, backend_spec, profile, dedup);
    if (migrate->parsed())
      return cmd_migrate(model_dir, corpus_dir, target_spec, policy, oracle, tol, faults_path,
                         profile, report_path);
    if (localize_cmd->parsed())
      return cmd_localize(model_dir, corpus_dir, target_spec, oracle, tol, faults_path,
                          truth_path, profile, report_path);
    if (run->parsed())
      return cmd_run(model_dir, corpus_id, passes, backend_spec, profile, faults_path);
    if (serve->parsed()) return cmd_serve(listen, backend_spec, profile, faults_path);
    std::fprintf(stderr, "error: no command\n");
    return kExitUsage;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    if (const auto* remote = dynamic_cast<const RemoteError*>(&e))
      for (const ContextFrame& frame : remote->remote_context())
        std::fprintf(stderr, "  at %s: %s\n", frame.site.c_str(), frame.detail.c_str());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
}
