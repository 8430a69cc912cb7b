#include "tapml/carver.hpp"

#include <chrono>
#include <fstream>

#include "json.hpp"
#include "tapml/bundle_io.hpp"
#include "tapml/sha256.hpp"

namespace tapml {

using nlohmann::json;

std::vector<const CarvedTest*> TestCorpus::tests_for_kind(OpKind kind) const {
  std::vector<const CarvedTest*> out;
  for (const CarvedTest& t : tests)
    if (t.kind == kind) out.push_back(&t);
  return out;
}

std::vector<const CarvedTest*> TestCorpus::tests_for_node(int64_t node_id) const {
  std::vector<const CarvedTest*> out;
  for (const CarvedTest& t : tests)
    if (t.node_id == node_id) out.push_back(&t);
  return out;
}

TestCorpus carve_run(const ModelBundle& bundle, Backend& source,
                     const std::vector<NamedInputs>& pass_inputs,
                     const std::string& provenance, bool dedup) {
  if (pass_inputs.empty())
    throw Error(errc::shape_mismatch, "carve_run needs at least one forward pass");

  const auto started = std::chrono::steady_clock::now();
  TestCorpus corpus;
  corpus.model_sha256 = model_digest(bundle);
  corpus.backend = source.name();
  corpus.provenance = provenance;

  for (size_t pass = 0; pass < pass_inputs.size(); ++pass) {
    RecordedPass rec;
    rec.inputs = pass_inputs[pass];
    NodeObserver observer = [&](const Node& node, const std::vector<Tensor>& in,
                                const std::vector<Tensor>& out) {
      CarvedTest t;
      t.node_id = node.id;
      t.step = static_cast<int64_t>(pass);
      t.kind = node.kind;
      t.name = node.name;
      t.attrs = node.attrs;
      t.inputs = in;
      t.oracle = out;
      corpus.tests.push_back(std::move(t));
    };
    ExecResult result = run_graph(bundle, pass_inputs[pass], source, observer);
    rec.outputs = std::move(result.outputs);
    corpus.passes.push_back(std::move(rec));
  }

  if (dedup) {
    // collapse byte-identical (inputs, oracle) pairs within each node
    std::vector<CarvedTest> kept;
    for (CarvedTest& t : corpus.tests) {
      bool duplicate = false;
      for (const CarvedTest& k : kept)
        if (k.node_id == t.node_id && k.inputs == t.inputs && k.oracle == t.oracle) {
          duplicate = true;
          break;
        }
      if (!duplicate) kept.push_back(std::move(t));
    }
    corpus.tests = std::move(kept);
  }

  corpus.carve_secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return corpus;
}

namespace {

json attrs_to_json(const Attrs& attrs) {
  json out = json::object();
  for (const auto& [key, value] : attrs)
    std::visit([&, k = key](const auto& v) { out[k] = v; }, value);
  return out;
}

Attrs attrs_from_json(const json& j) {
  Attrs out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const json& v = it.value();
    if (v.is_number_integer())
      out[it.key()] = v.get<int64_t>();
    else if (v.is_number_float())
      out[it.key()] = v.get<double>();
    else if (v.is_array())
      out[it.key()] = v.get<std::vector<int64_t>>();
    else
      out[it.key()] = v.get<std::string>();
  }
  return out;
}

/// Content-addressed blob store shared by every tensor in the corpus.
struct BlobWriter {
  std::filesystem::path dir;

  json ref(const Tensor& t) {
    const std::string digest = sha256_hex(t.bytes());
    const std::filesystem::path path = dir / (digest + ".bin");
    if (!std::filesystem::exists(path)) {
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      out.write(reinterpret_cast<const char*>(t.bytes().data()),
                static_cast<std::streamsize>(t.byte_size()));
    }
    return {{"dtype", dtype_name(t.dtype())}, {"shape", t.shape()}, {"blob", digest}};
  }
};

Tensor load_blob_ref(const json& ref, const std::filesystem::path& blob_dir) {
  const std::string digest = ref.at("blob").get<std::string>();
  std::ifstream in(blob_dir / (digest + ".bin"), std::ios::binary);
  if (!in) throw Error(errc::parse_error, "missing blob " + digest);
  std::vector<uint8_t> bytes(std::istreambuf_iterator<char>(in),
                             std::istreambuf_iterator<char>{});
  if (sha256_hex(bytes) != digest)
    throw Error(errc::checksum_mismatch, "blobs/" + digest + ".bin");
  return Tensor(dtype_from_name(ref.at("dtype").get<std::string>()),
                ref.at("shape").get<Shape>(), std::move(bytes));
}

}  // namespace

void save_corpus(const TestCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "blobs");
  BlobWriter blobs{dir / "blobs"};

  json tests = json::array();
  for (const CarvedTest& t : corpus.tests) {
    json inputs = json::array(), outputs = json::array();
    for (const Tensor& x : t.inputs) inputs.push_back(blobs.ref(x));
    for (const Tensor& x : t.oracle) outputs.push_back(blobs.ref(x));
    tests.push_back({{"node_id", t.node_id},
                     {"step", t.step},
                     {"kind", op_kind_name(t.kind)},
                     {"name", t.name},
                     {"attrs", attrs_to_json(t.attrs)},
                     {"inputs", inputs},
                     {"outputs", outputs}});
  }
  json passes = json::array();
  for (const RecordedPass& p : corpus.passes) {
    json in = json::object(), out = json::array();
    for (const auto& [name, t] : p.inputs) in[name] = blobs.ref(t);
    for (const Tensor& t : p.outputs) out.push_back(blobs.ref(t));
    passes.push_back({{"inputs", in}, {"outputs", out}});
  }
  json manifest = {{"model_sha256", corpus.model_sha256},
                   {"backend", corpus.backend},
                   {"provenance", corpus.provenance},
                   {"carve_secs", corpus.carve_secs},
                   {"passes", passes},
                   {"tests", tests}};
  std::ofstream out(dir / "corpus.json", std::ios::trunc);
  if (!out) throw Error(errc::parse_error, "cannot write " + (dir / "corpus.json").string());
  out << manifest.dump(2) << "\n";
}

TestCorpus load_corpus(const std::filesystem::path& dir) {
  std::ifstream in(dir / "corpus.json");
  if (!in) throw Error(errc::parse_error, "cannot open " + (dir / "corpus.json").string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(errc::parse_error, "corpus.json: " + std::string(e.what()));
  }

  const std::filesystem::path blob_dir = dir / "blobs";
  TestCorpus corpus;
  try {
    corpus.model_sha256 = manifest.at("model_sha256").get<std::string>();
    corpus.backend = manifest.at("backend").get<std::string>();
    corpus.provenance = manifest.value("provenance", "");
    corpus.carve_secs = manifest.value("carve_secs", 0.0);
    for (const json& jp : manifest.at("passes")) {
      RecordedPass p;
      for (auto it = jp.at("inputs").begin(); it != jp.at("inputs").end(); ++it)
        p.inputs[it.key()] = load_blob_ref(it.value(), blob_dir);
      for (const json& r : jp.at("outputs")) p.outputs.push_back(load_blob_ref(r, blob_dir));
      corpus.passes.push_back(std::move(p));
    }
    for (const json& jt : manifest.at("tests")) {
      CarvedTest t;
      t.node_id = jt.at("node_id").get<int64_t>();
      t.step = jt.at("step").get<int64_t>();
      t.kind = op_kind_from_name(jt.at("kind").get<std::string>());
      t.name = jt.value("name", "");
      t.attrs = attrs_from_json(jt.at("attrs"));
      for (const json& r : jt.at("inputs")) t.inputs.push_back(load_blob_ref(r, blob_dir));
      for (const json& r : jt.at("outputs")) t.oracle.push_back(load_blob_ref(r, blob_dir));
      corpus.tests.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw Error(errc::parse_error, "corpus.json: " + std::string(e.what()));
  }
  return corpus;
}

}  // namespace tapml
