#include "tapml/bundle_io.hpp"

#include <fstream>

#include "json.hpp"
#include "tapml/sha256.hpp"

namespace tapml {

using nlohmann::json;

namespace {

json attrs_to_json(const Attrs& attrs) {
  json out = json::object();
  for (const auto& [key, value] : attrs) {
    std::visit([&](const auto& v) { out[key] = v; }, value);
  }
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
    else if (v.is_string())
      out[it.key()] = v.get<std::string>();
    else
      throw Error(errc::parse_error, "attr '" + it.key() + "' has unsupported type");
  }
  return out;
}

struct SerializedBundle {
  std::string manifest;
  std::vector<uint8_t> weights;
};

SerializedBundle serialize(const ModelBundle& bundle) {
  SerializedBundle out;
  json nodes = json::array();
  for (const Node& n : bundle.graph.nodes) {
    nodes.push_back({{"id", n.id},
                     {"kind", op_kind_name(n.kind)},
                     {"name", n.name},
                     {"attrs", attrs_to_json(n.attrs)},
                     {"inputs", n.inputs}});
  }
  json weights = json::array();
  for (int64_t id : bundle.graph.weight_ids) {
    const Tensor& t = bundle.weights.at(id);
    const size_t offset = out.weights.size();
    out.weights.insert(out.weights.end(), t.bytes().begin(), t.bytes().end());
    weights.push_back({{"id", id},
                       {"dtype", dtype_name(t.dtype())},
                       {"shape", t.shape()},
                       {"offset", offset},
                       {"byte_len", t.byte_size()},
                       {"sha256", sha256_hex(t.bytes())}});
  }
  json manifest = {{"name", bundle.name},
                   {"version", bundle.version},
                   {"nodes", nodes},
                   {"inputs", bundle.graph.input_ids},
                   {"outputs", bundle.graph.output_ids},
                   {"weights", weights}};
  out.manifest = manifest.dump(2);
  out.manifest.push_back('\n');
  return out;
}

std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(errc::parse_error, "cannot open " + path.string());
  return std::vector<uint8_t>(std::istreambuf_iterator<char>(in),
                              std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const void* data, size_t len) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(errc::parse_error, "cannot write " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
}

}  // namespace

void save_model(const ModelBundle& bundle, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  SerializedBundle s = serialize(bundle);
  write_file(dir / "model.json", s.manifest.data(), s.manifest.size());
  write_file(dir / "weights.bin", s.weights.data(), s.weights.size());
}

ModelBundle load_model(const std::filesystem::path& dir) {
  std::vector<uint8_t> manifest_bytes = read_file(dir / "model.json");
  std::vector<uint8_t> weight_bytes = read_file(dir / "weights.bin");
  json manifest;
  try {
    manifest = json::parse(manifest_bytes);
  } catch (const json::exception& e) {
    throw Error(errc::parse_error, "model.json: " + std::string(e.what()));
  }

  ModelBundle bundle;
  try {
    bundle.name = manifest.at("name").get<std::string>();
    bundle.version = manifest.at("version").get<std::string>();
    for (const json& jn : manifest.at("nodes")) {
      Node n;
      n.id = jn.at("id").get<int64_t>();
      n.kind = op_kind_from_name(jn.at("kind").get<std::string>());
      n.name = jn.at("name").get<std::string>();
      n.attrs = attrs_from_json(jn.at("attrs"));
      n.inputs = jn.at("inputs").get<std::vector<int64_t>>();
      bundle.graph.nodes.push_back(std::move(n));
    }
    bundle.graph.input_ids = manifest.at("inputs").get<std::vector<int64_t>>();
    bundle.graph.output_ids = manifest.at("outputs").get<std::vector<int64_t>>();
    for (const json& jw : manifest.at("weights")) {
      const int64_t id = jw.at("id").get<int64_t>();
      const size_t offset = jw.at("offset").get<size_t>();
      const size_t byte_len = jw.at("byte_len").get<size_t>();
      if (offset + byte_len > weight_bytes.size())
        throw Error(errc::parse_error, "weights length: payload of node " +
                                           std::to_string(id) + " exceeds weights.bin");
      std::vector<uint8_t> payload(weight_bytes.begin() + offset,
                                   weight_bytes.begin() + offset + byte_len);
      if (sha256_hex(payload) != jw.at("sha256").get<std::string>())
        throw Error(errc::checksum_mismatch,
                    "weight payload of node " + std::to_string(id));
      bundle.graph.weight_ids.push_back(id);
      bundle.weights.emplace(
          id, Tensor(dtype_from_name(jw.at("dtype").get<std::string>()),
                     jw.at("shape").get<Shape>(), std::move(payload)));
    }
  } catch (const json::exception& e) {
    throw Error(errc::parse_error, "model.json: " + std::string(e.what()));
  }
  return bundle;
}

std::string model_digest(const std::filesystem::path& dir) {
  std::vector<uint8_t> bytes = read_file(dir / "model.json");
  std::vector<uint8_t> weights = read_file(dir / "weights.bin");
  bytes.insert(bytes.end(), weights.begin(), weights.end());
  return sha256_hex(bytes);
}

std::string model_digest(const ModelBundle& bundle) {
  SerializedBundle s = serialize(bundle);
  std::vector<uint8_t> bytes(s.manifest.begin(), s.manifest.end());
  bytes.insert(bytes.end(), s.weights.begin(), s.weights.end());
  return sha256_hex(bytes);
}

}  // namespace tapml
