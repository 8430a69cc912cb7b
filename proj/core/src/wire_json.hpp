#pragma once

// Internal JSON helpers shared by the RPC server and client translation
// units. Not installed; the wire header format is an implementation detail.

#include "json.hpp"
#include "tapml/graph.hpp"

namespace tapml::rpc::wire {

inline nlohmann::json attrs_to_json(const Attrs& attrs) {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [key, value] : attrs)
    std::visit([&, k = key](const auto& v) { out[k] = v; }, value);
  return out;
}

inline Attrs attrs_from_json(const nlohmann::json& j) {
  Attrs out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const nlohmann::json& v = it.value();
    if (v.is_number_integer())
      out[it.key()] = v.get<int64_t>();
    else if (v.is_number_float())
      out[it.key()] = v.get<double>();
    else if (v.is_array())
      out[it.key()] = v.get<std::vector<int64_t>>();
    else if (v.is_string())
      out[it.key()] = v.get<std::string>();
    else
      throw Error(errc::protocol, "attr '" + it.key() + "' has unsupported type");
  }
  return out;
}

inline nlohmann::json sig_to_json(const TensorSig& sig) {
  return {{"dtype", dtype_name(sig.dtype)}, {"shape", sig.shape}};
}

inline TensorSig sig_from_json(const nlohmann::json& j) {
  return {dtype_from_name(j.at("dtype").get<std::string>()),
          j.at("shape").get<Shape>()};
}

}  // namespace tapml::rpc::wire
