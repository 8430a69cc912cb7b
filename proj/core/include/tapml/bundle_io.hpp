#pragma once

#include <filesystem>
#include <string>

#include "tapml/graph.hpp"

namespace tapml {

/// Model bundle directory layout: `model.json` manifest + `weights.bin` with
/// concatenated raw little-endian payloads at manifest offsets.
void save_model(const ModelBundle& bundle, const std::filesystem::path& dir);
ModelBundle load_model(const std::filesystem::path& dir);

/// SHA-256 over the on-disk manifest and weight bytes; identifies the exact
/// model a corpus was carved from.
std::string model_digest(const std::filesystem::path& dir);
std::string model_digest(const ModelBundle& bundle);

}  // namespace tapml
