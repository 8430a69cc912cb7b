#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tapml {

/// Lowercase hex SHA-256 of a byte range.
std::string sha256_hex(const uint8_t* data, size_t len);
std::string sha256_hex(const std::vector<uint8_t>& data);
std::string sha256_hex(const std::string& data);

}  // namespace tapml
