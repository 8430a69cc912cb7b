#include "tapml/sha256.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

namespace tapml {

std::string sha256_hex(const uint8_t* data, size_t len) {
  std::array<unsigned char, 32> digest{};
  unsigned int out_len = 0;
  if (EVP_Digest(data, len, digest.data(), &out_len, EVP_sha256(), nullptr) != 1 ||
      out_len != 32)
    throw std::runtime_error("sha256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string s(64, '0');
  for (size_t i = 0; i < 32; ++i) {
    s[2 * i] = hex[digest[i] >> 4];
    s[2 * i + 1] = hex[digest[i] & 0xF];
  }
  return s;
}

std::string sha256_hex(const std::vector<uint8_t>& data) {
  return sha256_hex(data.data(), data.size());
}

std::string sha256_hex(const std::string& data) {
  return sha256_hex(reinterpret_cast<const uint8_t*>(data.data()), data.size());
}

}  // namespace tapml
