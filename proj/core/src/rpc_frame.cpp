#include <cstring>

#include "tapml/rpc.hpp"

namespace tapml::rpc {

namespace {

constexpr size_t kFixedAfterLength = 1 + 8 + 4;  // opcode + request id + header len
constexpr uint32_t kMaxFrameBytes = 1u << 30;    // refuse absurd lengths up front

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 24));
}

void put_u64(std::vector<uint8_t>& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | static_cast<uint32_t>(p[1]) << 8 |
         static_cast<uint32_t>(p[2]) << 16 | static_cast<uint32_t>(p[3]) << 24;
}

uint64_t get_u64(const uint8_t* p) {
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = v << 8 | p[i];
  return v;
}

bool valid_opcode(uint8_t op) {
  switch (static_cast<Opcode>(op)) {
    case Opcode::Hello:
    case Opcode::UploadModule:
    case Opcode::Alloc:
    case Opcode::WriteTensor:
    case Opcode::ReadTensor:
    case Opcode::Call:
    case Opcode::Free:
    case Opcode::Error:
    case Opcode::Shutdown:
      return true;
  }
  return false;
}

/// Strict UTF-8 validation: the header is required to be well-formed text.
bool valid_utf8(const uint8_t* s, size_t len) {
  size_t i = 0;
  while (i < len) {
    uint8_t c = s[i];
    size_t extra;
    uint32_t cp, min_cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1, cp = c & 0x1F, min_cp = 0x80;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2, cp = c & 0x0F, min_cp = 0x800;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3, cp = c & 0x07, min_cp = 0x10000;
    } else {
      return false;
    }
    if (i + extra >= len) return false;
    for (size_t k = 1; k <= extra; ++k) {
      if ((s[i + k] & 0xC0) != 0x80) return false;
      cp = cp << 6 | (s[i + k] & 0x3F);
    }
    if (cp < min_cp || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += extra + 1;
  }
  return true;
}

}  // namespace

std::vector<uint8_t> encode_frame(const Frame& frame) {
  const uint64_t payload =
      kFixedAfterLength + frame.header.size() + frame.body.size();
  if (payload > kMaxFrameBytes)
    throw Error(errc::protocol, "frame exceeds maximum encodable size");
  std::vector<uint8_t> out;
  out.reserve(4 + payload);
  put_u32(out, static_cast<uint32_t>(payload));
  out.push_back(static_cast<uint8_t>(frame.opcode));
  put_u64(out, frame.request_id);
  put_u32(out, static_cast<uint32_t>(frame.header.size()));
  out.insert(out.end(), frame.header.begin(), frame.header.end());
  out.insert(out.end(), frame.body.begin(), frame.body.end());
  return out;
}

std::optional<Frame> decode_frame(const uint8_t* data, size_t len, size_t& consumed,
                                  std::string& error) {
  consumed = 0;
  error.clear();
  if (len < 4) {
    error = "truncated: length prefix incomplete";
    return std::nullopt;
  }
  const uint32_t payload = get_u32(data);
  if (payload > kMaxFrameBytes) {
    error = "declared length exceeds maximum frame size";
    return std::nullopt;
  }
  if (payload < kFixedAfterLength) {
    error = "declared length shorter than fixed fields";
    return std::nullopt;
  }
  if (len < 4 + static_cast<size_t>(payload)) {
    error = "truncated: payload incomplete";
    return std::nullopt;
  }
  const uint8_t* p = data + 4;
  const uint8_t opcode = p[0];
  if (!valid_opcode(opcode)) {
    error = "unknown opcode";
    return std::nullopt;
  }
  const uint64_t request_id = get_u64(p + 1);
  const uint32_t header_len = get_u32(p + 9);
  if (header_len > payload - kFixedAfterLength) {
    error = "header length exceeds payload";
    return std::nullopt;
  }
  const uint8_t* header = p + kFixedAfterLength;
  if (!valid_utf8(header, header_len)) {
    error = "header is not valid UTF-8";
    return std::nullopt;
  }
  Frame frame;
  frame.opcode = static_cast<Opcode>(opcode);
  frame.request_id = request_id;
  frame.header.assign(reinterpret_cast<const char*>(header), header_len);
  frame.body.assign(header + header_len, p + payload);
  consumed = 4 + static_cast<size_t>(payload);
  return frame;
}

std::optional<std::pair<std::string, uint16_t>> parse_remote_spec(const std::string& spec) {
  constexpr std::string_view prefix = "remote:";
  if (spec.rfind(prefix, 0) != 0) return std::nullopt;
  const size_t colon = spec.rfind(':');
  if (colon < prefix.size()) return std::nullopt;
  const std::string host = spec.substr(prefix.size(), colon - prefix.size());
  const std::string port_str = spec.substr(colon + 1);
  if (host.empty() || port_str.empty()) return std::nullopt;
  unsigned long port = 0;
  for (char c : port_str) {
    if (c < '0' || c > '9') return std::nullopt;
    port = port * 10 + static_cast<unsigned long>(c - '0');
    if (port > 65535) return std::nullopt;
  }
  if (port == 0) return std::nullopt;
  return std::make_pair(host, static_cast<uint16_t>(port));
}

}  // namespace tapml::rpc
