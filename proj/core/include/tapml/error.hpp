#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tapml {

/// All toolkit failures carry a stable string code next to the human message.
/// Codes double as wire-level error identifiers in the RPC layer.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

/// One hop of a server-side trace attached to a RemoteError.
struct ContextFrame {
  std::string site;
  std::string detail;
};

class RemoteError : public Error {
 public:
  RemoteError(std::string code, const std::string& message,
              std::vector<ContextFrame> context)
      : Error(std::move(code), message), context_(std::move(context)) {}

  const std::vector<ContextFrame>& remote_context() const { return context_; }

 private:
  std::vector<ContextFrame> context_;
};

namespace errc {
inline constexpr const char* shape_mismatch = "ShapeMismatch";
inline constexpr const char* unsupported_op = "UnsupportedOp";
inline constexpr const char* attr_violation = "AttrViolation";
inline constexpr const char* parse_error = "ParseError";
inline constexpr const char* checksum_mismatch = "ChecksumMismatch";
inline constexpr const char* digest_mismatch = "DigestMismatch";
inline constexpr const char* launch_exceeds_profile = "LaunchExceedsProfile";
inline constexpr const char* buffer_limit = "BufferLimitExceeded";
inline constexpr const char* launch_limit = "LaunchLimitExceeded";
inline constexpr const char* unknown_module = "UnknownModule";
inline constexpr const char* unknown_buffer = "UnknownBuffer";
inline constexpr const char* unknown_kind = "UnknownKind";
inline constexpr const char* protocol = "Protocol";
inline constexpr const char* connection_lost = "ConnectionLost";
inline constexpr const char* usage = "Usage";
}  // namespace errc

}  // namespace tapml
