#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tapml/backend.hpp"
#include "tapml/faults.hpp"

namespace tapml::rpc {

enum class Opcode : uint8_t {
  Hello = 0x01,
  UploadModule = 0x02,
  Alloc = 0x03,
  WriteTensor = 0x04,
  ReadTensor = 0x05,
  Call = 0x06,
  Free = 0x07,
  Error = 0x0E,
  Shutdown = 0x0F,
};

inline constexpr uint32_t kProtocolVersion = 1;
inline constexpr uint16_t kDefaultPort = 9090;

/// Wire frame: u32le length (bytes after this field), u8 opcode, u64le
/// request id, u32le header length, UTF-8 header, raw body.
struct Frame {
  Opcode opcode = Opcode::Hello;
  uint64_t request_id = 0;
  std::string header;       // structured UTF-8 (JSON) control plane
  std::vector<uint8_t> body;  // raw data plane, never re-encoded

  bool operator==(const Frame&) const = default;
};

std::vector<uint8_t> encode_frame(const Frame& frame);

/// Non-throwing decode for fuzz safety: nullopt + error message on any
/// malformed byte stream. `consumed` is set on success.
std::optional<Frame> decode_frame(const uint8_t* data, size_t len, size_t& consumed,
                                  std::string& error);

/// Blocking TCP server hosting one backend. Sessions are served one at a
/// time; requests within a session are strictly ordered.
class Server {
 public:
  /// Binds immediately (port 0 picks a free port). Call serve_forever() to
  /// start handling sessions; it returns after a SHUTDOWN frame.
  Server(const std::string& host, uint16_t port, const std::string& backend_name,
         const std::string& profile_name, const FaultSet& faults = {});
  ~Server();

  uint16_t port() const { return port_; }
  void serve_forever();

 private:
  void handle_session(int fd);

  int listen_fd_ = -1;
  uint16_t port_ = 0;
  DeviceProfile profile_;
  std::unique_ptr<Backend> backend_;       // hosted kernels
  std::unique_ptr<Backend> fault_wrapper_;  // optional buggy-platform wrapper
  Backend* active_ = nullptr;
  bool shutdown_ = false;

  struct Session;
};

/// Backend proxy speaking the wire protocol; satisfies the local Backend
/// contract bit-identically. Not shareable across threads concurrently.
class RemoteBackend final : public Backend {
 public:
  RemoteBackend(const std::string& host, uint16_t port);
  ~RemoteBackend() override;

  std::string name() const override;
  DeviceProfile profile() const override { return profile_; }
  KernelHandle compile(OpKind kind, const Attrs& attrs,
                       const std::vector<TensorSig>& input_sig) override;
  std::vector<Tensor> run(const KernelHandle& handle,
                          const std::vector<Tensor>& inputs) override;

  /// Graceful server stop: drains the session, acks, server exits 0.
  void shutdown_server();

  /// Raw request/response exchange (exposed for protocol-level tests).
  Frame roundtrip(const Frame& request);

 private:
  Frame transact(Opcode opcode, const std::string& header,
                 std::vector<uint8_t> body = {});

  int fd_ = -1;
  std::string host_;
  uint16_t port_num_ = 0;
  uint64_t next_request_id_ = 1;
  std::string remote_backend_name_;
  DeviceProfile profile_;
};

/// Parses "remote:<host>:<port>" into its parts.
std::optional<std::pair<std::string, uint16_t>> parse_remote_spec(const std::string& spec);

}  // namespace tapml::rpc
