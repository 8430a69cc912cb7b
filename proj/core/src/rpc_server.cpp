#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <map>

#include "json.hpp"
#include "tapml/kernels.hpp"
#include "tapml/rpc.hpp"
#include "wire_json.hpp"

namespace tapml::rpc {

using nlohmann::json;
using wire::attrs_from_json;
using wire::sig_from_json;
using wire::sig_to_json;

namespace {

bool send_all(int fd, const std::vector<uint8_t>& bytes) {
  size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n =
        ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) return false;
    sent += static_cast<size_t>(n);
  }
  return true;
}

const char* opcode_site(Opcode op) {
  switch (op) {
    case Opcode::Hello: return "device-server/hello";
    case Opcode::UploadModule: return "device-server/upload-module";
    case Opcode::Alloc: return "device-server/alloc";
    case Opcode::WriteTensor: return "device-server/write-tensor";
    case Opcode::ReadTensor: return "device-server/read-tensor";
    case Opcode::Call: return "device-server/call";
    case Opcode::Free: return "device-server/free";
    case Opcode::Shutdown: return "device-server/shutdown";
    case Opcode::Error: return "device-server/error";
  }
  return "device-server";
}

}  // namespace

/// Per-connection device state: uploaded kernel modules and allocated
/// buffers. Handles are dense and never reused within the session.
struct Server::Session {
  std::map<uint64_t, KernelHandle> modules;
  std::map<uint64_t, std::vector<uint8_t>> buffers;
  uint64_t next_module = 1;
  uint64_t next_buffer = 1;

  std::vector<uint8_t>& buffer(uint64_t id) {
    auto it = buffers.find(id);
    if (it == buffers.end())
      throw Error(errc::unknown_buffer, "no buffer with handle " + std::to_string(id));
    return it->second;
  }
};

Server::Server(const std::string& host, uint16_t port, const std::string& backend_name,
               const std::string& profile_name, const FaultSet& faults)
    : profile_(device_profile(profile_name)) {
  backend_ = make_local_backend(backend_name, profile_);
  active_ = backend_.get();
  if (!faults.empty()) {
    fault_wrapper_ = wrap_with_faults(*backend_, faults);
    active_ = fault_wrapper_.get();
  }

  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port_str = std::to_string(port);
  const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(),
                               port_str.c_str(), &hints, &res);
  if (rc != 0)
    throw Error(errc::connection_lost,
                "cannot resolve bind address '" + host + "': " + gai_strerror(rc));

  listen_fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (listen_fd_ < 0) {
    ::freeaddrinfo(res);
    throw Error(errc::connection_lost, "socket(): " + std::string(std::strerror(errno)));
  }
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(listen_fd_, res->ai_addr, res->ai_addrlen) != 0 ||
      ::listen(listen_fd_, 4) != 0) {
    const std::string why = std::strerror(errno);
    ::freeaddrinfo(res);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error(errc::connection_lost, "cannot listen on " + host + ":" + port_str + ": " + why);
  }
  ::freeaddrinfo(res);

  sockaddr_in bound{};
  socklen_t bound_len = sizeof(bound);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &bound_len);
  port_ = ntohs(bound.sin_port);
}

Server::~Server() {
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void Server::serve_forever() {
  while (!shutdown_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      throw Error(errc::connection_lost, "accept(): " + std::string(std::strerror(errno)));
    }
    handle_session(fd);
    ::close(fd);
  }
}

void Server::handle_session(int fd) {
  Session session;
  std::vector<uint8_t> pending;

  auto read_frame = [&]() -> std::optional<Frame> {
    for (;;) {
      size_t consumed = 0;
      std::string why;
      if (auto frame = decode_frame(pending.data(), pending.size(), consumed, why)) {
        pending.erase(pending.begin(), pending.begin() + static_cast<long>(consumed));
        return frame;
      }
      // Only truncation is recoverable by reading more; anything else means
      // the stream is desynchronized and the session must end.
      if (why.rfind("truncated", 0) != 0) {
        Frame err;
        err.opcode = Opcode::Error;
        err.header = json{{"code", errc::protocol},
                          {"message", "malformed frame: " + why},
                          {"context", json::array({{{"site", "device-server/frame"},
                                                    {"detail", why}}})}}
                         .dump();
        send_all(fd, encode_frame(err));
        return std::nullopt;
      }
      uint8_t chunk[65536];
      const ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
      if (n <= 0) return std::nullopt;  // peer closed or connection error
      pending.insert(pending.end(), chunk, chunk + n);
    }
  };

  while (auto request = read_frame()) {
    Frame reply;
    reply.request_id = request->request_id;
    try {
      const json header =
          request->header.empty() ? json::object() : json::parse(request->header);
      json ack = json::object();

      switch (request->opcode) {
        case Opcode::Hello: {
          ack["version"] = kProtocolVersion;
          ack["backend"] = active_->name();
          ack["profile"] = {{"name", profile_.name},
                            {"max_threads_per_launch", profile_.max_threads_per_launch},
                            {"max_buffer_bytes", profile_.max_buffer_bytes}};
          break;
        }
        case Opcode::UploadModule: {
          const OpKind kind = op_kind_from_name(header.at("kind").get<std::string>());
          const Attrs attrs = attrs_from_json(header.at("attrs"));
          std::vector<TensorSig> input_sig;
          for (const json& js : header.at("input_sig")) input_sig.push_back(sig_from_json(js));
          KernelHandle handle = active_->compile(kind, attrs, input_sig);
          const uint64_t id = session.next_module++;
          ack["module"] = id;
          json out_sig = json::array();
          for (const TensorSig& sig : handle.output_sig) out_sig.push_back(sig_to_json(sig));
          ack["output_sig"] = out_sig;
          session.modules.emplace(id, std::move(handle));
          break;
        }
        case Opcode::Alloc: {
          const uint64_t byte_len = header.at("byte_len").get<uint64_t>();
          if (byte_len > profile_.max_buffer_bytes)
            throw Error(errc::buffer_limit,
                        "requested " + std::to_string(byte_len) + " bytes, profile '" +
                            profile_.name + "' allows " +
                            std::to_string(profile_.max_buffer_bytes));
          const uint64_t id = session.next_buffer++;
          session.buffers.emplace(id, std::vector<uint8_t>(byte_len));
          ack["buffer"] = id;
          break;
        }
        case Opcode::WriteTensor: {
          auto& buf = session.buffer(header.at("buffer").get<uint64_t>());
          const uint64_t offset = header.value("offset", uint64_t{0});
          if (offset + request->body.size() > buf.size())
            throw Error(errc::protocol, "write past end of buffer");
          std::memcpy(buf.data() + offset, request->body.data(), request->body.size());
          ack["written"] = request->body.size();
          break;
        }
        case Opcode::ReadTensor: {
          const auto& buf = session.buffer(header.at("buffer").get<uint64_t>());
          const uint64_t offset = header.value("offset", uint64_t{0});
          const uint64_t byte_len = header.value("byte_len", uint64_t{buf.size()});
          if (offset + byte_len > buf.size())
            throw Error(errc::protocol, "read past end of buffer");
          reply.body.assign(buf.begin() + static_cast<long>(offset),
                            buf.begin() + static_cast<long>(offset + byte_len));
          break;
        }
        case Opcode::Call: {
          const uint64_t module_id = header.at("module").get<uint64_t>();
          auto mit = session.modules.find(module_id);
          if (mit == session.modules.end())
            throw Error(errc::unknown_module,
                        "no module with handle " + std::to_string(module_id));
          const KernelHandle& handle = mit->second;
          const uint64_t width = header.at("launch_width").get<uint64_t>();
          if (width > profile_.max_threads_per_launch)
            throw Error(errc::launch_limit,
                        "launch width " + std::to_string(width) + " exceeds profile '" +
                            profile_.name + "' limit of " +
                            std::to_string(profile_.max_threads_per_launch));

          std::vector<Tensor> inputs;
          for (const json& ji : header.at("inputs")) {
            const TensorSig sig = sig_from_json(ji);
            const auto& buf = session.buffer(ji.at("buffer").get<uint64_t>());
            const size_t need = Tensor::shape_numel(sig.shape) * dtype_width(sig.dtype);
            if (buf.size() < need)
              throw Error(errc::shape_mismatch, "input buffer smaller than declared tensor");
            inputs.emplace_back(sig.dtype, sig.shape,
                                std::vector<uint8_t>(buf.begin(), buf.begin() + static_cast<long>(need)));
          }
          std::vector<Tensor> outputs = active_->run(handle, inputs);
          const json& out_refs = header.at("outputs");
          if (out_refs.size() != outputs.size())
            throw Error(errc::protocol, "output buffer count mismatch");
          for (size_t i = 0; i < outputs.size(); ++i) {
            auto& buf = session.buffer(out_refs[i].at("buffer").get<uint64_t>());
            if (buf.size() < outputs[i].byte_size())
              throw Error(errc::protocol, "output buffer smaller than result");
            std::memcpy(buf.data(), outputs[i].bytes().data(), outputs[i].byte_size());
          }
          break;
        }
        case Opcode::Free: {
          const uint64_t id = header.at("buffer").get<uint64_t>();
          if (session.buffers.erase(id) == 0)
            throw Error(errc::unknown_buffer, "no buffer with handle " + std::to_string(id));
          break;
        }
        case Opcode::Shutdown: {
          shutdown_ = true;
          break;
        }
        case Opcode::Error:
          throw Error(errc::protocol, "client sent an error opcode");
      }

      reply.opcode = request->opcode;
      reply.header = ack.dump();
    } catch (const Error& e) {
      reply.opcode = Opcode::Error;
      reply.body.clear();
      reply.header = json{{"code", e.code()},
                          {"message", e.what()},
                          {"context", json::array({{{"site", opcode_site(request->opcode)},
                                                    {"detail", e.what()}}})}}
                         .dump();
    } catch (const std::exception& e) {
      reply.opcode = Opcode::Error;
      reply.body.clear();
      reply.header = json{{"code", errc::protocol},
                          {"message", e.what()},
                          {"context", json::array({{{"site", opcode_site(request->opcode)},
                                                    {"detail", e.what()}}})}}
                         .dump();
    }

    if (!send_all(fd, encode_frame(reply))) return;
    if (shutdown_) return;
  }
}

}  // namespace tapml::rpc
