#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

#include "json.hpp"
#include "tapml/rpc.hpp"
#include "wire_json.hpp"

namespace tapml::rpc {

using nlohmann::json;
using wire::attrs_to_json;
using wire::sig_from_json;
using wire::sig_to_json;

namespace {

void throw_if_error(const Frame& reply) {
  if (reply.opcode != Opcode::Error) return;
  std::string code = errc::protocol;
  std::string message = "remote error";
  std::vector<ContextFrame> context;
  try {
    const json header = json::parse(reply.header);
    code = header.value("code", code);
    message = header.value("message", message);
    for (const json& jc : header.value("context", json::array()))
      context.push_back({jc.value("site", ""), jc.value("detail", "")});
  } catch (const json::exception&) {
    message = "remote error with unparseable header";
  }
  throw RemoteError(code, message, std::move(context));
}

}  // namespace

RemoteBackend::RemoteBackend(const std::string& host, uint16_t port)
    : host_(host), port_num_(port) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port_str = std::to_string(port);
  const int rc = ::getaddrinfo(host.c_str(), port_str.c_str(), &hints, &res);
  if (rc != 0)
    throw Error(errc::connection_lost,
                "cannot resolve '" + host + "': " + gai_strerror(rc));
  fd_ = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd_ < 0 || ::connect(fd_, res->ai_addr, res->ai_addrlen) != 0) {
    const std::string why = std::strerror(errno);
    ::freeaddrinfo(res);
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
    throw Error(errc::connection_lost,
                "cannot connect to " + host + ":" + port_str + ": " + why);
  }
  ::freeaddrinfo(res);

  const Frame hello = transact(
      Opcode::Hello, json{{"version", kProtocolVersion}, {"client", "tapml"}}.dump());
  const json ack = json::parse(hello.header);
  if (ack.at("version").get<uint32_t>() != kProtocolVersion)
    throw Error(errc::protocol, "protocol version mismatch");
  remote_backend_name_ = ack.at("backend").get<std::string>();
  const json& prof = ack.at("profile");
  profile_ = {prof.at("name").get<std::string>(),
              prof.at("max_threads_per_launch").get<uint64_t>(),
              prof.at("max_buffer_bytes").get<uint64_t>()};
}

RemoteBackend::~RemoteBackend() {
  if (fd_ >= 0) ::close(fd_);
}

std::string RemoteBackend::name() const {
  return "remote:" + host_ + ":" + std::to_string(port_num_);
}

Frame RemoteBackend::roundtrip(const Frame& request) {
  const std::vector<uint8_t> wire_bytes = encode_frame(request);
  size_t sent = 0;
  while (sent < wire_bytes.size()) {
    const ssize_t n =
        ::send(fd_, wire_bytes.data() + sent, wire_bytes.size() - sent, MSG_NOSIGNAL);
    if (n <= 0)
      throw Error(errc::connection_lost, "send(): " + std::string(std::strerror(errno)));
    sent += static_cast<size_t>(n);
  }

  std::vector<uint8_t> pending;
  for (;;) {
    size_t consumed = 0;
    std::string why;
    if (auto frame = decode_frame(pending.data(), pending.size(), consumed, why))
      return *frame;
    if (why.rfind("truncated", 0) != 0)
      throw Error(errc::protocol, "malformed reply frame: " + why);
    uint8_t chunk[65536];
    const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (n <= 0)
      throw Error(errc::connection_lost, "connection closed while awaiting reply");
    pending.insert(pending.end(), chunk, chunk + n);
  }
}

Frame RemoteBackend::transact(Opcode opcode, const std::string& header,
                              std::vector<uint8_t> body) {
  Frame request;
  request.opcode = opcode;
  request.request_id = next_request_id_++;
  request.header = header;
  request.body = std::move(body);
  const Frame reply = roundtrip(request);
  if (reply.request_id != request.request_id)
    throw Error(errc::protocol, "reply request id does not match request");
  throw_if_error(reply);
  if (reply.opcode != opcode)
    throw Error(errc::protocol, "reply opcode does not match request");
  return reply;
}

KernelHandle RemoteBackend::compile(OpKind kind, const Attrs& attrs,
                                    const std::vector<TensorSig>& input_sig) {
  json sigs = json::array();
  for (const TensorSig& sig : input_sig) sigs.push_back(sig_to_json(sig));
  const Frame reply = transact(Opcode::UploadModule,
                               json{{"kind", op_kind_name(kind)},
                                    {"attrs", attrs_to_json(attrs)},
                                    {"input_sig", sigs}}
                                   .dump());
  const json ack = json::parse(reply.header);

  KernelHandle handle;
  handle.backend = name();
  handle.kind = kind;
  handle.attrs = attrs;
  handle.attrs_digest = attrs_digest(attrs);
  handle.input_sig = input_sig;
  for (const json& js : ack.at("output_sig")) handle.output_sig.push_back(sig_from_json(js));
  handle.opaque = ack.at("module").get<uint64_t>();
  return handle;
}

std::vector<Tensor> RemoteBackend::run(const KernelHandle& handle,
                                       const std::vector<Tensor>& inputs) {
  if (handle.backend != name())
    throw Error(errc::protocol, "kernel handle belongs to backend '" + handle.backend + "'");
  if (inputs.size() != handle.input_sig.size())
    throw Error(errc::shape_mismatch, "input count does not match compiled signature");
  for (size_t i = 0; i < inputs.size(); ++i)
    if (inputs[i].dtype() != handle.input_sig[i].dtype ||
        inputs[i].shape() != handle.input_sig[i].shape)
      throw Error(errc::shape_mismatch,
                  "input " + std::to_string(i) + " does not match compiled signature");

  std::vector<uint64_t> owned;
  auto alloc = [&](uint64_t byte_len) {
    const Frame reply = transact(Opcode::Alloc, json{{"byte_len", byte_len}}.dump());
    const uint64_t id = json::parse(reply.header).at("buffer").get<uint64_t>();
    owned.push_back(id);
    return id;
  };
  auto free_owned = [&]() {
    for (uint64_t id : owned) {
      try {
        transact(Opcode::Free, json{{"buffer", id}}.dump());
      } catch (const Error&) {
        // Best-effort cleanup; the real failure is already in flight.
      }
    }
  };

  try {
    json call_inputs = json::array();
    for (const Tensor& t : inputs) {
      const uint64_t id = alloc(t.byte_size());
      transact(Opcode::WriteTensor, json{{"buffer", id}, {"offset", 0}}.dump(), t.bytes());
      json ref = sig_to_json({t.dtype(), t.shape()});
      ref["buffer"] = id;
      call_inputs.push_back(std::move(ref));
    }

    json call_outputs = json::array();
    for (const TensorSig& sig : handle.output_sig) {
      const uint64_t id =
          alloc(Tensor::shape_numel(sig.shape) * dtype_width(sig.dtype));
      call_outputs.push_back(json{{"buffer", id}});
    }

    // One launch may cover at most the device's thread budget; wider results
    // are produced over multiple launches, so the request is clamped.
    const uint64_t width =
        std::min<uint64_t>(launch_width(handle.output_sig), profile_.max_threads_per_launch);
    transact(Opcode::Call, json{{"module", handle.opaque},
                                {"launch_width", width},
                                {"inputs", call_inputs},
                                {"outputs", call_outputs}}
                               .dump());

    std::vector<Tensor> outputs;
    for (size_t i = 0; i < handle.output_sig.size(); ++i) {
      const TensorSig& sig = handle.output_sig[i];
      const uint64_t id = call_outputs[static_cast<int>(i)].at("buffer").get<uint64_t>();
      const uint64_t byte_len = Tensor::shape_numel(sig.shape) * dtype_width(sig.dtype);
      const Frame reply = transact(
          Opcode::ReadTensor,
          json{{"buffer", id}, {"offset", 0}, {"byte_len", byte_len}}.dump());
      if (reply.body.size() != byte_len)
        throw Error(errc::protocol, "short tensor read from device");
      outputs.emplace_back(sig.dtype, sig.shape, reply.body);
    }

    free_owned();
    return outputs;
  } catch (...) {
    free_owned();
    throw;
  }
}

void RemoteBackend::shutdown_server() {
  transact(Opcode::Shutdown, json::object().dump());
}

}  // namespace tapml::rpc
