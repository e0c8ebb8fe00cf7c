// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0

#include "geosearch/protocol.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <openssl/evp.h>

#include <bit>
#include <cerrno>
#include <cstring>
#include <deque>
#include <istream>
#include <ostream>
#include <string>

#include "geosearch/error.hpp"

namespace geosearch {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "float32 wire format assumes little-endian");

std::string encode_floats(std::span<const double> values) {
  std::vector<unsigned char> raw(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto f = static_cast<float>(values[i]);
    std::memcpy(raw.data() + 4 * i, &f, 4);
  }
  std::string out(4 * ((raw.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), raw.data(),
                                static_cast<int>(raw.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<double> decode_floats(std::string_view b64) {
  if (b64.size() % 4 != 0) throw Error(ErrorCode::kProtocol, "base64 length not a multiple of 4");
  std::vector<unsigned char> raw(b64.size() / 4 * 3);
  const int n = EVP_DecodeBlock(raw.data(), reinterpret_cast<const unsigned char*>(b64.data()),
                                static_cast<int>(b64.size()));
  if (n < 0) throw Error(ErrorCode::kProtocol, "invalid base64");
  std::size_t len = static_cast<std::size_t>(n);
  for (std::size_t i = b64.size(); i > 0 && b64[i - 1] == '='; --i) --len;
  if (len % 4 != 0) throw Error(ErrorCode::kProtocol, "float32 payload of " + std::to_string(len) + " bytes");
  std::vector<double> out(len / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    float f = 0.0f;
    std::memcpy(&f, raw.data() + 4 * i, 4);
    out[i] = f;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transports

namespace {

class FdLineReader {
 public:
  explicit FdLineReader(int fd) : fd_(fd) {}

  std::string read_line() {
    while (true) {
      const std::size_t nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      char chunk[4096];
      const ssize_t n = ::read(fd_, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw Error(ErrorCode::kBackendUnavailable, "backend closed the connection");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int fd_;
  std::string buffer_;
};

void write_all(int fd, const std::string& data, bool socket) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = socket ? ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL)
                             : ::write(fd, data.data() + off, data.size() - off);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw Error(ErrorCode::kBackendUnavailable, std::string("write failed: ") + std::strerror(errno));
    off += static_cast<std::size_t>(n);
  }
}

class StdioTransport final : public Transport {
 public:
  explicit StdioTransport(const std::string& command) {
    ::signal(SIGPIPE, SIG_IGN);
    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0) throw Error(ErrorCode::kBackendUnavailable, "pipe failed");
    if (::pipe(from_child) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw Error(ErrorCode::kBackendUnavailable, "pipe failed");
    }
    pid_ = ::fork();
    if (pid_ < 0) throw Error(ErrorCode::kBackendUnavailable, "fork failed");
    if (pid_ == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
    reader_ = std::make_unique<FdLineReader>(read_fd_);
  }

  ~StdioTransport() override {
    if (write_fd_ >= 0) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    if (pid_ > 0) {
      int status = 0;
      ::waitpid(pid_, &status, 0);
    }
  }

  void send_line(const std::string& line) override { write_all(write_fd_, line + "\n", false); }
  std::string recv_line() override { return reader_->read_line(); }

 private:
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::unique_ptr<FdLineReader> reader_;
};

class TcpTransport final : public Transport {
 public:
  TcpTransport(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string service = std::to_string(port);
    if (::getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || res == nullptr) {
      throw Error(ErrorCode::kBackendUnavailable, "cannot resolve " + host);
    }
    for (addrinfo* p = res; p != nullptr; p = p->ai_next) {
      fd_ = ::socket(p->ai_family, p->ai_socktype, p->ai_protocol);
      if (fd_ < 0) continue;
      if (::connect(fd_, p->ai_addr, p->ai_addrlen) == 0) break;
      ::close(fd_);
      fd_ = -1;
    }
    ::freeaddrinfo(res);
    if (fd_ < 0) {
      throw Error(ErrorCode::kBackendUnavailable, "cannot connect to " + host + ":" + service);
    }
    reader_ = std::make_unique<FdLineReader>(fd_);
  }

  ~TcpTransport() override {
    if (fd_ >= 0) ::close(fd_);
  }

  void send_line(const std::string& line) override { write_all(fd_, line + "\n", true); }
  std::string recv_line() override { return reader_->read_line(); }

 private:
  int fd_ = -1;
  std::unique_ptr<FdLineReader> reader_;
};

class LoopbackTransport final : public Transport {
 public:
  explicit LoopbackTransport(std::shared_ptr<ProtocolServer> server) : server_(std::move(server)) {}

  void send_line(const std::string& line) override {
    if (stopped_) throw Error(ErrorCode::kBackendUnavailable, "server has shut down");
    replies_.push_back(server_->handle(line, stopped_));
  }
  std::string recv_line() override {
    if (replies_.empty()) throw Error(ErrorCode::kBackendUnavailable, "no reply pending");
    std::string r = std::move(replies_.front());
    replies_.pop_front();
    return r;
  }

 private:
  std::shared_ptr<ProtocolServer> server_;
  std::deque<std::string> replies_;
  bool stopped_ = false;
};

json ctx_json(const ContextWindow& ctx) { return json(ctx.tokens); }

TokenSeq tokens_from(const json& j) {
  TokenSeq out;
  for (const json& t : j) {
    if (!t.is_number_unsigned()) throw Error(ErrorCode::kProtocol, "token ids must be unsigned integers");
    out.push_back(t.get<TokenId>());
  }
  return out;
}

std::optional<UnitAnchor> anchor_from(const json& req) {
  if (!req.contains("anchor") || req["anchor"].is_null()) return std::nullopt;
  const std::vector<double> v = decode_floats(req["anchor"].get<std::string>());
  return normalize(v);
}

}  // namespace

std::unique_ptr<Transport> spawn_stdio_transport(const std::string& command) {
  return std::make_unique<StdioTransport>(command);
}

std::unique_ptr<Transport> connect_tcp_transport(const std::string& host, std::uint16_t port) {
  return std::make_unique<TcpTransport>(host, port);
}

std::unique_ptr<Transport> loopback_transport(std::shared_ptr<ProtocolServer> server) {
  return std::make_unique<LoopbackTransport>(std::move(server));
}

// ---------------------------------------------------------------------------
// Client

RemoteBackend::RemoteBackend(std::unique_ptr<Transport> transport, const InitParams& params)
    : transport_(std::move(transport)), params_(params) {
  const json reply = call({{"op", "init"},
                           {"d_z", params.d_z},
                           {"r", params.rank_r},
                           {"seed", params.seed},
                           {"temperature", params.temperature}});
  try {
    info_.d_h = reply.at("d_h").get<std::size_t>();
    info_.vocab = reply.at("vocab").get<std::size_t>();
    info_.eoc_id = reply.at("eoc_id").get<TokenId>();
    info_.serial = reply.at("serial").get<bool>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kProtocol, std::string("bad init reply: ") + e.what());
  }
  spec_ = InjectionSpec::generate(params.d_z, info_.d_h, params.rank_r, 0, params.seed);
}

RemoteBackend::~RemoteBackend() {
  try {
    shutdown();
  } catch (...) {
  }
}

void RemoteBackend::shutdown() {
  if (!open_) return;
  open_ = false;
  call({{"op", "shutdown"}});
}

json RemoteBackend::call(const json& request) {
  std::lock_guard<std::mutex> lock(mutex_);
  transport_->send_line(request.dump());
  const std::string line = transport_->recv_line();
  json reply;
  try {
    reply = json::parse(line);
  } catch (const json::parse_error&) {
    throw Error(ErrorCode::kProtocol, "unparseable reply: " + line.substr(0, 200));
  }
  if (!reply.is_object()) throw Error(ErrorCode::kProtocol, "reply is not an object");
  if (!reply.value("ok", false)) {
    const std::string err = reply.value("err", std::string("ProtocolError"));
    throw Error(error_code_from_string(err).value_or(ErrorCode::kProtocol),
                "remote backend replied " + err);
  }
  return reply;
}

RolloutTrace RemoteBackend::rollout(const ContextWindow& ctx,
                                    const std::optional<UnitAnchor>& anchor, std::size_t steps,
                                    double temperature, std::uint64_t stream) {
  json req{{"op", "rollout"}, {"ctx", ctx_json(ctx)}, {"steps", steps}, {"stream", stream}};
  if (anchor) req["anchor"] = encode_floats(anchor->coords());
  if (temperature != params_.temperature) req["temperature"] = temperature;
  const json reply = call(req);
  RolloutTrace trace;
  try {
    trace.tokens = tokens_from(reply.at("tokens"));
    trace.step_logprobs = reply.at("logprobs").get<std::vector<double>>();
    trace.terminal = reply.at("terminal").get<bool>();
    const std::vector<double> hidden = decode_floats(reply.at("hidden").get<std::string>());
    trace.hidden_states = HiddenStates(info_.d_h);
    if (hidden.size() != trace.tokens.size() * info_.d_h) {
      throw Error(ErrorCode::kProtocol, "hidden block does not match token count");
    }
    trace.hidden_states.data = hidden;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kProtocol, std::string("bad rollout reply: ") + e.what());
  }
  if (trace.step_logprobs.size() != trace.tokens.size() || trace.tokens.size() > steps) {
    throw Error(ErrorCode::kProtocol, "rollout reply lengths disagree");
  }
  return trace;
}

ChunkResult RemoteBackend::generate_chunk(const ContextWindow& ctx,
                                          const std::optional<UnitAnchor>& anchor,
                                          std::size_t max_len, double temperature,
                                          std::uint64_t stream) {
  json req{{"op", "chunk"}, {"ctx", ctx_json(ctx)}, {"max_len", max_len}, {"stream", stream}};
  if (anchor) req["anchor"] = encode_floats(anchor->coords());
  if (temperature != params_.temperature) req["temperature"] = temperature;
  const json reply = call(req);
  ChunkResult out;
  try {
    out.tokens = tokens_from(reply.at("tokens"));
    out.terminal = reply.at("terminal").get<bool>();
    out.h_eoc = decode_floats(reply.at("h_eoc").get<std::string>());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kProtocol, std::string("bad chunk reply: ") + e.what());
  }
  if (out.h_eoc.size() != info_.d_h || out.tokens.size() > max_len) {
    throw Error(ErrorCode::kProtocol, "chunk reply shape disagrees with the handshake");
  }
  return out;
}

UnitAnchor RemoteBackend::extract(const ContextWindow& ctx) {
  const json reply = call({{"op", "extract"}, {"ctx", ctx_json(ctx)}});
  try {
    return normalize(decode_floats(reply.at("anchor").get<std::string>()));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kProtocol, std::string("bad extract reply: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Server

std::string ProtocolServer::handle(const std::string& line, bool& stop) {
  json reply;
  try {
    const json request = json::parse(line);
    if (!request.is_object()) throw Error(ErrorCode::kProtocol, "request is not an object");
    reply = dispatch(request, stop);
  } catch (const Error& e) {
    reply = json{{"ok", false}, {"err", std::string(to_string(e.code()))}};
  } catch (const std::exception&) {
    reply = json{{"ok", false}, {"err", std::string(to_string(ErrorCode::kProtocol))}};
  }
  return reply.dump();
}

json ProtocolServer::dispatch(const json& req, bool& stop) {
  const std::string op = req.at("op").get<std::string>();
  if (op == "shutdown") {
    stop = true;
    return json{{"ok", true}};
  }
  if (op == "init") {
    InitParams p;
    p.d_z = req.at("d_z").get<std::size_t>();
    p.rank_r = req.at("r").get<std::size_t>();
    p.seed = req.at("seed").get<std::uint64_t>();
    p.temperature = req.at("temperature").get<double>();
    backend_ = factory_(p);
    params_ = p;
    const BackendInfo& info = backend_->info();
    return json{{"ok", true},
                {"d_h", info.d_h},
                {"vocab", info.vocab},
                {"eoc_id", info.eoc_id},
                {"serial", info.serial}};
  }
  if (!backend_) throw Error(ErrorCode::kProtocol, "init required first");
  const ContextWindow ctx{tokens_from(req.at("ctx")), ContextOrigin::kQueryPlusSuffix};
  const double temperature = req.value("temperature", params_.temperature);
  if (op == "rollout") {
    const RolloutTrace t =
        backend_->rollout(ctx, anchor_from(req), req.at("steps").get<std::size_t>(), temperature,
                          req.at("stream").get<std::uint64_t>());
    return json{{"ok", true},
                {"tokens", t.tokens},
                {"logprobs", t.step_logprobs},
                {"hidden", encode_floats(t.hidden_states.data)},
                {"terminal", t.terminal}};
  }
  if (op == "chunk") {
    const ChunkResult c =
        backend_->generate_chunk(ctx, anchor_from(req), req.at("max_len").get<std::size_t>(),
                                 temperature, req.at("stream").get<std::uint64_t>());
    return json{{"ok", true},
                {"tokens", c.tokens},
                {"h_eoc", encode_floats(c.h_eoc)},
                {"terminal", c.terminal}};
  }
  if (op == "extract") {
    const ChunkResult c = backend_->generate_chunk(ctx, std::nullopt, 0, temperature, 0);
    const UnitAnchor a = extract_anchor(c.h_eoc, backend_->injection());
    return json{{"ok", true}, {"anchor", encode_floats(a.coords())}};
  }
  throw Error(ErrorCode::kProtocol, "unknown op '" + op + "'");
}

void ProtocolServer::serve(std::istream& in, std::ostream& out) {
  std::string line;
  bool stop = false;
  while (!stop && std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    out << handle(line, stop) << '\n';
    out.flush();
  }
}

void serve_tcp(ProtocolServer& server, std::uint16_t port,
               const std::function<void(std::uint16_t)>& on_listening) {
  ::signal(SIGPIPE, SIG_IGN);
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) throw Error(ErrorCode::kBackendUnavailable, "socket failed");
  const int yes = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  socklen_t len = sizeof addr;
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listener, 4) != 0 ||
      ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
    ::close(listener);
    throw Error(ErrorCode::kBackendUnavailable, "cannot listen on port " + std::to_string(port));
  }
  if (on_listening) on_listening(ntohs(addr.sin_port));

  bool stop = false;
  while (!stop) {
    const int conn = ::accept(listener, nullptr, nullptr);
    if (conn < 0) {
      if (errno == EINTR) continue;
      break;
    }
    FdLineReader reader(conn);
    try {
      while (!stop) {
        const std::string line = reader.read_line();
        if (line.empty()) continue;
        write_all(conn, server.handle(line, stop) + "\n", true);
      }
    } catch (const Error&) {
      // peer hung up; wait for the next connection
    }
    ::close(conn);
  }
  ::close(listener);
}

// ---------------------------------------------------------------------------
// Transcripts

std::vector<TranscriptStep> parse_transcript(std::istream& in) {
  std::vector<TranscriptStep> steps;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("> ", 0) == 0) {
      if (!steps.empty() && steps.back().expected.empty()) {
        throw Error(ErrorCode::kProtocol, "line " + std::to_string(line_no) + ": request without reply");
      }
      steps.push_back({line.substr(2), {}});
    } else if (line.rfind("< ", 0) == 0) {
      if (steps.empty() || !steps.back().expected.empty()) {
        throw Error(ErrorCode::kProtocol, "line " + std::to_string(line_no) + ": reply without request");
      }
      steps.back().expected = line.substr(2);
    } else {
      throw Error(ErrorCode::kProtocol, "line " + std::to_string(line_no) + ": expected '> ' or '< '");
    }
  }
  if (!steps.empty() && steps.back().expected.empty()) {
    throw Error(ErrorCode::kProtocol, "transcript ends with an unanswered request");
  }
  return steps;
}

ReplayResult replay_transcript(const std::vector<TranscriptStep>& steps, Transport& transport) {
  ReplayResult result;
  for (const TranscriptStep& step : steps) {
    ++result.steps;
    transport.send_line(step.request);
    const std::string got = transport.recv_line();
    if (got != step.expected) {
      ++result.mismatches;
      result.diffs.push_back("step " + std::to_string(result.steps) + ": expected " +
                             step.expected.substr(0, 160) + " got " + got.substr(0, 160));
    }
  }
  return result;
}

}  // namespace geosearch
