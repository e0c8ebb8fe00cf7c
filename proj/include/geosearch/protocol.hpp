// Copyright 2026 The geosearch Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "geosearch/backend.hpp"

namespace geosearch {

/// Base64 of little-endian float32 values.
std::string encode_floats(std::span<const double> values);
/// Throws kProtocol on bad base64 or a length that is not a multiple of 4.
std::vector<double> decode_floats(std::string_view b64);

/// Newline-delimited message channel.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send_line(const std::string& line) = 0;
  /// Throws kBackendUnavailable when the peer is gone.
  virtual std::string recv_line() = 0;
};

/// Child process spawned through /bin/sh -c, spoken to over its stdio.
std::unique_ptr<Transport> spawn_stdio_transport(const std::string& command);
/// TCP client connection.
std::unique_ptr<Transport> connect_tcp_transport(const std::string& host, std::uint16_t port);

struct InitParams {
  std::size_t d_z = 0;
  std::size_t rank_r = 0;
  std::uint64_t seed = 0;
  double temperature = 0.6;
};

/// Backend speaking the wire protocol. Requests are serialized through one
/// mutex; every call carries its stream id, so results do not depend on call
/// order. The projection W is rebuilt locally from (d_z, d_h, r, seed).
class RemoteBackend final : public Backend {
 public:
  RemoteBackend(std::unique_ptr<Transport> transport, const InitParams& params);
  ~RemoteBackend() override;

  const BackendInfo& info() const override { return info_; }
  const InjectionSpec& injection() const override { return spec_; }

  RolloutTrace rollout(const ContextWindow& ctx, const std::optional<UnitAnchor>& anchor,
                       std::size_t steps, double temperature, std::uint64_t stream) override;
  ChunkResult generate_chunk(const ContextWindow& ctx, const std::optional<UnitAnchor>& anchor,
                             std::size_t max_len, double temperature,
                             std::uint64_t stream) override;
  /// Server-side anchor extraction for ctx.
  UnitAnchor extract(const ContextWindow& ctx);

  void shutdown();

 private:
  nlohmann::json call(const nlohmann::json& request);

  std::unique_ptr<Transport> transport_;
  std::mutex mutex_;
  InitParams params_;
  BackendInfo info_;
  InjectionSpec spec_;
  bool open_ = true;
};

/// Builds the backend a server hosts once it sees `init`.
using BackendFactory = std::function<std::unique_ptr<Backend>(const InitParams&)>;

/// Answers one request line; returns the reply line (no newline) and sets
/// `stop` on shutdown. Never throws: failures become {"ok":false,"err":...}.
class ProtocolServer {
 public:
  explicit ProtocolServer(BackendFactory factory) : factory_(std::move(factory)) {}

  std::string handle(const std::string& line, bool& stop);

  /// Reads requests until shutdown or end of input.
  void serve(std::istream& in, std::ostream& out);

 private:
  nlohmann::json dispatch(const nlohmann::json& request, bool& stop);

  BackendFactory factory_;
  std::unique_ptr<Backend> backend_;
  InitParams params_;
};

/// Listens on 127.0.0.1:port (0 picks a free port), reports the bound port
/// through `on_listening`, then serves connections one at a time until a
/// client sends shutdown. Throws kBackendUnavailable when binding fails.
void serve_tcp(ProtocolServer& server, std::uint16_t port,
               const std::function<void(std::uint16_t)>& on_listening = {});

/// Transport that answers in-process through a ProtocolServer.
std::unique_ptr<Transport> loopback_transport(std::shared_ptr<ProtocolServer> server);

/// Transcript lines: "> request" and "< expected reply", in order.
struct TranscriptStep {
  std::string request;
  std::string expected;
};
std::vector<TranscriptStep> parse_transcript(std::istream& in);

struct ReplayResult {
  std::size_t steps = 0;
  std::size_t mismatches = 0;
  std::vector<std::string> diffs;  // "step N: expected ... got ..."
};

/// Sends every request verbatim and compares replies byte for byte.
ReplayResult replay_transcript(const std::vector<TranscriptStep>& steps, Transport& transport);

}  // namespace geosearch
