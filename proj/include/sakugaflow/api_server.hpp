#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "sakugaflow/engine.hpp"
#include "sakugaflow/errors.hpp"
#include "sakugaflow/tutor.hpp"

namespace sakugaflow {

struct ApiOptions {
  /// Value of Access-Control-Allow-Origin; empty disables CORS headers.
  std::string cors_origin = "*";
  /// Served at "/" when set (the companion UI build).
  std::optional<std::filesystem::path> static_dir;
  std::size_t threads = 32;
  /// Comment line sent on an idle event stream.
  std::chrono::milliseconds keepalive{15000};
};

/// Error body for every non-2xx response: {"code", "message", "details"}.
Document api_error_body(ErrorCode code, std::string_view message, const Document& details = nullptr);

/// SSE event name for a log record: the job lifecycle kinds keep their own
/// names, everything else is "project_updated".
std::string_view stream_event_name(EventKind kind);

/// One server-sent event: "id: <seq>", "event: <name>", "data: <record>".
std::string format_stream_event(const EventRecord& record);

/// HTTP facade over an Engine. Handlers only translate; all rules live in
/// the engine and tutor.
class ApiServer {
 public:
  ApiServer(Engine& engine, TutorService& tutor, ApiOptions options = {});
  ~ApiServer();

  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds; port 0 picks a free port. Returns the bound port or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  bool listen();
  /// bind() plus listen() on a background thread; returns the port or -1.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sakugaflow
