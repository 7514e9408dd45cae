#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

#include "sakugaflow/engine.hpp"

namespace sakugaflow {

inline constexpr std::size_t kDefaultActionWindow = 5;

/// Theme, stage and prompt of `node_id`, the newest `window` action
/// summaries from the project log, and the question. Throws
/// Error(InvalidArgument) for a blank question, Error(NotFound) for an
/// unknown node.
TutorContext assemble_context(const ProjectState& state, const NodeId& node_id,
                              std::string_view question, std::size_t window = kDefaultActionWindow);

/// The phrase each stage's offline answer is built around.
std::string_view stage_topic(StageKind stage);

/// Rule-table answer for the context's stage. Total and deterministic.
std::string offline_answer(const TutorContext& ctx);

/// System message sent with every remote request.
extern const std::string_view kTutorPersona;

struct RenderLimits {
  std::size_t max_actions = 10;
  std::size_t max_chars = 4000;
};

/// Fills the versioned context template. Oldest actions are dropped first
/// until both limits hold; stage name and question are never dropped.
std::string render_context(const TutorContext& ctx, RenderLimits limits = {});

/// Chat-completion client: POST {endpoint}/v1/chat with
/// {system, messages:[{role, content}]}, expects {content}.
class RemoteTutor {
 public:
  explicit RemoteTutor(std::string endpoint,
                       std::chrono::milliseconds timeout = std::chrono::seconds(30),
                       RenderLimits limits = {});
  /// Throws Error(BackendUnavailable) on transport or protocol failure.
  std::string answer(const TutorContext& ctx) const;
  const std::string& endpoint() const { return endpoint_; }

 private:
  std::string endpoint_;
  std::chrono::milliseconds timeout_;
  RenderLimits limits_;
};

struct TutorOptions {
  std::optional<std::string> endpoint;
  bool fallback = true;
  std::size_t window = kDefaultActionWindow;
  RenderLimits limits;
  std::chrono::milliseconds timeout = std::chrono::seconds(30);
};

/// Answers questions about a node and records each exchange in the
/// project's log. Answers never touch nodes.
class TutorService {
 public:
  TutorService(Engine& engine, TutorOptions options = {});

  TutorExchange ask(const NodeId& node_id, std::string_view question);
  const TutorOptions& options() const { return options_; }

 private:
  Engine& engine_;
  TutorOptions options_;
  std::optional<RemoteTutor> remote_;
};

}  // namespace sakugaflow
