#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sakugaflow/digest.hpp"
#include "sakugaflow/stage.hpp"

namespace sakugaflow {

using ProjectId = std::string;
using NodeId = std::string;
using JobId = std::string;
using ExchangeId = std::string;

/// Milliseconds since the Unix epoch.
using Timestamp = std::int64_t;

struct Canvas {
  std::uint32_t width = 512;
  std::uint32_t height = 512;

  std::size_t pixel_count() const { return std::size_t{width} * height; }
  auto operator<=>(const Canvas&) const = default;
};

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  /// "#rrggbb", lowercase.
  std::string hex() const;
  static std::optional<Rgb> from_hex(std::string_view text);
  auto operator<=>(const Rgb&) const = default;
};

inline constexpr std::size_t kMaxPaletteHint = 8;

struct GenerationParams {
  /// Denoising strength: 0 keeps the base image, 1 ignores it.
  double strength = 0.6;
  double control_strength = 1.0;
  std::vector<Rgb> palette_hint;
  std::vector<std::string> style_tags;
  /// Original size of an attached control image that was rescaled to the canvas.
  std::optional<Canvas> control_source;

  /// Clamps both strengths into [0,1] (NaN becomes 0) and truncates the palette.
  void clamp();
  bool operator==(const GenerationParams&) const = default;
};

enum class NodeStatus : std::uint8_t { Draft, Pending, Completed, Failed };

std::string_view status_name(NodeStatus s);
std::optional<NodeStatus> parse_status(std::string_view name);

struct VersionNode {
  NodeId id;
  ProjectId project_id;
  std::optional<NodeId> parent;
  StageKind stage = StageKind::Rough;
  std::string prompt;
  std::optional<std::string> negative_prompt;
  std::uint64_t seed = 0;
  GenerationParams params;
  std::optional<Digest> image;
  std::optional<Digest> control_image;
  std::optional<Digest> mask;
  NodeStatus status = NodeStatus::Draft;
  Timestamp created_at = 0;
  std::optional<std::string> label;

  bool operator==(const VersionNode&) const = default;
};

struct Project {
  ProjectId id;
  std::string theme;
  Canvas canvas;
  Timestamp created_at = 0;
  NodeId root_node;
  NodeId active_node;

  bool operator==(const Project&) const = default;
};

struct GenerationRequest {
  StageKind stage = StageKind::Rough;
  std::string prompt;
  std::optional<std::string> negative_prompt;
  std::optional<Digest> base_image;
  std::optional<Digest> mask;
  std::optional<Digest> control_image;
  std::uint64_t seed = 0;
  GenerationParams params;
  Canvas canvas;

  bool operator==(const GenerationRequest&) const = default;
};

/// Empty string when the request satisfies its invariants, otherwise the broken rule.
std::string request_violation(const GenerationRequest& request);

enum class JobState : std::uint8_t { Queued, Running, Done, Failed };

std::string_view job_state_name(JobState s);
std::optional<JobState> parse_job_state(std::string_view name);

/// Queued -> Running -> (Done | Failed) only.
bool job_transition_allowed(JobState from, JobState to);

struct Job {
  JobId id;
  NodeId node_id;
  GenerationRequest request;
  JobState state = JobState::Queued;
  std::optional<std::string> error;
  Timestamp submitted_at = 0;
  std::optional<Timestamp> finished_at;

  bool operator==(const Job&) const = default;
};

struct TutorContext {
  std::string project_theme;
  StageKind stage = StageKind::Rough;
  std::string node_prompt;
  /// Oldest first, newest last.
  std::vector<std::string> recent_actions;
  std::string question;

  bool operator==(const TutorContext&) const = default;
};

enum class TutorSource : std::uint8_t { Offline, RemoteLLM };

std::string_view tutor_source_name(TutorSource s);
std::optional<TutorSource> parse_tutor_source(std::string_view name);

struct TutorExchange {
  ExchangeId id;
  NodeId node_id;
  TutorContext context;
  std::string answer;
  TutorSource source = TutorSource::Offline;
  Timestamp created_at = 0;

  bool operator==(const TutorExchange&) const = default;
};

/// Node ids and job ids are "<project>-n<k>" / "<project>-j<k>"; returns the project part.
std::optional<ProjectId> owning_project(std::string_view child_id);

}  // namespace sakugaflow
