#include "sakugaflow/types.hpp"

#include <algorithm>
#include <cmath>

#include "sakugaflow/errors.hpp"

namespace sakugaflow {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
      return "invalid_argument";
    case ErrorCode::EmptySelection:
      return "empty_selection";
    case ErrorCode::DimensionMismatch:
      return "dimension_mismatch";
    case ErrorCode::UndecodableImage:
      return "undecodable_image";
    case ErrorCode::CapabilityMissing:
      return "capability_missing";
    case ErrorCode::ForeignNode:
      return "foreign_node";
    case ErrorCode::NotFound:
      return "not_found";
    case ErrorCode::AlreadyPending:
      return "already_pending";
    case ErrorCode::AlreadyCompleted:
      return "already_completed";
    case ErrorCode::NotCompleted:
      return "not_completed";
    case ErrorCode::NotDraft:
      return "not_draft";
    case ErrorCode::NoNextStage:
      return "no_next_stage";
    case ErrorCode::StageViolation:
      return "stage_violation";
    case ErrorCode::BackendUnavailable:
      return "backend_unavailable";
    case ErrorCode::StorageFailure:
      return "storage_failure";
    case ErrorCode::CorruptLog:
      return "corrupt_log";
    case ErrorCode::Internal:
      return "internal";
  }
  return "internal";
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::EmptySelection:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::UndecodableImage:
    case ErrorCode::CapabilityMissing:
    case ErrorCode::ForeignNode:
      return 400;
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::AlreadyPending:
    case ErrorCode::AlreadyCompleted:
    case ErrorCode::NotCompleted:
    case ErrorCode::NotDraft:
    case ErrorCode::NoNextStage:
    case ErrorCode::StageViolation:
      return 409;
    case ErrorCode::BackendUnavailable:
      return 503;
    case ErrorCode::StorageFailure:
    case ErrorCode::CorruptLog:
    case ErrorCode::Internal:
      return 500;
  }
  return 500;
}

CorruptLogError::CorruptLogError(std::optional<std::uint64_t> last_valid_seq,
                                 const std::string& what)
    : Error(ErrorCode::CorruptLog,
            what + (last_valid_seq ? " (last valid seq " + std::to_string(*last_valid_seq) + ")"
                                   : std::string(" (no valid records)"))),
      last_valid_seq_(last_valid_seq) {}

std::string Rgb::hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out = "#";
  for (auto c : {r, g, b}) {
    out.push_back(kDigits[c >> 4]);
    out.push_back(kDigits[c & 0x0f]);
  }
  return out;
}

std::optional<Rgb> Rgb::from_hex(std::string_view text) {
  if (text.size() != 7 || text[0] != '#') return std::nullopt;
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  std::uint8_t out[3];
  for (int i = 0; i < 3; ++i) {
    int hi = nibble(text[1 + 2 * i]);
    int lo = nibble(text[2 + 2 * i]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out[i] = static_cast<std::uint8_t>(hi << 4 | lo);
  }
  return Rgb{out[0], out[1], out[2]};
}

void GenerationParams::clamp() {
  auto unit = [](double v) { return std::isnan(v) ? 0.0 : std::clamp(v, 0.0, 1.0); };
  strength = unit(strength);
  control_strength = unit(control_strength);
  if (palette_hint.size() > kMaxPaletteHint) palette_hint.resize(kMaxPaletteHint);
}

std::string_view status_name(NodeStatus s) {
  switch (s) {
    case NodeStatus::Draft:
      return "draft";
    case NodeStatus::Pending:
      return "pending";
    case NodeStatus::Completed:
      return "completed";
    case NodeStatus::Failed:
      return "failed";
  }
  return "draft";
}

std::optional<NodeStatus> parse_status(std::string_view name) {
  for (auto s : {NodeStatus::Draft, NodeStatus::Pending, NodeStatus::Completed,
                 NodeStatus::Failed}) {
    if (status_name(s) == name) return s;
  }
  return std::nullopt;
}

std::string request_violation(const GenerationRequest& r) {
  if (r.canvas.width == 0 || r.canvas.height == 0) return "canvas has zero area";
  if (r.mask && !r.base_image) return "mask requires a base image";
  if (r.stage == StageKind::Rough && r.base_image && !r.mask && !r.control_image)
    return "rough stage takes no base image without a mask or control image";
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(r.params.strength) || !in_unit(r.params.control_strength))
    return "strength outside [0,1]";
  if (r.params.palette_hint.size() > kMaxPaletteHint) return "palette hint longer than 8";
  return {};
}

std::string_view job_state_name(JobState s) {
  switch (s) {
    case JobState::Queued:
      return "queued";
    case JobState::Running:
      return "running";
    case JobState::Done:
      return "done";
    case JobState::Failed:
      return "failed";
  }
  return "queued";
}

std::optional<JobState> parse_job_state(std::string_view name) {
  for (auto s : {JobState::Queued, JobState::Running, JobState::Done, JobState::Failed}) {
    if (job_state_name(s) == name) return s;
  }
  return std::nullopt;
}

bool job_transition_allowed(JobState from, JobState to) {
  switch (from) {
    case JobState::Queued:
      return to == JobState::Running;
    case JobState::Running:
      return to == JobState::Done || to == JobState::Failed;
    case JobState::Done:
    case JobState::Failed:
      return false;
  }
  return false;
}

std::string_view tutor_source_name(TutorSource s) {
  return s == TutorSource::Offline ? "offline" : "remote_llm";
}

std::optional<TutorSource> parse_tutor_source(std::string_view name) {
  if (name == "offline") return TutorSource::Offline;
  if (name == "remote_llm") return TutorSource::RemoteLLM;
  return std::nullopt;
}

std::optional<ProjectId> owning_project(std::string_view child_id) {
  auto dash = child_id.rfind('-');
  if (dash == std::string_view::npos || dash == 0 || dash + 2 > child_id.size())
    return std::nullopt;
  return ProjectId(child_id.substr(0, dash));
}

}  // namespace sakugaflow
