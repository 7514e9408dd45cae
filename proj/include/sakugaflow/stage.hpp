#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace sakugaflow {

/// The four drawing stages, in the order an illustration moves through them.
enum class StageKind : std::uint8_t {
  Rough = 0,
  Line = 1,
  Color = 2,
  Finish = 3,
};

inline constexpr std::array<StageKind, 4> kAllStages{
    StageKind::Rough, StageKind::Line, StageKind::Color, StageKind::Finish};

/// Successor in the fixed order; absent for Finish.
std::optional<StageKind> next_stage(StageKind s);

/// Lowercase wire name ("rough", "line", "color", "finish").
std::string_view stage_wire_name(StageKind s);

/// Display name ("Rough", "Line", "Color", "Finish").
std::string_view stage_display_name(StageKind s);

/// Parses a wire name; absent if unknown.
std::optional<StageKind> parse_stage(std::string_view name);

/// Prompt template prefix for the stage, e.g. "clean line art of ".
std::string_view stage_prompt_prefix(StageKind s);

constexpr int stage_index(StageKind s) { return static_cast<int>(s); }

}  // namespace sakugaflow
