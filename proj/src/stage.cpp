#include "sakugaflow/stage.hpp"

namespace sakugaflow {

std::optional<StageKind> next_stage(StageKind s) {
  switch (s) {
    case StageKind::Rough:
      return StageKind::Line;
    case StageKind::Line:
      return StageKind::Color;
    case StageKind::Color:
      return StageKind::Finish;
    case StageKind::Finish:
      return std::nullopt;
  }
  return std::nullopt;
}

std::string_view stage_wire_name(StageKind s) {
  switch (s) {
    case StageKind::Rough:
      return "rough";
    case StageKind::Line:
      return "line";
    case StageKind::Color:
      return "color";
    case StageKind::Finish:
      return "finish";
  }
  return "rough";
}

std::string_view stage_display_name(StageKind s) {
  switch (s) {
    case StageKind::Rough:
      return "Rough";
    case StageKind::Line:
      return "Line";
    case StageKind::Color:
      return "Color";
    case StageKind::Finish:
      return "Finish";
  }
  return "Rough";
}

std::optional<StageKind> parse_stage(std::string_view name) {
  for (auto s : kAllStages) {
    if (name == stage_wire_name(s) || name == stage_display_name(s)) return s;
  }
  return std::nullopt;
}

std::string_view stage_prompt_prefix(StageKind s) {
  switch (s) {
    case StageKind::Rough:
      return "rough sketch of ";
    case StageKind::Line:
      return "clean line art of ";
    case StageKind::Color:
      return "flat colored illustration of ";
    case StageKind::Finish:
      return "polished final illustration of ";
  }
  return "";
}

}  // namespace sakugaflow
