#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sakugaflow/engine.hpp"

namespace sakugaflow {

/// Stable tree document: project, canvas, root and active pointers, nodes in
/// creation order, parent edges, node ids grouped by stage. No timestamps.
Document export_tree(const ProjectState& state);
/// Replays a project directory and exports it.
Document export_tree(const std::filesystem::path& project_dir);

/// Exchanges without timestamps, oldest first.
Document export_exchanges(const ProjectState& state);

// Session scripts. One command per line; blank lines and lines starting
// with '#' are ignored:
//
//   project [size=WxH] [seed=N] <theme>
//   generate
//   advance [seed=N] [prompt delta]
//   regenerate [seed=N] [prompt]
//   inpaint <mask.png | rect:x,y,w,h> <region prompt>
//   control <image.png>
//   activate <label | node id>
//   label <text>
//   ask <question>
//
// advance, regenerate and inpaint create the node and generate it. control
// attaches to the active node while it is a draft, otherwise to the next
// node the script creates.

enum class ScriptOp { Project, Generate, Advance, Regenerate, Inpaint, Control, Activate, Label, Ask };

struct ScriptCommand {
  ScriptOp op = ScriptOp::Generate;
  int line = 0;
  std::string text;  // theme, delta, prompt, file, label or question
  std::optional<std::uint64_t> seed;
  std::optional<Canvas> size;
  std::optional<std::string> mask_file;
  std::optional<std::array<std::uint32_t, 4>> mask_rect;  // x, y, w, h
};

class ScriptError : public std::runtime_error {
 public:
  ScriptError(int line, int column, const std::string& message);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

/// Throws ScriptError with a 1-based line and column.
std::vector<ScriptCommand> parse_script(std::string_view text);

struct ScriptOptions {
  /// Persist the session here instead of keeping it in memory.
  std::optional<std::filesystem::path> data_dir;
  std::uint64_t id_seed = 1;
  /// Mock backend when null.
  std::shared_ptr<Backend> backend;
  bool cache_enabled = true;
  /// Relative mask and control paths resolve against this directory.
  std::filesystem::path base_dir = ".";
  std::optional<std::string> tutor_endpoint;
  bool tutor_fallback = true;
  /// Progress lines; nullptr for silence.
  std::ostream* log = nullptr;
};

struct ScriptResult {
  int exit_code = 0;  // 0 success, 1 failed step
  std::optional<ProjectId> project;
  std::optional<int> failed_line;
  std::string error;
};

/// Executes commands in order against an embedded engine, waiting for each
/// job, then writes images/<node>.png for every completed node plus
/// tree.json and exchanges.json into out_dir. Stops at the first failure;
/// artifacts produced so far are still written.
ScriptResult run_script(const std::vector<ScriptCommand>& commands,
                        const std::filesystem::path& out_dir, ScriptOptions options = {});

}  // namespace sakugaflow
