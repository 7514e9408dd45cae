#include "sakugaflow/script.hpp"

#include <atomic>
#include <charconv>
#include <fstream>
#include <ostream>

#include "fs_util.hpp"
#include "sakugaflow/errors.hpp"
#include "sakugaflow/tutor.hpp"

namespace sakugaflow {

namespace fs = std::filesystem;

namespace {

Document optional_hex(const std::optional<Digest>& d) {
  return d ? Document(d->hex()) : Document(nullptr);
}

struct Token {
  std::string_view text;
  int column;  // 1-based
};

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r'; }

// Splits off the first word; `rest` keeps its interior spacing.
Token next_word(std::string_view line, std::size_t& pos) {
  while (pos < line.size() && is_blank(line[pos])) ++pos;
  const std::size_t start = pos;
  while (pos < line.size() && !is_blank(line[pos])) ++pos;
  return {line.substr(start, pos - start), static_cast<int>(start) + 1};
}

std::string_view rest_of(std::string_view line, std::size_t pos, int& column) {
  while (pos < line.size() && is_blank(line[pos])) ++pos;
  std::size_t end = line.size();
  while (end > pos && is_blank(line[end - 1])) --end;
  column = static_cast<int>(pos) + 1;
  return line.substr(pos, end - pos);
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<Canvas> parse_size(std::string_view s) {
  auto x = s.find('x');
  if (x == std::string_view::npos) return std::nullopt;
  auto w = parse_number<std::uint32_t>(s.substr(0, x));
  auto h = parse_number<std::uint32_t>(s.substr(x + 1));
  if (!w || !h || *w == 0 || *h == 0) return std::nullopt;
  return Canvas{*w, *h};
}

std::optional<std::array<std::uint32_t, 4>> parse_rect(std::string_view s) {
  std::array<std::uint32_t, 4> out{};
  for (std::size_t i = 0; i < 4; ++i) {
    auto comma = s.find(',');
    if ((i < 3) == (comma == std::string_view::npos)) return std::nullopt;
    auto v = parse_number<std::uint32_t>(s.substr(0, comma));
    if (!v) return std::nullopt;
    out[i] = *v;
    s = i < 3 ? s.substr(comma + 1) : std::string_view{};
  }
  return out;
}

std::optional<ScriptOp> parse_op(std::string_view word) {
  static const std::pair<std::string_view, ScriptOp> kOps[] = {
      {"project", ScriptOp::Project},       {"generate", ScriptOp::Generate},
      {"advance", ScriptOp::Advance},       {"regenerate", ScriptOp::Regenerate},
      {"inpaint", ScriptOp::Inpaint},       {"control", ScriptOp::Control},
      {"activate", ScriptOp::Activate},     {"label", ScriptOp::Label},
      {"ask", ScriptOp::Ask},
  };
  for (const auto& [name, op] : kOps)
    if (name == word) return op;
  return std::nullopt;
}

std::string read_file_or_throw(const fs::path& p) {
  auto bytes = detail::read_whole(p);
  if (!bytes) throw Error(ErrorCode::InvalidArgument, "cannot read " + p.string());
  return *bytes;
}

}  // namespace

ScriptError::ScriptError(int line, int column, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) +
                         ": " + message),
      line_(line),
      column_(column) {}

std::vector<ScriptCommand> parse_script(std::string_view text) {
  std::vector<ScriptCommand> out;
  int line_no = 0;
  while (!text.empty() || line_no == 0) {
    ++line_no;
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

    std::size_t pos = 0;
    Token word = next_word(line, pos);
    if (word.text.empty() || word.text.front() == '#') {
      if (text.empty()) break;
      continue;
    }
    auto op = parse_op(word.text);
    if (!op) throw ScriptError(line_no, word.column, "unknown command '" + std::string(word.text) + "'");

    ScriptCommand cmd;
    cmd.op = *op;
    cmd.line = line_no;

    // Leading key=value options for the commands that take them.
    const bool takes_seed = *op == ScriptOp::Project || *op == ScriptOp::Advance ||
                            *op == ScriptOp::Regenerate;
    while (takes_seed) {
      std::size_t peek = pos;
      Token opt = next_word(line, peek);
      auto eq = opt.text.find('=');
      if (opt.text.empty() || eq == std::string_view::npos) break;
      auto key = opt.text.substr(0, eq);
      auto value = opt.text.substr(eq + 1);
      if (key == "seed") {
        cmd.seed = parse_number<std::uint64_t>(value);
        if (!cmd.seed) throw ScriptError(line_no, opt.column, "seed must be an unsigned integer");
      } else if (key == "size" && *op == ScriptOp::Project) {
        cmd.size = parse_size(value);
        if (!cmd.size) throw ScriptError(line_no, opt.column, "size must look like 64x64");
      } else {
        break;  // part of the free text
      }
      pos = peek;
    }

    int column = 0;
    std::string_view rest = rest_of(line, pos, column);
    const int end_column = static_cast<int>(line.size()) + 1;
    auto require_text = [&](const char* what) {
      if (rest.empty()) throw ScriptError(line_no, end_column, std::string("missing ") + what);
    };

    switch (*op) {
      case ScriptOp::Generate:
        if (!rest.empty()) throw ScriptError(line_no, column, "generate takes no arguments");
        break;
      case ScriptOp::Project:
        require_text("theme");
        break;
      case ScriptOp::Advance:
      case ScriptOp::Regenerate:
        break;
      case ScriptOp::Inpaint: {
        std::size_t p = 0;
        Token mask = next_word(rest, p);
        if (mask.text.empty()) throw ScriptError(line_no, end_column, "missing mask");
        const int mask_column = column + mask.column - 1;
        if (mask.text.substr(0, 5) == "rect:") {
          cmd.mask_rect = parse_rect(mask.text.substr(5));
          if (!cmd.mask_rect) throw ScriptError(line_no, mask_column, "rect must look like rect:x,y,w,h");
        } else {
          cmd.mask_file = std::string(mask.text);
        }
        int prompt_column = 0;
        rest = rest_of(rest, p, prompt_column);
        require_text("region prompt");
        break;
      }
      case ScriptOp::Control:
        require_text("image file");
        break;
      case ScriptOp::Activate:
        require_text("label or node id");
        break;
      case ScriptOp::Label:
        require_text("label text");
        break;
      case ScriptOp::Ask:
        require_text("question");
        break;
    }
    cmd.text = std::string(rest);
    out.push_back(std::move(cmd));
    if (text.empty()) break;
  }
  return out;
}

Document export_tree(const ProjectState& state) {
  Document d = Document::object();
  d["project"] = state.project.id;
  d["theme"] = state.project.theme;
  d["canvas"] = to_document(state.project.canvas);
  d["root"] = state.project.root_node;
  d["active"] = state.project.active_node;

  Document nodes = Document::array();
  Document edges = Document::array();
  Document stages = Document::object();
  for (auto s : kAllStages) stages[std::string(stage_wire_name(s))] = Document::array();
  for (const auto& n : state.tree.nodes()) {
    Document nd = Document::object();
    nd["id"] = n.id;
    nd["parent"] = n.parent ? Document(*n.parent) : Document(nullptr);
    nd["stage"] = stage_wire_name(n.stage);
    nd["status"] = status_name(n.status);
    nd["prompt"] = n.prompt;
    nd["negative_prompt"] = n.negative_prompt ? Document(*n.negative_prompt) : Document(nullptr);
    nd["seed"] = n.seed;
    nd["params"] = to_document(n.params);
    nd["image"] = optional_hex(n.image);
    nd["mask"] = optional_hex(n.mask);
    nd["control_image"] = optional_hex(n.control_image);
    nd["label"] = n.label ? Document(*n.label) : Document(nullptr);
    nodes.push_back(std::move(nd));
    if (n.parent) edges.push_back(Document::array({*n.parent, n.id}));
    stages[std::string(stage_wire_name(n.stage))].push_back(n.id);
  }
  d["nodes"] = std::move(nodes);
  d["edges"] = std::move(edges);
  d["stages"] = std::move(stages);
  return d;
}

Document export_tree(const fs::path& project_dir) {
  return export_tree(replay(ProjectPaths{project_dir}).state);
}

Document export_exchanges(const ProjectState& state) {
  Document out = Document::array();
  for (const auto& x : state.exchanges) {
    Document d = to_document(x);
    d.erase("created_at");
    out.push_back(std::move(d));
  }
  return out;
}

ScriptResult run_script(const std::vector<ScriptCommand>& commands, const fs::path& out_dir,
                        ScriptOptions options) {
  // A logical clock keeps event logs reproducible between runs.
  auto ticks = std::make_shared<std::atomic<Timestamp>>(0);
  EngineOptions eo;
  eo.data_dir = options.data_dir;
  eo.sync_writes = options.data_dir.has_value();
  eo.parallel_jobs = 1;
  eo.cache_enabled = options.cache_enabled;
  eo.id_seed = options.id_seed;
  eo.clock = [ticks] { return ++*ticks; };
  auto backend = options.backend ? options.backend : std::make_shared<MockBackend>();
  Engine engine(eo, backend);

  TutorOptions to;
  to.endpoint = options.tutor_endpoint;
  to.fallback = options.tutor_fallback;
  TutorService tutor(engine, to);

  ScriptResult result;
  std::optional<std::string> pending_control;
  auto say = [&](const std::string& msg) {
    if (options.log) *options.log << msg << "\n";
  };
  auto resolve = [&](const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : options.base_dir / path;
  };
  auto active = [&]() -> NodeId {
    if (!result.project) throw Error(ErrorCode::InvalidArgument, "no project yet; start with 'project <theme>'");
    return engine.state(*result.project)->project.active_node;
  };
  auto run_generation = [&](const NodeId& id) {
    Job job = engine.wait(engine.generate(id).id);
    if (job.state != JobState::Done)
      throw Error(ErrorCode::Internal, "generation of " + id + " failed: " + job.error.value_or("unknown"));
    return job;
  };
  auto finish_new_node = [&](const VersionNode& node) {
    if (pending_control) {
      engine.attach_control_image(node.id, *pending_control);
      pending_control.reset();
    }
    run_generation(node.id);
    say("  " + node.id + " (" + std::string(stage_wire_name(node.stage)) + ") completed");
  };

  for (const auto& cmd : commands) {
    try {
      switch (cmd.op) {
        case ScriptOp::Project: {
          if (result.project) throw Error(ErrorCode::InvalidArgument, "a script drives exactly one project");
          auto p = engine.create_project(cmd.text, cmd.size.value_or(Canvas{}), cmd.seed);
          result.project = p.id;
          say("project " + p.id + " root " + p.root_node);
          break;
        }
        case ScriptOp::Generate: {
          auto id = active();
          if (pending_control) {
            engine.attach_control_image(id, *pending_control);
            pending_control.reset();
          }
          run_generation(id);
          say("  " + id + " completed");
          break;
        }
        case ScriptOp::Advance:
          finish_new_node(engine.advance_stage(active(), cmd.text, cmd.seed));
          break;
        case ScriptOp::Regenerate: {
          RegenerateOverrides o;
          if (!cmd.text.empty()) o.prompt = cmd.text;
          o.seed = cmd.seed;
          finish_new_node(engine.regenerate(active(), o));
          break;
        }
        case ScriptOp::Inpaint: {
          auto parent = active();
          const Canvas canvas = engine.state(*result.project)->project.canvas;
          MaskRegion mask =
              cmd.mask_rect ? MaskRegion::rectangle(canvas, (*cmd.mask_rect)[0], (*cmd.mask_rect)[1],
                                                    (*cmd.mask_rect)[2], (*cmd.mask_rect)[3])
                            : MaskRegion::decode_png(read_file_or_throw(resolve(*cmd.mask_file)));
          finish_new_node(engine.inpaint(parent, mask, cmd.text));
          break;
        }
        case ScriptOp::Control: {
          auto bytes = read_file_or_throw(resolve(cmd.text));
          auto id = active();
          if (engine.node(id).status == NodeStatus::Draft)
            engine.attach_control_image(id, bytes);
          else
            pending_control = std::move(bytes);
          break;
        }
        case ScriptOp::Activate: {
          auto state = engine.state(*result.project);
          std::optional<NodeId> target;
          for (const auto& n : state->tree.nodes())
            if (n.label == cmd.text) target = n.id;
          if (!target && state->tree.contains(cmd.text)) target = cmd.text;
          if (!target) throw Error(ErrorCode::NotFound, "no node labeled or named '" + cmd.text + "'");
          engine.activate(*result.project, *target);
          say("active " + *target);
          break;
        }
        case ScriptOp::Label:
          engine.set_label(active(), cmd.text);
          break;
        case ScriptOp::Ask: {
          auto ex = tutor.ask(active(), cmd.text);
          say("tutor: " + ex.answer);
          break;
        }
      }
    } catch (const std::exception& e) {
      result.exit_code = 1;
      result.failed_line = cmd.line;
      result.error = "line " + std::to_string(cmd.line) + ": " + e.what();
      say(result.error);
      break;
    }
  }

  if (result.project) {
    try {
      engine.wait_idle();
      auto state = engine.state(*result.project);
      fs::create_directories(out_dir / "images");
      for (const auto& n : state->tree.nodes()) {
        if (n.status != NodeStatus::Completed || !n.image) continue;
        auto bytes = engine.blob(*result.project, *n.image);
        if (!bytes) throw Error(ErrorCode::StorageFailure, "missing image for " + n.id);
        detail::write_file_atomically(out_dir / "images" / (n.id + ".png"), *bytes, false);
      }
      detail::write_file_atomically(out_dir / "tree.json", export_tree(*state).dump(2) + "\n", false);
      detail::write_file_atomically(out_dir / "exchanges.json",
                                    export_exchanges(*state).dump(2) + "\n", false);
    } catch (const std::exception& e) {
      if (result.exit_code == 0) {
        result.exit_code = 1;
        result.error = std::string("writing artifacts failed: ") + e.what();
      }
    }
  }
  return result;
}

}  // namespace sakugaflow
