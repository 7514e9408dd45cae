#include "sakugaflow/codec.hpp"

#include "sakugaflow/errors.hpp"

namespace sakugaflow {

namespace {

[[noreturn]] void bad(const std::string& what) {
  throw Error(ErrorCode::InvalidArgument, "malformed document: " + what);
}

const Document& field(const Document& doc, const char* key) {
  if (!doc.is_object()) bad(std::string("expected object around '") + key + "'");
  auto it = doc.find(key);
  if (it == doc.end()) bad(std::string("missing '") + key + "'");
  return *it;
}

std::string get_string(const Document& doc, const char* key) {
  const auto& v = field(doc, key);
  if (!v.is_string()) bad(std::string("'") + key + "' must be a string");
  return v.get<std::string>();
}

std::optional<std::string> get_opt_string(const Document& doc, const char* key) {
  const auto& v = field(doc, key);
  if (v.is_null()) return std::nullopt;
  if (!v.is_string()) bad(std::string("'") + key + "' must be a string or null");
  return v.get<std::string>();
}

std::uint64_t get_u64(const Document& doc, const char* key) {
  const auto& v = field(doc, key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    bad(std::string("'") + key + "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

std::int64_t get_i64(const Document& doc, const char* key) {
  const auto& v = field(doc, key);
  if (!v.is_number_integer()) bad(std::string("'") + key + "' must be an integer");
  return v.get<std::int64_t>();
}

std::optional<std::int64_t> get_opt_i64(const Document& doc, const char* key) {
  const auto& v = field(doc, key);
  if (v.is_null()) return std::nullopt;
  return get_i64(doc, key);
}

double get_double(const Document& doc, const char* key) {
  const auto& v = field(doc, key);
  if (!v.is_number()) bad(std::string("'") + key + "' must be a number");
  return v.get<double>();
}

Document opt_digest(const std::optional<Digest>& d) {
  return d ? Document(d->hex()) : Document(nullptr);
}

std::optional<Digest> get_opt_digest(const Document& doc, const char* key) {
  auto s = get_opt_string(doc, key);
  if (!s) return std::nullopt;
  auto d = Digest::from_hex(*s);
  if (!d) bad(std::string("'") + key + "' is not a 64-char lowercase hex digest");
  return d;
}

Document opt_string(const std::optional<std::string>& s) {
  return s ? Document(*s) : Document(nullptr);
}

StageKind get_stage(const Document& doc, const char* key) {
  auto s = parse_stage(get_string(doc, key));
  if (!s) bad(std::string("'") + key + "' is not a stage name");
  return *s;
}

std::uint32_t get_u32(const Document& doc, const char* key) {
  auto v = get_u64(doc, key);
  if (v > 0xffffffffu) bad(std::string("'") + key + "' out of range");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::string dump_canonical(const Document& doc) {
  return doc.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace);
}

Document parse_document(std::string_view text) {
  try {
    return Document::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("invalid JSON: ") + e.what());
  }
}

Document to_document(const Canvas& v) {
  Document d = Document::object();
  d["width"] = v.width;
  d["height"] = v.height;
  return d;
}

template <>
Canvas from_document<Canvas>(const Document& doc) {
  return Canvas{get_u32(doc, "width"), get_u32(doc, "height")};
}

Document to_document(const GenerationParams& v) {
  Document d = Document::object();
  d["strength"] = v.strength;
  d["control_strength"] = v.control_strength;
  Document palette = Document::array();
  for (const auto& c : v.palette_hint) palette.push_back(c.hex());
  d["palette_hint"] = std::move(palette);
  Document tags = Document::array();
  for (const auto& t : v.style_tags) tags.push_back(t);
  d["style_tags"] = std::move(tags);
  d["control_source"] = v.control_source ? to_document(*v.control_source) : Document(nullptr);
  return d;
}

template <>
GenerationParams from_document<GenerationParams>(const Document& doc) {
  GenerationParams p;
  p.strength = get_double(doc, "strength");
  p.control_strength = get_double(doc, "control_strength");
  const auto& palette = field(doc, "palette_hint");
  if (!palette.is_array()) bad("'palette_hint' must be an array");
  for (const auto& c : palette) {
    if (!c.is_string()) bad("palette entries must be strings");
    auto rgb = Rgb::from_hex(c.get<std::string>());
    if (!rgb) bad("palette entry is not #rrggbb");
    p.palette_hint.push_back(*rgb);
  }
  const auto& tags = field(doc, "style_tags");
  if (!tags.is_array()) bad("'style_tags' must be an array");
  for (const auto& t : tags) {
    if (!t.is_string()) bad("style tags must be strings");
    p.style_tags.push_back(t.get<std::string>());
  }
  const auto& src = field(doc, "control_source");
  if (!src.is_null()) p.control_source = from_document<Canvas>(src);
  return p;
}

Document to_document(const VersionNode& v) {
  Document d = Document::object();
  d["id"] = v.id;
  d["project_id"] = v.project_id;
  d["parent"] = opt_string(v.parent);
  d["stage"] = stage_wire_name(v.stage);
  d["prompt"] = v.prompt;
  d["negative_prompt"] = opt_string(v.negative_prompt);
  d["seed"] = v.seed;
  d["params"] = to_document(v.params);
  d["image"] = opt_digest(v.image);
  d["control_image"] = opt_digest(v.control_image);
  d["mask"] = opt_digest(v.mask);
  d["status"] = status_name(v.status);
  d["created_at"] = v.created_at;
  d["label"] = opt_string(v.label);
  return d;
}

template <>
VersionNode from_document<VersionNode>(const Document& doc) {
  VersionNode n;
  n.id = get_string(doc, "id");
  n.project_id = get_string(doc, "project_id");
  n.parent = get_opt_string(doc, "parent");
  n.stage = get_stage(doc, "stage");
  n.prompt = get_string(doc, "prompt");
  n.negative_prompt = get_opt_string(doc, "negative_prompt");
  n.seed = get_u64(doc, "seed");
  n.params = from_document<GenerationParams>(field(doc, "params"));
  n.image = get_opt_digest(doc, "image");
  n.control_image = get_opt_digest(doc, "control_image");
  n.mask = get_opt_digest(doc, "mask");
  auto status = parse_status(get_string(doc, "status"));
  if (!status) bad("'status' is not a node status");
  n.status = *status;
  n.created_at = get_i64(doc, "created_at");
  n.label = get_opt_string(doc, "label");
  return n;
}

Document to_document(const Project& v) {
  Document d = Document::object();
  d["id"] = v.id;
  d["theme"] = v.theme;
  d["canvas"] = to_document(v.canvas);
  d["created_at"] = v.created_at;
  d["root_node"] = v.root_node;
  d["active_node"] = v.active_node;
  return d;
}

template <>
Project from_document<Project>(const Document& doc) {
  Project p;
  p.id = get_string(doc, "id");
  p.theme = get_string(doc, "theme");
  p.canvas = from_document<Canvas>(field(doc, "canvas"));
  p.created_at = get_i64(doc, "created_at");
  p.root_node = get_string(doc, "root_node");
  p.active_node = get_string(doc, "active_node");
  return p;
}

Document to_document(const GenerationRequest& v) {
  Document d = Document::object();
  d["stage"] = stage_wire_name(v.stage);
  d["prompt"] = v.prompt;
  d["negative_prompt"] = opt_string(v.negative_prompt);
  d["base_image"] = opt_digest(v.base_image);
  d["mask"] = opt_digest(v.mask);
  d["control_image"] = opt_digest(v.control_image);
  d["seed"] = v.seed;
  d["params"] = to_document(v.params);
  d["width"] = v.canvas.width;
  d["height"] = v.canvas.height;
  return d;
}

template <>
GenerationRequest from_document<GenerationRequest>(const Document& doc) {
  GenerationRequest r;
  r.stage = get_stage(doc, "stage");
  r.prompt = get_string(doc, "prompt");
  r.negative_prompt = get_opt_string(doc, "negative_prompt");
  r.base_image = get_opt_digest(doc, "base_image");
  r.mask = get_opt_digest(doc, "mask");
  r.control_image = get_opt_digest(doc, "control_image");
  r.seed = get_u64(doc, "seed");
  r.params = from_document<GenerationParams>(field(doc, "params"));
  r.canvas = Canvas{get_u32(doc, "width"), get_u32(doc, "height")};
  return r;
}

Document to_document(const Job& v) {
  Document d = Document::object();
  d["id"] = v.id;
  d["node_id"] = v.node_id;
  d["state"] = job_state_name(v.state);
  d["error"] = opt_string(v.error);
  d["submitted_at"] = v.submitted_at;
  d["finished_at"] = v.finished_at ? Document(*v.finished_at) : Document(nullptr);
  d["request"] = to_document(v.request);
  return d;
}

template <>
Job from_document<Job>(const Document& doc) {
  Job j;
  j.id = get_string(doc, "id");
  j.node_id = get_string(doc, "node_id");
  auto state = parse_job_state(get_string(doc, "state"));
  if (!state) bad("'state' is not a job state");
  j.state = *state;
  j.error = get_opt_string(doc, "error");
  j.submitted_at = get_i64(doc, "submitted_at");
  j.finished_at = get_opt_i64(doc, "finished_at");
  j.request = from_document<GenerationRequest>(field(doc, "request"));
  return j;
}

Document to_document(const TutorContext& v) {
  Document d = Document::object();
  d["project_theme"] = v.project_theme;
  d["stage"] = stage_wire_name(v.stage);
  d["node_prompt"] = v.node_prompt;
  d["recent_actions"] = v.recent_actions;
  d["question"] = v.question;
  return d;
}

template <>
TutorContext from_document<TutorContext>(const Document& doc) {
  TutorContext c;
  c.project_theme = get_string(doc, "project_theme");
  c.stage = get_stage(doc, "stage");
  c.node_prompt = get_string(doc, "node_prompt");
  const auto& actions = field(doc, "recent_actions");
  if (!actions.is_array()) bad("'recent_actions' must be an array");
  for (const auto& a : actions) {
    if (!a.is_string()) bad("actions must be strings");
    c.recent_actions.push_back(a.get<std::string>());
  }
  c.question = get_string(doc, "question");
  return c;
}

Document to_document(const TutorExchange& v) {
  Document d = Document::object();
  d["id"] = v.id;
  d["node_id"] = v.node_id;
  d["source"] = tutor_source_name(v.source);
  d["answer"] = v.answer;
  d["created_at"] = v.created_at;
  d["context"] = to_document(v.context);
  return d;
}

template <>
TutorExchange from_document<TutorExchange>(const Document& doc) {
  TutorExchange x;
  x.id = get_string(doc, "id");
  x.node_id = get_string(doc, "node_id");
  auto source = parse_tutor_source(get_string(doc, "source"));
  if (!source) bad("'source' is not a tutor source");
  x.source = *source;
  x.answer = get_string(doc, "answer");
  x.created_at = get_i64(doc, "created_at");
  x.context = from_document<TutorContext>(field(doc, "context"));
  return x;
}

std::string canonical_request_bytes(const GenerationRequest& request) {
  return dump_canonical(to_document(request));
}

Digest request_digest(const GenerationRequest& request) {
  return Digest::of(canonical_request_bytes(request));
}

}  // namespace sakugaflow
