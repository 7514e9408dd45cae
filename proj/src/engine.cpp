#include "sakugaflow/engine.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>

#include "sakugaflow/errors.hpp"
#include "sakugaflow/kernels.hpp"

namespace sakugaflow {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == ',') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

void check_canvas(Canvas c) {
  if (c.width == 0 || c.height == 0 || c.width > kMaxImageEdge || c.height > kMaxImageEdge)
    throw Error(ErrorCode::InvalidArgument, "canvas must be between 1 and " +
                                                std::to_string(kMaxImageEdge) + " pixels per edge");
}

}  // namespace

TokenDiff diff_tokens(std::string_view a, std::string_view b) {
  auto ta = tokenize(a);
  auto tb = tokenize(b);
  const std::size_t n = ta.size(), m = tb.size();
  // lcs[i][j] = LCS length of ta[i..] and tb[j..]
  std::vector<std::vector<std::size_t>> lcs(n + 1, std::vector<std::size_t>(m + 1, 0));
  for (std::size_t i = n; i-- > 0;)
    for (std::size_t j = m; j-- > 0;)
      lcs[i][j] = ta[i] == tb[j] ? lcs[i + 1][j + 1] + 1 : std::max(lcs[i + 1][j], lcs[i][j + 1]);
  TokenDiff out;
  std::size_t i = 0, j = 0;
  while (i < n && j < m) {
    if (ta[i] == tb[j]) {
      ++i;
      ++j;
    } else if (lcs[i + 1][j] >= lcs[i][j + 1]) {
      out.removed.push_back(ta[i++]);
    } else {
      out.added.push_back(tb[j++]);
    }
  }
  while (i < n) out.removed.push_back(ta[i++]);
  while (j < m) out.added.push_back(tb[j++]);
  return out;
}

Document to_document(const ComparisonReport& r) {
  Document d = Document::object();
  d["node_a"] = r.node_a;
  d["node_b"] = r.node_b;
  d["image_a"] = r.image_a.hex();
  d["image_b"] = r.image_b.hex();
  d["prompt_a"] = r.prompt_a;
  d["prompt_b"] = r.prompt_b;
  Document diff = Document::object();
  diff["removed"] = r.prompt_diff.removed;
  diff["added"] = r.prompt_diff.added;
  d["prompt_diff"] = std::move(diff);
  d["params_diff"] = r.params_diff;
  d["lowest_common_ancestor"] = r.lowest_common_ancestor;
  d["differing_pixels"] = r.differing_pixels;
  d["total_pixels"] = r.total_pixels;
  return d;
}

std::string merge_prompt(std::string_view parent_prompt, StageKind parent_stage,
                         StageKind child_stage, std::string_view addition) {
  std::string_view subject = parent_prompt;
  auto prefix = stage_prompt_prefix(parent_stage);
  if (subject.substr(0, prefix.size()) == prefix) subject.remove_prefix(prefix.size());
  std::string merged(subject);
  auto extra = trim(addition);
  if (!extra.empty()) merged += merged.empty() ? extra : ", " + extra;
  return std::string(stage_prompt_prefix(child_stage)) + merged;
}

std::optional<Digest> base_image_for(const ProjectState& state, const VersionNode& node) {
  if (!node.parent) return std::nullopt;
  const auto& parent = state.tree.at(*node.parent);
  if (node.mask || node.stage != parent.stage) return parent.image;
  if (node.stage == StageKind::Rough) return std::nullopt;
  return base_image_for(state, parent);
}

GenerationRequest build_request(const ProjectState& state, const VersionNode& node) {
  GenerationRequest r;
  r.stage = node.stage;
  r.prompt = node.prompt;
  r.negative_prompt = node.negative_prompt;
  r.base_image = base_image_for(state, node);
  r.mask = node.mask;
  r.control_image = node.control_image;
  r.seed = node.seed;
  r.params = node.params;
  r.canvas = state.project.canvas;
  return r;
}

struct Engine::Slot {
  std::optional<ProjectPaths> paths;
  std::mutex writer;
  EventLog log;
  std::unique_ptr<BlobStore> blobs;
  mutable std::mutex view_mu;
  std::shared_ptr<const ProjectState> view;
};

Engine::Engine(EngineOptions options, std::shared_ptr<Backend> backend)
    : options_(std::move(options)), backend_(std::move(backend)) {
  if (!backend_) throw Error(ErrorCode::InvalidArgument, "engine needs a backend");
  if (auto v = backend_->descriptor().violation(); !v.empty())
    throw Error(ErrorCode::InvalidArgument, v);
  if (options_.id_seed)
    rng_.seed(*options_.id_seed);
  else
    rng_.seed(std::random_device{}() ^ (std::uint64_t{std::random_device{}()} << 32));
  if (options_.cache_enabled) cache_ = std::make_unique<ResultCache>(options_.cache_capacity);
  if (options_.data_dir) {
    fs::create_directories(*options_.data_dir);
    load_existing();
  }
  const unsigned n = std::max(1u, options_.parallel_jobs);
  for (unsigned i = 0; i < n; ++i) workers_.emplace_back([this] { worker_loop(); });
}

Engine::~Engine() {
  shutdown();
  for (auto& t : workers_) t.join();
}

void Engine::shutdown() {
  {
    std::lock_guard lock(queue_mu_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  changed_cv_.notify_all();
}

Timestamp Engine::now() const {
  if (options_.clock) return options_.clock();
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::uint64_t Engine::random_u64() {
  std::lock_guard lock(rng_mu_);
  return rng_();
}

std::shared_ptr<Engine::Slot> Engine::slot(const ProjectId& id) const {
  std::shared_lock lock(slots_mu_);
  auto it = slots_.find(id);
  if (it == slots_.end()) throw Error(ErrorCode::NotFound, "unknown project " + id);
  return it->second;
}

std::shared_ptr<Engine::Slot> Engine::slot_for(const std::string& child_id) const {
  auto pid = owning_project(child_id);
  if (!pid) throw Error(ErrorCode::NotFound, "unknown id " + child_id);
  std::shared_lock lock(slots_mu_);
  auto it = slots_.find(*pid);
  if (it == slots_.end()) throw Error(ErrorCode::NotFound, "unknown id " + child_id);
  return it->second;
}

std::shared_ptr<const ProjectState> Engine::view(const Slot& s) const {
  std::lock_guard lock(s.view_mu);
  return s.view;
}

EventRecord Engine::commit(Slot& s, EventKind kind, Document payload, Timestamp at) {
  auto current = view(s);
  EventRecord rec;
  rec.seq = s.log.size();
  rec.kind = kind;
  rec.at = at;
  rec.payload = std::move(payload);

  auto next = current ? std::make_shared<ProjectState>(*current) : std::make_shared<ProjectState>();
  next->apply(rec);
  s.log.append(rec);
  {
    std::lock_guard lock(s.view_mu);
    s.view = next;
  }
  if (options_.on_event) options_.on_event(rec, *next);
  if (s.paths && options_.snapshots && (rec.seq + 1) % kSnapshotInterval == 0) {
    try {
      write_snapshot(s.paths->snapshot(), rec.seq, dump_canonical(next->to_document()),
                     options_.sync_writes);
    } catch (const std::exception& e) {
      std::cerr << "sakugaflow: snapshot failed: " << e.what() << "\n";
    }
  }
  {
    std::lock_guard lock(queue_mu_);
  }
  changed_cv_.notify_all();
  return rec;
}

void Engine::load_existing() {
  for (const auto& entry : fs::directory_iterator(*options_.data_dir)) {
    if (!entry.is_directory()) continue;
    ProjectPaths paths{entry.path()};
    if (!fs::exists(paths.events())) continue;
    try {
      // A header-only log is a creation that never reached its first event.
      if (EventLog::read_file(paths.events()).empty()) continue;
      auto replayed = replay(paths, options_.snapshots);
      auto s = std::make_shared<Slot>();
      s->paths = paths;
      s->log = EventLog::open(paths.events(), options_.sync_writes);
      s->blobs = std::make_unique<BlobStore>(paths.blobs(), options_.sync_writes);
      s->view = std::make_shared<ProjectState>(std::move(replayed.state));
      slots_[s->view->project.id] = s;
    } catch (const std::exception& e) {
      load_errors_[entry.path().filename().string()] = e.what();
    }
  }

  // Jobs that were running when the previous process stopped cannot be
  // resumed; queued ones go back on the queue.
  for (auto& [id, s] : slots_) {
    std::lock_guard writer(s->writer);
    auto v = view(*s);
    for (const auto& job : v->jobs) {
      if (job.state == JobState::Running) {
        Document p = Document::object();
        p["job_id"] = job.id;
        p["node_id"] = job.node_id;
        p["error"] = "interrupted before completion";
        commit(*s, EventKind::NodeFailed, std::move(p), now());
      } else if (job.state == JobState::Queued) {
        enqueue(Ticket{id, job.id});
      }
    }
  }
}

Project Engine::create_project(std::string_view theme, Canvas canvas,
                               std::optional<std::uint64_t> seed) {
  auto subject = trim(theme);
  if (subject.empty()) throw Error(ErrorCode::InvalidArgument, "theme must not be empty");
  check_canvas(canvas);

  static constexpr char kHex[] = "0123456789abcdef";
  ProjectId id;
  do {
    auto r = random_u64();
    id.assign(16, '0');
    for (int i = 0; i < 16; ++i) id[i] = kHex[(r >> (60 - 4 * i)) & 0xf];
  } while (has_project(id));

  const Timestamp at = now();
  Project project{id, subject, canvas, at, id + "-n0", id + "-n0"};
  VersionNode root;
  root.id = project.root_node;
  root.project_id = id;
  root.stage = StageKind::Rough;
  root.prompt = std::string(stage_prompt_prefix(StageKind::Rough)) + subject;
  root.seed = seed ? *seed : random_u64();
  root.status = NodeStatus::Draft;
  root.created_at = at;

  auto s = std::make_shared<Slot>();
  if (options_.data_dir) {
    s->paths = ProjectPaths{*options_.data_dir / id};
    s->log = EventLog::open(s->paths->events(), options_.sync_writes);
    s->blobs = std::make_unique<BlobStore>(s->paths->blobs(), options_.sync_writes);
  } else {
    s->blobs = std::make_unique<BlobStore>();
  }

  std::lock_guard writer(s->writer);
  Document payload = Document::object();
  payload["project"] = to_document(project);
  payload["root"] = to_document(root);
  commit(*s, EventKind::ProjectCreated, std::move(payload), at);
  {
    std::unique_lock lock(slots_mu_);
    slots_[id] = s;
  }
  return project;
}

Job Engine::generate(const NodeId& node_id) {
  auto s = slot_for(node_id);
  std::lock_guard writer(s->writer);
  auto v = view(*s);
  const auto& node = v->tree.at(node_id);
  if (node.status == NodeStatus::Pending)
    throw Error(ErrorCode::AlreadyPending, "node " + node_id + " already has a job in flight");
  if (node.status == NodeStatus::Completed)
    throw Error(ErrorCode::AlreadyCompleted, "node " + node_id + " is completed and immutable");

  Job job;
  job.id = v->next_job_id();
  job.node_id = node_id;
  job.request = build_request(*v, node);
  job.state = JobState::Queued;
  job.submitted_at = now();
  check_request_for(backend_->descriptor(), job.request);

  Document payload = Document::object();
  payload["job"] = to_document(job);
  commit(*s, EventKind::JobQueued, std::move(payload), job.submitted_at);
  enqueue(Ticket{v->project.id, job.id});
  return job;
}

VersionNode Engine::advance_stage(const NodeId& node_id, std::string_view prompt_delta,
                                  std::optional<std::uint64_t> seed) {
  auto s = slot_for(node_id);
  std::lock_guard writer(s->writer);
  auto v = view(*s);
  const auto& parent = v->tree.at(node_id);
  auto next = next_stage(parent.stage);
  if (!next) throw Error(ErrorCode::NoNextStage, "no next stage after finish");
  if (parent.status != NodeStatus::Completed)
    throw Error(ErrorCode::NotCompleted, "node " + node_id + " is not completed");

  VersionNode child;
  child.id = v->next_node_id();
  child.project_id = parent.project_id;
  child.parent = parent.id;
  child.stage = *next;
  child.prompt = merge_prompt(parent.prompt, parent.stage, *next, prompt_delta);
  child.negative_prompt = parent.negative_prompt;
  child.seed = seed ? *seed : parent.seed;
  child.params = parent.params;
  child.params.control_source.reset();
  child.status = NodeStatus::Draft;
  child.created_at = now();

  Document payload = Document::object();
  payload["origin"] = origin_name(NodeOrigin::Advance);
  payload["node"] = to_document(child);
  commit(*s, EventKind::NodeCreated, std::move(payload), child.created_at);
  return child;
}

VersionNode Engine::regenerate(const NodeId& node_id, const RegenerateOverrides& overrides) {
  auto s = slot_for(node_id);
  std::lock_guard writer(s->writer);
  auto v = view(*s);
  const auto& parent = v->tree.at(node_id);
  if (parent.status != NodeStatus::Completed)
    throw Error(ErrorCode::NotCompleted, "node " + node_id + " is not completed");

  VersionNode child = parent;
  child.id = v->next_node_id();
  child.parent = parent.id;
  if (overrides.prompt) {
    auto subject = trim(*overrides.prompt);
    if (subject.empty()) throw Error(ErrorCode::InvalidArgument, "prompt must not be empty");
    child.prompt = std::string(stage_prompt_prefix(parent.stage)) + subject;
  }
  if (overrides.negative_prompt) child.negative_prompt = *overrides.negative_prompt;
  child.seed = overrides.seed ? *overrides.seed : random_u64();
  if (overrides.params) {
    child.params = *overrides.params;
    child.params.clamp();
    child.params.control_source = parent.params.control_source;
  }
  child.image.reset();
  child.mask.reset();
  child.status = NodeStatus::Draft;
  child.created_at = now();
  child.label.reset();

  Document payload = Document::object();
  payload["origin"] = origin_name(NodeOrigin::Regenerate);
  payload["node"] = to_document(child);
  commit(*s, EventKind::NodeCreated, std::move(payload), child.created_at);
  return child;
}

VersionNode Engine::inpaint(const NodeId& node_id, const MaskRegion& mask,
                            std::string_view region_prompt) {
  auto s = slot_for(node_id);
  std::lock_guard writer(s->writer);
  auto v = view(*s);
  const auto& parent = v->tree.at(node_id);
  if (parent.status != NodeStatus::Completed)
    throw Error(ErrorCode::NotCompleted, "node " + node_id + " is not completed");
  if (mask.size() != v->project.canvas)
    throw Error(ErrorCode::DimensionMismatch,
                "mask is " + std::to_string(mask.width()) + "x" + std::to_string(mask.height()) +
                    ", canvas is " + std::to_string(v->project.canvas.width) + "x" +
                    std::to_string(v->project.canvas.height));
  if (mask.count() == 0) throw Error(ErrorCode::EmptySelection, "empty selection");

  const Digest mask_digest = s->blobs->put(mask.encode_png());

  VersionNode child;
  child.id = v->next_node_id();
  child.project_id = parent.project_id;
  child.parent = parent.id;
  child.stage = parent.stage;
  child.prompt = merge_prompt(parent.prompt, parent.stage, parent.stage, region_prompt);
  child.negative_prompt = parent.negative_prompt;
  child.seed = parent.seed;
  child.params = parent.params;
  child.params.control_source.reset();
  child.mask = mask_digest;
  child.status = NodeStatus::Draft;
  child.created_at = now();

  Document payload = Document::object();
  payload["origin"] = origin_name(NodeOrigin::Inpaint);
  payload["node"] = to_document(child);
  commit(*s, EventKind::NodeCreated, std::move(payload), child.created_at);
  return child;
}

VersionNode Engine::attach_control_image(const NodeId& node_id, std::string_view image_bytes) {
  auto s = slot_for(node_id);
  std::lock_guard writer(s->writer);
  auto v = view(*s);
  const auto& node = v->tree.at(node_id);
  if (node.status != NodeStatus::Draft)
    throw Error(ErrorCode::NotDraft, "control images can only be attached to draft nodes");

  Raster raster = decode_png(image_bytes);
  GenerationParams params = node.params;
  params.control_source.reset();
  if (raster.size() != v->project.canvas) {
    params.control_source = raster.size();
    raster = scale_to(raster, v->project.canvas);
  }
  const Digest digest = s->blobs->put(encode_png(raster));

  Document payload = Document::object();
  payload["node_id"] = node_id;
  payload["control_image"] = digest.hex();
  payload["params"] = to_document(params);
  commit(*s, EventKind::ControlAttached, std::move(payload), now());
  return view(*s)->tree.at(node_id);
}

Project Engine::activate(const ProjectId& project_id, const NodeId& node_id) {
  auto s = slot(project_id);
  std::lock_guard writer(s->writer);
  auto v = view(*s);
  if (!v->tree.contains(node_id)) {
    auto owner = owning_project(node_id);
    if (owner && *owner != project_id && has_project(*owner))
      throw Error(ErrorCode::ForeignNode, "node " + node_id + " belongs to another project");
    throw Error(ErrorCode::NotFound, "unknown node " + node_id);
  }
  if (v->project.active_node == node_id) return v->project;

  Document payload = Document::object();
  payload["node_id"] = node_id;
  commit(*s, EventKind::Activated, std::move(payload), now());
  return view(*s)->project;
}

VersionNode Engine::set_label(const NodeId& node_id, std::string_view label) {
  auto s = slot_for(node_id);
  std::lock_guard writer(s->writer);
  auto v = view(*s);
  v->tree.at(node_id);
  Document payload = Document::object();
  payload["node_id"] = node_id;
  payload["label"] = trim(label);
  commit(*s, EventKind::NodeLabeled, std::move(payload), now());
  return view(*s)->tree.at(node_id);
}

ComparisonReport Engine::compare(const NodeId& a, const NodeId& b) const {
  auto sa = slot_for(a);
  auto sb = slot_for(b);
  if (sa != sb) throw Error(ErrorCode::ForeignNode, "compared nodes belong to different projects");
  auto v = view(*sa);
  const auto& na = v->tree.at(a);
  const auto& nb = v->tree.at(b);
  for (const auto* n : {&na, &nb}) {
    if (n->status != NodeStatus::Completed || !n->image)
      throw Error(ErrorCode::NotCompleted, "node " + n->id + " is not completed");
  }
  auto load = [&](const Digest& d) {
    auto bytes = sa->blobs->get(d);
    if (!bytes) throw Error(ErrorCode::StorageFailure, "missing blob " + d.hex());
    return decode_png(*bytes);
  };
  Raster ra = load(*na.image);
  Raster rb = load(*nb.image);
  if (ra.size() != rb.size()) throw Error(ErrorCode::DimensionMismatch, "images differ in size");

  ComparisonReport report;
  report.node_a = a;
  report.node_b = b;
  report.image_a = *na.image;
  report.image_b = *nb.image;
  report.prompt_a = na.prompt;
  report.prompt_b = nb.prompt;
  report.prompt_diff = diff_tokens(na.prompt, nb.prompt);

  Document pa = to_document(na.params);
  Document pb = to_document(nb.params);
  pa["seed"] = na.seed;
  pb["seed"] = nb.seed;
  pa["negative_prompt"] = na.negative_prompt ? Document(*na.negative_prompt) : Document(nullptr);
  pb["negative_prompt"] = nb.negative_prompt ? Document(*nb.negative_prompt) : Document(nullptr);
  report.params_diff = Document::object();
  for (auto it = pa.begin(); it != pa.end(); ++it) {
    if (pb[it.key()] != it.value()) report.params_diff[it.key()] = Document::array({it.value(), pb[it.key()]});
  }

  report.lowest_common_ancestor = v->tree.lowest_common_ancestor(a, b);
  report.differing_pixels = kernels::count_differing_pixels(ra.rgba, rb.rgba);
  report.total_pixels = ra.size().pixel_count();
  return report;
}

TutorExchange Engine::record_exchange(TutorExchange exchange) {
  auto s = slot_for(exchange.node_id);
  std::lock_guard writer(s->writer);
  auto v = view(*s);
  const auto& node = v->tree.at(exchange.node_id);
  if (exchange.context.stage != node.stage)
    throw Error(ErrorCode::InvalidArgument, "exchange context stage differs from the node's stage");
  exchange.id = v->next_exchange_id();
  exchange.created_at = now();
  Document payload = Document::object();
  payload["exchange"] = to_document(exchange);
  commit(*s, EventKind::TutorAsked, std::move(payload), exchange.created_at);
  return exchange;
}

std::vector<ProjectId> Engine::projects() const {
  std::shared_lock lock(slots_mu_);
  std::vector<ProjectId> out;
  for (const auto& [id, _] : slots_) out.push_back(id);
  return out;
}

bool Engine::has_project(const ProjectId& id) const {
  std::shared_lock lock(slots_mu_);
  return slots_.count(id) != 0;
}

std::shared_ptr<const ProjectState> Engine::state(const ProjectId& id) const {
  return view(*slot(id));
}

std::shared_ptr<const ProjectState> Engine::state_of(const NodeId& id) const {
  return view(*slot_for(id));
}

VersionNode Engine::node(const NodeId& id) const { return state_of(id)->tree.at(id); }

Job Engine::job(const JobId& id) const { return state_of(id)->job(id); }

std::optional<std::string> Engine::blob(const Digest& digest) const {
  std::vector<std::shared_ptr<Slot>> all;
  {
    std::shared_lock lock(slots_mu_);
    for (const auto& [_, s] : slots_) all.push_back(s);
  }
  for (const auto& s : all)
    if (auto bytes = s->blobs->get(digest)) return bytes;
  return std::nullopt;
}

std::optional<std::string> Engine::blob(const ProjectId& project, const Digest& digest) const {
  return slot(project)->blobs->get(digest);
}

std::vector<EventRecord> Engine::events(const ProjectId& id, std::uint64_t from) const {
  return slot(id)->log.read_from(from);
}

std::vector<EventRecord> Engine::wait_events(const ProjectId& id, std::uint64_t from,
                                             std::chrono::milliseconds timeout) const {
  auto s = slot(id);
  {
    std::unique_lock lock(queue_mu_);
    changed_cv_.wait_for(lock, timeout, [&] { return stopping_.load() || s->log.size() > from; });
  }
  return s->log.read_from(from);
}

Job Engine::wait(const JobId& id) const {
  auto s = slot_for(id);
  std::unique_lock lock(queue_mu_);
  Job result;
  changed_cv_.wait(lock, [&] {
    result = view(*s)->job(id);
    return result.state == JobState::Done || result.state == JobState::Failed || stopping_.load();
  });
  return result;
}

void Engine::wait_idle() const {
  std::unique_lock lock(queue_mu_);
  changed_cv_.wait(lock, [&] { return outstanding_ == 0 || stopping_.load(); });
}

void Engine::enqueue(Ticket t) {
  {
    std::lock_guard lock(queue_mu_);
    queue_.push_back(std::move(t));
    ++outstanding_;
  }
  queue_cv_.notify_all();
}

void Engine::worker_loop() {
  std::unique_lock lock(queue_mu_);
  while (true) {
    auto eligible = queue_.end();
    queue_cv_.wait(lock, [&] {
      if (stopping_) return true;
      eligible = std::find_if(queue_.begin(), queue_.end(),
                              [&](const Ticket& t) { return !busy_.count(t.project); });
      return eligible != queue_.end();
    });
    if (stopping_) return;
    Ticket t = *eligible;
    queue_.erase(eligible);
    busy_.insert(t.project);
    lock.unlock();
    try {
      run_job(t);
    } catch (const std::exception& e) {
      std::cerr << "sakugaflow: job " << t.job << " aborted: " << e.what() << "\n";
    }
    lock.lock();
    busy_.erase(t.project);
    --outstanding_;
    queue_cv_.notify_all();
    changed_cv_.notify_all();
  }
}

void Engine::run_job(const Ticket& t) {
  auto s = slot(t.project);
  Job job;
  {
    std::lock_guard writer(s->writer);
    job = view(*s)->job(t.job);
    if (job.state != JobState::Queued) return;
    Document p = Document::object();
    p["job_id"] = job.id;
    commit(*s, EventKind::JobStarted, std::move(p), now());
  }

  GenerationResult result;
  const Digest key = request_digest(job.request);
  std::optional<ImageBlob> cached = cache_ ? cache_->get(key) : std::nullopt;
  if (cached) {
    result = GenerationResult::success(std::move(*cached));
  } else {
    try {
      result = backend_->submit(job.request, *s->blobs)->wait();
    } catch (const std::exception& e) {
      result = GenerationResult::failure(e.what());
    }
  }
  if (result.ok()) {
    try {
      result.image->digest = s->blobs->put(result.image->bytes);
      if (cache_) cache_->put(key, *result.image);
    } catch (const std::exception& e) {
      result = GenerationResult::failure(std::string("storing result failed: ") + e.what());
    }
  }

  std::lock_guard writer(s->writer);
  Document p = Document::object();
  p["job_id"] = job.id;
  p["node_id"] = job.node_id;
  if (result.ok()) {
    p["image"] = result.image->digest.hex();
    commit(*s, EventKind::NodeCompleted, std::move(p), now());
  } else {
    p["error"] = result.error.empty() ? std::string("generation failed") : result.error;
    commit(*s, EventKind::NodeFailed, std::move(p), now());
  }
}

}  // namespace sakugaflow
