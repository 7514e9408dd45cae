#include "sakugaflow/project_state.hpp"

#include "sakugaflow/errors.hpp"

namespace sakugaflow {

namespace {

[[noreturn]] void reject(const EventRecord& r, const std::string& why) {
  throw Error(ErrorCode::Internal,
              "event " + std::to_string(r.seq) + " (" + std::string(event_kind_name(r.kind)) +
                  ") rejected: " + why);
}

std::string str_field(const EventRecord& r, const char* key) {
  auto it = r.payload.find(key);
  if (it == r.payload.end() || !it->is_string()) reject(r, std::string("missing '") + key + "'");
  return it->get<std::string>();
}

const Document& obj_field(const EventRecord& r, const char* key) {
  auto it = r.payload.find(key);
  if (it == r.payload.end() || !it->is_object()) reject(r, std::string("missing '") + key + "'");
  return *it;
}

std::size_t index_suffix(const std::string& id, char tag) {
  auto dash = id.rfind('-');
  if (dash == std::string::npos || dash + 2 > id.size() || id[dash + 1] != tag) return SIZE_MAX;
  try {
    return std::stoul(id.substr(dash + 2));
  } catch (const std::exception&) {
    return SIZE_MAX;
  }
}

}  // namespace

std::string_view origin_name(NodeOrigin o) {
  switch (o) {
    case NodeOrigin::Advance:
      return "advance";
    case NodeOrigin::Regenerate:
      return "regenerate";
    case NodeOrigin::Inpaint:
      return "inpaint";
  }
  return "advance";
}

std::optional<NodeOrigin> parse_origin(std::string_view name) {
  for (auto o : {NodeOrigin::Advance, NodeOrigin::Regenerate, NodeOrigin::Inpaint})
    if (origin_name(o) == name) return o;
  return std::nullopt;
}

NodeId ProjectState::next_node_id() const {
  return project.id + "-n" + std::to_string(tree.size());
}

JobId ProjectState::next_job_id() const { return project.id + "-j" + std::to_string(jobs.size()); }

ExchangeId ProjectState::next_exchange_id() const {
  return project.id + "-x" + std::to_string(exchanges.size());
}

const Job& ProjectState::job(const JobId& id) const {
  auto k = index_suffix(id, 'j');
  if (k >= jobs.size() || jobs[k].id != id) throw Error(ErrorCode::NotFound, "unknown job " + id);
  return jobs[k];
}

std::string summarize(const EventRecord& r, const ProjectState& before) {
  std::string kind(event_kind_name(r.kind));
  auto stage_of = [&](const std::string& node_id) -> std::string {
    if (const auto* n = before.tree.find(node_id)) return std::string(stage_wire_name(n->stage));
    return "?";
  };
  try {
    switch (r.kind) {
      case EventKind::ProjectCreated:
        return kind;
      case EventKind::NodeCreated: {
        const auto& node = r.payload.at("node");
        auto origin = r.payload.at("origin").get<std::string>();
        auto stage = node.at("stage").get<std::string>();
        return kind + ": " + origin + (origin == "advance" ? " to " : " at ") + stage;
      }
      case EventKind::ControlAttached:
        return kind + ": " + stage_of(r.payload.at("node_id").get<std::string>());
      case EventKind::JobQueued:
        return kind + ": " + r.payload.at("job").at("request").at("stage").get<std::string>();
      case EventKind::JobStarted: {
        const auto& job = before.job(r.payload.at("job_id").get<std::string>());
        return kind + ": " + std::string(stage_wire_name(job.request.stage));
      }
      case EventKind::NodeCompleted:
        return kind + ": " + stage_of(r.payload.at("node_id").get<std::string>());
      case EventKind::NodeFailed:
        return kind + ": " + stage_of(r.payload.at("node_id").get<std::string>()) + " (" +
               r.payload.at("error").get<std::string>() + ")";
      case EventKind::Activated: {
        auto id = r.payload.at("node_id").get<std::string>();
        return kind + ": " + stage_of(id) + " node " + id;
      }
      case EventKind::TutorAsked:
        return kind + ": " + r.payload.at("exchange").at("context").at("question").get<std::string>();
      case EventKind::NodeLabeled:
        return kind + ": " + r.payload.at("label").get<std::string>();
    }
  } catch (const std::exception&) {
  }
  return kind;
}

void ProjectState::apply(const EventRecord& r) {
  const std::uint64_t expected = last_seq ? *last_seq + 1 : 0;
  if (r.seq != expected) reject(r, "expected seq " + std::to_string(expected));
  if (r.kind != EventKind::ProjectCreated && !last_seq) reject(r, "project not created yet");

  std::string summary = summarize(r, *this);

  switch (r.kind) {
    case EventKind::ProjectCreated: {
      if (last_seq) reject(r, "project already created");
      Project p = sakugaflow::from_document<Project>(obj_field(r, "project"));
      VersionNode root = sakugaflow::from_document<VersionNode>(obj_field(r, "root"));
      if (root.parent || root.stage != StageKind::Rough || root.status != NodeStatus::Draft)
        reject(r, "root must be a parentless draft rough node");
      if (root.id != p.id + "-n0" || p.root_node != root.id || p.active_node != root.id ||
          root.project_id != p.id)
        reject(r, "inconsistent root ids");
      VersionTree t;
      t.insert(std::move(root));
      project = std::move(p);
      tree = std::move(t);
      break;
    }
    case EventKind::NodeCreated: {
      VersionNode node = sakugaflow::from_document<VersionNode>(obj_field(r, "node"));
      auto origin = parse_origin(str_field(r, "origin"));
      if (!origin) reject(r, "unknown origin");
      if (node.id != next_node_id()) reject(r, "expected node id " + next_node_id());
      if (node.project_id != project.id) reject(r, "node belongs to another project");
      if (node.status != NodeStatus::Draft || node.image) reject(r, "new nodes start as drafts");
      if (!node.parent) reject(r, "second root");
      const auto* parent = tree.find(*node.parent);
      if (!parent) reject(r, "unknown parent " + *node.parent);
      if (parent->status != NodeStatus::Completed) reject(r, "parent not completed");
      if (node.mask.has_value() != (*origin == NodeOrigin::Inpaint))
        reject(r, "mask present iff the node is an inpaint");
      NodeId id = node.id;
      tree.insert(std::move(node));
      project.active_node = id;
      break;
    }
    case EventKind::ControlAttached: {
      auto& node = tree.at(str_field(r, "node_id"));
      if (node.status != NodeStatus::Draft) reject(r, "control images attach to drafts only");
      auto digest = Digest::from_hex(str_field(r, "control_image"));
      if (!digest) reject(r, "bad digest");
      auto params = sakugaflow::from_document<GenerationParams>(obj_field(r, "params"));
      node.control_image = *digest;
      node.params = std::move(params);
      break;
    }
    case EventKind::JobQueued: {
      Job job = sakugaflow::from_document<Job>(obj_field(r, "job"));
      if (job.id != next_job_id()) reject(r, "expected job id " + next_job_id());
      if (job.state != JobState::Queued || job.finished_at || job.error)
        reject(r, "jobs enter the queue fresh");
      auto& node = tree.at(job.node_id);
      if (node.status != NodeStatus::Draft && node.status != NodeStatus::Failed)
        reject(r, "node " + node.id + " is " + std::string(status_name(node.status)));
      node.status = NodeStatus::Pending;
      jobs.push_back(std::move(job));
      break;
    }
    case EventKind::JobStarted: {
      auto& job = jobs[index_suffix(this->job(str_field(r, "job_id")).id, 'j')];
      if (!job_transition_allowed(job.state, JobState::Running))
        reject(r, "job " + job.id + " cannot start from " + std::string(job_state_name(job.state)));
      job.state = JobState::Running;
      break;
    }
    case EventKind::NodeCompleted:
    case EventKind::NodeFailed: {
      const bool ok = r.kind == EventKind::NodeCompleted;
      auto& job = jobs[index_suffix(this->job(str_field(r, "job_id")).id, 'j')];
      auto node_id = str_field(r, "node_id");
      if (job.node_id != node_id) reject(r, "job/node mismatch");
      const JobState target = ok ? JobState::Done : JobState::Failed;
      if (!job_transition_allowed(job.state, target))
        reject(r, "job " + job.id + " cannot go from " + std::string(job_state_name(job.state)) +
                      " to " + std::string(job_state_name(target)));
      auto& node = tree.at(node_id);
      if (node.status != NodeStatus::Pending) reject(r, "node is not pending");
      std::optional<Digest> image;
      std::string error;
      if (ok) {
        image = Digest::from_hex(str_field(r, "image"));
        if (!image) reject(r, "bad image digest");
      } else {
        error = str_field(r, "error");
      }
      job.state = target;
      job.finished_at = r.at;
      if (ok) {
        node.image = image;
        node.status = NodeStatus::Completed;
      } else {
        job.error = error.empty() ? std::string("unknown error") : error;
        node.status = NodeStatus::Failed;
      }
      break;
    }
    case EventKind::Activated: {
      auto id = str_field(r, "node_id");
      if (!tree.contains(id)) reject(r, "unknown node " + id);
      project.active_node = id;
      break;
    }
    case EventKind::TutorAsked: {
      TutorExchange x = sakugaflow::from_document<TutorExchange>(obj_field(r, "exchange"));
      if (x.id != next_exchange_id()) reject(r, "expected exchange id " + next_exchange_id());
      const auto& node = tree.at(x.node_id);
      if (x.context.stage != node.stage) reject(r, "exchange stage differs from node stage");
      exchanges.push_back(std::move(x));
      break;
    }
    case EventKind::NodeLabeled: {
      auto& node = tree.at(str_field(r, "node_id"));
      auto label = str_field(r, "label");
      node.label = label.empty() ? std::nullopt : std::optional<std::string>(label);
      break;
    }
  }
  actions.push_back(std::move(summary));
  last_seq = r.seq;
}

Document ProjectState::to_document() const {
  Document d = Document::object();
  d["last_seq"] = last_seq ? Document(*last_seq) : Document(nullptr);
  d["project"] = sakugaflow::to_document(project);
  Document nodes = Document::array();
  for (const auto& n : tree.nodes()) nodes.push_back(sakugaflow::to_document(n));
  d["nodes"] = std::move(nodes);
  Document js = Document::array();
  for (const auto& j : jobs) js.push_back(sakugaflow::to_document(j));
  d["jobs"] = std::move(js);
  Document xs = Document::array();
  for (const auto& x : exchanges) xs.push_back(sakugaflow::to_document(x));
  d["exchanges"] = std::move(xs);
  d["actions"] = actions;
  return d;
}

ProjectState ProjectState::from_document(const Document& doc) {
  try {
    ProjectState s;
    const auto& seq = doc.at("last_seq");
    if (!seq.is_null()) s.last_seq = seq.get<std::uint64_t>();
    s.project = sakugaflow::from_document<Project>(doc.at("project"));
    for (const auto& n : doc.at("nodes")) s.tree.insert(sakugaflow::from_document<VersionNode>(n));
    for (const auto& j : doc.at("jobs")) s.jobs.push_back(sakugaflow::from_document<Job>(j));
    for (const auto& x : doc.at("exchanges")) s.exchanges.push_back(sakugaflow::from_document<TutorExchange>(x));
    for (const auto& a : doc.at("actions")) s.actions.push_back(a.get<std::string>());
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed state document: ") + e.what());
  }
}

ProjectState fold(const std::vector<EventRecord>& records) {
  ProjectState s;
  for (const auto& r : records) {
    try {
      s.apply(r);
    } catch (const Error& e) {
      throw CorruptLogError(s.last_seq, e.what());
    }
  }
  return s;
}

ReplayResult replay(const ProjectPaths& paths, bool use_snapshot) {
  ReplayResult out;
  out.records = EventLog::read_file(paths.events());
  if (out.records.empty()) throw CorruptLogError(std::nullopt, "empty log " + paths.events().string());

  std::size_t start = 0;
  if (use_snapshot) {
    if (auto snap = read_snapshot(paths.snapshot()); snap && snap->first < out.records.size()) {
      try {
        auto state = ProjectState::from_document(parse_document(snap->second));
        if (state.last_seq == snap->first) {
          out.state = std::move(state);
          out.snapshot_seq = snap->first;
          start = snap->first + 1;
        }
      } catch (const Error&) {
        // unusable snapshot: fall back to the full log
      }
    }
  }
  for (std::size_t i = start; i < out.records.size(); ++i) {
    try {
      out.state.apply(out.records[i]);
    } catch (const Error& e) {
      throw CorruptLogError(out.state.last_seq, e.what());
    }
  }
  return out;
}

}  // namespace sakugaflow
