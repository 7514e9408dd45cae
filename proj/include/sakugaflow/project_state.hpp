#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sakugaflow/store.hpp"
#include "sakugaflow/version_tree.hpp"

namespace sakugaflow {

/// How a node came to exist; recorded in node_created payloads.
enum class NodeOrigin { Advance, Regenerate, Inpaint };

std::string_view origin_name(NodeOrigin o);
std::optional<NodeOrigin> parse_origin(std::string_view name);

/// Everything known about one project, obtained by folding its event log.
/// The live engine and replay share apply(), so any state the engine holds
/// is reconstructible from the log alone.
struct ProjectState {
  Project project;
  VersionTree tree;
  std::vector<Job> jobs;                 // jobs[k].id == project.id + "-j<k>"
  std::vector<TutorExchange> exchanges;  // exchanges[k].id == project.id + "-x<k>"
  std::vector<std::string> actions;      // one summary per applied event, oldest first
  std::optional<std::uint64_t> last_seq;

  /// Applies the next record. Throws Error when the record is out of order
  /// or would break an invariant (forbidden job/node transition, stage skip,
  /// unknown ids). State is unchanged when it throws.
  void apply(const EventRecord& record);

  const Job& job(const JobId& id) const;
  NodeId next_node_id() const;
  JobId next_job_id() const;
  ExchangeId next_exchange_id() const;

  /// Canonical full-state document (also the snapshot payload).
  Document to_document() const;
  static ProjectState from_document(const Document& doc);

  bool operator==(const ProjectState&) const = default;
};

/// One-line summary of an event as the tutor sees it, e.g. "node_created: advance to line".
std::string summarize(const EventRecord& record, const ProjectState& before);

struct ReplayResult {
  ProjectState state;
  std::vector<EventRecord> records;
  std::optional<std::uint64_t> snapshot_seq;  // set when a snapshot was used
};

/// Rebuilds a project from its directory. With use_snapshot, folding starts
/// from the latest valid snapshot and applies only the tail. Throws
/// CorruptLogError naming the last valid seq.
ReplayResult replay(const ProjectPaths& paths, bool use_snapshot = true);

/// Folds records from an empty state.
ProjectState fold(const std::vector<EventRecord>& records);

}  // namespace sakugaflow
