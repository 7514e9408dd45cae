#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <shared_mutex>
#include <string>
#include <thread>
#include <vector>

#include "sakugaflow/backend.hpp"
#include "sakugaflow/project_state.hpp"
#include "sakugaflow/result_cache.hpp"

namespace sakugaflow {

struct EngineOptions {
  /// Root holding one directory per project. Empty keeps everything in memory.
  std::optional<std::filesystem::path> data_dir;
  /// fdatasync every log append and blob write.
  bool sync_writes = true;
  /// Worker threads; at most one job per project runs at a time.
  unsigned parallel_jobs = 2;
  bool cache_enabled = true;
  std::size_t cache_capacity = 256;
  bool snapshots = true;
  /// Seeds the id and seed generator; set for reproducible sessions.
  std::optional<std::uint64_t> id_seed;
  /// Defaults to the system clock in milliseconds.
  std::function<Timestamp()> clock;
  /// Called after each event is durable and applied, with the writer held.
  std::function<void(const EventRecord&, const ProjectState&)> on_event;
};

struct RegenerateOverrides {
  /// Subject text; the stage template is applied to it.
  std::optional<std::string> prompt;
  std::optional<std::uint64_t> seed;
  std::optional<GenerationParams> params;
  std::optional<std::string> negative_prompt;
};

struct TokenDiff {
  std::vector<std::string> removed;  // in a, not in b
  std::vector<std::string> added;    // in b, not in a
};

/// LCS diff over whitespace/comma separated tokens.
TokenDiff diff_tokens(std::string_view a, std::string_view b);

struct ComparisonReport {
  NodeId node_a;
  NodeId node_b;
  Digest image_a;
  Digest image_b;
  std::string prompt_a;
  std::string prompt_b;
  TokenDiff prompt_diff;
  /// {"field": [value_a, value_b]} for each differing generation parameter (seed included).
  Document params_diff;
  NodeId lowest_common_ancestor;
  std::size_t differing_pixels = 0;
  std::size_t total_pixels = 0;
};

Document to_document(const ComparisonReport& report);

/// Applies the stage template to the parent's subject plus an optional
/// comma-separated addition: prefix(child_stage) + subject[, addition].
std::string merge_prompt(std::string_view parent_prompt, StageKind parent_stage,
                         StageKind child_stage, std::string_view addition);

/// The image a node's generation starts from: the parent's image for
/// advances and inpaints; for same-stage revisions the parent's own base
/// (none at the rough stage).
std::optional<Digest> base_image_for(const ProjectState& state, const VersionNode& node);

GenerationRequest build_request(const ProjectState& state, const VersionNode& node);

/// Drives projects through the stage workflow. Every mutation is an event
/// appended to the project's log and folded into its state; per-project
/// writes are serialized, reads see immutable snapshots. Generation jobs
/// run on a worker pool and complete through the same write path.
class Engine {
 public:
  Engine(EngineOptions options, std::shared_ptr<Backend> backend);
  ~Engine();

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  Project create_project(std::string_view theme, Canvas canvas = {},
                         std::optional<std::uint64_t> seed = std::nullopt);
  Job generate(const NodeId& node_id);
  VersionNode advance_stage(const NodeId& node_id, std::string_view prompt_delta,
                            std::optional<std::uint64_t> seed = std::nullopt);
  VersionNode regenerate(const NodeId& node_id, const RegenerateOverrides& overrides = {});
  VersionNode inpaint(const NodeId& node_id, const MaskRegion& mask, std::string_view region_prompt);
  VersionNode attach_control_image(const NodeId& node_id, std::string_view image_bytes);
  Project activate(const ProjectId& project_id, const NodeId& node_id);
  VersionNode set_label(const NodeId& node_id, std::string_view label);
  ComparisonReport compare(const NodeId& a, const NodeId& b) const;

  /// Persists a tutor exchange; id and created_at are assigned here.
  TutorExchange record_exchange(TutorExchange exchange);

  std::vector<ProjectId> projects() const;
  bool has_project(const ProjectId& id) const;
  std::shared_ptr<const ProjectState> state(const ProjectId& id) const;
  std::shared_ptr<const ProjectState> state_of(const NodeId& node_or_job_id) const;
  VersionNode node(const NodeId& id) const;
  Job job(const JobId& id) const;

  std::optional<std::string> blob(const Digest& digest) const;
  std::optional<std::string> blob(const ProjectId& project, const Digest& digest) const;

  std::vector<EventRecord> events(const ProjectId& id, std::uint64_t from = 0) const;
  /// Returns records with seq >= from, waiting up to `timeout` for the first one.
  std::vector<EventRecord> wait_events(const ProjectId& id, std::uint64_t from,
                                       std::chrono::milliseconds timeout) const;

  /// Blocks until the job is Done or Failed.
  Job wait(const JobId& id) const;
  /// Blocks until no job is queued or running.
  void wait_idle() const;

  const BackendDescriptor& backend() const { return backend_->descriptor(); }
  const ResultCache* cache() const { return cache_.get(); }
  /// Projects that could not be loaded from data_dir, with the reason.
  const std::map<std::string, std::string>& load_errors() const { return load_errors_; }

  /// Wakes event waiters and stops accepting work; called by the destructor.
  void shutdown();
  bool stopping() const { return stopping_.load(); }

 private:
  struct Slot;
  struct Ticket {
    ProjectId project;
    JobId job;
  };

  std::shared_ptr<Slot> slot(const ProjectId& id) const;
  std::shared_ptr<Slot> slot_for(const std::string& node_or_job_id) const;
  std::shared_ptr<const ProjectState> view(const Slot& s) const;
  /// Applies and appends one event; caller holds the slot's writer lock.
  EventRecord commit(Slot& s, EventKind kind, Document payload, Timestamp at);
  Timestamp now() const;
  std::uint64_t random_u64();
  void load_existing();
  void enqueue(Ticket t);
  void worker_loop();
  void run_job(const Ticket& t);

  EngineOptions options_;
  std::shared_ptr<Backend> backend_;
  std::unique_ptr<ResultCache> cache_;

  mutable std::shared_mutex slots_mu_;
  std::map<ProjectId, std::shared_ptr<Slot>> slots_;
  std::map<std::string, std::string> load_errors_;

  std::mutex rng_mu_;
  std::mt19937_64 rng_;

  // Job dispatch and change notification share one mutex.
  mutable std::mutex queue_mu_;
  mutable std::condition_variable queue_cv_;
  mutable std::condition_variable changed_cv_;
  std::deque<Ticket> queue_;
  std::set<ProjectId> busy_;
  std::size_t outstanding_ = 0;
  std::atomic<bool> stopping_{false};
  std::vector<std::thread> workers_;
};

}  // namespace sakugaflow
