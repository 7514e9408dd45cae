#pragma once

// Durable persistence for one project directory:
//
//   <project-dir>/events.log      SKGF1 header, then length-prefixed canonical records
//   <project-dir>/snapshot.bin    SKGS1 header, latest folded state (optional)
//   <project-dir>/blobs/ab/<hex>  content-addressed images, masks, control images
//
// Byte layout is documented in docs/storage-format.md. A store constructed
// without a directory keeps everything in memory (used by tests and fuzzing).

#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "sakugaflow/backend.hpp"
#include "sakugaflow/codec.hpp"

namespace sakugaflow {

inline constexpr std::string_view kLogMagic = "SKGF1\n";
inline constexpr std::string_view kSnapshotMagic = "SKGS1\n";
inline constexpr std::uint64_t kSnapshotInterval = 256;

class BlobStore final : public BlobSource {
 public:
  /// In-memory store.
  BlobStore() = default;
  /// Blobs under `root`/ab/<hex>; the directory is created on demand.
  explicit BlobStore(std::filesystem::path root, bool sync = true);

  /// Idempotent; identical bytes are written once. Throws Error(InvalidArgument)
  /// for empty input, Error(StorageFailure) on IO errors.
  Digest put(std::string_view bytes);
  std::optional<std::string> get(const Digest& digest) const;
  bool contains(const Digest& digest) const;
  std::vector<Digest> list() const;

  /// Deletes every blob not in `keep`; returns how many were removed.
  std::size_t collect_garbage(const std::vector<Digest>& keep);

  std::optional<std::string> read_blob(const Digest& digest) const override { return get(digest); }

 private:
  std::filesystem::path path_for(const Digest& d) const;

  std::optional<std::filesystem::path> root_;
  bool sync_ = true;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, std::string> memory_;
};

enum class EventKind {
  ProjectCreated,
  NodeCreated,
  ControlAttached,
  JobQueued,
  JobStarted,
  NodeCompleted,
  NodeFailed,
  Activated,
  TutorAsked,
  NodeLabeled,
};

std::string_view event_kind_name(EventKind k);
std::optional<EventKind> parse_event_kind(std::string_view name);

struct EventRecord {
  std::uint64_t seq = 0;
  EventKind kind = EventKind::ProjectCreated;
  Timestamp at = 0;
  Document payload;

  bool operator==(const EventRecord& o) const {
    return seq == o.seq && kind == o.kind && at == o.at && payload == o.payload;
  }
};

/// {"seq":..,"kind":..,"at":..,"payload":{..}} in canonical form.
std::string encode_record(const EventRecord& record);
/// Throws Error(InvalidArgument).
EventRecord decode_record(std::string_view bytes);

/// Append-only, dense-seq log for one project. Appends are serialized
/// internally; reads of sealed records run concurrently with appends.
class EventLog {
 public:
  /// In-memory log.
  EventLog() = default;

  /// Opens (or creates) a log file. An existing file is read fully and
  /// validated; throws CorruptLogError naming the last valid seq.
  static EventLog open(const std::filesystem::path& file, bool sync = true);

  /// Reads a log file without opening it for writing.
  static std::vector<EventRecord> read_file(const std::filesystem::path& file);

  EventLog(EventLog&&) noexcept;
  EventLog& operator=(EventLog&&) noexcept;
  ~EventLog();

  /// Assigns the next seq (ignoring record.seq), writes and flushes it.
  /// Returns the assigned seq.
  std::uint64_t append(EventRecord record);

  std::uint64_t size() const;
  /// Records with seq >= from.
  std::vector<EventRecord> read_from(std::uint64_t from) const;
  EventRecord at(std::uint64_t seq) const;

 private:
  std::optional<std::filesystem::path> file_;
  int fd_ = -1;
  bool sync_ = true;
  mutable std::shared_mutex mu_;
  std::vector<EventRecord> records_;
};

/// Snapshot file IO. The payload is opaque here (the folded project state).
void write_snapshot(const std::filesystem::path& file, std::uint64_t seq, const std::string& payload,
                    bool sync = true);
/// Absent if the file is missing or fails validation.
std::optional<std::pair<std::uint64_t, std::string>> read_snapshot(const std::filesystem::path& file);

/// Where one project's files live.
struct ProjectPaths {
  std::filesystem::path dir;

  std::filesystem::path events() const { return dir / "events.log"; }
  std::filesystem::path snapshot() const { return dir / "snapshot.bin"; }
  std::filesystem::path blobs() const { return dir / "blobs"; }
};

}  // namespace sakugaflow
