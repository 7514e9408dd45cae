#include <fcntl.h>
#include <unistd.h>
#include <zlib.h>

#include <utility>

#include "fs_util.hpp"
#include "sakugaflow/errors.hpp"
#include "sakugaflow/store.hpp"

namespace sakugaflow {

namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kMaxRecordBytes = 64u << 20;

void put_be32(std::string& out, std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<char>((v >> shift) & 0xff));
}

void put_be64(std::string& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) out.push_back(static_cast<char>((v >> shift) & 0xff));
}

std::uint64_t get_be(std::string_view data, std::size_t pos, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v = v << 8 | static_cast<std::uint8_t>(data[pos + i]);
  return v;
}

std::uint32_t crc_of(std::string_view data) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
}

std::string frame(std::string_view payload) {
  std::string out;
  out.reserve(payload.size() + 8);
  put_be32(out, static_cast<std::uint32_t>(payload.size()));
  out.append(payload);
  put_be32(out, crc_of(payload));
  return out;
}

void write_all(int fd, std::string_view bytes, const fs::path& where) {
  std::size_t written = 0;
  while (written < bytes.size()) {
    auto n = ::write(fd, bytes.data() + written, bytes.size() - written);
    if (n < 0) throw Error(ErrorCode::StorageFailure, "write failed for " + where.string());
    written += static_cast<std::size_t>(n);
  }
}

}  // namespace

std::string_view event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::ProjectCreated:
      return "project_created";
    case EventKind::NodeCreated:
      return "node_created";
    case EventKind::ControlAttached:
      return "control_attached";
    case EventKind::JobQueued:
      return "job_queued";
    case EventKind::JobStarted:
      return "job_started";
    case EventKind::NodeCompleted:
      return "node_completed";
    case EventKind::NodeFailed:
      return "node_failed";
    case EventKind::Activated:
      return "activated";
    case EventKind::TutorAsked:
      return "tutor_asked";
    case EventKind::NodeLabeled:
      return "node_labeled";
  }
  return "unknown";
}

std::optional<EventKind> parse_event_kind(std::string_view name) {
  for (auto k : {EventKind::ProjectCreated, EventKind::NodeCreated, EventKind::ControlAttached,
                 EventKind::JobQueued, EventKind::JobStarted, EventKind::NodeCompleted,
                 EventKind::NodeFailed, EventKind::Activated, EventKind::TutorAsked,
                 EventKind::NodeLabeled}) {
    if (event_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

std::string encode_record(const EventRecord& record) {
  Document d = Document::object();
  d["seq"] = record.seq;
  d["kind"] = event_kind_name(record.kind);
  d["at"] = record.at;
  d["payload"] = record.payload;
  return dump_canonical(d);
}

EventRecord decode_record(std::string_view bytes) {
  Document d = parse_document(bytes);
  try {
    EventRecord r;
    r.seq = d.at("seq").get<std::uint64_t>();
    auto kind = parse_event_kind(d.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::InvalidArgument, "unknown event kind");
    r.kind = *kind;
    r.at = d.at("at").get<std::int64_t>();
    r.payload = d.at("payload");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed event record: ") + e.what());
  }
}

std::vector<EventRecord> EventLog::read_file(const fs::path& file) {
  auto data = detail::read_whole(file);
  if (!data) throw CorruptLogError(std::nullopt, "cannot read " + file.string());
  std::string_view view(*data);
  if (view.substr(0, kLogMagic.size()) != kLogMagic)
    throw CorruptLogError(std::nullopt, "bad magic header in " + file.string());

  std::vector<EventRecord> out;
  std::size_t pos = kLogMagic.size();
  while (pos < view.size()) {
    const std::uint64_t seq = out.size();
    const std::optional<std::uint64_t> last =
        out.empty() ? std::nullopt : std::optional<std::uint64_t>(seq - 1);
    if (view.size() - pos < 4)
      throw CorruptLogError(last, "truncated length prefix for record " + std::to_string(seq));
    const auto len = static_cast<std::uint32_t>(get_be(view, pos, 4));
    if (len > kMaxRecordBytes)
      throw CorruptLogError(last, "implausible length for record " + std::to_string(seq));
    if (view.size() - pos - 4 < std::size_t{len} + 4)
      throw CorruptLogError(last, "truncated record " + std::to_string(seq));
    auto payload = view.substr(pos + 4, len);
    auto crc = static_cast<std::uint32_t>(get_be(view, pos + 4 + len, 4));
    if (crc != crc_of(payload))
      throw CorruptLogError(last, "checksum mismatch in record " + std::to_string(seq));
    EventRecord rec;
    try {
      rec = decode_record(payload);
    } catch (const Error& e) {
      throw CorruptLogError(last, "undecodable record " + std::to_string(seq) + ": " + e.what());
    }
    if (rec.seq != seq)
      throw CorruptLogError(last, "record " + std::to_string(seq) + " carries seq " +
                                      std::to_string(rec.seq));
    out.push_back(std::move(rec));
    pos += 4 + std::size_t{len} + 4;
  }
  return out;
}

EventLog EventLog::open(const fs::path& file, bool sync) {
  EventLog log;
  log.file_ = file;
  log.sync_ = sync;
  if (fs::exists(file)) {
    log.records_ = read_file(file);
    log.fd_ = ::open(file.c_str(), O_WRONLY | O_APPEND | O_CLOEXEC);
    if (log.fd_ < 0) throw Error(ErrorCode::StorageFailure, "cannot open " + file.string());
    return log;
  }
  fs::create_directories(file.parent_path());
  log.fd_ = ::open(file.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_EXCL | O_CLOEXEC, 0644);
  if (log.fd_ < 0) throw Error(ErrorCode::StorageFailure, "cannot create " + file.string());
  write_all(log.fd_, kLogMagic, file);
  if (sync && ::fdatasync(log.fd_) != 0)
    throw Error(ErrorCode::StorageFailure, "fsync failed for " + file.string());
  return log;
}

EventLog::EventLog(EventLog&& other) noexcept
    : file_(std::move(other.file_)),
      fd_(std::exchange(other.fd_, -1)),
      sync_(other.sync_),
      records_(std::move(other.records_)) {}

EventLog& EventLog::operator=(EventLog&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    file_ = std::move(other.file_);
    fd_ = std::exchange(other.fd_, -1);
    sync_ = other.sync_;
    records_ = std::move(other.records_);
  }
  return *this;
}

EventLog::~EventLog() {
  if (fd_ >= 0) ::close(fd_);
}

std::uint64_t EventLog::append(EventRecord record) {
  std::unique_lock lock(mu_);
  record.seq = records_.size();
  if (fd_ >= 0) {
    write_all(fd_, frame(encode_record(record)), *file_);
    if (sync_ && ::fdatasync(fd_) != 0)
      throw Error(ErrorCode::StorageFailure, "fsync failed for " + file_->string());
  } else if (file_) {
    throw Error(ErrorCode::StorageFailure, "log " + file_->string() + " is not open");
  }
  records_.push_back(std::move(record));
  return records_.back().seq;
}

std::uint64_t EventLog::size() const {
  std::shared_lock lock(mu_);
  return records_.size();
}

std::vector<EventRecord> EventLog::read_from(std::uint64_t from) const {
  std::shared_lock lock(mu_);
  if (from >= records_.size()) return {};
  return {records_.begin() + static_cast<std::ptrdiff_t>(from), records_.end()};
}

EventRecord EventLog::at(std::uint64_t seq) const {
  std::shared_lock lock(mu_);
  if (seq >= records_.size()) throw Error(ErrorCode::NotFound, "no event " + std::to_string(seq));
  return records_[seq];
}

void write_snapshot(const fs::path& file, std::uint64_t seq, const std::string& payload, bool sync) {
  std::string out(kSnapshotMagic);
  put_be64(out, seq);
  out += frame(payload);
  detail::write_file_atomically(file, out, sync);
}

std::optional<std::pair<std::uint64_t, std::string>> read_snapshot(const fs::path& file) {
  auto data = detail::read_whole(file);
  if (!data) return std::nullopt;
  std::string_view view(*data);
  const std::size_t header = kSnapshotMagic.size() + 8;
  if (view.size() < header + 8 || view.substr(0, kSnapshotMagic.size()) != kSnapshotMagic)
    return std::nullopt;
  const std::uint64_t seq = get_be(view, kSnapshotMagic.size(), 8);
  const auto len = static_cast<std::uint32_t>(get_be(view, header, 4));
  if (view.size() != header + 4 + std::size_t{len} + 4) return std::nullopt;
  auto payload = view.substr(header + 4, len);
  if (static_cast<std::uint32_t>(get_be(view, header + 4 + len, 4)) != crc_of(payload))
    return std::nullopt;
  return std::make_pair(seq, std::string(payload));
}

}  // namespace sakugaflow
