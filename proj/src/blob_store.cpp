#include <fcntl.h>
#include <unistd.h>

#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "sakugaflow/errors.hpp"
#include "sakugaflow/store.hpp"
#include "fs_util.hpp"

namespace sakugaflow {

namespace fs = std::filesystem;

namespace detail {

void write_file_atomically(const fs::path& target, std::string_view bytes, bool sync) {
  fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid()) + "." +
         std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw Error(ErrorCode::StorageFailure, "cannot create " + tmp.string());
  std::size_t written = 0;
  while (written < bytes.size()) {
    auto n = ::write(fd, bytes.data() + written, bytes.size() - written);
    if (n < 0) {
      ::close(fd);
      fs::remove(tmp);
      throw Error(ErrorCode::StorageFailure, "write failed for " + tmp.string());
    }
    written += static_cast<std::size_t>(n);
  }
  if (sync && ::fdatasync(fd) != 0) {
    ::close(fd);
    fs::remove(tmp);
    throw Error(ErrorCode::StorageFailure, "fsync failed for " + tmp.string());
  }
  ::close(fd);
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(ErrorCode::StorageFailure, "rename failed for " + target.string() + ": " + ec.message());
  }
}

std::optional<std::string> read_whole(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

}  // namespace detail

using detail::read_whole;
using detail::write_file_atomically;

BlobStore::BlobStore(fs::path root, bool sync) : root_(std::move(root)), sync_(sync) {}

fs::path BlobStore::path_for(const Digest& d) const {
  auto hex = d.hex();
  return *root_ / hex.substr(0, 2) / hex;
}

Digest BlobStore::put(std::string_view bytes) {
  if (bytes.empty()) throw Error(ErrorCode::InvalidArgument, "refusing to store an empty blob");
  Digest d = Digest::of(bytes);
  std::unique_lock lock(mu_);
  if (!root_) {
    memory_.try_emplace(d.hex(), bytes);
    return d;
  }
  auto target = path_for(d);
  if (fs::exists(target)) return d;
  write_file_atomically(target, bytes, sync_);
  return d;
}

std::optional<std::string> BlobStore::get(const Digest& digest) const {
  std::shared_lock lock(mu_);
  if (!root_) {
    auto it = memory_.find(digest.hex());
    if (it == memory_.end()) return std::nullopt;
    return it->second;
  }
  return read_whole(path_for(digest));
}

bool BlobStore::contains(const Digest& digest) const {
  std::shared_lock lock(mu_);
  if (!root_) return memory_.count(digest.hex()) != 0;
  return fs::exists(path_for(digest));
}

std::vector<Digest> BlobStore::list() const {
  std::shared_lock lock(mu_);
  std::set<Digest> out;
  if (!root_) {
    for (const auto& [hex, _] : memory_) out.insert(*Digest::from_hex(hex));
  } else if (fs::exists(*root_)) {
    for (const auto& entry : fs::recursive_directory_iterator(*root_)) {
      if (!entry.is_regular_file()) continue;
      if (auto d = Digest::from_hex(entry.path().filename().string())) out.insert(*d);
    }
  }
  return {out.begin(), out.end()};
}

std::size_t BlobStore::collect_garbage(const std::vector<Digest>& keep) {
  std::set<Digest> live(keep.begin(), keep.end());
  auto all = list();
  std::unique_lock lock(mu_);
  std::size_t removed = 0;
  for (const auto& d : all) {
    if (live.count(d)) continue;
    if (!root_)
      removed += memory_.erase(d.hex());
    else
      removed += fs::remove(path_for(d)) ? 1 : 0;
  }
  return removed;
}

}  // namespace sakugaflow
