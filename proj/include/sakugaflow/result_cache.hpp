#pragma once

#include <cstddef>
#include <list>
#include <mutex>
#include <optional>
#include <unordered_map>

#include "sakugaflow/raster.hpp"

namespace sakugaflow {

/// Bounded LRU of generated images keyed by canonical-request digest.
/// Only successful generations are inserted. Thread-safe.
class ResultCache {
 public:
  explicit ResultCache(std::size_t capacity = 256) : capacity_(capacity) {}

  std::optional<ImageBlob> get(const Digest& key);
  void put(const Digest& key, const ImageBlob& blob);

  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }
  std::size_t hits() const;
  std::size_t misses() const;

 private:
  using Entry = std::pair<Digest, ImageBlob>;

  std::size_t capacity_;
  mutable std::mutex mu_;
  std::list<Entry> order_;  // most recent first
  std::unordered_map<std::string, std::list<Entry>::iterator> index_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

}  // namespace sakugaflow
