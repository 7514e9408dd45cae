#include "sakugaflow/result_cache.hpp"

namespace sakugaflow {

std::optional<ImageBlob> ResultCache::get(const Digest& key) {
  std::lock_guard lock(mu_);
  auto it = index_.find(key.hex());
  if (it == index_.end()) {
    ++misses_;
    return std::nullopt;
  }
  ++hits_;
  order_.splice(order_.begin(), order_, it->second);
  return it->second->second;
}

void ResultCache::put(const Digest& key, const ImageBlob& blob) {
  if (capacity_ == 0) return;
  std::lock_guard lock(mu_);
  auto hex = key.hex();
  if (auto it = index_.find(hex); it != index_.end()) {
    order_.splice(order_.begin(), order_, it->second);
    return;
  }
  order_.emplace_front(key, blob);
  index_[hex] = order_.begin();
  if (order_.size() > capacity_) {
    index_.erase(order_.back().first.hex());
    order_.pop_back();
  }
}

std::size_t ResultCache::size() const {
  std::lock_guard lock(mu_);
  return order_.size();
}

std::size_t ResultCache::hits() const {
  std::lock_guard lock(mu_);
  return hits_;
}

std::size_t ResultCache::misses() const {
  std::lock_guard lock(mu_);
  return misses_;
}

}  // namespace sakugaflow
