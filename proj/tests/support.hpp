#pragma once

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <mutex>
#include <random>
#include <string>

#include "sakugaflow/backend.hpp"
#include "sakugaflow/engine.hpp"
#include "sakugaflow/errors.hpp"

namespace sakugaflow::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("sakugaflow-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

 private:
  std::filesystem::path path_;
};

/// Mock backend whose jobs block until release() is called.
class GatedBackend final : public Backend {
 public:
  const BackendDescriptor& descriptor() const override { return inner_.descriptor(); }

  void release() {
    {
      std::lock_guard lock(mu_);
      open_ = true;
    }
    cv_.notify_all();
  }

  int started() const { return started_.load(); }

 protected:
  std::unique_ptr<GenerationHandle> start(const GenerationRequest& request,
                                          const BlobSource& blobs) override {
    ++started_;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return open_; });
    }
    return inner_.submit(request, blobs);
  }

 private:
  MockBackend inner_;
  std::mutex mu_;
  std::condition_variable cv_;
  bool open_ = false;
  std::atomic<int> started_{0};
};

/// Backend that fails every request.
class FailingBackend final : public Backend {
 public:
  explicit FailingBackend(std::string message) : message_(std::move(message)) {}
  const BackendDescriptor& descriptor() const override { return inner_.descriptor(); }

 protected:
  std::unique_ptr<GenerationHandle> start(const GenerationRequest&, const BlobSource&) override {
    throw Error(ErrorCode::BackendUnavailable, message_);
  }

 private:
  MockBackend inner_;
  std::string message_;
};

inline EngineOptions memory_options(std::uint64_t seed = 7) {
  EngineOptions o;
  o.id_seed = seed;
  o.sync_writes = false;
  return o;
}

/// Generates a node and blocks until its job finishes; returns the node.
inline VersionNode generate_now(Engine& engine, const NodeId& id) {
  engine.wait(engine.generate(id).id);
  return engine.node(id);
}

}  // namespace sakugaflow::testing
