#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "sakugaflow/raster.hpp"
#include "sakugaflow/types.hpp"

namespace sakugaflow {

enum class BackendKind { Mock, RemoteDiffusion };

enum class Capability { ControlImage, Inpaint, Img2Img };

std::string_view capability_name(Capability c);

struct BackendDescriptor {
  std::string name;
  BackendKind kind = BackendKind::Mock;
  std::optional<std::string> endpoint;
  std::set<Capability> capabilities;

  /// Empty when the descriptor is consistent.
  std::string violation() const;
};

/// Read access to stored blobs by digest.
class BlobSource {
 public:
  virtual ~BlobSource() = default;
  virtual std::optional<std::string> read_blob(const Digest& digest) const = 0;
};

struct GenerationResult {
  std::optional<ImageBlob> image;
  std::string error;

  bool ok() const { return image.has_value(); }
  static GenerationResult success(ImageBlob blob) { return {std::move(blob), {}}; }
  static GenerationResult failure(std::string message) { return {std::nullopt, std::move(message)}; }
};

/// One in-flight generation; owned by a single consumer.
class GenerationHandle {
 public:
  virtual ~GenerationHandle() = default;
  /// Blocks until the generation reaches a terminal state.
  virtual GenerationResult wait() = 0;
  virtual void cancel() {}
};

/// Throws Error(CapabilityMissing) when the request needs something the
/// backend does not declare, Error(InvalidArgument) when it breaks the
/// request invariants.
void check_request_for(const BackendDescriptor& backend, const GenerationRequest& request);

class Backend {
 public:
  virtual ~Backend() = default;
  virtual const BackendDescriptor& descriptor() const = 0;

  /// Validates before doing any work, then starts the generation. The request
  /// is never modified. Transport problems surface from the handle's wait().
  std::unique_ptr<GenerationHandle> submit(const GenerationRequest& request,
                                           const BlobSource& blobs);

 protected:
  virtual std::unique_ptr<GenerationHandle> start(const GenerationRequest& request,
                                                  const BlobSource& blobs) = 0;
};

// ---------------------------------------------------------------------------
// Deterministic mock
// ---------------------------------------------------------------------------

/// The normative mock algorithm on already-decoded inputs:
///   1. canonical request bytes, 2. SHA-256 of them,
///   3. SplitMix64 seeded with the first 8 digest bytes (big-endian),
///   4. RGB from successive generator bytes, alpha 255,
///   5. with base and mask: base pixels wherever the mask bit is 0,
///   6. with base and no mask: base*(1-strength) + noise*strength, rounded half-up.
Raster mock_generate_raster(const GenerationRequest& request, const Raster* base,
                            const MaskRegion* mask);

/// Resolves the base and mask blobs and encodes the mock raster.
/// Throws Error(InvalidArgument) for a missing or mis-sized input blob.
ImageBlob mock_generate(const GenerationRequest& request, const BlobSource& blobs);

class MockBackend final : public Backend {
 public:
  MockBackend();
  const BackendDescriptor& descriptor() const override { return descriptor_; }

 protected:
  std::unique_ptr<GenerationHandle> start(const GenerationRequest& request,
                                          const BlobSource& blobs) override;

 private:
  BackendDescriptor descriptor_;
};

// ---------------------------------------------------------------------------
// Remote diffusion server client
// ---------------------------------------------------------------------------

struct RemoteBackendOptions {
  std::string endpoint;  // e.g. "http://127.0.0.1:7860"
  std::chrono::milliseconds timeout{120'000};
  std::chrono::milliseconds poll_interval{100};
  std::set<Capability> capabilities{Capability::ControlImage, Capability::Inpaint,
                                    Capability::Img2Img};
};

/// POST body for {endpoint}/v1/generate. Optional fields are omitted when absent.
nlohmann::ordered_json remote_wire_body(const GenerationRequest& request, const BlobSource& blobs);

class RemoteDiffusionBackend final : public Backend {
 public:
  explicit RemoteDiffusionBackend(RemoteBackendOptions options);
  const BackendDescriptor& descriptor() const override { return descriptor_; }

 protected:
  std::unique_ptr<GenerationHandle> start(const GenerationRequest& request,
                                          const BlobSource& blobs) override;

 private:
  RemoteBackendOptions options_;
  BackendDescriptor descriptor_;
};

}  // namespace sakugaflow
