#include "sakugaflow/backend.hpp"
#include "sakugaflow/codec.hpp"
#include "sakugaflow/errors.hpp"
#include "sakugaflow/kernels.hpp"

namespace sakugaflow {

Raster mock_generate_raster(const GenerationRequest& request, const Raster* base,
                            const MaskRegion* mask) {
  const Digest digest = request_digest(request);
  Raster out(request.canvas.width, request.canvas.height);
  kernels::fill_noise(digest.leading_u64(), out.rgba);
  if (base && mask) {
    kernels::copy_unmasked(out.rgba, base->rgba, mask->to_bytes());
  } else if (base) {
    kernels::blend(out.rgba, base->rgba, request.params.strength);
  }
  return out;
}

namespace {

std::string load(const BlobSource& blobs, const Digest& d, const char* what) {
  auto bytes = blobs.read_blob(d);
  if (!bytes) throw Error(ErrorCode::InvalidArgument, std::string(what) + " blob " + d.hex() + " not found");
  return *bytes;
}

class ReadyHandle final : public GenerationHandle {
 public:
  explicit ReadyHandle(GenerationResult result) : result_(std::move(result)) {}
  GenerationResult wait() override { return result_; }

 private:
  GenerationResult result_;
};

}  // namespace

ImageBlob mock_generate(const GenerationRequest& request, const BlobSource& blobs) {
  std::optional<Raster> base;
  std::optional<MaskRegion> mask;
  if (request.base_image) {
    base = decode_png(load(blobs, *request.base_image, "base image"));
    if (base->size() != request.canvas)
      throw Error(ErrorCode::DimensionMismatch, "base image does not match the canvas");
  }
  if (request.mask) {
    mask = MaskRegion::decode_png(load(blobs, *request.mask, "mask"));
    if (mask->size() != request.canvas)
      throw Error(ErrorCode::DimensionMismatch, "mask does not match the canvas");
  }
  return ImageBlob::from_raster(
      mock_generate_raster(request, base ? &*base : nullptr, mask ? &*mask : nullptr));
}

MockBackend::MockBackend() {
  descriptor_.name = "mock";
  descriptor_.kind = BackendKind::Mock;
  descriptor_.capabilities = {Capability::ControlImage, Capability::Inpaint, Capability::Img2Img};
}

std::unique_ptr<GenerationHandle> MockBackend::start(const GenerationRequest& request,
                                                     const BlobSource& blobs) {
  try {
    return std::make_unique<ReadyHandle>(GenerationResult::success(mock_generate(request, blobs)));
  } catch (const std::exception& e) {
    return std::make_unique<ReadyHandle>(GenerationResult::failure(e.what()));
  }
}

}  // namespace sakugaflow
