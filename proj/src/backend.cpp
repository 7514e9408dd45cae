#include "sakugaflow/backend.hpp"

#include "sakugaflow/errors.hpp"

namespace sakugaflow {

std::string_view capability_name(Capability c) {
  switch (c) {
    case Capability::ControlImage:
      return "control_image";
    case Capability::Inpaint:
      return "inpaint";
    case Capability::Img2Img:
      return "img2img";
  }
  return "unknown";
}

std::string BackendDescriptor::violation() const {
  if (kind == BackendKind::RemoteDiffusion && (!endpoint || endpoint->empty()))
    return "remote backend requires an endpoint";
  if (kind == BackendKind::Mock) {
    for (auto c : {Capability::ControlImage, Capability::Inpaint, Capability::Img2Img})
      if (!capabilities.count(c)) return "mock backend must declare every capability";
  }
  return {};
}

void check_request_for(const BackendDescriptor& backend, const GenerationRequest& request) {
  if (auto v = request_violation(request); !v.empty())
    throw Error(ErrorCode::InvalidArgument, "invalid generation request: " + v);
  auto require = [&](Capability c) {
    if (!backend.capabilities.count(c))
      throw Error(ErrorCode::CapabilityMissing,
                  "backend '" + backend.name + "' lacks capability " + std::string(capability_name(c)));
  };
  if (request.mask) require(Capability::Inpaint);
  if (request.control_image) require(Capability::ControlImage);
  if (request.base_image && !request.mask) require(Capability::Img2Img);
}

std::unique_ptr<GenerationHandle> Backend::submit(const GenerationRequest& request,
                                                  const BlobSource& blobs) {
  check_request_for(descriptor(), request);
  return start(request, blobs);
}

}  // namespace sakugaflow
