#include <httplib.h>

#include <thread>

#include "sakugaflow/backend.hpp"
#include "sakugaflow/errors.hpp"

namespace sakugaflow {

namespace {

using Clock = std::chrono::steady_clock;

struct Endpoint {
  std::string scheme_host_port;
  std::string prefix;  // no trailing slash
};

Endpoint split_endpoint(const std::string& url) {
  auto scheme_end = url.find("://");
  auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  Endpoint e;
  e.scheme_host_port = url.substr(0, path_start);
  if (path_start != std::string::npos) e.prefix = url.substr(path_start);
  while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
  return e;
}

std::unique_ptr<httplib::Client> make_client(const Endpoint& e) {
  auto client = std::make_unique<httplib::Client>(e.scheme_host_port);
  client->set_connection_timeout(std::chrono::seconds(5));
  client->set_read_timeout(std::chrono::seconds(30));
  return client;
}

std::string server_message(const httplib::Result& res) {
  std::string msg = res->body;
  try {
    auto doc = nlohmann::json::parse(res->body);
    if (doc.is_object() && doc.contains("error") && doc["error"].is_string())
      msg = doc["error"].get<std::string>();
    else if (doc.is_object() && doc.contains("message") && doc["message"].is_string())
      msg = doc["message"].get<std::string>();
  } catch (const nlohmann::json::exception&) {
  }
  return "server returned " + std::to_string(res->status) + ": " + msg;
}

class RemoteHandle final : public GenerationHandle {
 public:
  RemoteHandle(Endpoint endpoint, std::string job_id, Canvas canvas,
               const RemoteBackendOptions& options, Clock::time_point started)
      : endpoint_(std::move(endpoint)),
        client_(make_client(endpoint_)),
        job_id_(std::move(job_id)),
        canvas_(canvas),
        poll_interval_(options.poll_interval),
        deadline_(started + options.timeout) {}

  explicit RemoteHandle(std::string error) : early_error_(std::move(error)) {}

  GenerationResult wait() override {
    if (early_error_) return GenerationResult::failure(*early_error_);
    const std::string path = endpoint_.prefix + "/v1/jobs/" + job_id_;
    while (true) {
      auto res = client_->Get(path);
      if (!res) return GenerationResult::failure("transport error: " + httplib::to_string(res.error()));
      if (res->status != 200) return GenerationResult::failure(server_message(res));

      nlohmann::json doc;
      try {
        doc = nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception&) {
        return GenerationResult::failure("malformed response: body is not JSON");
      }
      if (!doc.is_object() || !doc.contains("state") || !doc["state"].is_string())
        return GenerationResult::failure("malformed response: missing state");
      const auto state = doc["state"].get<std::string>();
      if (state == "done") return decode_result(doc);
      if (state == "failed") {
        std::string err = doc.contains("error") && doc["error"].is_string()
                              ? doc["error"].get<std::string>()
                              : "server reported failure";
        return GenerationResult::failure(err);
      }
      if (state != "queued" && state != "running")
        return GenerationResult::failure("malformed response: unknown state '" + state + "'");

      if (Clock::now() + poll_interval_ >= deadline_) {
        cancel();
        return GenerationResult::failure("timeout");
      }
      std::this_thread::sleep_for(poll_interval_);
    }
  }

  void cancel() override {
    if (client_ && !job_id_.empty()) client_->Delete(endpoint_.prefix + "/v1/jobs/" + job_id_);
  }

 private:
  GenerationResult decode_result(const nlohmann::json& doc) {
    if (!doc.contains("image_b64") || !doc["image_b64"].is_string())
      return GenerationResult::failure("malformed response: done without image_b64");
    auto bytes = base64_decode(doc["image_b64"].get<std::string>());
    if (!bytes) return GenerationResult::failure("malformed response: image_b64 is not base64");
    try {
      Raster r = decode_png(*bytes);
      if (r.size() != canvas_)
        return GenerationResult::failure("malformed response: image size does not match canvas");
      ImageBlob blob;
      blob.digest = Digest::of(*bytes);
      blob.bytes = std::move(*bytes);
      blob.width = r.width;
      blob.height = r.height;
      return GenerationResult::success(std::move(blob));
    } catch (const Error& e) {
      return GenerationResult::failure(std::string("malformed response: ") + e.what());
    }
  }

  Endpoint endpoint_;
  std::unique_ptr<httplib::Client> client_;
  std::string job_id_;
  Canvas canvas_;
  std::chrono::milliseconds poll_interval_{100};
  Clock::time_point deadline_;
  std::optional<std::string> early_error_;
};

}  // namespace

nlohmann::ordered_json remote_wire_body(const GenerationRequest& request, const BlobSource& blobs) {
  auto blob_b64 = [&](const Digest& d, const char* what) {
    auto bytes = blobs.read_blob(d);
    if (!bytes) throw Error(ErrorCode::InvalidArgument, std::string(what) + " blob " + d.hex() + " not found");
    return base64_encode(*bytes);
  };
  nlohmann::ordered_json body;
  body["stage"] = stage_wire_name(request.stage);
  body["prompt"] = request.prompt;
  if (request.negative_prompt) body["negative_prompt"] = *request.negative_prompt;
  body["seed"] = request.seed;
  body["strength"] = request.params.strength;
  if (request.control_image) body["control_strength"] = request.params.control_strength;
  body["width"] = request.canvas.width;
  body["height"] = request.canvas.height;
  if (request.base_image) body["base_image_b64"] = blob_b64(*request.base_image, "base image");
  if (request.mask) body["mask_b64"] = blob_b64(*request.mask, "mask");
  if (request.control_image)
    body["control_image_b64"] = blob_b64(*request.control_image, "control image");
  return body;
}

RemoteDiffusionBackend::RemoteDiffusionBackend(RemoteBackendOptions options)
    : options_(std::move(options)) {
  descriptor_.name = "remote";
  descriptor_.kind = BackendKind::RemoteDiffusion;
  if (!options_.endpoint.empty()) descriptor_.endpoint = options_.endpoint;
  descriptor_.capabilities = options_.capabilities;
  if (auto v = descriptor_.violation(); !v.empty()) throw Error(ErrorCode::InvalidArgument, v);
}

std::unique_ptr<GenerationHandle> RemoteDiffusionBackend::start(const GenerationRequest& request,
                                                                const BlobSource& blobs) {
  const auto started = Clock::now();
  Endpoint endpoint = split_endpoint(options_.endpoint);
  std::string body;
  try {
    body = remote_wire_body(request, blobs).dump();
  } catch (const Error& e) {
    return std::make_unique<RemoteHandle>(e.what());
  }
  auto client = make_client(endpoint);
  auto res = client->Post(endpoint.prefix + "/v1/generate", body, "application/json");
  if (!res)
    return std::make_unique<RemoteHandle>("transport error: " + httplib::to_string(res.error()));
  if (res->status != 202 && res->status != 200)
    return std::make_unique<RemoteHandle>(server_message(res));
  std::string job_id;
  try {
    auto doc = nlohmann::json::parse(res->body);
    job_id = doc.at("job_id").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    return std::make_unique<RemoteHandle>("malformed response: missing job_id");
  }
  return std::make_unique<RemoteHandle>(std::move(endpoint), std::move(job_id), request.canvas,
                                        options_, started);
}

}  // namespace sakugaflow
