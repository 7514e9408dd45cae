#include "sakugaflow/api_server.hpp"

#include <httplib.h>

#include <thread>

#include "sakugaflow/errors.hpp"
#include "sakugaflow/script.hpp"

namespace sakugaflow {

namespace {

using httplib::Request;
using httplib::Response;

void send_json(Response& res, int status, const Document& body) {
  res.status = status;
  res.set_content(dump_canonical(body), "application/json");
}

void send_error(Response& res, ErrorCode code, std::string_view message,
                const Document& details = nullptr) {
  send_json(res, http_status(code), api_error_body(code, message, details));
}

Document parse_body(const Request& req) {
  if (req.body.empty()) return Document::object();
  Document d;
  try {
    d = parse_document(req.body);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("request body is not JSON: ") + e.what());
  }
  if (!d.is_object()) throw Error(ErrorCode::InvalidArgument, "request body must be a JSON object");
  return d;
}

template <typename T>
std::optional<T> field(const Document& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || it->is_null()) return std::nullopt;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::InvalidArgument, std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
T required(const Document& body, const char* key) {
  auto v = field<T>(body, key);
  if (!v) throw Error(ErrorCode::InvalidArgument, std::string("missing field '") + key + "'");
  return *v;
}

// Creation endpoints queue generation unless the body says {"generate": false}.
bool wants_generation(const Document& body) { return field<bool>(body, "generate").value_or(true); }

std::optional<std::uint64_t> parse_seq_header(const Request& req) {
  for (const char* name : {"Last-Event-Seq", "Last-Event-ID"}) {
    if (!req.has_header(name)) continue;
    const auto value = req.get_header_value(name);
    try {
      std::size_t used = 0;
      auto v = std::stoull(value, &used);
      if (used == value.size()) return v;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::InvalidArgument, std::string(name) + " must be an unsigned integer");
  }
  return std::nullopt;
}

}  // namespace

Document api_error_body(ErrorCode code, std::string_view message, const Document& details) {
  Document d = Document::object();
  d["code"] = error_code_name(code);
  d["message"] = message;
  d["details"] = details;
  return d;
}

std::string_view stream_event_name(EventKind kind) {
  switch (kind) {
    case EventKind::JobQueued:
    case EventKind::JobStarted:
    case EventKind::NodeCompleted:
    case EventKind::NodeFailed:
      return event_kind_name(kind);
    default:
      return "project_updated";
  }
}

std::string format_stream_event(const EventRecord& record) {
  return "id: " + std::to_string(record.seq) + "\nevent: " + std::string(stream_event_name(record.kind)) +
         "\ndata: " + encode_record(record) + "\n\n";
}

struct ApiServer::Impl {
  Engine& engine;
  TutorService& tutor;
  ApiOptions options;
  httplib::Server server;
  std::thread thread;
  std::atomic<bool> stopping{false};

  Impl(Engine& e, TutorService& t, ApiOptions o) : engine(e), tutor(t), options(std::move(o)) {}

  using Handler = std::function<void(const Request&, Response&)>;

  // Every route goes through here so errors always carry an ApiError body.
  Handler guarded(Handler h) {
    return [h = std::move(h)](const Request& req, Response& res) {
      try {
        h(req, res);
      } catch (const CorruptLogError& e) {
        send_error(res, ErrorCode::CorruptLog, e.what());
      } catch (const Error& e) {
        send_error(res, e.code(), e.what());
      } catch (const nlohmann::json::exception& e) {
        send_error(res, ErrorCode::InvalidArgument, e.what());
      } catch (const std::exception& e) {
        send_error(res, ErrorCode::Internal, e.what());
      }
    };
  }

  Document node_with_job(const VersionNode& node, bool generate) {
    Document d = Document::object();
    if (generate) {
      Job job = engine.generate(node.id);
      // As of the queue event; re-reading could race the worker.
      VersionNode queued = node;
      queued.status = NodeStatus::Pending;
      d["node"] = to_document(queued);
      d["job"] = to_document(job);
    } else {
      d["node"] = to_document(node);
    }
    return d;
  }

  void routes() {
    auto& s = server;

    s.Post("/v1/projects", guarded([this](const Request& req, Response& res) {
      auto body = parse_body(req);
      Canvas canvas;
      canvas.width = field<std::uint32_t>(body, "width").value_or(canvas.width);
      canvas.height = field<std::uint32_t>(body, "height").value_or(canvas.height);
      auto project = engine.create_project(required<std::string>(body, "theme"), canvas,
                                           field<std::uint64_t>(body, "seed"));
      Document d = Document::object();
      d["project"] = to_document(project);
      d["root"] = to_document(engine.node(project.root_node));
      send_json(res, 201, d);
    }));

    s.Get("/v1/projects", guarded([this](const Request&, Response& res) {
      Document d = Document::object();
      d["projects"] = engine.projects();
      send_json(res, 200, d);
    }));

    s.Get(R"(/v1/projects/([^/]+))", guarded([this](const Request& req, Response& res) {
      auto state = engine.state(req.matches[1]);
      Document d = Document::object();
      d["project"] = to_document(state->project);
      d["active"] = to_document(state->tree.at(state->project.active_node));
      d["node_count"] = state->tree.size();
      d["last_seq"] = state->last_seq ? Document(*state->last_seq) : Document(nullptr);
      send_json(res, 200, d);
    }));

    s.Get(R"(/v1/projects/([^/]+)/tree)", guarded([this](const Request& req, Response& res) {
      send_json(res, 200, export_tree(*engine.state(req.matches[1])));
    }));

    s.Get(R"(/v1/projects/([^/]+)/exchanges)", guarded([this](const Request& req, Response& res) {
      auto state = engine.state(req.matches[1]);
      Document list = Document::array();
      for (const auto& x : state->exchanges) list.push_back(to_document(x));
      Document d = Document::object();
      d["exchanges"] = std::move(list);
      send_json(res, 200, d);
    }));

    s.Post(R"(/v1/projects/([^/]+)/activate)", guarded([this](const Request& req, Response& res) {
      auto body = parse_body(req);
      auto project = engine.activate(req.matches[1], required<std::string>(body, "node_id"));
      Document d = Document::object();
      d["project"] = to_document(project);
      send_json(res, 200, d);
    }));

    s.Get(R"(/v1/nodes/([^/]+))", guarded([this](const Request& req, Response& res) {
      send_json(res, 200, to_document(engine.node(req.matches[1])));
    }));

    s.Get(R"(/v1/jobs/([^/]+))", guarded([this](const Request& req, Response& res) {
      send_json(res, 200, to_document(engine.job(req.matches[1])));
    }));

    s.Post(R"(/v1/nodes/([^/]+)/generate)", guarded([this](const Request& req, Response& res) {
      Job job = engine.generate(req.matches[1]);
      Document d = Document::object();
      d["job"] = to_document(job);
      send_json(res, 202, d);
    }));

    s.Post(R"(/v1/nodes/([^/]+)/advance)", guarded([this](const Request& req, Response& res) {
      auto body = parse_body(req);
      auto node = engine.advance_stage(req.matches[1], field<std::string>(body, "prompt_delta").value_or(""),
                                       field<std::uint64_t>(body, "seed"));
      const bool gen = wants_generation(body);
      send_json(res, gen ? 202 : 201, node_with_job(node, gen));
    }));

    s.Post(R"(/v1/nodes/([^/]+)/regenerate)", guarded([this](const Request& req, Response& res) {
      auto body = parse_body(req);
      RegenerateOverrides o;
      o.prompt = field<std::string>(body, "prompt");
      o.seed = field<std::uint64_t>(body, "seed");
      o.negative_prompt = field<std::string>(body, "negative_prompt");
      if (auto it = body.find("params"); it != body.end() && !it->is_null()) {
        if (!it->is_object()) throw Error(ErrorCode::InvalidArgument, "params must be an object");
        Document merged = to_document(engine.node(req.matches[1]).params);
        for (auto p = it->begin(); p != it->end(); ++p) merged[p.key()] = p.value();
        o.params = from_document<GenerationParams>(merged);
      }
      auto node = engine.regenerate(req.matches[1], o);
      const bool gen = wants_generation(body);
      send_json(res, gen ? 202 : 201, node_with_job(node, gen));
    }));

    s.Post(R"(/v1/nodes/([^/]+)/inpaint)", guarded([this](const Request& req, Response& res) {
      auto body = parse_body(req);
      auto png = base64_decode(required<std::string>(body, "mask_b64"));
      if (!png) throw Error(ErrorCode::UndecodableImage, "mask_b64 is not valid base64");
      auto mask = MaskRegion::decode_png(*png);
      auto node = engine.inpaint(req.matches[1], mask, field<std::string>(body, "prompt").value_or(""));
      const bool gen = wants_generation(body);
      send_json(res, gen ? 202 : 201, node_with_job(node, gen));
    }));

    s.Post(R"(/v1/nodes/([^/]+)/control)", guarded([this](const Request& req, Response& res) {
      std::string bytes;
      if (req.is_multipart_form_data()) {
        if (!req.has_file("image"))
          throw Error(ErrorCode::InvalidArgument, "multipart body needs an 'image' part");
        bytes = req.get_file_value("image").content;
      } else {
        bytes = req.body;
      }
      if (bytes.empty()) throw Error(ErrorCode::UndecodableImage, "empty image");
      send_json(res, 200, to_document(engine.attach_control_image(req.matches[1], bytes)));
    }));

    s.Post(R"(/v1/nodes/([^/]+)/label)", guarded([this](const Request& req, Response& res) {
      auto body = parse_body(req);
      send_json(res, 200, to_document(engine.set_label(req.matches[1], required<std::string>(body, "label"))));
    }));

    s.Get("/v1/compare", guarded([this](const Request& req, Response& res) {
      if (!req.has_param("a") || !req.has_param("b"))
        throw Error(ErrorCode::InvalidArgument, "compare needs query parameters a and b");
      send_json(res, 200, to_document(engine.compare(req.get_param_value("a"), req.get_param_value("b"))));
    }));

    s.Post("/v1/tutor/ask", guarded([this](const Request& req, Response& res) {
      auto body = parse_body(req);
      auto node_id = field<std::string>(body, "node_id");
      if (!node_id) {
        auto pid = field<std::string>(body, "project_id");
        if (!pid) throw Error(ErrorCode::InvalidArgument, "ask needs node_id or project_id");
        node_id = engine.state(*pid)->project.active_node;
      }
      send_json(res, 201, to_document(tutor.ask(*node_id, required<std::string>(body, "question"))));
    }));

    s.Get(R"(/v1/blobs/([^/]+))", guarded([this](const Request& req, Response& res) {
      auto digest = Digest::from_hex(req.matches[1].str());
      if (!digest) throw Error(ErrorCode::InvalidArgument, "not a sha-256 hex digest");
      auto bytes = engine.blob(*digest);
      if (!bytes) throw Error(ErrorCode::NotFound, "unknown blob " + digest->hex());
      res.set_header("Cache-Control", "public, max-age=31536000, immutable");
      res.set_content(std::move(*bytes), "image/png");
    }));

    s.Get(R"(/v1/projects/([^/]+)/events)", guarded([this](const Request& req, Response& res) {
      const ProjectId pid = req.matches[1];
      engine.state(pid);  // 404 before the stream starts
      std::uint64_t from = 0;
      if (auto last = parse_seq_header(req)) from = *last + 1;
      if (req.has_param("from")) {
        try {
          from = std::stoull(req.get_param_value("from"));
        } catch (const std::exception&) {
          throw Error(ErrorCode::InvalidArgument, "from must be an unsigned integer");
        }
      }
      const bool follow = req.get_param_value("follow") != "0";
      const std::uint64_t end = follow ? 0 : engine.events(pid).size();

      auto next = std::make_shared<std::uint64_t>(from);
      res.set_header("Cache-Control", "no-cache");
      res.set_header("X-Accel-Buffering", "no");
      res.set_chunked_content_provider(
          "text/event-stream", [this, pid, next, follow, end](std::size_t, httplib::DataSink& sink) {
            auto idle_since = std::chrono::steady_clock::now();
            while (true) {
              if (stopping.load() || engine.stopping()) {
                sink.done();
                return true;
              }
              if (!follow && *next >= end) {
                sink.done();
                return true;
              }
              auto records = follow ? engine.wait_events(pid, *next, std::chrono::milliseconds(200))
                                    : engine.events(pid, *next);
              for (const auto& r : records) {
                if (!follow && r.seq >= end) break;
                auto chunk = format_stream_event(r);
                if (!sink.write(chunk.data(), chunk.size())) return false;
                *next = r.seq + 1;
              }
              if (!records.empty()) return true;
              if (!sink.is_writable()) return false;
              if (std::chrono::steady_clock::now() - idle_since >= options.keepalive) {
                static constexpr std::string_view kPing = ": keepalive\n\n";
                return sink.write(kPing.data(), kPing.size());
              }
            }
          });
    }));

    s.set_error_handler([](const Request&, Response& res) {
      if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
      const auto code = res.status == 404 ? ErrorCode::NotFound
                        : res.status < 500 ? ErrorCode::InvalidArgument
                                           : ErrorCode::Internal;
      const int status = res.status;
      res.set_content(dump_canonical(api_error_body(code, httplib::status_message(status))),
                      "application/json");
      return httplib::Server::HandlerResponse::Handled;
    });

    if (!options.cors_origin.empty()) {
      s.set_post_routing_handler([origin = options.cors_origin](const Request&, Response& res) {
        res.set_header("Access-Control-Allow-Origin", origin);
        res.set_header("Access-Control-Expose-Headers", "Content-Type");
      });
      s.Options(R"(.*)", [](const Request&, Response& res) {
        res.status = 204;
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type, Last-Event-Seq, Last-Event-ID");
        res.set_header("Access-Control-Max-Age", "600");
      });
    }

    if (options.static_dir) s.set_mount_point("/", options.static_dir->string());
  }
};

ApiServer::ApiServer(Engine& engine, TutorService& tutor, ApiOptions options)
    : impl_(std::make_unique<Impl>(engine, tutor, std::move(options))) {
  const std::size_t n = std::max<std::size_t>(4, impl_->options.threads);
  impl_->server.new_task_queue = [n] { return new httplib::ThreadPool(n); };
  impl_->routes();
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool ApiServer::listen() { return impl_->server.listen_after_bind(); }

int ApiServer::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  if (bound < 0) return -1;
  impl_->thread = std::thread([this] { listen(); });
  impl_->server.wait_until_ready();
  return bound;
}

void ApiServer::stop() {
  impl_->stopping = true;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace sakugaflow
