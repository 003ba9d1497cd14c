#include "napa/annotation_server.hpp"

#include "napa/error.hpp"

#include "httplib.h"

#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace napa {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& kind, const std::string& message) {
  send_json(res, status, {{"error", kind}, {"message", message}});
}

void send_validation(httplib::Response& res, const ValidationError& e) {
  json fields = json::array();
  for (const auto& f : e.fields()) fields.push_back({{"path", f.path}, {"message", f.message}});
  send_json(res, 422, {{"error", "validation_failed"}, {"message", e.what()}, {"fields", fields}});
}

std::string content_type(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".jpg" || ext == ".jpeg" || ext == ".JPG" || ext == ".JPEG") return "image/jpeg";
  if (ext == ".bmp") return "image/bmp";
  return "image/png";
}

}  // namespace

struct AnnotationServer::Impl {
  AnnotationStore& store;
  Pipeline* pipeline;
  std::mutex lift_mutex;  // the pipeline is not reentrant
  httplib::Server server;
  std::thread thread;

  Impl(AnnotationStore& s, Pipeline* p) : store(s), pipeline(p) { routes(); }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, PUT, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });

    server.Get("/api/tasks", [this](const httplib::Request& req, httplib::Response& res) {
      std::optional<TaskStatus> status;
      if (req.has_param("status") && !req.get_param_value("status").empty()) {
        try {
          status = task_status_from_string(req.get_param_value("status"));
        } catch (const ConfigError& e) {
          return send_error(res, 400, "bad_request", e.what());
        }
      }
      json tasks = json::array();
      for (const auto& r : store.list(status)) {
        tasks.push_back({{"image_id", r.image_id}, {"status", to_string(r.status)}, {"version", r.version}});
      }
      const auto next = store.next_task(status);
      send_json(res, 200, {{"next", next ? to_json(*next) : json(nullptr)}, {"tasks", tasks}});
    });

    server.Get(R"(/api/tasks/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto r = store.get(req.matches[1]);
      if (!r) return send_error(res, 404, "not_found", "unknown image id " + std::string(req.matches[1]));
      send_json(res, 200, to_json(*r));
    });

    server.Put(R"(/api/tasks/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::exception& e) {
        return send_error(res, 400, "bad_request", e.what());
      }
      if (!body.is_object() || !body.contains("expected_version") || !body["expected_version"].is_number_integer()) {
        return send_validation(res, ValidationError({FieldError{"expected_version", "required integer"}}));
      }
      const int expected = body["expected_version"].get<int>();
      const json rec_json = body.contains("record") ? body["record"] : body;
      try {
        AnnotationRecord rec = annotation_from_json(rec_json);
        if (rec.image_id != id) throw ValidationError({FieldError{"image_id", "does not match the URL"}});
        if (!store.get(id)) return send_error(res, 404, "not_found", "unknown image id " + id);
        const auto validation = store.validate(rec);
        const int version = store.save(rec, expected);
        send_json(res, 200, {{"version", version}, {"record", to_json(*store.get(id))}, {"validation", validation.to_json()}});
      } catch (const ConflictError& e) {
        const auto cur = store.get(id);
        send_json(res, 409, {{"error", "version_conflict"}, {"message", e.what()}, {"current_version", cur ? cur->version : 0}});
      } catch (const ValidationError& e) {
        send_validation(res, e);
      }
    });

    server.Post("/api/validate", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        const auto rec = annotation_from_json(json::parse(req.body));
        validate_annotation(rec);
        send_json(res, 200, store.validate(rec).to_json());
      } catch (const json::exception& e) {
        send_error(res, 400, "bad_request", e.what());
      } catch (const ValidationError& e) {
        send_validation(res, e);
      }
    });

    server.Get(R"(/api/images/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto r = store.get(req.matches[1]);
      if (!r) return send_error(res, 404, "not_found", "unknown image id " + std::string(req.matches[1]));
      std::ifstream in(r->image, std::ios::binary);
      if (!in) return send_error(res, 404, "not_found", "image file missing for " + r->image_id);
      std::ostringstream bytes;
      bytes << in.rdbuf();
      res.set_content(bytes.str(), content_type(r->image));
    });

    server.Post(R"(/api/lift/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      const auto r = store.get(req.matches[1]);
      if (!r) return send_error(res, 404, "not_found", "unknown image id " + std::string(req.matches[1]));
      try {
        std::lock_guard lock(lift_mutex);
        const auto z = lift_initial_guess(*r, pipeline);
        send_json(res, 200, {{"image_id", r->image_id}, {"depth_rel", z}, {"source", pipeline ? "checkpoint" : "zeros"}});
      } catch (const Error& e) {
        send_error(res, 500, "lift_failed", e.what());
      }
    });
  }
};

AnnotationServer::AnnotationServer(AnnotationStore& store, Pipeline* pipeline)
    : impl_(std::make_unique<Impl>(store, pipeline)) {}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::start(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void AnnotationServer::listen(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

void AnnotationServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace napa
