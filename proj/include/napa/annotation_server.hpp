#pragma once

#include "napa/annotation.hpp"
#include "napa/pipeline.hpp"

#include <memory>
#include <string>

namespace napa {

// HTTP/JSON surface over an AnnotationStore:
//   GET  /api/tasks?status=todo|in_progress|done  {"next": record|null, "tasks": [...]}
//   GET  /api/tasks/{id}                           record
//   PUT  /api/tasks/{id}   {"expected_version", "record"}  {"version", "record", "validation"}
//   POST /api/validate     record                  {"projection_ok", "changed_2d", ...}
//   GET  /api/images/{id}                          image bytes
//   POST /api/lift/{id}                            {"depth_rel", "source"}
// Errors are {"error", "message"} with 400 (bad JSON), 404 (unknown id),
// 409 (version conflict, plus "current_version") and 422 (validation, plus
// "fields": [{"path", "message"}]).
class AnnotationServer {
 public:
  // `pipeline` may be null (lift then proposes zeros); it must outlive the
  // server.
  AnnotationServer(AnnotationStore& store, Pipeline* pipeline);
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  // Binds and serves on a background thread. Port 0 picks a free port; the
  // bound port is returned.
  int start(const std::string& host, int port);
  // Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace napa
