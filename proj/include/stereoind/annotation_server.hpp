#pragma once

// HTTP+JSON front end of the annotation store.
//
//   GET  /schema
//   GET  /projects                                  POST /projects
//   GET  /projects/{id}
//   GET  /projects/{id}/next?annotator=
//   POST /projects/{id}/annotations                 {annotator, sentence_id, record}
//   GET  /projects/{id}/sentences/{sid}/annotations?annotator=
//   GET  /projects/{id}/agreement
//   GET  /projects/{id}/disagreements
//   POST /projects/{id}/adjudications               {adjudicator, sentence_id, record}
//   GET  /projects/{id}/gold                        application/x-ndjson
//
// Errors come back as {"error": message, "details": [...]} with 400 for
// invalid input, 403 for blinded reads, 404 for unknown ids and 409 for
// state conflicts.

#include <memory>
#include <string>

#include "stereoind/annotation.hpp"

namespace httplib {
class Server;
}

namespace stereoind::annotation {

class AnnotationServer {
 public:
  explicit AnnotationServer(ProjectStore& store);
  ~AnnotationServer();

  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  // Port 0 picks a free port. Throws Error when the port cannot be bound.
  int bind(const std::string& host, int port);
  // Blocks until stop() is called.
  void serve();
  void stop();
  bool running() const;

 private:
  void install_routes();

  ProjectStore& store_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace stereoind::annotation
