#include "stereoind/annotation_server.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace stereoind::annotation {

namespace {

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message,
                const std::vector<std::string>& details = {}) {
  ordered_json body;
  body["error"] = message;
  if (!details.empty()) body["details"] = details;
  send_json(res, status, body);
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

// Maps the error hierarchy onto status codes.
httplib::Server::Handler guarded(Handler handler) {
  return [handler = std::move(handler)](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const ValidationError& e) {
      send_error(res, 400, e.what(), e.details());
    } catch (const json::exception& e) {
      send_error(res, 400, std::string("malformed JSON: ") + e.what());
    } catch (const DataError& e) {
      send_error(res, 400, e.what());
    } catch (const ConfigError& e) {
      send_error(res, 400, e.what());
    } catch (const AccessError& e) {
      send_error(res, 403, e.what());
    } catch (const NotFoundError& e) {
      send_error(res, 404, e.what());
    } catch (const StateError& e) {
      send_error(res, 409, e.what());
    } catch (const std::exception& e) {
      spdlog::error("{} {}: {}", req.method, req.path, e.what());
      send_error(res, 500, e.what());
    }
  };
}

json body_of(const httplib::Request& req) {
  auto doc = json::parse(req.body);
  if (!doc.is_object()) throw ValidationError("request body must be a JSON object", {});
  return doc;
}

std::string required_string(const json& doc, const char* field) {
  if (!doc.contains(field) || !doc[field].is_string() || doc[field].get<std::string>().empty()) {
    throw ValidationError(std::string("missing field '") + field + "'", {});
  }
  return doc[field].get<std::string>();
}

std::string required_param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name) || req.get_param_value(name).empty()) {
    throw ValidationError(std::string("missing query parameter '") + name + "'", {});
  }
  return req.get_param_value(name);
}

IndicatorRecord record_of(const json& doc, const std::string& sentence_id) {
  if (!doc.contains("record")) throw ValidationError("missing field 'record'", {});
  try {
    return record_from_json(doc["record"], sentence_id);
  } catch (const FormatError& e) {
    throw ValidationError("record rejected", {e.what()});
  }
}

ordered_json project_summary(const Project& p) {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : p.sentences) ++counts[std::string(to_string(p.status(s.id)))];
  ordered_json status = ordered_json::object();
  for (auto st : {Status::unannotated, Status::partial, Status::agreed, Status::disagreed,
                  Status::adjudicated}) {
    status[std::string(to_string(st))] = counts[std::string(to_string(st))];
  }
  return {{"id", p.id},
          {"annotators", p.annotators},
          {"sentence_count", p.sentences.size()},
          {"status", std::move(status)}};
}

ordered_json sentence_json(const ProjectSentence& s) {
  return {{"id", s.id}, {"text", s.text}, {"bias_type", s.bias_type}};
}

}  // namespace

AnnotationServer::AnnotationServer(ProjectStore& store)
    : store_(store), server_(std::make_unique<httplib::Server>()) {
  // httplib's default also sets SO_REUSEPORT, which lets a second server
  // silently share a busy port.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
  });
  install_routes();
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind(const std::string& host, int port) {
  if (port == 0) {
    int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind " + host + " to a free port");
    return bound;
  }
  if (!server_->bind_to_port(host, port)) {
    throw Error("cannot bind " + host + ":" + std::to_string(port) + " (port busy?)");
  }
  return port;
}

void AnnotationServer::serve() { server_->listen_after_bind(); }

void AnnotationServer::stop() {
  if (server_) server_->stop();
}

bool AnnotationServer::running() const { return server_->is_running(); }

void AnnotationServer::install_routes() {
  auto& s = *server_;
  auto& store = store_;

  s.Get("/schema", guarded([&store](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, schema_to_json(store.schema()));
  }));

  s.Get("/projects", guarded([&store](const httplib::Request&, httplib::Response& res) {
    auto list = ordered_json::array();
    for (const auto& id : store.project_ids()) list.push_back(project_summary(store.snapshot(id)));
    send_json(res, 200, list);
  }));

  s.Post("/projects", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    auto id = store.create_project(create_request_from_json(body_of(req)));
    send_json(res, 201, project_summary(store.snapshot(id)));
  }));

  s.Get(R"(/projects/([^/]+))", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    auto p = store.snapshot(req.matches[1]);
    auto body = project_summary(p);
    auto sentences = ordered_json::array();
    for (const auto& sent : p.sentences) {
      auto j = sentence_json(sent);
      j["status"] = to_string(p.status(sent.id));
      sentences.push_back(std::move(j));
    }
    body["sentences"] = std::move(sentences);
    send_json(res, 200, body);
  }));

  s.Get(R"(/projects/([^/]+)/next)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    auto next = store.next_for(req.matches[1], required_param(req, "annotator"));
    ordered_json body;
    body["done"] = !next.has_value();
    body["sentence"] = next ? sentence_json(*next) : ordered_json(nullptr);
    send_json(res, 200, body);
  }));

  s.Post(R"(/projects/([^/]+)/annotations)",
         guarded([&store](const httplib::Request& req, httplib::Response& res) {
           auto doc = body_of(req);
           auto sid = required_string(doc, "sentence_id");
           auto status = store.submit(req.matches[1], required_string(doc, "annotator"), sid,
                                      record_of(doc, sid));
           send_json(res, 200, {{"sentence_id", sid}, {"status", to_string(status)}});
         }));

  s.Get(R"(/projects/([^/]+)/sentences/([^/]+)/annotations)",
        guarded([&store](const httplib::Request& req, httplib::Response& res) {
          auto records =
              store.annotations_for(req.matches[1], req.matches[2], required_param(req, "annotator"));
          ordered_json body = ordered_json::object();
          for (const auto& [a, rec] : records) body[a] = record_to_json(rec);
          send_json(res, 200, {{"sentence_id", std::string(req.matches[2])}, {"annotations", body}});
        }));

  s.Get(R"(/projects/([^/]+)/agreement)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, agreement_to_json(store.agreement(req.matches[1]), store.schema()));
  }));

  s.Get(R"(/projects/([^/]+)/disagreements)",
        guarded([&store](const httplib::Request& req, httplib::Response& res) {
          auto list = ordered_json::array();
          for (const auto& d : store.disagreements(req.matches[1])) list.push_back(disagreement_to_json(d));
          send_json(res, 200, list);
        }));

  s.Post(R"(/projects/([^/]+)/adjudications)",
         guarded([&store](const httplib::Request& req, httplib::Response& res) {
           auto doc = body_of(req);
           auto sid = required_string(doc, "sentence_id");
           auto status = store.adjudicate(req.matches[1], sid, record_of(doc, sid),
                                          required_string(doc, "adjudicator"));
           send_json(res, 200, {{"sentence_id", sid}, {"status", to_string(status)}});
         }));

  s.Get(R"(/projects/([^/]+)/gold)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
    res.status = 200;
    res.set_content(store.export_gold(req.matches[1]), "application/x-ndjson");
  }));
}

}  // namespace stereoind::annotation
