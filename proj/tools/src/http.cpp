#include "blockdetail/service/http.h"

#include "blockdetail/motion/motion_io.h"

#include <httplib.h>

namespace blockdetail {

using nlohmann::json;

namespace {

constexpr char kJson[] = "application/json";

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump() + "\n", kJson);
}

void send_error(httplib::Response& res, int status, std::string_view kind,
                const std::string& message, const std::vector<FieldIssue>& issues = {}) {
  json body = {{"error", kind}, {"message", message}};
  if (!issues.empty()) {
    json fields = json::array();
    for (const FieldIssue& issue : issues) {
      fields.push_back({{"field", issue.field}, {"message", issue.message}});
    }
    body["fields"] = std::move(fields);
  }
  send_json(res, status, body);
}

void not_found(httplib::Response& res, const std::string& id) {
  send_error(res, 404, "not_found", "no job with id '" + id + "'");
}

std::string sse_frame(const JobEvent& event) {
  return "id: " + std::to_string(event.index) + "\nevent: " + event.type +
         "\ndata: " + event.data.dump() + "\n\n";
}

}  // namespace

std::unique_ptr<httplib::Server> make_http_server(JobService& jobs) {
  auto server = std::make_unique<httplib::Server>();
  server->set_default_headers({{"Access-Control-Allow-Origin", "*"}});

  server->Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });

  server->Get("/api/skeleton", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, skeleton_to_json(SkeletonSpec::desk()));
  });

  server->Post("/api/jobs", [&jobs](const httplib::Request& req, httplib::Response& res) {
    try {
      const std::string id = jobs.submit(parse_json(req.body));
      send_json(res, 201, {{"id", id}});
    } catch (const RequestError& e) {
      send_error(res, 400, "validation_error", e.what(), e.issues());
    } catch (const ParseError& e) {
      json body = {{"error", "parse_error"}, {"message", e.what()},
                   {"byte_offset", e.byte_offset()}};
      send_json(res, 400, body);
    } catch (const ValidationError& e) {
      send_error(res, 400, "validation_error", e.what(), {{e.field(), e.what()}});
    } catch (const std::exception& e) {
      send_error(res, 503, "unavailable", e.what());
    }
  });

  server->Get(R"(/api/jobs/([0-9a-f]+))", [&jobs](const httplib::Request& req,
                                                  httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto job = jobs.get(id);
    if (!job) return not_found(res, id);
    send_json(res, 200, job->to_json());
  });

  server->Post(R"(/api/jobs/([0-9a-f]+)/cancel)", [&jobs](const httplib::Request& req,
                                                          httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto job = jobs.cancel(id);
    if (!job) return not_found(res, id);
    send_json(res, 200, job->to_json());
  });

  auto payload_route = [&jobs](bool trace) {
    return [&jobs, trace](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      const auto job = jobs.get(id);
      if (!job) return not_found(res, id);
      if (job->state != JobState::done) {
        return send_error(res, 409, "not_ready",
                          "job is " + std::string(to_string(job->state)));
      }
      const auto body = trace ? jobs.trace(id) : jobs.result(id);
      if (!body) return send_error(res, 404, "not_found", "job has no refinement trace");
      res.status = 200;
      res.set_content(*body, kJson);
    };
  };
  server->Get(R"(/api/jobs/([0-9a-f]+)/result)", payload_route(false));
  server->Get(R"(/api/jobs/([0-9a-f]+)/trace)", payload_route(true));

  server->Get(R"(/api/jobs/([0-9a-f]+)/events)", [&jobs](const httplib::Request& req,
                                                         httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!jobs.get(id)) return not_found(res, id);
    auto next = std::make_shared<std::size_t>(0);
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream", [&jobs, id, next](std::size_t, httplib::DataSink& sink) {
          const auto batch = jobs.events(id, *next, std::chrono::milliseconds(500));
          if (!batch) return false;
          for (const JobEvent& event : batch->events) {
            const std::string frame = sse_frame(event);
            if (!sink.write(frame.data(), frame.size())) return false;
            *next = event.index + 1;
          }
          if (batch->finished) {
            const auto tail = jobs.events(id, *next, std::chrono::milliseconds(0));
            if (tail && tail->events.empty()) sink.done();
          } else if (batch->events.empty() && !sink.is_writable()) {
            return false;
          }
          return true;
        });
  });

  return server;
}

}  // namespace blockdetail
