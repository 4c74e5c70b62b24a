#pragma once

#include "blockdetail/service/jobs.h"

#include <memory>

namespace httplib {
class Server;
}

namespace blockdetail {

/// Routes:
///   POST /api/jobs               GenerationRequest -> 201 {id}
///   GET  /api/jobs/{id}          job snapshot
///   GET  /api/jobs/{id}/result   motion payload (409 until done)
///   GET  /api/jobs/{id}/trace    refinement trace payload (detailing only)
///   GET  /api/jobs/{id}/events   server-sent events, replayed from the start
///   POST /api/jobs/{id}/cancel   job snapshot
///   GET  /api/skeleton           skeleton payload
/// Errors are {error, message, fields?: [{field, message}]} with 400, 404 or
/// 409.
std::unique_ptr<httplib::Server> make_http_server(JobService& jobs);

}  // namespace blockdetail
