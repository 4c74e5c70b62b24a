#pragma once

#include "blockdetail/detailing/refinement.h"

#include <nlohmann/json.hpp>

#include <filesystem>

namespace blockdetail {

nlohmann::json refinement_event_to_json(const RefinementEvent& event, bool with_condition = true);

/// {format_version, steps, config, events: [{t, keys: [...], condition}]}.
nlohmann::json trace_to_json(const RefinementTrace& trace);
RefinementTrace trace_from_json(const nlohmann::json& doc);

void save_trace(const RefinementTrace& trace, const std::filesystem::path& path);
RefinementTrace load_trace(const std::filesystem::path& path);

}  // namespace blockdetail
