#include "blockdetail/detailing/trace_io.h"

#include "blockdetail/common/error.h"
#include "blockdetail/motion/motion_io.h"

namespace blockdetail {

using nlohmann::json;

namespace {

int get_int(const json& doc, const char* key, const std::string& path) {
  auto it = doc.find(key);
  if (it == doc.end() || !it->is_number_integer()) {
    throw ValidationError("expected an integer", path + "." + key);
  }
  return it->get<int>();
}

}  // namespace

json refinement_event_to_json(const RefinementEvent& event, bool with_condition) {
  json keys = json::array();
  for (const KeyRefinement& k : event.keys) {
    keys.push_back({{"key_index", k.key_index},
                    {"frame", k.frame},
                    {"matched_frame", k.matched_frame},
                    {"ground_fixed", k.ground_fixed},
                    {"before", pose_to_json(k.before)},
                    {"proposal", pose_to_json(k.proposal)},
                    {"after", pose_to_json(k.after)}});
  }
  json out = {{"t", event.t}, {"keys", std::move(keys)}};
  if (with_condition) {
    json frames = json::array();
    const MotionArray& c = event.condition.frames;
    for (int f = 0; f < c.frames(); ++f) frames.push_back(pose_to_json(c.pose(f)));
    out["condition"] = std::move(frames);
  }
  return out;
}

json trace_to_json(const RefinementTrace& trace) {
  json events = json::array();
  for (const RefinementEvent& e : trace.events) events.push_back(refinement_event_to_json(e));
  json out = {{"format_version", kFormatVersion},
              {"steps", trace.steps},
              {"config", trace.config.to_json()},
              {"events", std::move(events)}};
  if (!trace.events.empty()) {
    const ArrayShape s = trace.events.front().condition.frames.shape();
    out["shape"] = {{"frames", s.frames}, {"joints", s.joints}, {"dims", s.dims}};
  }
  return out;
}

RefinementTrace trace_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("expected an object", "$");
  if (get_int(doc, "format_version", "") != kFormatVersion) {
    throw ValidationError("unsupported format_version", "format_version");
  }
  RefinementTrace trace;
  trace.steps = get_int(doc, "steps", "");
  if (auto it = doc.find("config"); it != doc.end()) trace.config = RefinementConfig::from_json(*it);

  const json& events = doc.at("events");
  if (!events.is_array()) throw ValidationError("expected an array", "events");
  if (events.empty()) return trace;
  const json& shape = doc.at("shape");
  const ArrayShape s{get_int(shape, "frames", "shape"), get_int(shape, "joints", "shape"),
                     get_int(shape, "dims", "shape")};

  for (std::size_t e = 0; e < events.size(); ++e) {
    const std::string path = "events[" + std::to_string(e) + "]";
    const json& ej = events[e];
    RefinementEvent event;
    event.t = get_int(ej, "t", path);
    const json& keys = ej.at("keys");
    for (std::size_t k = 0; k < keys.size(); ++k) {
      const std::string kp = path + ".keys[" + std::to_string(k) + "]";
      const json& kj = keys[k];
      KeyRefinement r;
      r.key_index = get_int(kj, "key_index", kp);
      r.frame = get_int(kj, "frame", kp);
      r.matched_frame = get_int(kj, "matched_frame", kp);
      r.ground_fixed = kj.value("ground_fixed", false);
      r.before = pose_from_json(kj.at("before"), s.joints, s.dims, kp + ".before");
      r.proposal = pose_from_json(kj.at("proposal"), s.joints, s.dims, kp + ".proposal");
      r.after = pose_from_json(kj.at("after"), s.joints, s.dims, kp + ".after");
      event.keys.push_back(std::move(r));
    }
    const json& frames = ej.at("condition");
    if (!frames.is_array() || static_cast<int>(frames.size()) != s.frames) {
      throw ValidationError("condition needs one entry per frame", path + ".condition");
    }
    event.condition.frames = MotionArray(s);
    for (int f = 0; f < s.frames; ++f) {
      event.condition.frames.set_pose(
          f, pose_from_json(frames[f], s.joints, s.dims,
                            path + ".condition[" + std::to_string(f) + "]"));
    }
    trace.events.push_back(std::move(event));
  }
  return trace;
}

void save_trace(const RefinementTrace& trace, const std::filesystem::path& path) {
  write_text_file(path, trace_to_json(trace).dump() + "\n");
}

RefinementTrace load_trace(const std::filesystem::path& path) {
  try {
    return trace_from_json(parse_json(read_text_file(path)));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed trace file: ") + e.what());
  }
}

}  // namespace blockdetail
