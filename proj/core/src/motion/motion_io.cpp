#include "blockdetail/motion/motion_io.h"

#include "blockdetail/common/error.h"

#include <fstream>
#include <functional>
#include <sstream>
#include <utility>

namespace blockdetail {

using nlohmann::json;

namespace {

std::string index_path(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

const json& require(const json& doc, const char* key, const std::string& prefix = {}) {
  const std::string path = prefix.empty() ? key : prefix + "." + key;
  if (!doc.is_object()) throw ValidationError("expected an object", prefix.empty() ? "$" : prefix);
  auto it = doc.find(key);
  if (it == doc.end()) throw ValidationError("missing field '" + path + "'", path);
  return *it;
}

void check_version(const json& doc) {
  const json& v = require(doc, "format_version");
  if (!v.is_number_integer() || v.get<long long>() != kFormatVersion) {
    throw ValidationError("unsupported format_version (expected " +
                              std::to_string(kFormatVersion) + ")",
                          "format_version");
  }
}

int get_int(const json& value, const std::string& path) {
  if (!value.is_number_integer()) throw ValidationError("expected an integer", path);
  return value.get<int>();
}

double get_number(const json& value, const std::string& path) {
  if (!value.is_number()) throw ValidationError("expected a number", path);
  return value.get<double>();
}

const json& require_array(const json& value, const std::string& path) {
  if (!value.is_array()) throw ValidationError("expected an array", path);
  return value;
}

json vec3_to_json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec3_from_json(const json& value, const std::string& path) {
  require_array(value, path);
  if (value.size() != 3) throw ValidationError("expected 3 coordinates", path);
  return {get_number(value[0], index_path(path, 0)), get_number(value[1], index_path(path, 1)),
          get_number(value[2], index_path(path, 2))};
}

// Reads a J x D block; null entries are reported as non-finite so a file
// written from a NaN-bearing array names the offending coordinate.
void read_rows(const json& rows, const std::string& path, int joints, int dims,
               const std::function<void(int, int, double)>& store,
               const std::string& frame_label) {
  require_array(rows, path);
  if (static_cast<int>(rows.size()) != joints) {
    throw ValidationError("skeleton mismatch: expected J=" + std::to_string(joints) + ", D=" +
                              std::to_string(dims) + " but found " +
                              std::to_string(rows.size()) + " joints",
                          path);
  }
  for (int j = 0; j < joints; ++j) {
    const std::string jpath = index_path(path, j);
    const json& row = require_array(rows[j], jpath);
    if (static_cast<int>(row.size()) != dims) {
      throw ValidationError("skeleton mismatch: expected J=" + std::to_string(joints) + ", D=" +
                                std::to_string(dims) + " but joint " + std::to_string(j) +
                                " has " + std::to_string(row.size()) + " coordinates",
                            jpath);
    }
    for (int d = 0; d < dims; ++d) {
      const json& v = row[d];
      if (v.is_null()) {
        throw ValidationError("non-finite value at " + frame_label + " joint " +
                                  std::to_string(j) + " coord " + std::to_string(d),
                              index_path(jpath, d));
      }
      store(j, d, get_number(v, index_path(jpath, d)));
    }
  }
}

}  // namespace

json pose_to_json(const Pose& pose) {
  json rows = json::array();
  for (int j = 0; j < pose.joints(); ++j) {
    json row = json::array();
    for (int d = 0; d < pose.dims(); ++d) row.push_back(pose(j, d));
    rows.push_back(std::move(row));
  }
  return rows;
}

Pose pose_from_json(const json& rows, int joints, int dims, const std::string& path) {
  Pose pose(joints, dims);
  read_rows(
      rows, path, joints, dims, [&](int j, int d, double v) { pose(j, d) = v; }, path);
  return pose;
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::string what = e.what();
    // Drop nlohmann's "[json.exception.parse_error.101] " prefix.
    if (auto pos = what.find("] "); pos != std::string::npos) what = what.substr(pos + 2);
    throw ParseError("malformed JSON: " + what, e.byte);
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

json skeleton_to_json(const SkeletonSpec& skeleton) {
  json rest = json::array();
  for (const auto& p : skeleton.rest_local_position) rest.push_back(vec3_to_json(p));
  return {{"joint_names", skeleton.joint_names},
          {"parents", skeleton.parent},
          {"rest", std::move(rest)},
          {"important_joints", skeleton.important_joints},
          {"foot_joints", skeleton.foot_joints}};
}

SkeletonSpec skeleton_from_json(const json& doc) {
  SkeletonSpec s;
  const json& names = require_array(require(doc, "joint_names", "skeleton"), "skeleton.joint_names");
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (!names[j].is_string()) {
      throw ValidationError("expected a string", index_path("skeleton.joint_names", j));
    }
    s.joint_names.push_back(names[j].get<std::string>());
  }
  const json& parents = require_array(require(doc, "parents", "skeleton"), "skeleton.parents");
  for (std::size_t j = 0; j < parents.size(); ++j) {
    s.parent.push_back(get_int(parents[j], index_path("skeleton.parents", j)));
  }
  const json& rest = require_array(require(doc, "rest", "skeleton"), "skeleton.rest");
  for (std::size_t j = 0; j < rest.size(); ++j) {
    s.rest_local_position.push_back(vec3_from_json(rest[j], index_path("skeleton.rest", j)));
  }
  auto read_indices = [&](const char* key, std::vector<int>& out) {
    auto it = doc.find(key);
    if (it == doc.end()) return;
    const std::string path = std::string("skeleton.") + key;
    require_array(*it, path);
    for (std::size_t i = 0; i < it->size(); ++i) out.push_back(get_int((*it)[i], index_path(path, i)));
  };
  read_indices("important_joints", s.important_joints);
  read_indices("foot_joints", s.foot_joints);
  if (s.important_joints.empty()) s.important_joints.push_back(0);
  s.validate();
  return s;
}

json motion_to_json(const Motion& motion, const SkeletonSpec& skeleton) {
  const MotionArray& a = motion.frames();
  if (a.joints() != skeleton.joint_count() || a.dims() != 3) {
    throw ValidationError("skeleton mismatch: expected J=" +
                          std::to_string(skeleton.joint_count()) + ", D=3");
  }
  json frames = json::array();
  for (int f = 0; f < a.frames(); ++f) frames.push_back(pose_to_json(a.pose(f)));
  return {{"format_version", kFormatVersion},
          {"skeleton", skeleton_to_json(skeleton)},
          {"fps", motion.fps()},
          {"frames", std::move(frames)}};
}

Motion motion_from_json(const json& doc, const SkeletonSpec& expected) {
  check_version(doc);
  const int joints = expected.joint_count();
  constexpr int dims = 3;
  const std::string mismatch =
      "skeleton mismatch: expected J=" + std::to_string(joints) + ", D=" + std::to_string(dims);

  if (auto it = doc.find("skeleton"); it != doc.end()) {
    const json& names = require(*it, "joint_names", "skeleton");
    if (!names.is_array() || static_cast<int>(names.size()) != joints) {
      throw ValidationError(mismatch, "skeleton.joint_names");
    }
    for (int j = 0; j < joints; ++j) {
      if (!names[j].is_string() || names[j].get<std::string>() != expected.joint_names[j]) {
        throw ValidationError(mismatch + " (joint " + std::to_string(j) + " should be '" +
                                  expected.joint_names[j] + "')",
                              index_path("skeleton.joint_names", j));
      }
    }
  }

  double fps = kDefaultFps;
  if (auto it = doc.find("fps"); it != doc.end()) fps = get_number(*it, "fps");

  const json& frames = require_array(require(doc, "frames"), "frames");
  const int count = static_cast<int>(frames.size());
  if (count < 2) {
    throw ValidationError("motion needs F >= 2 frames (file has F=" + std::to_string(count) + ")",
                          "frames");
  }
  MotionArray a({count, joints, dims});
  for (int f = 0; f < count; ++f) {
    read_rows(
        frames[f], index_path("frames", f), joints, dims,
        [&](int j, int d, double v) { a(f, j, d) = v; }, "frame " + std::to_string(f));
  }
  return Motion(std::move(a), fps);
}

json blocking_to_json(const BlockingSet& blocking) {
  json poses = json::array();
  for (const BlockingPose& key : blocking.poses) {
    json tolerance = json::array();
    for (Eigen::Index j = 0; j < key.tolerance.size(); ++j) tolerance.push_back(key.tolerance[j]);
    json specified = json::array();
    for (bool s : key.specified) specified.push_back(s);
    poses.push_back({{"frame", key.frame},
                     {"features", pose_to_json(key.pose)},
                     {"specified", std::move(specified)},
                     {"tolerance", std::move(tolerance)}});
  }
  return {{"format_version", kFormatVersion},
          {"timeline_length", blocking.timeline_length},
          {"poses", std::move(poses)}};
}

BlockingSet blocking_from_json(const json& doc, double default_tolerance) {
  check_version(doc);
  BlockingSet out;
  out.timeline_length = get_int(require(doc, "timeline_length"), "timeline_length");
  const json& poses = require_array(require(doc, "poses"), "poses");
  if (poses.empty()) throw ValidationError("no blocking poses", "poses");

  int joints = -1;
  int dims = -1;
  for (std::size_t k = 0; k < poses.size(); ++k) {
    const std::string path = index_path("poses", k);
    const json& entry = poses[k];
    BlockingPose key;
    key.frame = get_int(require(entry, "frame", path), path + ".frame");

    const json& features = require_array(require(entry, "features", path), path + ".features");
    if (joints < 0) {
      joints = static_cast<int>(features.size());
      if (joints < 1) throw ValidationError("empty pose", path + ".features");
      const json& first = require_array(features[0], path + ".features[0]");
      dims = static_cast<int>(first.size());
      if (dims < 1) throw ValidationError("empty pose", path + ".features[0]");
    }
    key.pose = Pose(joints, dims);
    read_rows(
        features, path + ".features", joints, dims,
        [&](int j, int d, double v) { key.pose(j, d) = v; }, "pose " + std::to_string(k));

    const json& specified = require_array(require(entry, "specified", path), path + ".specified");
    if (static_cast<int>(specified.size()) != joints) {
      throw ValidationError("specified mask needs one entry per joint", path + ".specified");
    }
    for (std::size_t j = 0; j < specified.size(); ++j) {
      if (!specified[j].is_boolean()) {
        throw ValidationError("expected a boolean", index_path(path + ".specified", j));
      }
      key.specified.push_back(specified[j].get<bool>());
    }

    key.tolerance = Eigen::VectorXd::Constant(joints, default_tolerance);
    if (auto it = entry.find("tolerance"); it != entry.end()) {
      const std::string tpath = path + ".tolerance";
      if (it->is_number()) {
        key.tolerance.setConstant(it->get<double>());
      } else {
        require_array(*it, tpath);
        if (static_cast<int>(it->size()) != joints) {
          throw ValidationError("tolerance needs one entry per joint", tpath);
        }
        for (int j = 0; j < joints; ++j) key.tolerance[j] = get_number((*it)[j], index_path(tpath, j));
      }
    }
    out.poses.push_back(std::move(key));
  }
  out.validate();
  return out;
}

void save_motion(const Motion& motion, const std::filesystem::path& path,
                 const SkeletonSpec& skeleton) {
  write_text_file(path, motion_to_json(motion, skeleton).dump() + "\n");
}

Motion load_motion(const std::filesystem::path& path, const SkeletonSpec& expected) {
  return motion_from_json(parse_json(read_text_file(path)), expected);
}

void save_blocking(const BlockingSet& blocking, const std::filesystem::path& path) {
  write_text_file(path, blocking_to_json(blocking).dump() + "\n");
}

BlockingSet load_blocking(const std::filesystem::path& path, double default_tolerance) {
  return blocking_from_json(parse_json(read_text_file(path)), default_tolerance);
}

}  // namespace blockdetail
