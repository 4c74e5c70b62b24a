#pragma once

#include "blockdetail/motion/blocking.h"
#include "blockdetail/motion/motion.h"
#include "blockdetail/motion/skeleton.h"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string>
#include <string_view>

namespace blockdetail {

inline constexpr int kFormatVersion = 1;

/// Parses a JSON document. Syntax errors become ParseError carrying the byte
/// offset reported by the parser.
nlohmann::json parse_json(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames, so readers never observe a
/// half-written file.
void write_text_file(const std::filesystem::path& path, std::string_view text);

/// J x D nested rows.
nlohmann::json pose_to_json(const Pose& pose);
/// Inverse of pose_to_json; `path` prefixes field paths in errors.
Pose pose_from_json(const nlohmann::json& rows, int joints, int dims, const std::string& path);

nlohmann::json skeleton_to_json(const SkeletonSpec& skeleton);
SkeletonSpec skeleton_from_json(const nlohmann::json& doc);

/// {format_version, skeleton, fps, frames: F x J x 3}. Numbers are written in
/// shortest round-trip form, so save/load is bit-exact.
nlohmann::json motion_to_json(const Motion& motion, const SkeletonSpec& skeleton);

/// Validates the document against `expected`: joint names and J must agree
/// and every joint must carry D=3 coordinates. Rejects F < 2 and null or
/// non-numeric entries (reported by frame/joint/coord).
Motion motion_from_json(const nlohmann::json& doc, const SkeletonSpec& expected);

/// {format_version, timeline_length, poses: [{frame, features, specified,
/// tolerance}]}.
nlohmann::json blocking_to_json(const BlockingSet& blocking);

/// Structural validation only; callers that accept fresh user input should
/// follow up with BlockingSet::validate_input. A missing tolerance, or a
/// scalar one, is broadcast to every joint.
BlockingSet blocking_from_json(const nlohmann::json& doc, double default_tolerance = 0.85);

void save_motion(const Motion& motion, const std::filesystem::path& path,
                 const SkeletonSpec& skeleton = SkeletonSpec::desk());
Motion load_motion(const std::filesystem::path& path,
                   const SkeletonSpec& expected = SkeletonSpec::desk());

void save_blocking(const BlockingSet& blocking, const std::filesystem::path& path);
BlockingSet load_blocking(const std::filesystem::path& path, double default_tolerance = 0.85);

}  // namespace blockdetail
