#pragma once

#include "blockdetail/motion/motion.h"

#include <cstdint>
#include <string_view>
#include <vector>

namespace blockdetail {

enum class MotionKind { walk, kick, jump, idle };

/// Throws ValidationError for anything other than walk/kick/jump/idle.
MotionKind parse_motion_kind(std::string_view name);
std::string_view to_string(MotionKind kind);

/// Deterministic procedural clip on the desk skeleton at 20 fps.
///
/// All kinds are C1-smooth. Planted ankles sit exactly on the ground plane
/// (y = 0) with zero horizontal velocity, and a swinging foot only moves
/// horizontally while it is well above the ground, so walk and idle clips
/// have no foot slide. Knees come from two-bone IK between hip and ankle.
Motion synth_motion(MotionKind kind, int frames, std::uint64_t seed);

/// `count` clips of mixed kinds, clip i seeded from (seed, i).
std::vector<Motion> synth_dataset(int count, int frames, std::uint64_t seed);

}  // namespace blockdetail
