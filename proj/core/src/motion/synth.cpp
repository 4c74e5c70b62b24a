#include "blockdetail/motion/synth.h"

#include "blockdetail/common/error.h"
#include "blockdetail/common/rng.h"

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace blockdetail {

namespace {

using Eigen::Vector3d;
constexpr double kPi = std::numbers::pi;
constexpr double kGravity = 9.81;

double smoothstep(double x) {
  x = std::clamp(x, 0.0, 1.0);
  return x * x * (3.0 - 2.0 * x);
}

double bump(double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  const double s = std::sin(kPi * x);
  return s * s;
}

/// Horizontal progress of a swinging foot: flat while the foot is close to
/// the ground at either end of the swing.
double gated_progress(double w) { return smoothstep((w - 0.25) / 0.5); }

struct ArmState {
  double swing = 0.0;      // sagittal angle, positive forward (rad)
  double abduction = 0.1;  // sideways raise (rad), pi/2 is the T-pose
  double bend = 0.25;      // extra elbow flexion (rad)
};

/// Everything needed to assemble one frame. Body frame: +x left, +y up,
/// +z forward; `yaw` rotates the body frame into the world.
struct BodyState {
  Vector3d root = Vector3d::Zero();
  double yaw = 0.0;
  double lean = 0.05;
  double head_turn = 0.0;
  ArmState left_arm;
  ArmState right_arm;
  Vector3d left_foot = Vector3d::Zero();  // world
  Vector3d right_foot = Vector3d::Zero();
};

Vector3d solve_knee(const Vector3d& hip, const Vector3d& ankle, const Vector3d& bend_hint) {
  const double l1 = desk::kThighLength;
  const double l2 = desk::kShinLength;
  Vector3d axis = ankle - hip;
  const double raw = axis.norm();
  if (raw < 1e-9) return hip + Vector3d(0.0, -l1, 0.0);
  axis /= raw;
  const double d = std::clamp(raw, 1e-6, l1 + l2 - 1e-9);
  const double along = (l1 * l1 - l2 * l2 + d * d) / (2.0 * d);
  const double across = std::sqrt(std::max(0.0, l1 * l1 - along * along));
  Vector3d perp = bend_hint - bend_hint.dot(axis) * axis;
  if (perp.norm() < 1e-9) perp = Vector3d::UnitZ() - Vector3d::UnitZ().dot(axis) * axis;
  perp.normalize();
  return hip + along * axis + across * perp;
}

Vector3d lean_about_x(const Vector3d& v, double angle) {
  return Eigen::AngleAxisd(angle, Vector3d::UnitX()) * v;
}

Pose assemble(const BodyState& s) {
  using namespace desk;
  const Eigen::Matrix3d to_world = Eigen::AngleAxisd(s.yaw, Vector3d::UnitY()).toRotationMatrix();
  const Eigen::Matrix3d to_body = to_world.transpose();
  std::array<Vector3d, kJointCount> body;
  body.fill(Vector3d::Zero());

  body[kSpine] = lean_about_x({0.0, 0.20, 0.0}, s.lean);
  body[kNeck] = lean_about_x({0.0, 0.48, 0.0}, s.lean);
  body[kHead] = lean_about_x({0.0, 0.62, 0.0}, s.lean) +
                Vector3d(0.03 * std::sin(s.head_turn), 0.0, 0.0);

  auto arm = [&](int shoulder, double side, const ArmState& a) {
    body[shoulder] = lean_about_x({side * 0.18, 0.44, 0.0}, s.lean);
    const Vector3d upper(side * std::sin(a.abduction), -std::cos(a.abduction) * std::cos(a.swing),
                         std::cos(a.abduction) * std::sin(a.swing));
    const double fore_angle = a.swing + a.bend;
    const Vector3d fore(side * std::sin(a.abduction), -std::cos(a.abduction) * std::cos(fore_angle),
                        std::cos(a.abduction) * std::sin(fore_angle));
    body[shoulder + 1] = body[shoulder] + kUpperArmLength * upper.normalized();
    body[shoulder + 2] = body[shoulder + 1] + kForearmLength * fore.normalized();
  };
  arm(kLeftShoulder, 1.0, s.left_arm);
  arm(kRightShoulder, -1.0, s.right_arm);

  auto leg = [&](int hip, double side, const Vector3d& foot_world) {
    body[hip] = {side * 0.10, -0.05, 0.0};
    body[hip + 2] = to_body * (foot_world - s.root);
    body[hip + 1] = solve_knee(body[hip], body[hip + 2], Vector3d::UnitZ());
  };
  leg(kLeftHip, 1.0, s.left_foot);
  leg(kRightHip, -1.0, s.right_foot);

  Pose pose(kJointCount, 3);
  pose.set_position(kRoot, s.root);
  for (int j = 1; j < kJointCount; ++j) pose.set_position(j, to_world * body[j]);
  // Planted feet must land exactly on the ground after the round trip
  // through the body frame.
  for (int ankle : {kLeftAnkle, kRightAnkle}) {
    const Vector3d& target = ankle == kLeftAnkle ? s.left_foot : s.right_foot;
    pose(ankle, 0) = target.x() - s.root.x();
    pose(ankle, 1) = target.y() - s.root.y();
    pose(ankle, 2) = target.z() - s.root.z();
  }
  return pose;
}

struct Placement {
  Vector3d start;
  double yaw;
  Eigen::Matrix3d to_world;

  Vector3d world(double lateral, double height, double forward) const {
    return start + to_world * Vector3d(lateral, 0.0, forward) + Vector3d(0.0, height, 0.0);
  }
};

Placement random_placement(Rng& rng) {
  std::uniform_real_distribution<double> pos(-0.5, 0.5);
  std::uniform_real_distribution<double> yaw(-0.5, 0.5);
  Placement p;
  const double x = pos(rng);
  const double z = pos(rng);
  p.start = Vector3d(x, 0.0, z);
  p.yaw = yaw(rng);
  p.to_world = Eigen::AngleAxisd(p.yaw, Vector3d::UnitY()).toRotationMatrix();
  return p;
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

MotionArray generate_walk(int frames, double fps, Rng& rng) {
  const Placement place = random_placement(rng);
  const double speed = uniform(rng, 0.7, 1.0);
  const double period = uniform(rng, 0.9, 1.05);
  const double phase0 = uniform(rng, 0.0, 1.0);
  const double arm_amp = uniform(rng, 0.25, 0.45);
  const double lift = uniform(rng, 0.10, 0.14);
  const double base = 0.80;
  const double stride = speed * period;

  auto foot = [&](double time, double offset, double lateral) {
    const double ph = time / period + phase0 + offset;
    const double cycle = std::floor(ph);
    const double u = ph - cycle;
    const double stance_start = (cycle - offset - phase0) * period;
    const double plant = speed * stance_start + stride / 4.0;
    if (u < 0.5) return place.world(lateral, 0.0, plant);
    const double w = (u - 0.5) / 0.5;
    return place.world(lateral, lift * bump(w), plant + stride * gated_progress(w));
  };

  MotionArray out({frames, desk::kJointCount, 3});
  for (int f = 0; f < frames; ++f) {
    const double time = f / fps;
    const double ph = time / period + phase0;
    BodyState s;
    s.yaw = place.yaw;
    const double sway = 0.02 * std::sin(2.0 * kPi * ph);
    s.root = place.world(sway, base + 0.012 * std::cos(4.0 * kPi * ph), speed * time);
    s.lean = 0.06;
    s.head_turn = 0.1 * std::sin(2.0 * kPi * ph);
    const double swing = arm_amp * std::cos(2.0 * kPi * ph);
    s.left_arm = {swing, 0.12, 0.3 + 0.15 * std::max(0.0, swing)};
    s.right_arm = {-swing, 0.12, 0.3 + 0.15 * std::max(0.0, -swing)};
    s.left_foot = foot(time, 0.0, 0.10);
    s.right_foot = foot(time, 0.5, -0.10);
    out.set_pose(f, assemble(s));
  }
  return out;
}

MotionArray generate_idle(int frames, double fps, Rng& rng) {
  const Placement place = random_placement(rng);
  const double ph1 = uniform(rng, 0.0, 2.0 * kPi);
  const double ph2 = uniform(rng, 0.0, 2.0 * kPi);
  const double abduction = uniform(rng, 0.05, 0.25);
  const double base = uniform(rng, 0.83, 0.85);

  MotionArray out({frames, desk::kJointCount, 3});
  for (int f = 0; f < frames; ++f) {
    const double time = f / fps;
    BodyState s;
    s.yaw = place.yaw;
    s.root = place.world(0.006 * std::sin(2.0 * kPi * time / 4.3 + ph2),
                         base + 0.004 * std::sin(2.0 * kPi * time / 3.1 + ph1), 0.0);
    s.lean = 0.03;
    s.head_turn = 0.2 * std::sin(2.0 * kPi * time / 5.0 + ph1);
    const double drift = 0.05 * std::sin(2.0 * kPi * time / 3.7 + ph2);
    s.left_arm = {drift, abduction, 0.2};
    s.right_arm = {-drift, abduction, 0.2};
    s.left_foot = place.world(0.10, 0.0, 0.0);
    s.right_foot = place.world(-0.10, 0.0, 0.0);
    out.set_pose(f, assemble(s));
  }
  return out;
}

MotionArray generate_kick(int frames, double fps, Rng& rng) {
  const Placement place = random_placement(rng);
  const double duration = frames / fps;
  const double length = uniform(rng, 0.8, 1.2);
  const double center = uniform(rng, 0.35, 0.65) * duration;
  const double reach = uniform(rng, 0.40, 0.60);
  const double height = uniform(rng, 0.25, 0.50);
  const bool left_kicks = uniform(rng, 0.0, 1.0) < 0.5;
  const double base = 0.83;

  MotionArray out({frames, desk::kJointCount, 3});
  for (int f = 0; f < frames; ++f) {
    const double time = f / fps;
    const double w = (time - (center - 0.5 * length)) / length;
    const double k = bump(w);
    BodyState s;
    s.yaw = place.yaw;
    s.root = place.world(0.0, base - 0.03 * k, -0.05 * k);
    s.lean = 0.05 - 0.15 * k;
    s.left_arm = {0.1 * k, 0.15 + 0.9 * k, 0.3};
    s.right_arm = {0.1 * k, 0.15 + 0.9 * k, 0.3};
    const Vector3d kick = place.world(left_kicks ? 0.10 : -0.10, height * k, reach * k);
    const Vector3d plant_left = place.world(0.10, 0.0, 0.0);
    const Vector3d plant_right = place.world(-0.10, 0.0, 0.0);
    s.left_foot = left_kicks ? kick : plant_left;
    s.right_foot = left_kicks ? plant_right : kick;
    out.set_pose(f, assemble(s));
  }
  return out;
}

MotionArray generate_jump(int frames, double fps, Rng& rng) {
  const Placement place = random_placement(rng);
  const double duration = frames / fps;
  const double apex = uniform(rng, 0.18, 0.35);
  const double flight = 2.0 * std::sqrt(2.0 * apex / kGravity);
  const double takeoff_speed = 4.0 * apex / flight;
  const double crouch = uniform(rng, 0.30, 0.45);
  const double landing = uniform(rng, 0.30, 0.45);
  const double distance = uniform(rng, 0.0, 0.4);
  const double base = 0.83;
  const double earliest = crouch + 0.1;
  const double latest = duration - flight - landing - 0.1;
  const double takeoff = latest > earliest ? uniform(rng, earliest, latest)
                                           : 0.5 * (duration - flight);
  const double touchdown = takeoff + flight;

  MotionArray out({frames, desk::kJointCount, 3});
  for (int f = 0; f < frames; ++f) {
    const double time = f / fps;
    double height = base;
    double dip = 0.0;  // 0..1 crouch amount for the arms
    double air = 0.0;  // 0..1 flight progress bump
    double travel = 0.0;
    double foot_lift = 0.0;
    if (time >= takeoff - crouch && time < takeoff) {
      // Cubic Hermite from rest to take-off velocity: dips, then launches.
      const double q = (time - (takeoff - crouch)) / crouch;
      height = base + (q * q * q - q * q) * takeoff_speed * crouch;
      dip = bump(q);
    } else if (time >= takeoff && time < touchdown) {
      const double u = (time - takeoff) / flight;
      height = base + 4.0 * apex * u * (1.0 - u);
      air = bump(u);
      travel = distance * gated_progress(u);
      const double ease = smoothstep(std::min(u, 1.0 - u) / 0.15);
      foot_lift = 4.0 * apex * u * (1.0 - u) * ease;
    } else if (time >= touchdown && time < touchdown + landing) {
      const double q = (time - touchdown) / landing;
      height = base - (q - 2.0 * q * q + q * q * q) * takeoff_speed * landing;
      dip = bump(q);
    }
    if (time >= touchdown) travel = distance;

    BodyState s;
    s.yaw = place.yaw;
    s.root = place.world(0.0, height, travel);
    s.lean = 0.05 + 0.25 * dip - 0.05 * air;
    const ArmState arms{-0.7 * dip + 1.4 * air, 0.15 + 0.2 * air, 0.3 + 0.3 * dip};
    s.left_arm = arms;
    s.right_arm = arms;
    s.left_foot = place.world(0.10, foot_lift, travel);
    s.right_foot = place.world(-0.10, foot_lift, travel);
    out.set_pose(f, assemble(s));
  }
  return out;
}

}  // namespace

MotionKind parse_motion_kind(std::string_view name) {
  if (name == "walk") return MotionKind::walk;
  if (name == "kick") return MotionKind::kick;
  if (name == "jump") return MotionKind::jump;
  if (name == "idle") return MotionKind::idle;
  throw ValidationError("unknown motion kind '" + std::string(name) + "'", "kind");
}

std::string_view to_string(MotionKind kind) {
  switch (kind) {
    case MotionKind::walk: return "walk";
    case MotionKind::kick: return "kick";
    case MotionKind::jump: return "jump";
    case MotionKind::idle: return "idle";
  }
  return "unknown";
}

Motion synth_motion(MotionKind kind, int frames, std::uint64_t seed) {
  if (frames < 2) throw ValidationError("synth_motion needs F >= 2", "frames");
  Rng rng(mix_seed(seed));
  MotionArray data;
  switch (kind) {
    case MotionKind::walk: data = generate_walk(frames, kDefaultFps, rng); break;
    case MotionKind::kick: data = generate_kick(frames, kDefaultFps, rng); break;
    case MotionKind::jump: data = generate_jump(frames, kDefaultFps, rng); break;
    case MotionKind::idle: data = generate_idle(frames, kDefaultFps, rng); break;
    default: throw ValidationError("unknown motion kind", "kind");
  }
  return Motion(std::move(data), kDefaultFps);
}

std::vector<Motion> synth_dataset(int count, int frames, std::uint64_t seed) {
  static constexpr MotionKind kKinds[] = {MotionKind::walk, MotionKind::kick, MotionKind::jump,
                                          MotionKind::idle};
  std::vector<Motion> clips;
  clips.reserve(count);
  for (int i = 0; i < count; ++i) {
    const std::uint64_t clip_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    clips.push_back(synth_motion(kKinds[clip_seed % 4], frames, clip_seed));
  }
  return clips;
}

}  // namespace blockdetail
