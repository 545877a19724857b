#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "icprl/action.hpp"

namespace icprl::sim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2& operator+=(Vec2 o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  Vec2& operator-=(Vec2 o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  bool operator==(const Vec2&) const = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double length(Vec2 a) { return std::sqrt(dot(a, a)); }

enum class Role : std::uint8_t {
  Agent,
  GreenTargetBall,
  TargetRegion,
  RedBall,
  RemovableBlock,
  Static,
};

std::string_view to_string(Role role);
Role role_from_string(std::string_view name);

struct Circle {
  double radius = 0.1;
  bool operator==(const Circle&) const = default;
};

/// Static line segment between two endpoints (absolute coordinates).
struct Segment {
  Vec2 a;
  Vec2 b;
  bool operator==(const Segment&) const = default;
};

using Shape = std::variant<Circle, Segment>;

/// Circles are dynamic; segments are static (infinite mass). The position of
/// a segment body is its midpoint.
struct Body {
  int id = 0;
  Shape shape = Circle{};
  Vec2 position;
  Vec2 velocity;
  Role role = Role::Static;
  bool removable = false;
  std::optional<double> remove_at;  // seconds; set by a TimedRemove action

  bool is_circle() const { return std::holds_alternative<Circle>(shape); }
  bool is_segment() const { return std::holds_alternative<Segment>(shape); }
  double radius() const { return std::get<Circle>(shape).radius; }
  const Segment& segment() const { return std::get<Segment>(shape); }
  double mass() const;  // radius^2 for circles, infinite for segments

  static Body circle(int id, Role role, Vec2 position, double radius, Vec2 velocity = {});
  static Body segment(int id, Role role, Vec2 a, Vec2 b, bool removable = false);

  bool operator==(const Body&) const = default;
};

struct Bounds {
  Vec2 min{0.0, 0.0};
  Vec2 max{8.0, 8.0};
  bool contains(Vec2 p) const { return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y; }
  double width() const { return max.x - min.x; }
  double height() const { return max.y - min.y; }
  bool operator==(const Bounds&) const = default;
};

/// Full hidden physical state of a puzzle instance.
struct Scene {
  EnvKind env = EnvKind::GridDrop;
  std::vector<Body> bodies;
  Vec2 gravity{0.0, -9.8};
  double restitution = 0.3;
  Bounds bounds;
  double abyss_y = 1.0;  // TimedRemove only
  double time = 0.0;
  std::int64_t steps = 0;
  bool goal_latched = false;  // GridDrop: green ball has touched the target

  const Body* find(int id) const;
  int next_free_id() const;
  bool operator==(const Scene&) const = default;
};

/// Checks the structural invariants (radius > 0, distinct segment endpoints,
/// positions inside bounds at t = 0, env-kind role requirements).
/// Returns an empty string when valid, otherwise a description.
std::string validate(const Scene& scene);

// Physics constants.
inline constexpr double kDefaultDt = 0.01;
inline constexpr double kSpeedEpsilon = 1e-3;
inline constexpr int kStabilityWindow = 25;
inline constexpr int kDefaultMaxSteps = 2000;
inline constexpr int kFrameCount = 5;
inline constexpr double kContactSlop = 1e-4;
inline constexpr double kTouchTolerance = 1e-2;
/// Approach speeds below this bounce inelastically, so resting contact
/// settles instead of jittering.
inline constexpr double kRestitutionThreshold = 0.25;

/// Advances the scene by one semi-implicit Euler step with impulse contact
/// resolution. Throws SimulationDiverged on non-finite state.
Scene step(const Scene& scene, double dt = kDefaultDt);

/// Kinetic plus gravitational potential energy (potential measured from the
/// lower bound).
double total_energy(const Scene& scene);

// ---------------------------------------------------------------------------
// Observations

enum class OverlayKind : std::uint8_t { Grid8x8, IndexIds };

struct Annotation {
  int element_id = 0;
  Role role = Role::Static;
  int cell = 1;  // 1..64 on the 8x8 overlay
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Annotation&) const = default;
};

inline constexpr int kRasterSide = 32;
inline constexpr int kGridFeatureDim = 3 * kGridCells + 8;
inline constexpr int kTimedSlots = 12;
inline constexpr int kTimedSlotWidth = 7;
inline constexpr int kTimedFeatureDim = kTimedSlots * kTimedSlotWidth + 1;

int feature_dim(EnvKind env);

struct Observation {
  EnvKind env = EnvKind::GridDrop;
  OverlayKind overlay = OverlayKind::Grid8x8;
  /// kRasterSide x kRasterSide, row 0 at the top. One character per cell:
  /// '.' empty, 'A' agent, 'G' green ball, 'T' target, 'R' red ball,
  /// 'B' removable block, '#' static.
  std::string raster;
  std::vector<Annotation> annotations;
  std::vector<double> features;
  bool operator==(const Observation&) const = default;
};

Observation render_observation(const Scene& scene);

/// 8x8 overlay cell (1..64) containing a point.
int cell_of(const Bounds& bounds, Vec2 p);
Vec2 cell_center(const Bounds& bounds, int cell);

// ---------------------------------------------------------------------------
// Actions and episodes

/// GridDrop inserts an agent circle; TimedRemove schedules removals.
/// Throws InvalidAction for malformed or inapplicable actions.
Scene apply_action(const Scene& scene, const EnvAction& action);

struct Frame {
  double time = 0.0;
  Observation observation;
  bool operator==(const Frame&) const = default;
};

struct FrameSet {
  std::array<Frame, kFrameCount> frames;
  bool stable = false;
  std::int64_t steps = 0;  // executed span
  bool operator==(const FrameSet&) const = default;
};

struct SimulationResult {
  FrameSet frames;
  Scene terminal;
};

/// Steps until every dynamic body is slower than kSpeedEpsilon for
/// kStabilityWindow consecutive steps, or max_steps is reached. Frames are
/// sampled uniformly over the executed span, the first at t = 0.
SimulationResult simulate_until_stable(const Scene& scene, int max_steps = kDefaultMaxSteps,
                                       double dt = kDefaultDt);

bool check_success(const Scene& terminal);

/// Success-only rollout: identical dynamics to simulate_until_stable but stops
/// as soon as the outcome can no longer change (latched GridDrop goal) and
/// records no frames.
bool run_outcome(const Scene& scene, const EnvAction& action, int max_steps = kDefaultMaxSteps);

}  // namespace icprl::sim
