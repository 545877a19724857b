#include <algorithm>
#include <cmath>

#include "icprl/errors.hpp"
#include "icprl/sim.hpp"
#include "sim_internal.hpp"

namespace icprl::sim {

int feature_dim(EnvKind env) { return env == EnvKind::GridDrop ? kGridFeatureDim : kTimedFeatureDim; }

int cell_of(const Bounds& bounds, Vec2 p) {
  int col = static_cast<int>(std::floor((p.x - bounds.min.x) / bounds.width() * kGridSide));
  int row = static_cast<int>(std::floor((bounds.max.y - p.y) / bounds.height() * kGridSide));
  col = std::clamp(col, 0, kGridSide - 1);
  row = std::clamp(row, 0, kGridSide - 1);
  return row * kGridSide + col + 1;
}

Vec2 cell_center(const Bounds& bounds, int cell) {
  int col = (cell - 1) % kGridSide;
  int row = (cell - 1) / kGridSide;
  double cw = bounds.width() / kGridSide;
  double ch = bounds.height() / kGridSide;
  return {bounds.min.x + (col + 0.5) * cw, bounds.max.y - (row + 0.5) * ch};
}

namespace {

char role_glyph(Role role) {
  switch (role) {
    case Role::Agent: return 'A';
    case Role::GreenTargetBall: return 'G';
    case Role::TargetRegion: return 'T';
    case Role::RedBall: return 'R';
    case Role::RemovableBlock: return 'B';
    case Role::Static: return '#';
  }
  return '#';
}

template <typename Fn>
void for_each_segment_sample(const Segment& s, Fn&& fn) {
  constexpr int kSamples = 32;
  for (int i = 0; i <= kSamples; ++i) {
    double t = static_cast<double>(i) / kSamples;
    fn(s.a + (s.b - s.a) * t);
  }
}

void paint(const Scene& scene, std::string& raster) {
  const Bounds& bd = scene.bounds;
  const double cw = bd.width() / kRasterSide;
  const double ch = bd.height() / kRasterSide;
  auto raster_index = [&](Vec2 p) {
    int col = std::clamp(static_cast<int>(std::floor((p.x - bd.min.x) / cw)), 0, kRasterSide - 1);
    int row = std::clamp(static_cast<int>(std::floor((bd.max.y - p.y) / ch)), 0, kRasterSide - 1);
    return row * kRasterSide + col;
  };
  for (const auto& b : scene.bodies) {
    char glyph = role_glyph(b.role);
    if (b.is_segment()) {
      for_each_segment_sample(b.segment(), [&](Vec2 p) { raster[raster_index(p)] = glyph; });
      continue;
    }
    const double r = b.radius();
    bool painted = false;
    for (int row = 0; row < kRasterSide; ++row) {
      for (int col = 0; col < kRasterSide; ++col) {
        Vec2 c{bd.min.x + (col + 0.5) * cw, bd.max.y - (row + 0.5) * ch};
        if (length(c - b.position) <= r) {
          raster[row * kRasterSide + col] = glyph;
          painted = true;
        }
      }
    }
    if (!painted) raster[raster_index(b.position)] = glyph;
  }
}

void grid_features(const Scene& scene, std::vector<double>& f) {
  const Bounds& bd = scene.bounds;
  const double w = bd.width();
  const double h = bd.height();
  const Body* green = nullptr;
  Vec2 target_lo{0, 0};
  Vec2 target_hi{0, 0};
  bool have_target = false;
  for (const auto& b : scene.bodies) {
    if (b.role == Role::GreenTargetBall && b.is_circle()) {
      green = &b;
      f[cell_of(bd, b.position) - 1] = 1.0;
    } else if (b.is_segment()) {
      const int offset = b.role == Role::TargetRegion ? kGridCells : 2 * kGridCells;
      for_each_segment_sample(b.segment(), [&](Vec2 p) { f[offset + cell_of(bd, p) - 1] = 1.0; });
      if (b.role == Role::TargetRegion) {
        const Segment& s = b.segment();
        Vec2 lo{std::min(s.a.x, s.b.x), std::min(s.a.y, s.b.y)};
        Vec2 hi{std::max(s.a.x, s.b.x), std::max(s.a.y, s.b.y)};
        if (!have_target) {
          target_lo = lo;
          target_hi = hi;
          have_target = true;
        } else {
          target_lo = {std::min(target_lo.x, lo.x), std::min(target_lo.y, lo.y)};
          target_hi = {std::max(target_hi.x, hi.x), std::max(target_hi.y, hi.y)};
        }
      }
    }
  }
  double* s = f.data() + 3 * kGridCells;
  Vec2 tc = (target_lo + target_hi) * 0.5;
  if (green) {
    s[0] = (green->position.x - bd.min.x) / w;
    s[1] = (green->position.y - bd.min.y) / h;
    s[2] = green->radius();
  }
  if (have_target) {
    s[3] = (tc.x - bd.min.x) / w;
    s[4] = (tc.y - bd.min.y) / h;
    s[5] = 0.5 * (target_hi.x - target_lo.x) / w;
  }
  if (green && have_target) {
    s[6] = (tc.x - green->position.x) / w;
    s[7] = (tc.y - green->position.y) / h;
  }
}

void timed_features(const Scene& scene, std::vector<double>& f) {
  const Bounds& bd = scene.bounds;
  for (const auto& b : scene.bodies) {
    if (b.id < 0 || b.id >= kTimedSlots) continue;
    double* slot = f.data() + b.id * kTimedSlotWidth;
    slot[0] = 1.0;
    slot[1] = b.role == Role::RedBall ? 1.0 : 0.0;
    slot[2] = b.removable ? 1.0 : 0.0;
    slot[3] = (b.is_segment() && !b.removable) ? 1.0 : 0.0;
    slot[4] = (b.position.x - bd.min.x) / bd.width();
    slot[5] = (b.position.y - bd.min.y) / bd.height();
    slot[6] = b.is_circle() ? b.radius() / bd.width()
                            : 0.5 * length(b.segment().b - b.segment().a) / bd.width();
  }
  f[kTimedSlots * kTimedSlotWidth] = (scene.abyss_y - bd.min.y) / bd.height();
}

}  // namespace

Observation render_observation(const Scene& scene) {
  Observation obs;
  obs.env = scene.env;
  obs.overlay = scene.env == EnvKind::GridDrop ? OverlayKind::Grid8x8 : OverlayKind::IndexIds;
  obs.raster.assign(kRasterSide * kRasterSide, '.');
  paint(scene, obs.raster);
  for (const auto& b : scene.bodies) {
    obs.annotations.push_back(
        Annotation{b.id, b.role, cell_of(scene.bounds, b.position), b.position.x, b.position.y});
  }
  obs.features.assign(feature_dim(scene.env), 0.0);
  if (scene.env == EnvKind::GridDrop) {
    grid_features(scene, obs.features);
  } else {
    timed_features(scene, obs.features);
  }
  return obs;
}

Scene apply_action(const Scene& scene, const EnvAction& action) {
  if (action.kind() != scene.env) {
    throw InvalidAction("action for " + std::string(to_string(action.kind())) + " applied to a " +
                        std::string(to_string(scene.env)) + " scene");
  }
  Scene next = scene;
  if (scene.env == EnvKind::GridDrop) {
    const GridPlace& p = action.grid();
    if (p.cell < 1 || p.cell > kGridCells) {
      throw InvalidAction("cell " + std::to_string(p.cell) + " outside [1,64]");
    }
    if (p.radius < 1 || p.radius > kGridRadii) {
      throw InvalidAction("radius " + std::to_string(p.radius) + " outside [1,8]");
    }
    const double cw = scene.bounds.width() / kGridSide;
    next.bodies.push_back(Body::circle(scene.next_free_id(), Role::Agent, cell_center(scene.bounds, p.cell),
                                       p.radius / 16.0 * cw));
    return next;
  }
  for (const auto& e : action.events().events()) {
    if (e.time_step < 0) throw InvalidAction("negative removal time");
    auto it = std::find_if(next.bodies.begin(), next.bodies.end(), [&](const Body& b) { return b.id == e.index; });
    if (it == next.bodies.end()) throw InvalidAction("unknown body index " + std::to_string(e.index));
    if (!it->removable) throw InvalidAction("body " + std::to_string(e.index) + " is not removable");
    if (it->remove_at) throw InvalidAction("body " + std::to_string(e.index) + " scheduled twice");
    it->remove_at = e.seconds();
  }
  return next;
}

namespace {

bool all_slow(const Scene& scene) {
  for (const auto& b : scene.bodies) {
    if (b.is_circle() && length(b.velocity) >= kSpeedEpsilon) return false;
  }
  return true;
}

}  // namespace

SimulationResult simulate_until_stable(const Scene& scene, int max_steps, double dt) {
  if (max_steps < kFrameCount) throw InvalidAction("simulate_until_stable: max-steps must be >= 5");
  std::vector<Scene> trace;
  trace.reserve(static_cast<std::size_t>(std::min(max_steps, 4096)) + 1);
  Scene current = scene;
  update_latch(current);
  trace.push_back(current);
  StepWorkspace ws;
  int quiet = 0;
  bool stable = false;
  int executed = 0;
  while (executed < max_steps) {
    step_in_place(current, dt, ws);
    ++executed;
    trace.push_back(current);
    quiet = all_slow(current) ? quiet + 1 : 0;
    if (quiet >= kStabilityWindow) {
      stable = true;
      break;
    }
  }
  SimulationResult result;
  result.frames.stable = stable;
  result.frames.steps = executed;
  for (int j = 0; j < kFrameCount; ++j) {
    const std::size_t index = static_cast<std::size_t>((j * executed + 2) / (kFrameCount - 1));
    const Scene& snap = trace[index];
    result.frames.frames[j] = Frame{static_cast<double>(index) * dt, render_observation(snap)};
  }
  result.terminal = std::move(current);
  return result;
}

bool check_success(const Scene& terminal) {
  if (terminal.env == EnvKind::GridDrop) {
    if (terminal.goal_latched) return true;
    Scene probe = terminal;
    update_latch(probe);
    return probe.goal_latched;
  }
  bool any_red = false;
  for (const auto& b : terminal.bodies) {
    if (b.role != Role::RedBall) continue;
    any_red = true;
    if (!(b.position.y < terminal.abyss_y)) return false;
  }
  return any_red;
}

bool run_outcome(const Scene& scene, const EnvAction& action, int max_steps) {
  Scene current = apply_action(scene, action);
  update_latch(current);
  if (current.goal_latched) return true;
  StepWorkspace ws;
  int quiet = 0;
  for (int i = 0; i < max_steps; ++i) {
    step_in_place(current, kDefaultDt, ws);
    if (current.goal_latched) return true;
    quiet = all_slow(current) ? quiet + 1 : 0;
    if (quiet >= kStabilityWindow) break;
  }
  return check_success(current);
}

}  // namespace icprl::sim
