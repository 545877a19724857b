#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "icprl/errors.hpp"
#include "icprl/sim.hpp"
#include "sim_internal.hpp"

namespace icprl::sim {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::Agent: return "agent";
    case Role::GreenTargetBall: return "green-target-ball";
    case Role::TargetRegion: return "target-region";
    case Role::RedBall: return "red-ball";
    case Role::RemovableBlock: return "removable-block";
    case Role::Static: return "static";
  }
  return "static";
}

Role role_from_string(std::string_view name) {
  for (Role r : {Role::Agent, Role::GreenTargetBall, Role::TargetRegion, Role::RedBall,
                 Role::RemovableBlock, Role::Static}) {
    if (to_string(r) == name) return r;
  }
  throw FormatError("unknown role '" + std::string(name) + "'");
}

double Body::mass() const {
  if (is_circle()) return radius() * radius();
  return std::numeric_limits<double>::infinity();
}

Body Body::circle(int id, Role role, Vec2 position, double radius, Vec2 velocity) {
  Body b;
  b.id = id;
  b.shape = Circle{radius};
  b.position = position;
  b.velocity = velocity;
  b.role = role;
  return b;
}

Body Body::segment(int id, Role role, Vec2 a, Vec2 b, bool removable) {
  Body body;
  body.id = id;
  body.shape = Segment{a, b};
  body.position = (a + b) * 0.5;
  body.role = role;
  body.removable = removable;
  return body;
}

const Body* Scene::find(int id) const {
  for (const auto& b : bodies) {
    if (b.id == id) return &b;
  }
  return nullptr;
}

int Scene::next_free_id() const {
  int next = 0;
  for (const auto& b : bodies) next = std::max(next, b.id + 1);
  return next;
}

std::string validate(const Scene& scene) {
  std::ostringstream err;
  int greens = 0;
  int reds = 0;
  for (const auto& b : scene.bodies) {
    if (b.is_circle()) {
      if (!(b.radius() > 0.0)) err << "body " << b.id << ": radius must be > 0; ";
    } else if (b.segment().a == b.segment().b) {
      err << "body " << b.id << ": segment endpoints coincide; ";
    }
    if (scene.time == 0.0 && !scene.bounds.contains(b.position)) {
      err << "body " << b.id << ": outside bounds; ";
    }
    if (b.role == Role::GreenTargetBall) ++greens;
    if (b.role == Role::RedBall) ++reds;
  }
  if (scene.env == EnvKind::GridDrop && greens != 1) {
    err << "GridDrop scene needs exactly one green-target-ball (found " << greens << "); ";
  }
  if (scene.env == EnvKind::TimedRemove && reds < 1) {
    err << "TimedRemove scene needs at least one red-ball; ";
  }
  if (!(scene.restitution >= 0.0 && scene.restitution <= 1.0)) err << "restitution outside [0,1]; ";
  return err.str();
}

namespace {

constexpr int kSolverIterations = 10;


Vec2 closest_point(const Segment& s, Vec2 p) {
  Vec2 d = s.b - s.a;
  double t = dot(p - s.a, d) / dot(d, d);
  t = std::clamp(t, 0.0, 1.0);
  return s.a + d * t;
}

double relative_normal_velocity(const std::vector<Body>& bodies, const Contact& c) {
  Vec2 va = bodies[c.a].velocity;
  Vec2 vb = c.b >= 0 ? bodies[c.b].velocity : Vec2{};
  return dot(va - vb, c.normal);
}

void apply_impulse(std::vector<Body>& bodies, const Contact& c, double lambda) {
  bodies[c.a].velocity += c.normal * (lambda * c.inv_mass_a);
  if (c.b >= 0 && c.inv_mass_b > 0.0) bodies[c.b].velocity -= c.normal * (lambda * c.inv_mass_b);
}

void solve(std::vector<Body>& bodies, std::vector<Contact>& contacts) {
  for (int it = 0; it < kSolverIterations; ++it) {
    for (auto& c : contacts) {
      double vn = relative_normal_velocity(bodies, c);
      double mass = 1.0 / (c.inv_mass_a + c.inv_mass_b);
      double lambda = mass * (c.target - vn);
      double updated = std::max(c.accumulated + lambda, 0.0);
      double delta = updated - c.accumulated;
      c.accumulated = updated;
      if (delta != 0.0) apply_impulse(bodies, c, delta);
    }
  }
}

void collect_contacts(const Scene& scene, double margin_time, std::vector<Contact>& out) {
  out.clear();
  const auto& bodies = scene.bodies;
  const double g = length(scene.gravity);
  const int n = static_cast<int>(bodies.size());
  for (int i = 0; i < n; ++i) {
    const Body& a = bodies[i];
    if (!a.is_circle()) continue;
    const double ra = a.radius();
    const double inv_a = 1.0 / a.mass();
    const double speed_a = length(a.velocity);
    auto consider = [&](int other, Vec2 normal, double gap, double inv_b, double speed_b) {
      double margin = kContactSlop + (speed_a + speed_b + g * margin_time) * margin_time;
      if (gap > margin) return;
      out.push_back(Contact{i, other, normal, gap, inv_a, inv_b, 0.0, 0.0});
    };
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const Body& b = bodies[j];
      if (b.is_circle()) {
        if (j < i) continue;  // each circle pair once, owned by the lower index
        Vec2 d = a.position - b.position;
        double dist = length(d);
        Vec2 normal = dist > 1e-12 ? d * (1.0 / dist) : Vec2{0.0, 1.0};
        consider(j, normal, dist - ra - b.radius(), 1.0 / b.mass(), length(b.velocity));
      } else {
        const Segment& s = b.segment();
        Vec2 cp = closest_point(s, a.position);
        Vec2 d = a.position - cp;
        double dist = length(d);
        Vec2 normal;
        if (dist > 1e-12) {
          normal = d * (1.0 / dist);
        } else {
          Vec2 t = s.b - s.a;
          normal = Vec2{-t.y, t.x} * (1.0 / length(t));
        }
        consider(j, normal, dist - ra, 0.0, 0.0);
      }
    }
    const Bounds& bd = scene.bounds;
    consider(-1, {1.0, 0.0}, a.position.x - ra - bd.min.x, 0.0, 0.0);
    consider(-1, {-1.0, 0.0}, bd.max.x - a.position.x - ra, 0.0, 0.0);
    consider(-1, {0.0, 1.0}, a.position.y - ra - bd.min.y, 0.0, 0.0);
    consider(-1, {0.0, -1.0}, bd.max.y - a.position.y - ra, 0.0, 0.0);
  }
}

bool green_touches_target(const Scene& scene) {
  for (const auto& g : scene.bodies) {
    if (g.role != Role::GreenTargetBall || !g.is_circle()) continue;
    for (const auto& t : scene.bodies) {
      if (t.role != Role::TargetRegion) continue;
      double gap;
      if (t.is_segment()) {
        gap = length(g.position - closest_point(t.segment(), g.position)) - g.radius();
      } else {
        gap = length(g.position - t.position) - g.radius() - t.radius();
      }
      if (gap <= kTouchTolerance) return true;
    }
  }
  return false;
}

}  // namespace

void update_latch(Scene& scene) {
  if (scene.env == EnvKind::GridDrop && !scene.goal_latched && green_touches_target(scene)) {
    scene.goal_latched = true;
  }
}

void step_in_place(Scene& scene, double dt, StepWorkspace& ws) {
  if (!(dt > 0.0)) throw InvalidAction("step: dt must be positive");
  update_latch(scene);

  auto& bodies = scene.bodies;
  std::erase_if(bodies, [&](const Body& b) { return b.remove_at && *b.remove_at <= scene.time + 1e-9; });

  const double e = scene.restitution;
  collect_contacts(scene, dt, ws.contacts);
  auto& contacts = ws.contacts;

  // Bounce: contacts already touching, or reached within this step at the
  // current approach speed, get their restitution target from the pre-gravity
  // velocity.
  ws.active.clear();
  for (const auto& c : contacts) {
    double vn = relative_normal_velocity(bodies, c);
    bool reached = c.gap <= kContactSlop + std::max(0.0, -vn) * dt;
    if (!reached) continue;
    Contact k = c;
    k.target = (vn < -kRestitutionThreshold) ? -e * vn : 0.0;
    ws.active.push_back(k);
  }
  solve(bodies, ws.active);

  for (auto& b : bodies) {
    if (b.is_circle()) b.velocity += scene.gravity * dt;
  }

  // Speculative pass: never close more than the remaining gap in one step.
  for (auto& c : contacts) {
    c.accumulated = 0.0;
    c.target = c.gap > 0.0 ? -c.gap / dt : 0.0;
  }
  solve(bodies, contacts);

  for (auto& b : bodies) {
    if (!b.is_circle()) continue;
    b.position += b.velocity * dt;
    if (!std::isfinite(b.position.x) || !std::isfinite(b.position.y) || !std::isfinite(b.velocity.x) ||
        !std::isfinite(b.velocity.y)) {
      throw SimulationDiverged("body " + std::to_string(b.id) + " diverged at t=" + std::to_string(scene.time));
    }
  }

  scene.steps += 1;
  scene.time = static_cast<double>(scene.steps) * dt;
  update_latch(scene);
}

Scene step(const Scene& scene, double dt) {
  Scene next = scene;
  StepWorkspace ws;
  step_in_place(next, dt, ws);
  return next;
}

double total_energy(const Scene& scene) {
  double energy = 0.0;
  for (const auto& b : scene.bodies) {
    if (!b.is_circle()) continue;
    double m = b.mass();
    energy += 0.5 * m * dot(b.velocity, b.velocity);
    energy -= m * dot(scene.gravity, b.position - scene.bounds.min);
  }
  return energy;
}

}  // namespace icprl::sim
