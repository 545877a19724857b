#include "icprl/tasks.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "icprl/errors.hpp"
#include "icprl/rng.hpp"
#include "sim_internal.hpp"

namespace icprl::sim {

namespace {

std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_scene(std::ostream& out, const Scene& scene) {
  out << "icprl-scene 1\n";
  out << "env " << to_string(scene.env) << "\n";
  out << "gravity " << fmt_real(scene.gravity.x) << ' ' << fmt_real(scene.gravity.y) << "\n";
  out << "restitution " << fmt_real(scene.restitution) << "\n";
  out << "bounds " << fmt_real(scene.bounds.min.x) << ' ' << fmt_real(scene.bounds.min.y) << ' '
      << fmt_real(scene.bounds.max.x) << ' ' << fmt_real(scene.bounds.max.y) << "\n";
  out << "abyss " << fmt_real(scene.abyss_y) << "\n";
  for (const auto& b : scene.bodies) {
    if (b.is_circle()) {
      out << "circle " << b.id << ' ' << to_string(b.role) << ' ' << fmt_real(b.position.x) << ' '
          << fmt_real(b.position.y) << ' ' << fmt_real(b.velocity.x) << ' ' << fmt_real(b.velocity.y) << ' '
          << fmt_real(b.radius()) << "\n";
    } else {
      const Segment& s = b.segment();
      out << "segment " << b.id << ' ' << to_string(b.role) << ' ' << fmt_real(s.a.x) << ' ' << fmt_real(s.a.y)
          << ' ' << fmt_real(s.b.x) << ' ' << fmt_real(s.b.y) << ' ' << (b.removable ? 1 : 0) << "\n";
    }
  }
  out << "end\n";
}

Scene read_scene(std::istream& in) {
  Scene scene;
  std::string line;
  bool header = false;
  bool ended = false;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    auto fail = [&](const std::string& why) {
      throw FormatError("scene line " + std::to_string(line_no) + ": " + why);
    };
    if (!header) {
      int version = 0;
      if (key != "icprl-scene" || !(ls >> version)) fail("missing 'icprl-scene <version>' header");
      if (version != 1) fail("unsupported scene version " + std::to_string(version));
      header = true;
      continue;
    }
    if (key == "env") {
      std::string name;
      ls >> name;
      scene.env = env_kind_from_string(name);
    } else if (key == "gravity") {
      ls >> scene.gravity.x >> scene.gravity.y;
    } else if (key == "restitution") {
      ls >> scene.restitution;
    } else if (key == "bounds") {
      ls >> scene.bounds.min.x >> scene.bounds.min.y >> scene.bounds.max.x >> scene.bounds.max.y;
    } else if (key == "abyss") {
      ls >> scene.abyss_y;
    } else if (key == "circle") {
      int id;
      std::string role;
      double x, y, vx, vy, r;
      ls >> id >> role >> x >> y >> vx >> vy >> r;
      if (!ls) fail("malformed circle");
      scene.bodies.push_back(Body::circle(id, role_from_string(role), {x, y}, r, {vx, vy}));
    } else if (key == "segment") {
      int id, removable;
      std::string role;
      double x1, y1, x2, y2;
      ls >> id >> role >> x1 >> y1 >> x2 >> y2 >> removable;
      if (!ls) fail("malformed segment");
      scene.bodies.push_back(Body::segment(id, role_from_string(role), {x1, y1}, {x2, y2}, removable != 0));
    } else if (key == "end") {
      ended = true;
      break;
    } else {
      fail("unknown key '" + key + "'");
    }
    if (ls.fail()) fail("malformed value");
  }
  if (!header) throw FormatError("empty scene file");
  if (!ended) throw FormatError("scene file missing 'end'");
  if (auto err = validate(scene); !err.empty()) throw FormatError("invalid scene: " + err);
  return scene;
}

void save_scene(const std::filesystem::path& path, const Scene& scene) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  write_scene(out, scene);
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  return read_scene(in);
}

std::vector<EnvAction> action_space(const Scene& scene) {
  std::vector<EnvAction> actions;
  if (scene.env == EnvKind::GridDrop) {
    actions.reserve(kGridActionCount);
    for (int i = 0; i < kGridActionCount; ++i) actions.emplace_back(GridPlace::from_dense_index(i));
    return actions;
  }
  std::vector<int> removable;
  for (const auto& b : scene.bodies) {
    if (b.removable) removable.push_back(b.id);
  }
  if (removable.size() > static_cast<std::size_t>(kMaxEvents)) {
    throw InvalidAction("TimedRemove enumeration supports at most 4 removable bodies");
  }
  constexpr int kChoices = 12;  // not removed, or removed at 0.0 .. 5.0 s
  std::size_t total = 1;
  for (std::size_t i = 0; i < removable.size(); ++i) total *= kChoices;
  actions.reserve(total);
  for (std::size_t code = 0; code < total; ++code) {
    std::vector<TimedEvent> events;
    std::size_t rest = code;
    for (int id : removable) {
      int choice = static_cast<int>(rest % kChoices);
      rest /= kChoices;
      if (choice > 0) events.push_back(TimedEvent{id, choice - 1});
    }
    actions.emplace_back(EventSeq(std::move(events)));
  }
  return actions;
}

std::vector<bool> outcome_table(const Scene& scene, const std::vector<EnvAction>& actions) {
  std::vector<bool> table(actions.size());
  for (std::size_t i = 0; i < actions.size(); ++i) table[i] = run_outcome(scene, actions[i]);
  return table;
}

namespace {

Scene griddrop_candidate(Rng& rng) {
  Scene s;
  s.env = EnvKind::GridDrop;
  s.bounds = Bounds{{0.0, 0.0}, {8.0, 8.0}};
  int next_id = 0;
  const double side = uniform01(rng) < 0.5 ? -1.0 : 1.0;  // direction towards the target
  const double shelf_y = uniform(rng, 4.3, 6.3);
  const double green_r = uniform(rng, 0.3, 0.45);
  const bool post_family = uniform01(rng) < 0.4;

  if (!post_family) {
    // Ledge: knock the green ball off the shelf end into the target bin.
    const double length = uniform(rng, 1.6, 3.0);
    const double end_x = side > 0 ? uniform(rng, 4.0, 6.2) : uniform(rng, 1.8, 4.0);
    const double start_x = end_x - side * length;
    const double inset = uniform(rng, 0.35, 0.9);
    const double green_x = end_x - side * inset;
    s.bodies.push_back(Body::segment(next_id++, Role::Static, {std::min(start_x, end_x), shelf_y},
                                     {std::max(start_x, end_x), shelf_y}));
    s.bodies.push_back(Body::circle(next_id++, Role::GreenTargetBall, {green_x, shelf_y + green_r}, green_r));
    const double divider_x = end_x - side * 0.25;
    const double divider_h = uniform(rng, 1.0, 1.6);
    s.bodies.push_back(Body::segment(next_id++, Role::Static, {divider_x, 0.0}, {divider_x, divider_h}));
    const double pad_from = divider_x + side * 0.05;
    const double pad_to = side > 0 ? 7.95 : 0.05;
    s.bodies.push_back(Body::segment(next_id++, Role::TargetRegion, {std::min(pad_from, pad_to), 0.02},
                                     {std::max(pad_from, pad_to), 0.02}));
  } else {
    // Post: slide the green ball along the shelf into an upright target post.
    const double length = uniform(rng, 3.0, 5.0);
    const double start_x = uniform(rng, 1.0, 7.0 - length);
    const double end_x = start_x + length;
    s.bodies.push_back(Body::segment(next_id++, Role::Static, {start_x, shelf_y}, {end_x, shelf_y}));
    const double post_x = side > 0 ? end_x - 0.05 : start_x + 0.05;
    const double offset = uniform(rng, 1.2, std::max(1.3, length - 1.0));
    const double green_x = post_x - side * offset;
    s.bodies.push_back(Body::circle(next_id++, Role::GreenTargetBall, {green_x, shelf_y + green_r}, green_r));
    s.bodies.push_back(Body::segment(next_id++, Role::TargetRegion, {post_x, shelf_y}, {post_x, shelf_y + 0.7}));
  }

  if (uniform01(rng) < 0.4) {
    // Ceiling over part of the drop zone.
    const Body& green = s.bodies[1];
    const double cy = green.position.y + uniform(rng, 1.1, 1.8);
    if (cy < 7.6) {
      const double cx = green.position.x + uniform(rng, -1.5, 1.5);
      const double half = uniform(rng, 0.5, 1.2);
      s.bodies.push_back(Body::segment(next_id++, Role::Static, {std::max(0.1, cx - half), cy},
                                       {std::min(7.9, cx + half), cy}));
    }
  }
  if (uniform01(rng) < 0.5) {
    // Decoy platform elsewhere.
    const double dy = uniform(rng, 1.8, 3.5);
    const double dx = uniform(rng, 0.8, 7.2);
    const double half = uniform(rng, 0.4, 0.9);
    const double tilt = uniform(rng, -0.3, 0.3);
    s.bodies.push_back(Body::segment(next_id++, Role::Static, {std::max(0.1, dx - half), dy - tilt},
                                     {std::min(7.9, dx + half), dy + tilt}));
  }
  return s;
}

Scene timed_candidate(Rng& rng) {
  Scene s;
  s.env = EnvKind::TimedRemove;
  s.bounds = Bounds{{0.0, 0.0}, {8.0, 8.0}};
  s.abyss_y = 1.0;
  int next_id = 0;
  const double side = uniform01(rng) < 0.5 ? -1.0 : 1.0;
  const double c1 = uniform(rng, 2.5, 5.5);
  const double y1 = uniform(rng, 5.2, 6.5);
  const double r1 = uniform(rng, 0.25, 0.4);
  // Upper block carrying the first red ball.
  const int upper = next_id++;
  s.bodies.push_back(Body::segment(upper, Role::RemovableBlock, {c1 - 0.6, y1}, {c1 + 0.6, y1}, true));
  s.bodies.push_back(Body::circle(next_id++, Role::RedBall, {c1, y1 + r1}, r1));
  // Tilted removable ramp under it that diverts the ball onto a static catcher.
  const double y2 = y1 - uniform(rng, 1.8, 2.4);
  const double drop = uniform(rng, 0.35, 0.6);
  const Vec2 ramp_hi{c1 - side * 0.9, y2 + drop};
  const Vec2 ramp_lo{c1 + side * 1.1, y2};
  s.bodies.push_back(Body::segment(next_id++, Role::RemovableBlock, ramp_hi, ramp_lo, true));
  const double catcher_y = y2 - uniform(rng, 0.9, 1.3);
  const double cx0 = ramp_lo.x + side * 0.2;
  const double cx1 = cx0 + side * uniform(rng, 1.0, 1.6);
  s.bodies.push_back(Body::segment(next_id++, Role::Static, {std::min(cx0, cx1), catcher_y},
                                   {std::max(cx0, cx1), catcher_y}));
  // Lip so the catcher holds the ball.
  const double lip_x = std::clamp(cx1, 0.05, 7.95);
  s.bodies.push_back(Body::segment(next_id++, Role::Static, {lip_x, catcher_y}, {lip_x, catcher_y + 0.4}));
  // Independent second red ball on its own block.
  const double c3 = c1 - side * uniform(rng, 2.0, 2.6);
  const double y3 = uniform(rng, 2.5, 4.0);
  const double r3 = uniform(rng, 0.25, 0.4);
  s.bodies.push_back(Body::segment(next_id++, Role::RemovableBlock, {c3 - 0.5, y3}, {c3 + 0.5, y3}, true));
  s.bodies.push_back(Body::circle(next_id++, Role::RedBall, {c3, y3 + r3}, r3));
  for (auto& b : s.bodies) {
    if (b.is_segment()) {
      auto seg = b.segment();
      seg.a.x = std::clamp(seg.a.x, 0.05, 7.95);
      seg.b.x = std::clamp(seg.b.x, 0.05, 7.95);
      b = Body::segment(b.id, b.role, seg.a, seg.b, b.removable);
    }
  }
  return s;
}

}  // namespace

Scene generate_candidate(EnvKind env, std::uint64_t seed) {
  Rng rng(seed);
  return env == EnvKind::GridDrop ? griddrop_candidate(rng) : timed_candidate(rng);
}

GeneratorOptions GeneratorOptions::for_env(EnvKind env) {
  GeneratorOptions o;
  o.max_success_fraction = env == EnvKind::GridDrop ? 0.03 : 0.15;
  return o;
}

std::vector<Task> generate_tasks(EnvKind env, int count, std::uint64_t seed) {
  return generate_tasks(env, count, seed, GeneratorOptions::for_env(env));
}

std::vector<Task> generate_tasks(EnvKind env, int count, std::uint64_t seed, const GeneratorOptions& options) {
  std::vector<Task> tasks;
  std::uint64_t attempt = 0;
  const std::uint64_t budget = static_cast<std::uint64_t>(count) * options.max_attempts_per_task;
  while (static_cast<int>(tasks.size()) < count) {
    if (attempt >= budget) {
      throw CurationInfeasible("task generator exhausted its attempt budget for " + std::string(to_string(env)));
    }
    const std::uint64_t task_seed = derive_seed(seed, attempt++);
    Scene scene = generate_candidate(env, task_seed);
    if (!validate(scene).empty()) continue;
    Scene probe = scene;
    update_latch(probe);
    if (probe.goal_latched) continue;
    const auto actions = action_space(scene);
    std::size_t solved = 0;
    const std::size_t cap = static_cast<std::size_t>(options.max_success_fraction * actions.size());
    for (const auto& a : actions) {
      if (run_outcome(scene, a) && ++solved > cap) break;
    }
    if (solved == 0 || solved > cap) continue;
    char id[32];
    std::snprintf(id, sizeof id, "%s-%03zu", env == EnvKind::GridDrop ? "gd" : "tr", tasks.size());
    tasks.push_back(Task{id, task_seed, std::move(scene)});
  }
  return tasks;
}

void save_task_set(const std::filesystem::path& dir, const std::vector<Task>& tasks) {
  std::filesystem::create_directories(dir);
  std::ofstream index(dir / "tasks.index");
  if (!index) throw FormatError("cannot write task index in " + dir.string());
  index << "icprl-tasks 1\n";
  for (const auto& t : tasks) {
    save_scene(dir / (t.id + ".scene"), t.scene);
    index << t.id << ' ' << t.seed << "\n";
  }
}

std::vector<Task> load_task_set(const std::filesystem::path& dir) {
  std::ifstream index(dir / "tasks.index");
  if (!index) throw FormatError("missing tasks.index in " + dir.string());
  std::string header;
  int version = 0;
  index >> header >> version;
  if (header != "icprl-tasks" || version != 1) throw FormatError("bad task index header");
  std::vector<Task> tasks;
  std::string id;
  std::uint64_t seed;
  while (index >> id >> seed) tasks.push_back(Task{id, seed, load_scene(dir / (id + ".scene"))});
  return tasks;
}

}  // namespace icprl::sim
