#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "icprl/action.hpp"
#include "icprl/sim.hpp"

namespace icprl::sim {

// ---------------------------------------------------------------------------
// Scene files
//
//   icprl-scene 1
//   env griddrop|timedremove
//   gravity <gx> <gy>
//   restitution <e>
//   bounds <minx> <miny> <maxx> <maxy>
//   abyss <y>
//   circle <id> <role> <x> <y> <vx> <vy> <radius>
//   segment <id> <role> <x1> <y1> <x2> <y2> <removable 0|1>
//   end
//
// Lines starting with '#' are comments. Reals are written with 17 significant
// digits so a save/load round trip is exact.

void write_scene(std::ostream& out, const Scene& scene);
Scene read_scene(std::istream& in);
void save_scene(const std::filesystem::path& path, const Scene& scene);
Scene load_scene(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Tasks

struct Task {
  std::string id;
  std::uint64_t seed = 0;  // generator seed that produced the scene
  Scene scene;
};

/// Legal action space used for enumeration. GridDrop: all 512 placements.
/// TimedRemove: every subset of the (at most four) removable bodies, each
/// removed once at a time on the 0.5 s lattice in [0, 5].
std::vector<EnvAction> action_space(const Scene& scene);

/// Success flag for every action of action_space(scene), same order.
std::vector<bool> outcome_table(const Scene& scene, const std::vector<EnvAction>& actions);

struct GeneratorOptions {
  double max_success_fraction = 0.05;
  int max_attempts_per_task = 200;
  /// Defaults per environment: GridDrop keeps solutions rare (<= 3% of the
  /// 512 placements); TimedRemove allows up to 15%.
  static GeneratorOptions for_env(EnvKind env);
};

/// Deterministic procedural generator. Candidate scenes are rejected unless
/// exhaustive enumeration finds at least one solution and at most
/// max_success_fraction of the action space succeeds.
std::vector<Task> generate_tasks(EnvKind env, int count, std::uint64_t seed, const GeneratorOptions& options);
std::vector<Task> generate_tasks(EnvKind env, int count, std::uint64_t seed);

/// One unfiltered candidate scene from the generator family.
Scene generate_candidate(EnvKind env, std::uint64_t seed);

void save_task_set(const std::filesystem::path& dir, const std::vector<Task>& tasks);
std::vector<Task> load_task_set(const std::filesystem::path& dir);

}  // namespace icprl::sim
