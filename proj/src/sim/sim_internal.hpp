#pragma once

#include <vector>

#include "icprl/sim.hpp"

namespace icprl::sim {

struct Contact {
  int a = 0;   // dynamic circle
  int b = -1;  // other body, or -1 for a bounds wall
  Vec2 normal;  // from b towards a
  double gap = 0.0;
  double inv_mass_a = 0.0;
  double inv_mass_b = 0.0;
  double target = 0.0;
  double accumulated = 0.0;
};

struct StepWorkspace {
  std::vector<Contact> contacts;
  std::vector<Contact> active;
};

void step_in_place(Scene& scene, double dt, StepWorkspace& ws);
void update_latch(Scene& scene);

}  // namespace icprl::sim
