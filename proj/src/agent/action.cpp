#include "icprl/action.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "icprl/errors.hpp"

namespace icprl {

std::string_view to_string(EnvKind kind) {
  return kind == EnvKind::GridDrop ? "griddrop" : "timedremove";
}

EnvKind env_kind_from_string(std::string_view name) {
  if (name == "griddrop") return EnvKind::GridDrop;
  if (name == "timedremove") return EnvKind::TimedRemove;
  throw UsageError("unknown environment '" + std::string(name) + "' (expected griddrop|timedremove)");
}

bool GridPlace::valid() const {
  return cell >= 1 && cell <= kGridCells && radius >= 1 && radius <= kGridRadii;
}

GridPlace GridPlace::from_dense_index(int index) {
  return GridPlace{index / kGridRadii + 1, index % kGridRadii + 1};
}

GridPlace GridPlace::from_coords(int column, int row, int radius) {
  return GridPlace{row * kGridSide + column + 1, radius};
}

EventSeq::EventSeq(std::vector<TimedEvent> events) : events_(std::move(events)) {
  std::sort(events_.begin(), events_.end());
}

bool EventSeq::valid() const {
  if (events_.size() > static_cast<std::size_t>(kMaxEvents)) return false;
  std::set<int> seen;
  for (const auto& e : events_) {
    if (e.index < 0 || e.index >= kMaxBodyIndex) return false;
    if (e.time_step < 0 || e.time_step >= kTimeSteps) return false;
    if (!seen.insert(e.index).second) return false;
  }
  return true;
}

bool EnvAction::valid() const {
  return std::visit([](const auto& a) { return a.valid(); }, value_);
}

std::string EnvAction::to_string() const {
  if (kind() == EnvKind::GridDrop) {
    return "cell=" + std::to_string(grid().cell) + ",radius=" + std::to_string(grid().radius);
  }
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : events().events()) {
    arr.push_back({{"time", e.seconds()}, {"index", e.index}});
  }
  return arr.dump();
}

EnvAction parse_action(EnvKind kind, std::string_view text) {
  if (kind == EnvKind::GridDrop) {
    int cell = 0;
    int radius = 0;
    std::string s(text);
    if (std::sscanf(s.c_str(), "cell=%d,radius=%d", &cell, &radius) != 2) {
      throw FormatError("malformed GridDrop action '" + s + "'");
    }
    return GridPlace{cell, radius};
  }
  nlohmann::json arr;
  try {
    arr = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed TimedRemove action: ") + e.what());
  }
  if (!arr.is_array()) throw FormatError("TimedRemove action must be a JSON array");
  std::vector<TimedEvent> events;
  for (const auto& item : arr) {
    if (!item.contains("time") || !item.contains("index")) {
      throw FormatError("TimedRemove event needs 'time' and 'index'");
    }
    double t = item.at("time").get<double>();
    double steps = t / kTimeStepSeconds;
    if (std::abs(steps - std::round(steps)) > 1e-9) {
      throw FormatError("event time " + std::to_string(t) + " is off the 0.5 s lattice");
    }
    events.push_back(TimedEvent{item.at("index").get<int>(), static_cast<int>(std::lround(steps))});
  }
  return EventSeq(std::move(events));
}

int action_distance(const EnvAction& a, const EnvAction& b) {
  if (a.kind() != b.kind()) {
    throw InvalidAction("cannot compare actions from different environments");
  }
  if (a.kind() == EnvKind::GridDrop) {
    const auto& p = a.grid();
    const auto& q = b.grid();
    return std::max({std::abs(p.column() - q.column()), std::abs(p.row() - q.row()),
                     std::abs(p.radius - q.radius)});
  }
  constexpr int kNever = kTimeSteps;
  std::map<int, std::pair<int, int>> times;
  for (const auto& e : a.events().events()) times[e.index] = {e.time_step, kNever};
  for (const auto& e : b.events().events()) {
    auto it = times.find(e.index);
    if (it == times.end()) {
      times[e.index] = {kNever, e.time_step};
    } else {
      it->second.second = e.time_step;
    }
  }
  int d = 0;
  for (const auto& [index, pair] : times) d = std::max(d, std::abs(pair.first - pair.second));
  return d;
}

}  // namespace icprl
